from typing import Any, List, Optional, Tuple

from app.utils.helpers import decode_complex


def validate_complex(value: Any, name: str) -> Tuple[bool, Optional[str]]:
    try:
        decode_complex(value)
    except Exception:
        return False, f"{name} must be a number or an [re, im] pair"
    return True, None


def validate_complex_list(values: Any, name: str, required: bool = True) -> Tuple[bool, List[str]]:
    if values is None:
        return (not required), ([f"{name} is required"] if required else [])
    if not isinstance(values, list):
        return False, [f"{name} must be a list"]
    errors = []
    for k, value in enumerate(values):
        is_valid, error = validate_complex(value, f"{name}[{k}]")
        if not is_valid:
            errors.append(error)
    return len(errors) == 0, errors


def validate_distinct(values: List[Any], name: str, tol: float = 1e-8) -> Tuple[bool, Optional[str]]:
    points = [decode_complex(v) for v in values]
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            if abs(points[a] - points[b]) <= tol:
                return False, f"{name} {a} and {b} coincide"
    return True, None


def validate_matrix(value: Any, name: str) -> Tuple[bool, Optional[str]]:
    if not isinstance(value, list) or len(value) != 2 or any(not isinstance(r, list) or len(r) != 2 for r in value):
        return False, f"{name} must be a 2x2 matrix"
    for row in value:
        for entry in row:
            is_valid, _ = validate_complex(entry, name)
            if not is_valid:
                return False, f"{name} has a non-numeric entry"
    return True, None


# ============================================
# DOCUMENT VALIDATORS
# ============================================

def validate_problem_document(data: dict) -> Tuple[bool, List[str]]:
    errors = []

    is_valid, errs = validate_complex_list(data.get('poles'), 'poles')
    errors.extend(errs)

    weights = data.get('weights')
    if not isinstance(weights, list):
        errors.append("weights must be a list")
    else:
        for k, w in enumerate(weights):
            ok, error = validate_complex(w, f"weights[{k}]")
            if not ok:
                errors.append(error)
        if isinstance(data.get('poles'), list) and len(weights) != len(data['poles']):
            errors.append(f"Got {len(data['poles'])} poles but {len(weights)} weights")

    num_roots = data.get('num_roots', len(data.get('roots') or []))
    if isinstance(num_roots, bool) or not isinstance(num_roots, int) or num_roots < 0:
        errors.append("num_roots must be a nonnegative integer")

    ok, errs = validate_complex_list(data.get('moving_poles'), 'moving_poles', required=False)
    errors.extend(errs)
    ok, errs = validate_complex_list(data.get('roots'), 'roots', required=False)
    errors.extend(errs)
    if data.get('roots') is not None and isinstance(num_roots, int) and len(data['roots']) != num_roots:
        errors.append("roots must have num_roots entries")

    seed = data.get('seed')
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        errors.append("seed must be an integer")

    if not errors:
        all_poles = list(data['poles']) + list(data.get('moving_poles') or [])
        ok, error = validate_distinct(all_poles, 'Poles')
        if not ok:
            errors.append(error)

    return len(errors) == 0, errors


def validate_oper_document(data: dict) -> Tuple[bool, List[str]]:
    errors = []
    lengths = []
    for key in ('poles', 'double_coeffs', 'residues'):
        ok, errs = validate_complex_list(data.get(key), key)
        errors.extend(errs)
        if isinstance(data.get(key), list):
            lengths.append(len(data[key]))
    if len(set(lengths)) > 1:
        errors.append("poles, double_coeffs and residues must have equal lengths")
    if data.get('convention', 'minus') not in ('minus', 'plus'):
        errors.append("convention must be 'minus' or 'plus'")
    return len(errors) == 0, errors


def validate_connection_document(data: dict) -> Tuple[bool, List[str]]:
    errors = []
    ok, errs = validate_complex_list(data.get('poles'), 'poles')
    errors.extend(errs)
    residues = data.get('residues')
    if not isinstance(residues, list):
        errors.append("residues must be a list of 2x2 matrices")
    else:
        for k, matrix in enumerate(residues):
            ok, error = validate_matrix(matrix, f"residues[{k}]")
            if not ok:
                errors.append(error)
        if isinstance(data.get('poles'), list) and len(residues) != len(data['poles']):
            errors.append("One residue matrix is needed per pole")
    if not errors:
        ok, error = validate_distinct(data['poles'], 'Poles')
        if not ok:
            errors.append(error)
    return len(errors) == 0, errors


def validate_pattern(value: str) -> Tuple[bool, Optional[Tuple[int, int]], Optional[str]]:
    """Parses '+1,-1' style weight-shift patterns."""
    try:
        parts = tuple(int(p) for p in value.replace(' ', '').split(','))
    except (AttributeError, ValueError):
        return False, None, "pattern must look like '+1,-1'"
    if len(parts) != 2 or any(p not in (1, -1) for p in parts):
        return False, None, "pattern entries must be +1 or -1"
    return True, parts, None
