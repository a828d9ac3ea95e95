from typing import Any, List, Sequence

import numpy as np

from app.models.base import InputError


# =============================================================================
# Complex number codecs ([re, im] pairs)
# =============================================================================

def encode_complex(value: complex) -> List[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


def decode_complex(value: Any) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, str):
        return complex(value.replace(' ', ''))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise InputError(f"Cannot read a complex number from {value!r}")


def encode_complex_list(values: Sequence[complex]) -> List[List[float]]:
    return [encode_complex(v) for v in values]


def decode_complex_list(values: Sequence[Any]) -> List[complex]:
    return [decode_complex(v) for v in values]


def encode_matrix(matrix) -> List[List[List[float]]]:
    return [[encode_complex(x) for x in row] for row in np.asarray(matrix)]


def decode_matrix(rows) -> np.ndarray:
    return np.array([[decode_complex(x) for x in row] for row in rows], dtype=complex)


# =============================================================================
# Ordering and sampling
# =============================================================================

def canonical_sort(values: Sequence[complex]) -> List[complex]:
    return sorted((complex(v) for v in values), key=lambda c: (round(c.real, 12), round(c.imag, 12)))


def sample_points(poles: Sequence[complex], count: int = 20, seed: int = 0,
                  min_distance: float = 1e-6) -> List[complex]:
    """Random points in a box around the poles, resampled when too close to one."""
    rng = np.random.default_rng(seed)
    pts = np.asarray(list(poles), dtype=complex) if len(poles) else np.zeros(1, dtype=complex)
    center = complex(pts.mean())
    spread = max(1.0, float(np.max(np.abs(pts - center))))
    result: List[complex] = []
    while len(result) < count:
        z = center + spread * complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        if all(abs(z - p) > max(min_distance, 0.05 * spread) for p in poles):
            result.append(z)
    return result
