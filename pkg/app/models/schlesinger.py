"""Elementary gluing twists, two-point Birkhoff factorization and the induced action on connections and Bethe data."""
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from app.models.base import (
    DegenerateDualError, DirectionMismatchError, GaudinError, InputError,
    NontrivialBundleError, NumericalError
)
from app.models.bethe import BetheProblem, BetheRoots, SolverSettings, residual_norm, solve_bethe
from app.models.calgebra import CPoly, poly_roots
from app.models.fuchsian import (
    FuchsianConnection, pull_back, reduce_to_scalar, validate_connection
)
from app.utils.helpers import canonical_sort, sample_points

logger = logging.getLogger(__name__)

EYE = np.eye(2, dtype=complex)
PATTERNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class TwistDirection(str, Enum):
    UP = 'up'       # diag(z − z_s, 1)
    DOWN = 'down'   # diag(1/(z − z_s), 1)


# =============================================================================
# Elementary twists
# =============================================================================

@dataclass(frozen=True, eq=False)
class ElementaryTwist:
    point: complex
    frame: np.ndarray = field(repr=False)
    direction: TwistDirection = TwistDirection.UP

    def __post_init__(self):
        frame = np.asarray(self.frame, dtype=complex).reshape(2, 2)
        object.__setattr__(self, 'point', complex(self.point))
        object.__setattr__(self, 'frame', frame)
        object.__setattr__(self, 'direction', TwistDirection(self.direction))
        if abs(np.linalg.det(frame)) <= 1e-14 * max(1.0, float(np.max(np.abs(frame)))) ** 2:
            raise InputError("Twist frame is singular", error_code='singular_frame')

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.frame))

    @property
    def projector(self) -> np.ndarray:
        """Rank-one projector onto the first frame column along the second."""
        inverse = np.linalg.inv(self.frame)
        return np.outer(self.frame[:, 0], inverse[0, :])

    def __call__(self, z: complex) -> np.ndarray:
        P = self.projector
        if self.direction == TwistDirection.UP:
            return (EYE - P) + (z - self.point) * P
        return (EYE - P) + P / (z - self.point)

    def inverse(self) -> 'ElementaryTwist':
        flipped = TwistDirection.DOWN if self.direction == TwistDirection.UP else TwistDirection.UP
        return ElementaryTwist(self.point, self.frame, flipped)


def elementary(point: complex, frame, direction=TwistDirection.UP) -> ElementaryTwist:
    return ElementaryTwist(point, frame, direction)


def frame_from_coordinates(x: complex, y: complex) -> np.ndarray:
    return np.array([[1, x], [y, 1]], dtype=complex)


# =============================================================================
# Two-point factorization
# =============================================================================

@dataclass(frozen=True, eq=False)
class PairFactorization:
    """t_i(z)·t_j(z) = inner(z)·outer(z) with inner polynomial and outer regular at infinity."""
    twist_i: ElementaryTwist
    twist_j: ElementaryTwist
    h0: np.ndarray = field(repr=False)
    h1: np.ndarray = field(repr=False)
    outer_at_infinity: np.ndarray = field(repr=False)
    residue: np.ndarray = field(repr=False)

    @property
    def points(self) -> Tuple[complex, complex]:
        return self.twist_i.point, self.twist_j.point

    def gluing(self, z: complex) -> np.ndarray:
        return self.twist_i(z) @ self.twist_j(z)

    def inner(self, z: complex) -> np.ndarray:
        return np.linalg.inv(self.h0 + self.h1 * z)

    def outer(self, z: complex) -> np.ndarray:
        return (self.h0 + self.h1 * z) @ self.gluing(z)

    def normalized(self, z: complex) -> np.ndarray:
        return EYE + self.residue / (z - self.twist_j.point)

    def normalized_derivative(self, z: complex) -> np.ndarray:
        return -self.residue / (z - self.twist_j.point) ** 2

    def product_gap(self, samples: Sequence[complex]) -> float:
        worst = 0.0
        for z in samples:
            G = self.gluing(z)
            gap = np.linalg.norm(G - self.inner(z) @ self.outer(z)) / max(1.0, float(np.linalg.norm(G)))
            worst = max(worst, float(gap))
        return worst

    def det_gap(self, samples: Sequence[complex]) -> float:
        zi, zj = self.points
        worst = 0.0
        for z in samples:
            expected = (z - zi) / (z - zj)
            got = np.linalg.det(self.inner(z)) * np.linalg.det(self.outer(z))
            worst = max(worst, abs(got - expected) / max(1.0, abs(expected)))
        return float(worst)


def factorize_pair(twist_i: ElementaryTwist, twist_j: ElementaryTwist,
                   tol: float = 1e-10) -> PairFactorization:
    if twist_i.direction != TwistDirection.UP or twist_j.direction != TwistDirection.DOWN:
        raise InputError("factorize_pair expects an up twist at z_i and a down twist at z_j")
    zi, zj = twist_i.point, twist_j.point
    if abs(zi - zj) <= tol:
        raise InputError("Twist points must be distinct")

    P, Q = twist_i.projector, twist_j.projector
    # t_i(z)·t_j(z) = z·A + B + C/z + O(1/z²)
    A = P @ (EYE - Q)
    B = (EYE - (1 + zi) * P) @ (EYE - Q) + P @ Q
    C = (EYE - (1 + zi) * P) @ Q + zj * P @ Q

    # rows (h0, h1) of H = h0 + h1·z with H·(zA + B + ...) bounded at infinity
    K = np.block([[np.zeros((2, 2)), A], [A, B]])
    basis = null_space(K.T, rcond=tol)
    if basis.shape[1] < 2:
        raise NontrivialBundleError(
            "Factorization system has fewer than two solutions; frames are not generic",
            details={'null_dim': int(basis.shape[1])}
        )

    best, best_det = None, 0.0
    for a, b in itertools.combinations(range(basis.shape[1]), 2):
        rows = np.vstack([basis[:, a], basis[:, b]])
        value = abs(np.linalg.det(rows[:, :2]))
        if value > best_det:
            best, best_det = rows, value
    if best is None or best_det <= tol:
        raise NontrivialBundleError(
            "Polynomial factor is degenerate; the twisted bundle is not trivial",
            details={'det': best_det}
        )
    h0, h1 = best[:, :2], best[:, 2:]
    at_infinity = h0 @ B + h1 @ C
    if abs(np.linalg.det(at_infinity)) <= tol:
        raise NontrivialBundleError("Outer factor is not invertible at infinity")

    residue = np.linalg.inv(at_infinity) @ (h0 + h1 * zj) @ twist_i(zj) @ Q
    logger.debug("Factorized twist pair at %s, %s (|det H| = %.3e)", zi, zj, best_det)
    return PairFactorization(twist_i, twist_j, h0, h1, at_infinity, residue)


def closed_form_normalized_gauge(z: complex, y_i: complex, y_j: complex) -> np.ndarray:
    """Normalized gauge for frames [[1, x_i], [y_i, 1]] at 0 and [[1, 0], [y_j, 1]] at 1."""
    return np.array([[z / (z - 1), 0], [-(y_i - 2 * y_j) / (z - 1), 1]], dtype=complex)


# =============================================================================
# Gauge action on connections
# =============================================================================

@dataclass
class GaugeTransform:
    connection: FuchsianConnection
    abelian_shift: Dict[int, float]
    double_pole_norms: Dict[int, float]


def _gauge_value(A: FuchsianConnection, gauge: PairFactorization, z: complex) -> np.ndarray:
    G = gauge.normalized(z)
    G_inv = np.linalg.inv(G)
    return G @ A(z) @ G_inv + gauge.normalized_derivative(z) @ G_inv


def _richardson(values: List[np.ndarray]) -> np.ndarray:
    """Extrapolate a sequence sampled at h, h/2, h/4, ... with even error terms."""
    table = list(values)
    factor = 4.0
    while len(table) > 1:
        table = [(factor * table[n + 1] - table[n]) / (factor - 1) for n in range(len(table) - 1)]
        factor *= 4.0
    return table[0]


def _local_coefficients(A: FuchsianConnection, gauge: PairFactorization, point: complex,
                        h0: float, levels: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    doubles, residues = [], []
    for n in range(levels):
        h = h0 / 2 ** n
        plus = _gauge_value(A, gauge, point + h)
        minus = _gauge_value(A, gauge, point - h)
        doubles.append(h * h * (plus + minus) / 2)
        residues.append(h * (plus - minus) / 2)
    return _richardson(doubles), _richardson(residues)


def gauge_transform(A: FuchsianConnection, gauge: Optional[PairFactorization],
                    residue_tol: float = 1e-8) -> GaugeTransform:
    if gauge is None:
        return GaugeTransform(A, {}, {})

    zi, zj = gauge.points
    index = {}
    for name, point in (('i', zi), ('j', zj)):
        hits = [k for k, p in enumerate(A.poles) if abs(p - point) <= 1e-12 * max(1.0, abs(point))]
        if not hits:
            raise InputError(f"Twist point {point} is not a pole of the connection")
        index[name] = hits[0]

    scale = max(1.0, float(np.max(np.abs(A.residues))))
    residues = []
    doubles = {}
    for k, pk in enumerate(A.poles):
        if k not in (index['i'], index['j']):
            G = gauge.normalized(pk)
            residues.append(G @ A.residues[k] @ np.linalg.inv(G))
            continue
        nearest = min((abs(pk - q) for l, q in enumerate(A.poles) if l != k), default=1.0)
        double, residue = _local_coefficients(A, gauge, pk, 0.05 * nearest)
        doubles[k] = float(np.linalg.norm(double))
        if doubles[k] > residue_tol * scale * 1e2:
            raise DirectionMismatchError(
                f"Gauged connection has a double pole at {pk}; the twist frame is not an eigenframe of the residue",
                details={'pole': k, 'double_pole_norm': doubles[k]}
            )
        residues.append(residue)

    shift = {index['i']: -0.5, index['j']: 0.5}
    for k, value in shift.items():
        residues[k] = residues[k] + value * EYE
    result = FuchsianConnection(A.poles, np.array(residues))

    report = validate_connection(result, tol=max(residue_tol, 1e-9))
    if not report.passed:
        logger.warning("Gauged connection fails normalization checks: %s", report.checks)
    return GaugeTransform(result, shift, doubles)


def transform_connection(A: FuchsianConnection, gauge: Optional[PairFactorization],
                         residue_tol: float = 1e-8) -> FuchsianConnection:
    return gauge_transform(A, gauge, residue_tol).connection


# =============================================================================
# Direction choice
# =============================================================================

def _normalize_vector(v: np.ndarray) -> np.ndarray:
    return v / v[int(np.argmax(np.abs(v)))]


def _eigenframe(residue: np.ndarray, d: complex, lead_sign: int, tol: float) -> np.ndarray:
    """Columns (e_lead, e_other), where e_lead belongs to eigenvalue lead_sign·d."""
    if abs(d) <= tol:
        raise NumericalError(
            "Residue is nilpotent or zero; eigendirections are not defined",
            error_code='degenerate_residue'
        )
    values, vectors = np.linalg.eig(residue)
    lead = int(np.argmin(np.abs(values - lead_sign * d)))
    other = 1 - lead
    return np.column_stack([_normalize_vector(vectors[:, lead]), _normalize_vector(vectors[:, other])])


def choose_directions(A: FuchsianConnection, i: int, j: int, pattern: Tuple[int, int],
                      tol: float = 1e-8) -> Tuple[ElementaryTwist, ElementaryTwist]:
    """Twists at z_i (up) and z_j (down) shifting d_i by pattern[0]/2 and d_j by pattern[1]/2."""
    if tuple(pattern) not in PATTERNS:
        raise InputError(f"Pattern must be one of {PATTERNS}, got {pattern}")
    if i == j or not (0 <= i < A.k and 0 <= j < A.k):
        raise InputError("Twist indices must be distinct poles of the connection")
    di, dj = A.d_values[i], A.d_values[j]
    zi, zj = A.poles[i], A.poles[j]

    # a down twist along the +d eigenvector lowers the exponent
    frame_j = _eigenframe(A.residues[j], dj, -pattern[1], tol)
    twist_j = ElementaryTwist(zj, frame_j, TwistDirection.DOWN)

    E = twist_j(zi)
    conjugated = E @ A.residues[i] @ np.linalg.inv(E)
    frame_i = _eigenframe(conjugated, di, pattern[0], tol)
    twist_i = ElementaryTwist(zi, frame_i, TwistDirection.UP)
    return twist_i, twist_j


# =============================================================================
# Action on Bethe data
# =============================================================================

def _exponents(p: BetheProblem) -> List[complex]:
    return [(complex(lam) + 1) / 2 for lam in p.weights]


def _roots_of(poly: CPoly) -> List[complex]:
    return poly_roots(poly) if poly.degree >= 1 else []


def _polish(problem: BetheProblem, roots: Sequence[complex], tol: float) -> Tuple[List[complex], float]:
    raw = residual_norm(problem, roots) if roots else 0.0
    if not roots or raw <= tol:
        return list(roots), raw
    settings = SolverSettings(num_starts=0, seeds=(tuple(roots),), tol=tol)
    found = solve_bethe(problem, settings)
    if found and all(abs(a - b) <= 1e-6 * max(1.0, abs(a))
                     for a, b in zip(canonical_sort(roots), found[0].roots)):
        return list(found[0].roots), found[0].residual
    return list(roots), raw


def _divide_exact(poly: CPoly, point: complex, tol: float = 1e-8) -> CPoly:
    quotient, remainder = poly.divmod(CPoly((-point, 1)))
    size = max(1.0, max(abs(c) for c in poly.coeffs))
    if not remainder.is_zero() and max(abs(c) for c in remainder.coeffs) > tol * size:
        raise DirectionMismatchError(
            f"Transformed solution does not vanish at {point}",
            details={'remainder': float(max(abs(c) for c in remainder.coeffs))}
        )
    return quotient


@dataclass
class HeckeResult:
    problem: BetheProblem
    roots: BetheRoots
    report: Dict


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except GaudinError as e:
        raise e.with_stage(stage)


def hecke_on_bethe(p: BetheProblem, roots, i: int, j: int,
                   pattern: Optional[Tuple[int, int]], bethe_tol: float = 1e-8,
                   residue_tol: float = 1e-8, seed: int = 0) -> HeckeResult:
    gamma = list(roots.roots if isinstance(roots, BetheRoots) else roots)
    if pattern is None:
        return HeckeResult(p, BetheRoots(tuple(gamma), residual_norm(p, gamma) if gamma else 0.0, True),
                           {'pattern': None, 'identity': True})
    if not (0 <= i < len(p.poles) and 0 <= j < len(p.poles)) or i == j:
        raise InputError("Twist indices must name two distinct fixed poles")

    s = _exponents(p)
    pulled = _staged('pull_back', pull_back, p.poles, p.moving_poles, s, gamma, bethe_tol=bethe_tol)
    A = pulled.connection
    twist_i, twist_j = _staged('choose_directions', choose_directions, A, i, j, pattern)
    factorization = _staged('factorize_pair', factorize_pair, twist_i, twist_j)
    gauged = _staged('transform_connection', gauge_transform, A, factorization, residue_tol)
    reduction = _staged('reduce_to_scalar', reduce_to_scalar, gauged.connection, 'first')

    R = factorization.residue
    zi, zj = A.poles[i], A.poles[j]
    phi1, phi2 = pulled.solution.phi1, pulled.solution.phi2
    numerator = CPoly((R[0, 0] - zj, 1)) * phi1 + phi2 * R[0, 1]
    if pattern[0] == -1:
        numerator = _staged('extract_roots', _divide_exact, numerator, zi)
    if pattern[1] == -1:
        numerator = _staged('extract_roots', _divide_exact, numerator, zj)
    new_gamma = _staged('extract_roots', _roots_of, numerator.monic())

    weights = list(p.weights)
    weights[i] = weights[i] + pattern[0]
    weights[j] = weights[j] + pattern[1]
    problem = BetheProblem(p.poles, tuple(weights), len(new_gamma), tuple(reduction.moving_poles),
                           p.separation_tol)
    polished, residual = _staged('polish', _polish, problem, new_gamma, bethe_tol * 1e-3)
    new_roots = BetheRoots(tuple(polished), residual, residual <= 1e-7)

    samples = sample_points(list(A.poles), count=20, seed=seed)
    report = {
        'pattern': list(pattern),
        'indices': [i, j],
        'weights_before': list(p.weights),
        'weights_after': weights,
        'd_before': A.d_values,
        'd_after': gauged.connection.d_values,
        'abelian_shift': gauged.abelian_shift,
        'product_gap': factorization.product_gap(samples),
        'det_gap': factorization.det_gap(samples),
        'raw_residual': residual_norm(problem, new_gamma) if new_gamma else 0.0,
        'residual': residual,
        'moving_poles_before': list(p.moving_poles),
        'moving_poles_after': list(reduction.moving_poles),
    }
    if not new_roots.certified:
        logger.warning("Transformed roots miss the shifted Bethe system (residual %.3e)", residual)
    logger.info("Applied pattern %s at poles (%d, %d): M %d -> %d", pattern, i, j, len(gamma), len(polished))
    return HeckeResult(problem, new_roots, report)


def dual_solution(p: BetheProblem, roots, bethe_tol: float = 1e-8) -> HeckeResult:
    gamma = list(roots.roots if isinstance(roots, BetheRoots) else roots)
    if not gamma:
        raise DegenerateDualError("Second component vanishes identically for an empty root set",
                                  stage='dual_solution')
    pulled = _staged('pull_back', pull_back, p.poles, p.moving_poles, _exponents(p), gamma,
                     bethe_tol=bethe_tol)
    phi2 = pulled.solution.phi2
    size = max(abs(c) for c in pulled.solution.phi1.coeffs)
    phi2 = phi2.chop(1e-12) if not phi2.is_zero() else phi2
    if phi2.is_zero() or max(abs(c) for c in phi2.coeffs) <= 1e-12 * size:
        raise DegenerateDualError("Second component vanishes identically", stage='dual_solution')

    reduction = _staged('reduce_to_scalar', reduce_to_scalar, pulled.connection, 'second')
    new_gamma = _staged('extract_roots', _roots_of, phi2.monic())
    problem = BetheProblem(p.poles, p.weights, len(new_gamma), tuple(reduction.moving_poles),
                           p.separation_tol)
    polished, residual = _staged('polish', _polish, problem, new_gamma, bethe_tol * 1e-3)
    report = {
        'moving_poles_before': list(p.moving_poles),
        'moving_poles_after': list(reduction.moving_poles),
        'degree_before': len(gamma),
        'degree_after': len(polished),
        'raw_residual': residual_norm(problem, new_gamma) if new_gamma else 0.0,
        'residual': residual,
    }
    return HeckeResult(problem, BetheRoots(tuple(polished), residual, residual <= 1e-7), report)


def dual_involution_check(p: BetheProblem, roots, tol: float = 1e-6) -> Dict:
    """Runs the dual twice; a mismatch is reported, never raised."""
    original = canonical_sort(roots.roots if isinstance(roots, BetheRoots) else roots)
    result: Dict = {'ok': False}
    try:
        first = dual_solution(p, roots)
        second = dual_solution(first.problem, first.roots)
    except GaudinError as e:
        logger.warning("Double dual could not be formed: %s", e.message)
        result.update({'error': e.error_code, 'stage': e.stage, 'message': e.message})
        return result

    moving = canonical_sort(p.moving_poles)
    moving_back = canonical_sort(second.problem.moving_poles)
    back = canonical_sort(second.roots.roots)
    same_size = len(moving) == len(moving_back) and len(original) == len(back)
    pole_gap = max((abs(a - b) for a, b in zip(moving, moving_back)), default=0.0) if same_size else float('inf')
    root_gap = max((abs(a - b) for a, b in zip(original, back)), default=0.0) if same_size else float('inf')
    result.update({
        'ok': bool(same_size and pole_gap <= tol and root_gap <= tol),
        'moving_pole_gap': pole_gap,
        'root_gap': root_gap,
        'degrees': [len(original), len(first.roots.roots), len(back)],
    })
    if not result['ok']:
        logger.warning("Dual transform is not an involution on this instance (root gap %s)", root_gap)
    return result
