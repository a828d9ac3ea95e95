"""Parallel transport along loops and classification of the resulting monodromy."""
import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from app.models.base import ClearanceError, NumericalError, StepUnderflowError
from app.models.fuchsian import FuchsianConnection
from app.models.scalar_oper import Convention, SturmLiouville
from app.utils.helpers import encode_complex, encode_matrix

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
MIN_TOL = 1e-13


# =============================================================================
# Linear systems
# =============================================================================

@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Y' = B(z) Y with B a 2×2 rational matrix."""
    poles: Tuple[complex, ...]
    matrix: Callable[[complex], np.ndarray] = field(repr=False)
    label: str = 'system'

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(complex(p) for p in self.poles))

    def __call__(self, z: complex) -> np.ndarray:
        return np.asarray(self.matrix(z), dtype=complex)

    @classmethod
    def from_connection(cls, A: FuchsianConnection) -> 'LinearSystem':
        return cls(A.poles, A, 'connection')


def scalar_companion(op: SturmLiouville) -> LinearSystem:
    minus = op.to_convention(Convention.MINUS)

    def matrix(z):
        return np.array([[0, 1], [minus.potential(z), 0]], dtype=complex)

    return LinearSystem(minus.poles, matrix, 'companion')


# =============================================================================
# Paths
# =============================================================================

def _segment_distance(q: complex, a: complex, b: complex) -> float:
    ab = b - a
    if ab == 0:
        return abs(q - a)
    t = ((q - a) * ab.conjugate()).real / abs(ab) ** 2
    t = min(1.0, max(0.0, t))
    return abs(q - (a + t * ab))


@dataclass(frozen=True)
class Segment:
    start: complex
    end: complex

    def point(self, t: float) -> complex:
        return self.start + t * (self.end - self.start)

    def velocity(self, t: float) -> complex:
        return self.end - self.start

    def distance_to(self, q: complex) -> float:
        return _segment_distance(q, self.start, self.end)

    def reversed(self) -> 'Segment':
        return Segment(self.end, self.start)


@dataclass(frozen=True)
class Arc:
    """center + radius·exp(i(theta0 + sweep·t)), t in [0, 1]."""
    center: complex
    radius: float
    theta0: float
    sweep: float

    def point(self, t: float) -> complex:
        return self.center + self.radius * cmath.exp(1j * (self.theta0 + self.sweep * t))

    def velocity(self, t: float) -> complex:
        return 1j * self.sweep * self.radius * cmath.exp(1j * (self.theta0 + self.sweep * t))

    @property
    def start(self) -> complex:
        return self.point(0.0)

    @property
    def end(self) -> complex:
        return self.point(1.0)

    def distance_to(self, q: complex) -> float:
        offset = q - self.center
        if offset == 0:
            return self.radius
        ring = abs(abs(offset) - self.radius)
        if abs(self.sweep) >= TWO_PI:
            return ring
        angle = cmath.phase(offset)
        rel = (angle - self.theta0) % TWO_PI if self.sweep > 0 else (self.theta0 - angle) % TWO_PI
        if rel <= abs(self.sweep):
            return ring
        return min(abs(q - self.start), abs(q - self.end))

    def reversed(self) -> 'Arc':
        return Arc(self.center, self.radius, self.theta0 + self.sweep, -self.sweep)


Piece = Union[Segment, Arc]


def reverse_path(path: Sequence[Piece]) -> List[Piece]:
    return [piece.reversed() for piece in reversed(path)]


def detour(start: complex, end: complex,
           obstacles: Sequence[Tuple[complex, float]] = ()) -> List[Piece]:
    """Straight path from start to end, bent along the minor arc of every obstacle disk it cuts.

    The minor arc keeps the disk center on the same side as the chord did, so the
    detour is homotopic to the segment in the plane punctured at the centers.
    Disks must be pairwise disjoint and must not contain either endpoint.
    """
    length = abs(end - start)
    if length == 0:
        return []
    u = (end - start) / length
    cuts = []
    for center, rho in obstacles:
        t0 = ((center - start) * u.conjugate()).real
        d = abs(center - (start + t0 * u))
        if d >= rho:
            continue
        h = math.sqrt(rho * rho - d * d)
        if t0 - h <= 0 or t0 + h >= length:
            continue
        cuts.append((t0 - h, t0 + h, complex(center), rho))

    pieces: List[Piece] = []
    cursor = start
    for t_in, t_out, center, rho in sorted(cuts, key=lambda cut: cut[0]):
        entry, exit_ = start + t_in * u, start + t_out * u
        pieces.append(Segment(cursor, entry))
        pieces.append(Arc(center, rho, cmath.phase(entry - center), cmath.phase((exit_ - center) / (entry - center))))
        cursor = exit_
    pieces.append(Segment(cursor, end))
    return pieces


def lasso(base: complex, center: complex, radius: float, sweep: float = TWO_PI,
          obstacles: Sequence[Tuple[complex, float]] = ()) -> List[Piece]:
    """Path to the circle around ``center``, a full turn, and the same path back."""
    direction = (base - center) / abs(base - center)
    entry = center + radius * direction
    approach = detour(base, entry, obstacles)
    return approach + [Arc(center, radius, cmath.phase(direction), sweep)] + reverse_path(approach)


# =============================================================================
# Transport
# =============================================================================

@dataclass(frozen=True)
class TransportSettings:
    tol: float = 1e-10
    clearance: float = 1e-6
    classify_tol: float = 1e-6
    jobs: int = 1
    method: str = 'DOP853'
    max_refinements: int = 3

    @classmethod
    def from_config(cls, config, **overrides) -> 'TransportSettings':
        values = dict(
            tol=config.INTEGRATOR_TOL,
            clearance=config.MONODROMY_CLEARANCE,
            classify_tol=config.CLASSIFY_TOL,
            jobs=config.JOBS,
            max_refinements=config.MONODROMY_REFINEMENTS,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class TransportResult:
    matrix: np.ndarray
    trace_integral: complex

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    @property
    def det_gap(self) -> float:
        return abs(self.det - cmath.exp(self.trace_integral))


def check_clearance(sys: LinearSystem, path: Sequence[Piece], clearance: float) -> None:
    for n, piece in enumerate(path):
        for k, p in enumerate(sys.poles):
            gap = piece.distance_to(p)
            if gap < clearance:
                raise ClearanceError(
                    f"Path piece {n} passes within {gap:.3e} of pole {k} (clearance {clearance:.3e}); "
                    "try a different base point or radius",
                    details={'piece': n, 'pole': k, 'distance': gap}
                )


def _integrate_piece(sys: LinearSystem, piece: Piece, state: np.ndarray,
                     settings: TransportSettings) -> np.ndarray:
    def rhs(t, y):
        z = piece.point(t)
        dz = piece.velocity(t)
        B = sys(z)
        Y = y[:4].reshape(2, 2)
        out = np.empty(5, dtype=complex)
        out[:4] = (B @ Y).ravel() * dz
        out[4] = np.trace(B) * dz
        return out

    # tolerance shrinks with the distance to the nearest pole
    nearest = min((piece.distance_to(p) for p in sys.poles), default=1.0)
    tol = max(settings.tol * min(1.0, nearest), MIN_TOL)
    sol = solve_ivp(rhs, (0.0, 1.0), state, method=settings.method, rtol=tol, atol=tol)
    if sol.status < 0:
        if 'step size' in (sol.message or '').lower():
            raise StepUnderflowError(f"Integrator step size underflow: {sol.message}")
        raise NumericalError(f"Integrator failed: {sol.message}", error_code='integration_failed')
    return sol.y[:, -1]


def transport_full(sys: LinearSystem, path: Sequence[Piece],
                   settings: Optional[TransportSettings] = None) -> TransportResult:
    settings = settings or TransportSettings()
    check_clearance(sys, path, settings.clearance)
    state = np.zeros(5, dtype=complex)
    state[0] = state[3] = 1.0
    for piece in path:
        state = _integrate_piece(sys, piece, state, settings)
    return TransportResult(state[:4].reshape(2, 2).copy(), complex(state[4]))


def transport(sys: LinearSystem, path: Sequence[Piece],
              settings: Optional[TransportSettings] = None) -> np.ndarray:
    """Fundamental matrix at the end of ``path`` normalized to the identity at its start."""
    return transport_full(sys, path, settings).matrix


# =============================================================================
# Classification
# =============================================================================

class LoopClass(str, Enum):
    PLUS_IDENTITY = 'plus_identity'
    MINUS_IDENTITY = 'minus_identity'
    SCALAR = 'scalar'
    NONTRIVIAL = 'nontrivial'


@dataclass
class Classification:
    kind: LoopClass
    deviation: float
    scalar: Optional[complex] = None
    resonant: bool = False

    def to_dict(self) -> Dict:
        result = {'kind': self.kind.value, 'deviation': self.deviation, 'resonant': self.resonant}
        if self.scalar is not None:
            result['scalar'] = encode_complex(self.scalar)
        return result


def classify_matrix(M: np.ndarray, tol: float = 1e-6) -> Classification:
    M = np.asarray(M, dtype=complex)
    eye = np.eye(2, dtype=complex)
    plus = float(np.linalg.norm(M - eye, 2))
    minus = float(np.linalg.norm(M + eye, 2))
    c = complex(np.trace(M) / 2)
    scalar = float(np.linalg.norm(M - c * eye, 2))
    if plus <= tol:
        return Classification(LoopClass.PLUS_IDENTITY, plus)
    if minus <= tol:
        return Classification(LoopClass.MINUS_IDENTITY, minus)
    if scalar <= tol:
        return Classification(LoopClass.SCALAR, scalar, scalar=c)
    eigenvalues = np.linalg.eigvals(M)
    resonant = bool(abs(eigenvalues[0] - eigenvalues[1]) <= math.sqrt(tol) * max(1.0, abs(c)))
    if resonant:
        logger.info("Loop monodromy has a repeated eigenvalue but is not scalar (logarithmic case)")
    return Classification(LoopClass.NONTRIVIAL, min(plus, minus, scalar), resonant=resonant)


# =============================================================================
# Monodromy reports
# =============================================================================

@dataclass
class LoopData:
    index: int
    center: complex
    radius: float
    matrix: np.ndarray
    classification: Classification
    det_gap: float

    def to_dict(self) -> Dict:
        return {
            'index': self.index,
            'center': encode_complex(self.center),
            'radius': self.radius,
            'matrix': encode_matrix(self.matrix),
            'classification': self.classification.to_dict(),
            'det_gap': self.det_gap,
        }


@dataclass
class MonodromyReport:
    base: complex
    loops: List[LoopData]
    infinity_matrix: np.ndarray
    product_deviation: float
    settings: TransportSettings
    tol_used: float = 0.0
    refinements: int = 0
    converged: bool = True

    @property
    def matrices(self) -> List[np.ndarray]:
        return [loop.matrix for loop in self.loops]

    @property
    def max_det_gap(self) -> float:
        return max((loop.det_gap for loop in self.loops), default=0.0)

    def to_dict(self) -> Dict:
        return {
            'base': encode_complex(self.base),
            'loops': [loop.to_dict() for loop in self.loops],
            'infinity_matrix': encode_matrix(self.infinity_matrix),
            'product_deviation': self.product_deviation,
            'max_det_gap': self.max_det_gap,
            'tol_used': self.tol_used,
            'refinements': self.refinements,
            'converged': self.converged,
        }


def default_base(poles: Sequence[complex]) -> complex:
    # off the real axis so that segments to collinear poles do not graze each other
    R = 1.0 + max((abs(p) for p in poles), default=0.0)
    return complex(R, 0.618 * R)


def loop_radii(poles: Sequence[complex], base: complex) -> List[float]:
    radii = []
    for k, p in enumerate(poles):
        nearest = min((abs(p - q) for l, q in enumerate(poles) if l != k), default=2.0)
        radii.append(min(0.5 * nearest, 0.5 * abs(base - p)))
    return radii


def _obstacles(poles: Sequence[complex], radii: Sequence[float], skip: Optional[int] = None):
    return [(p, 0.8 * r) for k, (p, r) in enumerate(zip(poles, radii)) if k != skip]


def _loop_order(poles: Sequence[complex], base: complex) -> List[int]:
    centroid = complex(np.mean(poles))
    reference = centroid - base
    if reference == 0:
        reference = 1.0

    def key(k):
        return cmath.phase((poles[k] - base) / reference)

    return sorted(range(len(poles)), key=key)


def infinity_loop(poles: Sequence[complex], base: complex,
                  obstacles: Sequence[Tuple[complex, float]] = ()) -> List[Piece]:
    """Negatively oriented circle enclosing every pole, attached to the base."""
    centroid = complex(np.mean(poles)) if len(poles) else 0j
    spread = max((abs(p - centroid) for p in poles), default=0.0)
    radius = max(abs(base - centroid), 2 * spread + 1.0)
    if base == centroid:
        return [Arc(centroid, radius, 0.0, -TWO_PI)]
    if abs(base - centroid) >= radius:
        return [Arc(centroid, radius, cmath.phase(base - centroid), -TWO_PI)]
    return lasso(base, centroid, radius, sweep=-TWO_PI, obstacles=obstacles)


def _check_base(poles: Sequence[complex], base: complex, clearance: float) -> None:
    for k, p in enumerate(poles):
        if abs(base - p) <= 4 * clearance:
            raise ClearanceError(f"Base point lies on pole {k}; choose another base",
                                 details={'pole': k})
    for a in range(len(poles)):
        for b in range(a + 1, len(poles)):
            if abs(poles[a] - poles[b]) < 4 * clearance:
                raise ClearanceError(
                    f"Poles {a} and {b} are closer than 4x the clearance; choose a smaller clearance or another base",
                    details={'poles': [a, b]}
                )


def _loop_pass(sys: LinearSystem, base: complex, settings: TransportSettings) -> MonodromyReport:
    poles = list(sys.poles)
    radii = loop_radii(poles, base)
    order = _loop_order(poles, base) if poles else []
    loop_clearance = max(settings.clearance, 0.5 * min(radii)) if radii else settings.clearance
    loop_settings = replace(settings, clearance=loop_clearance)

    def run(k):
        logger.debug("Transporting around pole %d at %s", k, poles[k])
        path = lasso(base, poles[k], radii[k], obstacles=_obstacles(poles, radii, skip=k))
        return transport_full(sys, path, loop_settings)

    if settings.jobs > 1 and len(order) > 1:
        with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
            results = list(pool.map(run, order))
    else:
        results = [run(k) for k in order]

    loops = [
        LoopData(
            index=k,
            center=poles[k],
            radius=radii[k],
            matrix=result.matrix,
            classification=classify_matrix(result.matrix, settings.classify_tol),
            det_gap=result.det_gap,
        )
        for k, result in zip(order, results)
    ]

    if poles:
        infinity = transport(sys, infinity_loop(poles, base, _obstacles(poles, radii)), loop_settings)
    else:
        infinity = np.eye(2, dtype=complex)
    product = np.eye(2, dtype=complex)
    for loop in loops:
        product = loop.matrix @ product
    deviation = float(np.linalg.norm(product @ infinity - np.eye(2), 2))
    return MonodromyReport(base, loops, infinity, deviation, settings, tol_used=settings.tol)


def _needs_refinement(report: MonodromyReport, classify_tol: float) -> bool:
    if report.product_deviation > classify_tol / 10:
        return True
    return any(
        loop.classification.kind == LoopClass.NONTRIVIAL and loop.classification.deviation < 100 * classify_tol
        for loop in report.loops
    )


def monodromy_matrices(sys: LinearSystem, base: Optional[complex] = None,
                       settings: Optional[TransportSettings] = None) -> MonodromyReport:
    """Loop matrices from ``base``, re-integrated at tighter tolerance until the product relation holds.

    A near-identity loop that misses ``classify_tol`` by less than a factor 100 also
    triggers a refinement. ``converged`` is False when the product relation still
    fails at the last tolerance.
    """
    settings = settings or TransportSettings()
    poles = list(sys.poles)
    base = default_base(poles) if base is None else complex(base)
    _check_base(poles, base, settings.clearance)

    current = settings
    refinements = 0
    while True:
        report = _loop_pass(sys, base, current)
        if not _needs_refinement(report, settings.classify_tol):
            break
        if refinements >= settings.max_refinements or current.tol <= MIN_TOL:
            break
        refinements += 1
        current = replace(current, tol=max(current.tol / 100, MIN_TOL))
        logger.info("Refining transport to tol %.1e (product deviation %.3e)", current.tol, report.product_deviation)

    report.settings = settings
    report.refinements = refinements
    report.converged = report.product_deviation <= settings.classify_tol / 10
    if not report.converged:
        logger.warning("Loop product relation off by %.3e at tol %.1e", report.product_deviation, report.tol_used)
    logger.info("Monodromy computed for %d loops from base %s", len(report.loops), base)
    return report


def classify_z2(report: MonodromyReport, tol: float = 1e-6) -> Tuple[bool, List[Optional[str]]]:
    """Per-loop signs; the verdict also requires the product relation to have converged."""
    signs: List[Optional[str]] = []
    for loop in report.loops:
        kind = classify_matrix(loop.matrix, tol).kind
        if kind == LoopClass.PLUS_IDENTITY:
            signs.append('+')
        elif kind == LoopClass.MINUS_IDENTITY:
            signs.append('-')
        else:
            signs.append(None)
    return report.converged and all(s is not None for s in signs), signs
