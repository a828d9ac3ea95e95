"""Bethe system for the sl2 Gaudin model: residuals, eigenvalues and a multi-start Newton search."""
import cmath
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.base import CollisionError, InputError
from app.models.calgebra import check_separation
from app.utils.helpers import canonical_sort

logger = logging.getLogger(__name__)


# =============================================================================
# Problem & Solution Types
# =============================================================================

@dataclass(frozen=True)
class BetheProblem:
    """Poles Z with weights Λ, plus optional moving poles W carrying weight 1."""
    poles: Tuple[complex, ...]
    weights: Tuple[complex, ...]
    num_roots: int
    moving_poles: Tuple[complex, ...] = ()
    separation_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(complex(z) for z in self.poles))
        object.__setattr__(self, 'weights', tuple(_as_weight(w) for w in self.weights))
        object.__setattr__(self, 'moving_poles', tuple(complex(w) for w in self.moving_poles))
        if len(self.poles) != len(self.weights):
            raise InputError(
                f"Got {len(self.poles)} poles but {len(self.weights)} weights"
            )
        if self.num_roots < 0 or int(self.num_roots) != self.num_roots:
            raise InputError("num_roots must be a nonnegative integer")
        check_separation(self.all_poles, self.separation_tol)

    @property
    def all_poles(self) -> Tuple[complex, ...]:
        return self.poles + self.moving_poles

    @property
    def all_weights(self) -> Tuple[complex, ...]:
        return self.weights + (1,) * len(self.moving_poles)

    @property
    def is_degenerate(self) -> bool:
        return self.num_roots > 0 and all(w == 0 for w in self.all_weights)

    @property
    def center(self) -> complex:
        pts = self.all_poles
        return complex(np.mean(pts)) if pts else 0j

    @property
    def scale(self) -> float:
        pts = np.asarray(self.all_poles, dtype=complex)
        if len(pts) < 2:
            return 1.0
        return max(float(np.max(np.abs(pts - pts.mean()))), 1e-3)

    def with_roots(self, num_roots: int) -> 'BetheProblem':
        return BetheProblem(self.poles, self.weights, num_roots, self.moving_poles, self.separation_tol)


def _as_weight(value):
    value = complex(value)
    if value.imag == 0 and float(value.real).is_integer():
        return int(value.real)
    return value.real if value.imag == 0 else value


@dataclass(frozen=True)
class BetheRoots:
    roots: Tuple[complex, ...]
    residual: float
    certified: bool
    condition: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'roots', tuple(canonical_sort(self.roots)))


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-11
    max_steps: int = 60
    max_halvings: int = 20
    num_starts: int = 64
    dedup_tol: float = 1e-7
    seed: int = 0
    jobs: int = 1
    max_condition: float = 1e10
    divergence_factor: float = 1e4
    seeds: Tuple[Tuple[complex, ...], ...] = field(default=())

    @classmethod
    def from_config(cls, config, **overrides) -> 'SolverSettings':
        values = dict(
            tol=config.BETHE_TOL,
            max_steps=config.NEWTON_MAX_STEPS,
            max_halvings=config.NEWTON_MAX_HALVINGS,
            num_starts=config.BETHE_NUM_STARTS,
            dedup_tol=config.BETHE_DEDUP_TOL,
            seed=config.BETHE_SEED,
            jobs=config.JOBS,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


# =============================================================================
# Residuals, Jacobian, Master Function
# =============================================================================

def _check_collisions(p: BetheProblem, roots: Sequence[complex], tol: float) -> None:
    for j, mu in enumerate(roots):
        for i, z in enumerate(p.all_poles):
            if abs(mu - z) <= tol:
                raise CollisionError(f"Root {j} collides with pole {i}", indices=[('root', j), ('pole', i)])
        for k in range(j + 1, len(roots)):
            if abs(mu - roots[k]) <= tol:
                raise CollisionError(f"Roots {j} and {k} collide", indices=[('root', j), ('root', k)])


def bethe_residual(p: BetheProblem, roots: Sequence[complex]) -> List[complex]:
    roots = [complex(mu) for mu in roots]
    _check_collisions(p, roots, p.separation_tol)
    zs, lams = p.all_poles, p.all_weights
    values = []
    for j, mu in enumerate(roots):
        value = -0.5 * sum(lam / (mu - z) for z, lam in zip(zs, lams))
        value += sum(1.0 / (mu - nu) for k, nu in enumerate(roots) if k != j)
        values.append(complex(value))
    return values


def master_function_gradient(p: BetheProblem, roots: Sequence[complex]) -> List[complex]:
    """Gradient of ``master_function``; coincides with the Bethe residual."""
    return bethe_residual(p, roots)


def master_function(p: BetheProblem, roots: Sequence[complex]) -> complex:
    """log of prod (mu_j - z_i)^(-λ_i/2) prod_{j<k} (mu_j - mu_k), principal branches."""
    roots = [complex(mu) for mu in roots]
    value = 0j
    for mu in roots:
        value += sum(-0.5 * lam * cmath.log(mu - z) for z, lam in zip(p.all_poles, p.all_weights))
    for j in range(len(roots)):
        for k in range(j + 1, len(roots)):
            value += cmath.log(roots[j] - roots[k])
    return value


def bethe_jacobian(p: BetheProblem, roots: Sequence[complex]) -> np.ndarray:
    roots = [complex(mu) for mu in roots]
    m = len(roots)
    J = np.zeros((m, m), dtype=complex)
    for j, mu in enumerate(roots):
        J[j, j] = 0.5 * sum(lam / (mu - z) ** 2 for z, lam in zip(p.all_poles, p.all_weights))
        for k, nu in enumerate(roots):
            if k != j:
                coupling = 1.0 / (mu - nu) ** 2
                J[j, j] -= coupling
                J[j, k] = coupling
    return J


def residual_norm(p: BetheProblem, roots: Sequence[complex]) -> float:
    values = bethe_residual(p, roots)
    return max((abs(v) for v in values), default=0.0)


# =============================================================================
# Eigenvalues
# =============================================================================

def bethe_eigenvalues(p: BetheProblem, roots: Sequence[complex]) -> List[complex]:
    roots = [complex(mu) for mu in roots]
    residual = residual_norm(p, roots) if roots else 0.0
    if residual > 1e-6:
        logger.warning("Computing eigenvalues for roots with Bethe residual %.3e", residual)
    zs, lams = p.all_poles, p.all_weights
    chi = []
    for i, (zi, lam) in enumerate(zip(zs, lams)):
        root_sum = sum(1.0 / (zi - mu) for mu in roots)
        pole_sum = sum(lams[j] / (zi - zs[j]) for j in range(len(zs)) if j != i)
        chi.append(complex(-lam * (root_sum - 0.5 * pole_sum)))
    return chi


# =============================================================================
# Multi-start damped Newton
# =============================================================================

def _starting_points(p: BetheProblem, settings: SolverSettings) -> List[np.ndarray]:
    m = p.num_roots
    rng = np.random.default_rng(settings.seed)
    starts = [np.asarray(seed, dtype=complex) for seed in settings.seeds if len(seed) == m]
    nodes = np.cos((2 * np.arange(m) + 1) * np.pi / (2 * m))
    for _ in range(settings.num_starts):
        radius = p.scale * rng.uniform(0.3, 1.5)
        rotation = np.exp(1j * rng.uniform(0, 2 * np.pi))
        jitter = 0.3 * p.scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        starts.append(p.center + radius * rotation * nodes + jitter)
    return starts


def _newton(p: BetheProblem, start: np.ndarray, settings: SolverSettings) -> Optional[BetheRoots]:
    x = np.array(start, dtype=complex)
    limit = settings.divergence_factor * max(p.scale, 1.0)

    def evaluate(point):
        try:
            return np.asarray(bethe_residual(p, point), dtype=complex)
        except CollisionError:
            return None

    r = evaluate(x)
    if r is None:
        return None
    for _ in range(settings.max_steps):
        if np.max(np.abs(r)) <= settings.tol:
            break
        try:
            dx = np.linalg.solve(bethe_jacobian(p, x), -r)
        except np.linalg.LinAlgError:
            return None
        t, accepted = 1.0, False
        for _ in range(settings.max_halvings + 1):
            candidate = x + t * dx
            r_new = evaluate(candidate)
            if r_new is not None and np.max(np.abs(r_new)) < np.max(np.abs(r)):
                x, r, accepted = candidate, r_new, True
                break
            t *= 0.5
        if not accepted or np.max(np.abs(x - p.center)) > limit:
            return None

    residual = float(np.max(np.abs(r))) if len(r) else 0.0
    if residual > settings.tol:
        return None
    try:
        _check_collisions(p, list(x), settings.dedup_tol)
    except CollisionError:
        return None
    condition = float(np.linalg.cond(bethe_jacobian(p, x)))
    certified = bool(np.isfinite(condition) and condition < settings.max_condition)
    if not certified:
        logger.warning("Converged Bethe point with singular Jacobian (cond %.3e)", condition)
    return BetheRoots(tuple(x), residual, certified, condition)


class BetheSolutions(list):
    """Solutions found by one search; ``degenerate`` marks a system whose weights all vanish."""

    def __init__(self, solutions: Sequence[BetheRoots] = (), degenerate: bool = False):
        super().__init__(solutions)
        self.degenerate = degenerate


def _same_solution(a: BetheRoots, b: BetheRoots, tol: float) -> bool:
    return all(abs(x - y) < tol for x, y in zip(a.roots, b.roots))


def solve_bethe(p: BetheProblem, settings: Optional[SolverSettings] = None) -> BetheSolutions:
    settings = settings or SolverSettings()
    if p.num_roots == 0:
        return BetheSolutions([BetheRoots((), 0.0, True)])
    if p.is_degenerate:
        logger.warning("All weights vanish: the Bethe system is degenerate, nothing to solve")
        return BetheSolutions(degenerate=True)

    starts = _starting_points(p, settings)
    if settings.jobs > 1:
        with ThreadPoolExecutor(max_workers=settings.jobs) as pool:
            candidates = list(pool.map(lambda s: _newton(p, s, settings), starts))
    else:
        candidates = [_newton(p, s, settings) for s in starts]

    found: List[BetheRoots] = []
    for candidate in candidates:
        if candidate is None:
            continue
        if not any(_same_solution(candidate, other, settings.dedup_tol) for other in found):
            found.append(candidate)
    found.sort(key=lambda sol: [(round(r.real, 9), round(r.imag, 9)) for r in sol.roots])
    logger.info("Bethe search: %d starts, %d distinct solutions", len(starts), len(found))
    return BetheSolutions(found)
