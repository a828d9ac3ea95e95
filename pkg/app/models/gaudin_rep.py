import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.models.base import CollisionError, InputError, NumericalError
from app.models.calgebra import check_separation

logger = logging.getLogger(__name__)

MAX_DIMENSION = 4096


# =============================================================================
# Irreducible representations
# =============================================================================

@dataclass(frozen=True, eq=False)
class Irrep:
    weight: int
    e: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.weight + 1


def build_irrep(weight: int) -> Irrep:
    # basis v_0 (highest) ... v_weight; f v_k = v_{k+1}, e v_k = k(weight-k+1) v_{k-1}
    if weight < 0 or int(weight) != weight:
        raise InputError(f"Highest weight must be a nonnegative integer, got {weight}")
    weight = int(weight)
    n = weight + 1
    e = np.zeros((n, n), dtype=complex)
    f = np.zeros((n, n), dtype=complex)
    h = np.diag([complex(weight - 2 * k) for k in range(n)])
    for k in range(1, n):
        f[k, k - 1] = 1.0
        e[k - 1, k] = k * (weight - k + 1)
    return Irrep(weight=weight, e=e, f=f, h=h)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


# =============================================================================
# Tensor product model
# =============================================================================

class TensorModel:
    def __init__(self, poles: Sequence[complex], weights: Sequence[int],
                 max_dim: int = MAX_DIMENSION, separation_tol: float = 1e-8):
        if len(poles) != len(weights):
            raise InputError("poles and weights must have the same length")
        self.poles = [complex(z) for z in poles]
        self.irreps = [build_irrep(w) for w in weights]
        self.weights = [irrep.weight for irrep in self.irreps]
        self.separation_tol = separation_tol
        self.dim = int(np.prod([irrep.dim for irrep in self.irreps])) if self.irreps else 1
        if self.dim > max_dim:
            raise InputError(
                f"Tensor space dimension {self.dim} exceeds the cap {max_dim}",
                error_code='dimension_exceeded'
            )

    def _site_operator(self, site: int, local: np.ndarray) -> np.ndarray:
        result = np.ones((1, 1), dtype=complex)
        for k, irrep in enumerate(self.irreps):
            result = np.kron(result, local if k == site else np.eye(irrep.dim, dtype=complex))
        return result

    @cached_property
    def site_ops(self) -> List[Dict[str, np.ndarray]]:
        return [
            {
                'e': self._site_operator(i, irrep.e),
                'f': self._site_operator(i, irrep.f),
                'h': self._site_operator(i, irrep.h),
            }
            for i, irrep in enumerate(self.irreps)
        ]

    @property
    def vacuum(self) -> np.ndarray:
        vac = np.zeros(self.dim, dtype=complex)
        vac[0] = 1.0
        return vac

    def casimir(self, site: int) -> np.ndarray:
        ops = self.site_ops[site]
        return ops['h'] @ ops['h'] / 2 + ops['e'] @ ops['f'] + ops['f'] @ ops['e']

    def casimir_values(self) -> List[Tuple[float, float]]:
        """(expected ½λ(λ+2), deviation of the Casimir from that scalar) per site."""
        result = []
        for i, weight in enumerate(self.weights):
            expected = 0.5 * weight * (weight + 2)
            deviation = float(np.linalg.norm(self.casimir(i) - expected * np.eye(self.dim)))
            result.append((expected, deviation))
        return result


def gaudin_hamiltonians(model: TensorModel) -> List[np.ndarray]:
    check_separation(model.poles, model.separation_tol)
    ops = model.site_ops
    n = len(model.poles)
    hams = []
    for i in range(n):
        H = np.zeros((model.dim, model.dim), dtype=complex)
        for j in range(n):
            if j == i:
                continue
            omega = (ops[i]['h'] @ ops[j]['h'] / 2
                     + ops[i]['e'] @ ops[j]['f']
                     + ops[j]['e'] @ ops[i]['f'])
            H += omega / (model.poles[i] - model.poles[j])
        hams.append(H)
    return hams


def bethe_vector(model: TensorModel, roots: Sequence[complex], tol: float = 1e-12) -> np.ndarray:
    ops = model.site_ops
    vector = model.vacuum
    for j, mu in enumerate(roots):
        for i, z in enumerate(model.poles):
            if abs(mu - z) <= tol:
                raise CollisionError(f"Root {j} coincides with pole {i}", indices=[j, i])
        C = sum(ops[i]['f'] / (mu - z) for i, z in enumerate(model.poles))
        vector = C @ vector
    if np.linalg.norm(vector) == 0:
        logger.info("Bethe vector vanishes for %d roots", len(roots))
    return vector


# =============================================================================
# Eigen checks and joint spectrum
# =============================================================================

@dataclass
class EigenCheck:
    eigenvalues: List[complex]
    residuals: List[float]
    is_eigenvector: bool


def check_eigen(hamiltonians: Sequence[np.ndarray], vector: np.ndarray, tol: float = 1e-10) -> EigenCheck:
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise NumericalError("Cannot check a zero vector", error_code='zero_vector')
    norm_sq = np.vdot(vector, vector)
    values, residuals = [], []
    for H in hamiltonians:
        image = H @ vector
        chi = complex(np.vdot(vector, image) / norm_sq)
        values.append(chi)
        residuals.append(float(np.linalg.norm(image - chi * vector) / norm))
    return EigenCheck(values, residuals, all(r <= tol for r in residuals))


def joint_spectrum(hamiltonians: Sequence[np.ndarray], seed: int = 0,
                   tol: float = 1e-8) -> List[List[complex]]:
    """Joint eigenvalue tuples of commuting H_i via a generic linear combination."""
    if not hamiltonians:
        return []
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.5, 1.5, len(hamiltonians)) + 1j * rng.uniform(0.5, 1.5, len(hamiltonians))
    combo = sum(w * H for w, H in zip(weights, hamiltonians))
    _, vectors = np.linalg.eig(combo)
    spectrum: List[List[complex]] = []
    for k in range(vectors.shape[1]):
        check = check_eigen(hamiltonians, vectors[:, k], tol=1e-6)
        if not check.is_eigenvector:
            logger.debug("Skipping ill-conditioned eigenvector %d", k)
            continue
        if not any(spectrum_match(existing, check.eigenvalues, tol) for existing in spectrum):
            spectrum.append(check.eigenvalues)
    return spectrum


def spectrum_match(a: Sequence[complex], b: Sequence[complex], tol: float) -> bool:
    return len(a) == len(b) and all(abs(x - y) <= tol * max(1.0, abs(x)) for x, y in zip(a, b))


def spectrum_contains(spectrum: Sequence[Sequence[complex]], chi: Sequence[complex],
                      tol: float = 1e-8) -> bool:
    return any(spectrum_match(entry, chi, tol) for entry in spectrum)


def commutator_norms(hamiltonians: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for i in range(len(hamiltonians)):
        for j in range(i + 1, len(hamiltonians)):
            worst = max(worst, float(np.linalg.norm(commutator(hamiltonians[i], hamiltonians[j]))))
    return worst
