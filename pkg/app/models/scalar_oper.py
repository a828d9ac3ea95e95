import cmath
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from app.models.base import InputError
from app.models.bethe import BetheProblem, BetheRoots
from app.models.calgebra import CPoly, poly_roots
from app.utils.helpers import sample_points

logger = logging.getLogger(__name__)


class Convention(str, Enum):
    MINUS = 'minus'   # ∂² − U_B
    PLUS = 'plus'     # ∂² + U


# =============================================================================
# Oper & Solution Types
# =============================================================================

@dataclass(frozen=True)
class SturmLiouville:
    poles: Tuple[complex, ...]
    double_coeffs: Tuple[complex, ...]
    residues: Tuple[complex, ...]
    convention: Convention = Convention.MINUS

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(complex(p) for p in self.poles))
        object.__setattr__(self, 'double_coeffs', tuple(complex(a) for a in self.double_coeffs))
        object.__setattr__(self, 'residues', tuple(complex(b) for b in self.residues))
        object.__setattr__(self, 'convention', Convention(self.convention))
        if not (len(self.poles) == len(self.double_coeffs) == len(self.residues)):
            raise InputError("poles, double_coeffs and residues must have equal lengths")

    @classmethod
    def free(cls) -> 'SturmLiouville':
        return cls((), (), (), Convention.MINUS)

    def potential(self, z):
        """U_B under ``minus``, U under ``plus``."""
        total = 0j
        for p, a, b in zip(self.poles, self.double_coeffs, self.residues):
            total = total + a / (z - p) ** 2 + b / (z - p)
        return total

    def to_convention(self, target: Convention) -> 'SturmLiouville':
        target = Convention(target)
        if target == self.convention:
            return self
        return SturmLiouville(
            self.poles,
            tuple(-a for a in self.double_coeffs),
            tuple(-b for b in self.residues),
            target
        )

    @property
    def exponents(self) -> List[Tuple[complex, complex]]:
        return [local_exponents(self, k) for k in range(len(self.poles))]

    def residue_sum(self) -> complex:
        return complex(sum(self.residues))


@dataclass(frozen=True)
class QuasiPolySolution:
    """Ψ(z) = Π (z − p_k)^(−s_k) · φ(z) with φ monic."""
    poles: Tuple[complex, ...]
    exponents: Tuple[complex, ...]
    phi: CPoly

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(complex(p) for p in self.poles))
        object.__setattr__(self, 'exponents', tuple(complex(s) for s in self.exponents))
        if not self.phi.is_zero() and self.phi.leading != 1:
            object.__setattr__(self, 'phi', self.phi.monic())

    def log_derivative_prefactor(self, z):
        return sum(-s / (z - p) for p, s in zip(self.poles, self.exponents))

    def prefactor(self, z: complex) -> complex:
        value = 1 + 0j
        for p, s in zip(self.poles, self.exponents):
            value *= cmath.exp(-s * cmath.log(z - p))
        return value

    def __call__(self, z: complex) -> complex:
        return complex(self.phi(z)) * self.prefactor(z)

    def derivative(self, z: complex) -> complex:
        prefactor = self.prefactor(z)
        dphi = self.phi.deriv()(z) if self.phi.degree >= 1 else 0j
        return complex(prefactor * (dphi + self.log_derivative_prefactor(z) * self.phi(z)))


# =============================================================================
# Construction
# =============================================================================

def oper_from_bethe(p: BetheProblem, chi: Sequence[complex]) -> SturmLiouville:
    poles, weights = p.all_poles, p.all_weights
    if len(chi) != len(poles):
        raise InputError(f"Expected {len(poles)} eigenvalues, got {len(chi)}")
    double = tuple(0.25 * lam * (lam + 2) for lam in weights)
    return SturmLiouville(poles, double, tuple(chi), Convention.MINUS)


def explicit_solution(p: BetheProblem, roots) -> QuasiPolySolution:
    values = roots.roots if isinstance(roots, BetheRoots) else tuple(roots)
    return QuasiPolySolution(
        p.all_poles,
        tuple(lam / 2 for lam in p.all_weights),
        CPoly.from_roots(values)
    )


def local_exponents(op: SturmLiouville, k: int) -> Tuple[complex, complex]:
    if not 0 <= k < len(op.poles):
        raise InputError(f"Pole index {k} out of range")
    a = op.double_coeffs[k] if op.convention == Convention.MINUS else -op.double_coeffs[k]
    root = cmath.sqrt(1 + 4 * a)
    pair = sorted(((1 - root) / 2, (1 + root) / 2), key=lambda r: (r.real, r.imag))
    return pair[0], pair[1]


# =============================================================================
# Annihilation check
# =============================================================================

@dataclass
class OperResidualReport:
    max_cofactor: float
    pole_conditions: List[Dict] = field(default_factory=list)
    root_conditions: List[Dict] = field(default_factory=list)

    @property
    def max_condition_gap(self) -> float:
        gaps = [c['double_gap'] for c in self.pole_conditions] + [c['residue_gap'] for c in self.pole_conditions]
        gaps += [c['gap'] for c in self.root_conditions]
        return max(gaps, default=0.0)

    def passed(self, tol: float) -> bool:
        return self.max_cofactor <= tol

    def to_dict(self) -> Dict:
        return {
            'max_cofactor': self.max_cofactor,
            'max_condition_gap': self.max_condition_gap,
            'pole_conditions': self.pole_conditions,
            'root_conditions': self.root_conditions,
        }


def _match_exponents(op: SturmLiouville, psi: QuasiPolySolution, tol: float = 1e-9) -> List[complex]:
    matched = [0j] * len(op.poles)
    for q, s in zip(psi.poles, psi.exponents):
        hits = [k for k, p in enumerate(op.poles) if abs(p - q) <= tol]
        if not hits:
            raise InputError(f"Solution pole {q} is not a pole of the operator")
        matched[hits[0]] = s
    return matched


def _second_log_derivative(op: SturmLiouville, exps: Sequence[complex], phi: CPoly, z: complex) -> complex:
    """Ψ''/Ψ at z for Ψ = Π(z−p)^(−s)·φ."""
    ys = sum(-s / (z - p) for p, s in zip(op.poles, exps))
    dys = sum(s / (z - p) ** 2 for p, s in zip(op.poles, exps))
    phi_z = phi(z)
    d1 = phi.deriv()(z) / phi_z if phi.degree >= 1 else 0j
    d2 = phi.deriv(2)(z) / phi_z if phi.degree >= 2 else 0j
    return dys + ys ** 2 + 2 * ys * d1 + d2


def apply_oper(op: SturmLiouville, psi: QuasiPolySolution, samples: int = 20,
               seed: int = 0) -> OperResidualReport:
    minus = op.to_convention(Convention.MINUS)
    exps = _match_exponents(minus, psi)
    phi = psi.phi
    roots = poly_roots(phi) if phi.degree >= 1 else []

    points = sample_points(list(minus.poles) + list(roots), count=samples, seed=seed, min_distance=1e-6)
    cofactor = max(
        (abs(_second_log_derivative(minus, exps, phi, z) - minus.potential(z)) for z in points),
        default=0.0
    )

    pole_conditions = []
    for k, (p, a, b) in enumerate(zip(minus.poles, minus.double_coeffs, minus.residues)):
        s = exps[k]
        phi_p = phi(p)
        log_phi = phi.deriv()(p) / phi_p if phi.degree >= 1 and phi_p != 0 else 0j
        others = sum(-exps[l] / (p - q) for l, q in enumerate(minus.poles) if l != k)
        residue = 2 * (-s) * (others + log_phi)
        pole_conditions.append({
            'index': k,
            'double_gap': abs(s * (s + 1) - a),
            'residue_gap': abs(residue - b),
        })

    root_conditions = []
    for j, r in enumerate(roots):
        if any(abs(r - p) <= 1e-9 for p in minus.poles):
            continue
        ys = sum(-s / (r - p) for p, s in zip(minus.poles, exps))
        d1 = phi.deriv()(r)
        d2 = phi.deriv(2)(r) if phi.degree >= 2 else 0j
        root_conditions.append({'index': j, 'gap': abs(d2 / d1 + 2 * ys)})

    return OperResidualReport(float(cofactor), pole_conditions, root_conditions)
