import cmath
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.models.base import (
    BethePreconditionError, CollisionError, InputError, MultipleZeroError, NumericalError
)
from app.models.bethe import BetheProblem, residual_norm
from app.models.calgebra import CPoly, RationalFn, poly_roots
from app.models.scalar_oper import Convention, SturmLiouville
from app.utils.helpers import encode_complex, encode_complex_list, sample_points

logger = logging.getLogger(__name__)

SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


def principal_d(det: complex) -> complex:
    """sqrt(−det) with nonnegative real part, ties broken toward nonnegative imaginary part."""
    d = cmath.sqrt(-complex(det))
    if d.real < 0 or (d.real == 0 and d.imag < 0):
        d = -d
    return d


# =============================================================================
# Connection Type
# =============================================================================

@dataclass(frozen=True, eq=False)
class FuchsianConnection:
    poles: Tuple[complex, ...]
    residues: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'poles', tuple(complex(z) for z in self.poles))
        residues = np.asarray(self.residues, dtype=complex).reshape(len(self.poles), 2, 2)
        object.__setattr__(self, 'residues', residues)

    def __call__(self, z: complex) -> np.ndarray:
        total = np.zeros((2, 2), dtype=complex)
        for zi, Ai in zip(self.poles, self.residues):
            total += Ai / (z - zi)
        return total

    def derivative(self, z: complex) -> np.ndarray:
        total = np.zeros((2, 2), dtype=complex)
        for zi, Ai in zip(self.poles, self.residues):
            total -= Ai / (z - zi) ** 2
        return total

    @property
    def k(self) -> int:
        return len(self.poles)

    @property
    def d_values(self) -> List[complex]:
        return [principal_d(np.linalg.det(Ai)) for Ai in self.residues]

    @property
    def residue_sum(self) -> np.ndarray:
        return self.residues.sum(axis=0) if self.k else np.zeros((2, 2), dtype=complex)

    @property
    def kappa(self) -> complex:
        return complex(self.residue_sum[0, 0])

    def entry(self, row: int, col: int) -> Tuple[complex, ...]:
        return tuple(complex(Ai[row, col]) for Ai in self.residues)

    def swapped(self) -> 'FuchsianConnection':
        """Conjugation by the coordinate swap; exchanges the roles of ψ1 and ψ2."""
        return FuchsianConnection(self.poles, np.array([SWAP @ Ai @ SWAP for Ai in self.residues]))


# =============================================================================
# Normalization checks
# =============================================================================

@dataclass
class ConnectionReport:
    trace_norms: List[float]
    off_diagonal_sum: float
    diagonal_balance: float
    determinants: List[complex]
    d_values: List[complex]
    kappa: complex
    checks: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'checks': self.checks,
            'trace_norms': self.trace_norms,
            'off_diagonal_sum': self.off_diagonal_sum,
            'diagonal_balance': self.diagonal_balance,
            'determinants': encode_complex_list(self.determinants),
            'd_values': encode_complex_list(self.d_values),
            'kappa': encode_complex(self.kappa),
        }


def validate_connection(A: FuchsianConnection, tol: float = 1e-10) -> ConnectionReport:
    traces = [float(abs(np.trace(Ai))) for Ai in A.residues]
    total = A.residue_sum
    off = float(max(abs(total[0, 1]), abs(total[1, 0])))
    balance = float(abs(total[0, 0] + total[1, 1]))
    scale = max(1.0, float(np.max(np.abs(A.residues)))) if A.k else 1.0
    checks = {
        'trace': all(t <= tol * scale for t in traces),
        'sum_diagonal': off <= tol * scale,
        'sum_traceless': balance <= tol * scale,
    }
    return ConnectionReport(
        trace_norms=traces,
        off_diagonal_sum=off,
        diagonal_balance=balance,
        determinants=[complex(np.linalg.det(Ai)) for Ai in A.residues],
        d_values=A.d_values,
        kappa=A.kappa,
        checks=checks,
    )


def weights_from_connection(A: FuchsianConnection) -> List[complex]:
    return [2 * d - 1 for d in A.d_values]


# =============================================================================
# Matrix → scalar reduction
# =============================================================================

@dataclass
class ReductionResult:
    component: str
    moving_poles: List[complex]
    oper: SturmLiouville
    constant: complex
    h_moving: List[complex]
    h_fixed: List[complex]


def _numerator_from_residues(poles: Sequence[complex], residues: Sequence[complex],
                             separation_tol: float) -> CPoly:
    return RationalFn.from_residues(poles, residues, separation_tol=separation_tol).numerator


def reduce_to_scalar(A: FuchsianConnection, component: str = 'first',
                     separation_tol: float = 1e-8, zero_tol: float = 1e-6) -> ReductionResult:
    if component not in ('first', 'second'):
        raise InputError(f"Unknown component {component!r}")
    if A.k < 2:
        raise InputError("Reduction needs at least two poles")
    B = A if component == 'first' else A.swapped()

    a12 = B.entry(0, 1)
    a11 = B.entry(0, 0)
    scale = max(abs(x) for x in a12)
    if scale == 0:
        raise NumericalError(
            f"Off-diagonal entry of the {component} component vanishes identically",
            error_code='degenerate_component'
        )

    numerator = _numerator_from_residues(B.poles, a12, separation_tol)
    coeffs = list(numerator.as_array()) + [0j] * (B.k - numerator.degree - 1)
    # the z^(k-1) coefficient is the residue sum
    if abs(coeffs[B.k - 1]) > 1e-8 * scale:
        raise NumericalError(
            "Residues of the off-diagonal entry do not sum to zero; connection is not normalized",
            error_code='unnormalized'
        )
    truncated = CPoly(tuple(coeffs[:B.k - 1]))
    if truncated.is_zero() or abs(truncated.leading) <= 1e-12 * max(abs(c) for c in truncated.coeffs) \
            or truncated.degree != B.k - 2:
        raise NumericalError(
            "Off-diagonal entry has fewer than k-2 finite zeros",
            error_code='degenerate_component'
        )
    constant = truncated.leading
    moving = poly_roots(truncated) if B.k > 2 else []

    for a in range(len(moving)):
        for b in range(a + 1, len(moving)):
            if abs(moving[a] - moving[b]) <= zero_tol * max(1.0, abs(moving[a])):
                raise MultipleZeroError(
                    "Off-diagonal entry has a multiple zero; zeros with multiplicity are not supported",
                    details={'zeros': [str(moving[a]), str(moving[b])]}
                )
        for i, zi in enumerate(B.poles):
            if abs(moving[a] - zi) <= zero_tol:
                raise CollisionError(f"Moving pole {a} coincides with pole {i}", indices=[a, i])

    def a11_at(z):
        return sum(q / (z - zi) for q, zi in zip(a11, B.poles))

    h_moving = []
    for j, w in enumerate(moving):
        among = sum(1.0 / (w - v) for l, v in enumerate(moving) if l != j)
        fixed = sum(1.0 / (w - zi) for zi in B.poles)
        h_moving.append(complex(a11_at(w) - 0.5 * (among - fixed)))

    h_fixed = []
    for i, zi in enumerate(B.poles):
        value = (0.5 + a11[i]) * sum(1.0 / (zi - w) for w in moving)
        for l, zl in enumerate(B.poles):
            if l == i:
                continue
            tr = np.trace(B.residues[i] @ B.residues[l])
            value -= (tr + a11[i] + a11[l] + 0.5) / (zi - zl)
        h_fixed.append(complex(value))

    double = [0.25 + complex(np.linalg.det(Ai)) for Ai in B.residues] + [-0.75] * len(moving)
    oper = SturmLiouville(
        tuple(B.poles) + tuple(moving),
        tuple(double),
        tuple(h_fixed + h_moving),
        Convention.PLUS
    )
    logger.debug("Reduced %s component: %d moving poles", component, len(moving))
    return ReductionResult(component, list(moving), oper, complex(constant), h_moving, h_fixed)


def u_potential_chain(A: FuchsianConnection, z: complex, component: str = 'first') -> complex:
    """U = χ''/χ − (a12'/a12)·χ'/χ − u with χ = sqrt(a12), evaluated from the entries directly."""
    B = A if component == 'first' else A.swapped()
    a11 = a12 = a21 = d11 = d12 = dd12 = 0j
    for zi, Ai in zip(B.poles, B.residues):
        t = z - zi
        a11 += Ai[0, 0] / t
        a12 += Ai[0, 1] / t
        a21 += Ai[1, 0] / t
        d11 -= Ai[0, 0] / t ** 2
        d12 -= Ai[0, 1] / t ** 2
        dd12 += 2 * Ai[0, 1] / t ** 3
    g = d12 / a12
    dg = dd12 / a12 - g ** 2
    u = d11 + a11 ** 2 - a11 * g + a12 * a21
    chi_1 = g / 2
    chi_2 = dg / 2 + g ** 2 / 4
    return complex(chi_2 - g * chi_1 - u)


def apparent_residue_identity(Z: Sequence[complex], W: Sequence[complex], i: int) -> Tuple[complex, complex]:
    """(Σ_k Res_{z_k} Φ, Res_{w_i} Φ) for Φ = Π(z−w_l) / (Π(z−z_l)·(z−w_i)²)."""
    wi = W[i]
    total = 0j
    for k, zk in enumerate(Z):
        num = np.prod([zk - w for w in W]) if W else 1.0
        den = np.prod([zk - zl for l, zl in enumerate(Z) if l != k]) * (zk - wi) ** 2
        total += num / den
    num_w = np.prod([wi - w for l, w in enumerate(W) if l != i]) if len(W) > 1 else 1.0
    den_w = np.prod([wi - zl for zl in Z])
    return complex(total), complex(num_w / den_w)


# =============================================================================
# Pull-back of Bethe data
# =============================================================================

@dataclass(frozen=True)
class MatrixSolution:
    """Ψ = Π(z − z_i)^(−s_i)·(φ1, φ2)."""
    poles: Tuple[complex, ...]
    exponents: Tuple[complex, ...]
    phi1: CPoly
    phi2: CPoly

    def polynomial_part(self, z: complex) -> np.ndarray:
        return np.array([self.phi1(z), self.phi2(z)], dtype=complex)

    def polynomial_derivative(self, z: complex) -> np.ndarray:
        d1 = self.phi1.deriv()(z) if self.phi1.degree >= 1 else 0j
        d2 = self.phi2.deriv()(z) if self.phi2.degree >= 1 else 0j
        return np.array([d1, d2], dtype=complex)

    def prefactor_log_derivative(self, z: complex) -> complex:
        return sum(-s / (z - p) for p, s in zip(self.poles, self.exponents))

    def prefactor(self, z: complex) -> complex:
        value = 1 + 0j
        for p, s in zip(self.poles, self.exponents):
            value *= cmath.exp(-s * cmath.log(z - p))
        return value

    def __call__(self, z: complex) -> np.ndarray:
        return self.prefactor(z) * self.polynomial_part(z)


@dataclass
class PullBackResult:
    connection: FuchsianConnection
    solution: MatrixSolution
    alphas: List[complex]
    bethe_residual: float
    eigenvector_gap: float
    kappa_gap: float


def pull_back(Z: Sequence[complex], W: Sequence[complex], s: Sequence[complex],
              gamma: Sequence[complex], c: complex = 1.0, bethe_tol: float = 1e-8,
              strict: bool = True, separation_tol: float = 1e-8) -> PullBackResult:
    Z = [complex(z) for z in Z]
    W = [complex(w) for w in W]
    s = [complex(x) for x in s]
    gamma = [complex(g) for g in gamma]
    if len(s) != len(Z):
        raise InputError("One exponent s_i is needed per pole")
    if len(W) != len(Z) - 2:
        raise InputError(f"Expected {len(Z) - 2} moving poles, got {len(W)}")

    problem = BetheProblem(tuple(Z), tuple(2 * x - 1 for x in s), len(gamma), tuple(W), separation_tol)
    residual = residual_norm(problem, gamma) if gamma else 0.0
    if residual > bethe_tol:
        message = f"Roots fail the Bethe system for the pull-back data (residual {residual:.3e})"
        if strict:
            raise BethePreconditionError(message, details={'residual': residual})
        logger.warning(message)

    a12 = []
    for i, zi in enumerate(Z):
        num = np.prod([zi - w for w in W]) if W else 1.0
        den = np.prod([zi - zl for l, zl in enumerate(Z) if l != i])
        a12.append(complex(c * num / den))

    alphas = []
    for j, g in enumerate(gamma):
        for i, w in enumerate(W):
            if abs(g - w) <= separation_tol:
                raise CollisionError(f"Root {j} coincides with moving pole {i}", indices=[j, i])
        num = np.prod([g - zi for zi in Z])
        den = np.prod([g - w for w in W]) if W else 1.0
        alphas.append(complex(num / (c * den)))

    residues = []
    sums = []
    for i, zi in enumerate(Z):
        S = sum(a / (zi - g) for a, g in zip(alphas, gamma))
        sums.append(S)
        a11 = -s[i] - a12[i] * S
        a21 = -(2 * s[i] * S + a12[i] * S ** 2)
        residues.append([[a11, a12[i]], [a21, -a11]])
    connection = FuchsianConnection(tuple(Z), np.array(residues, dtype=complex))

    phi1 = CPoly.from_roots(gamma)
    phi2 = CPoly()
    for j, a in enumerate(alphas):
        phi2 = phi2 + CPoly.from_roots([g for l, g in enumerate(gamma) if l != j], leading=a)
    solution = MatrixSolution(tuple(Z), tuple(s), phi1, phi2)

    eigen_gap = 0.0
    for i, Ai in enumerate(connection.residues):
        v = np.array([1.0, sums[i]], dtype=complex)
        eigen_gap = max(eigen_gap, float(np.linalg.norm(Ai @ v + s[i] * v)))
    kappa_gap = abs(connection.kappa - (len(gamma) - sum(s)))
    return PullBackResult(connection, solution, alphas, residual, eigen_gap, float(kappa_gap))


def apply_connection(A: FuchsianConnection, psi: MatrixSolution, samples: int = 20,
                     seed: int = 0) -> float:
    """max over sample points of |(∂ − A)Ψ| / prefactor, relative to |φ|."""
    points = sample_points(list(A.poles) + list(psi.poles), count=samples, seed=seed)
    worst = 0.0
    for z in points:
        phi = psi.polynomial_part(z)
        lhs = psi.polynomial_derivative(z) + psi.prefactor_log_derivative(z) * phi
        gap = np.linalg.norm(lhs - A(z) @ phi) / max(1.0, float(np.linalg.norm(phi)))
        worst = max(worst, float(gap))
    return worst
