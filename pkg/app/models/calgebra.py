import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from app.models.base import ClusteredPolesError, CollisionError, InputError, RootFindingError

logger = logging.getLogger(__name__)

DEFAULT_SEPARATION_TOL = 1e-8
DEFAULT_ROOT_TOL = 1e-12
DEFAULT_ROOT_MAX_ITER = 100
_root_settings = {'tol': DEFAULT_ROOT_TOL, 'max_iter': DEFAULT_ROOT_MAX_ITER}
_EPS = np.finfo(float).eps


# =============================================================================
# Polynomials
# =============================================================================

def _trim(coeffs: Iterable[complex]) -> Tuple[complex, ...]:
    values = [complex(c) for c in coeffs]
    while values and values[-1] == 0:
        values.pop()
    return tuple(values)


@dataclass(frozen=True)
class CPoly:
    """Coefficients in ascending degree order; the zero polynomial is ``()``."""
    coeffs: Tuple[complex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', _trim(self.coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], leading: complex = 1.0) -> 'CPoly':
        if len(roots) == 0:
            return cls((leading,))
        return cls(tuple(leading * npoly.polyfromroots(np.asarray(roots, dtype=complex))))

    @classmethod
    def constant(cls, value: complex) -> 'CPoly':
        return cls((value,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1] if self.coeffs else 0j

    def is_zero(self) -> bool:
        return not self.coeffs

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs if self.coeffs else (0j,), dtype=complex)

    def __call__(self, z):
        if not self.coeffs:
            return np.zeros_like(np.asarray(z, dtype=complex))
        # numpy's polyval is a Horner scheme
        return npoly.polyval(z, self.as_array())

    def scale_at(self, z: complex) -> float:
        """Sum of |c_k||z|^k, the natural size of p near z."""
        r = abs(z)
        return float(sum(abs(c) * r ** k for k, c in enumerate(self.coeffs)))

    def deriv(self, order: int = 1) -> 'CPoly':
        if self.degree < order:
            return CPoly()
        return CPoly(tuple(npoly.polyder(self.as_array(), order)))

    def monic(self) -> 'CPoly':
        if self.is_zero():
            raise InputError("Zero polynomial has no monic form")
        return CPoly(tuple(np.asarray(self.coeffs) / self.leading))

    def __add__(self, other: 'CPoly') -> 'CPoly':
        return CPoly(tuple(npoly.polyadd(self.as_array(), other.as_array())))

    def __sub__(self, other: 'CPoly') -> 'CPoly':
        return CPoly(tuple(npoly.polysub(self.as_array(), other.as_array())))

    def __mul__(self, other) -> 'CPoly':
        if isinstance(other, CPoly):
            if self.is_zero() or other.is_zero():
                return CPoly()
            return CPoly(tuple(npoly.polymul(self.as_array(), other.as_array())))
        return CPoly(tuple(np.asarray(self.coeffs, dtype=complex) * complex(other)))

    __rmul__ = __mul__

    def divmod(self, other: 'CPoly') -> Tuple['CPoly', 'CPoly']:
        if other.is_zero():
            raise InputError("Division by the zero polynomial")
        if self.degree < other.degree:
            return CPoly(), self
        q, r = npoly.polydiv(self.as_array(), other.as_array())
        return CPoly(tuple(q)), CPoly(tuple(r))

    def chop(self, rel_tol: float) -> 'CPoly':
        """Drop trailing leading coefficients that are negligible relative to the largest one."""
        values = list(self.coeffs)
        if not values:
            return self
        cutoff = rel_tol * max(abs(c) for c in values)
        while values and abs(values[-1]) <= cutoff:
            values.pop()
        return CPoly(tuple(values))


def init_root_finding(config) -> None:
    """Install ROOT_TOL and ROOT_MAX_ITER from a config class as the poly_roots defaults."""
    _root_settings['tol'] = float(getattr(config, 'ROOT_TOL', DEFAULT_ROOT_TOL))
    _root_settings['max_iter'] = int(getattr(config, 'ROOT_MAX_ITER', DEFAULT_ROOT_MAX_ITER))


def poly_roots(p: CPoly, tol: Optional[float] = None,
               max_iter: Optional[int] = None) -> List[complex]:
    """Companion-matrix eigenvalues polished by Newton's method.

    Roots are assumed simple. A root is accepted when its residual is below
    ``tol`` times the local scale of ``p`` or its Newton correction is below
    ``tol`` in the problem's unit scale; otherwise ``RootFindingError``.
    """
    if p.degree < 1:
        raise InputError("poly_roots needs a polynomial of degree >= 1")
    tol = _root_settings['tol'] if tol is None else tol
    max_iter = _root_settings['max_iter'] if max_iter is None else max_iter
    if p.degree == 1:
        c0, c1 = p.coeffs
        return [-c0 / c1]

    dp = p.deriv()
    seeds = npoly.polyroots(p.as_array())
    accept = max(tol, 64 * _EPS)
    roots = []
    for seed in seeds:
        r = complex(seed)
        best, best_res = r, abs(p(r))
        for _ in range(max_iter):
            d = dp(r)
            if d == 0:
                break
            step = p(r) / d
            r = r - step
            res = abs(p(r))
            if res < best_res:
                best, best_res = r, res
            if abs(step) <= _EPS * max(1.0, abs(r)):
                break
        d = dp(best)
        correction = abs(p(best) / d) if d != 0 else float('inf')
        if best_res > accept * max(p.scale_at(best), 1e-300) and correction > accept * max(1.0, abs(best)):
            raise RootFindingError(
                f"Root polishing did not converge (residual {best_res:.3e})",
                best_iterate=[best]
            )
        roots.append(best)
    return roots


# =============================================================================
# Rational Functions
# =============================================================================

def check_separation(points: Sequence[complex], tol: float = DEFAULT_SEPARATION_TOL,
                     label: str = 'poles') -> None:
    pts = [complex(p) for p in points]
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            if abs(pts[a] - pts[b]) <= tol:
                raise ClusteredPolesError(
                    f"{label} {a} and {b} are closer than {tol:g}: {pts[a]} vs {pts[b]}",
                    cluster=[pts[a], pts[b]],
                    details={'indices': [a, b]}
                )


@dataclass(frozen=True)
class RationalFn:
    """numerator / prod(z - pole) with pairwise distinct poles."""
    numerator: CPoly
    poles: Tuple[complex, ...]
    separation_tol: float = DEFAULT_SEPARATION_TOL
    residues: Tuple[complex, ...] = field(init=False)
    polynomial_part: CPoly = field(init=False)

    def __post_init__(self):
        poles = tuple(complex(p) for p in self.poles)
        object.__setattr__(self, 'poles', poles)
        check_separation(poles, self.separation_tol)

        residues = []
        for k, pk in enumerate(poles):
            dprime = np.prod([pk - pl for l, pl in enumerate(poles) if l != k]) if len(poles) > 1 else 1.0
            residues.append(complex(self.numerator(pk) / dprime))
        object.__setattr__(self, 'residues', tuple(residues))

        quotient, _ = self.numerator.divmod(self.denominator)
        object.__setattr__(self, 'polynomial_part', quotient)

    @classmethod
    def from_polys(cls, numerator: CPoly, denominator: CPoly,
                   separation_tol: float = DEFAULT_SEPARATION_TOL) -> 'RationalFn':
        if denominator.is_zero():
            raise InputError("Denominator is identically zero")
        scale = denominator.leading
        poles = poly_roots(denominator) if denominator.degree >= 1 else []
        return cls(numerator * (1.0 / scale), tuple(poles), separation_tol)

    @classmethod
    def from_residues(cls, poles: Sequence[complex], residues: Sequence[complex],
                      polynomial_part: Optional[CPoly] = None,
                      separation_tol: float = DEFAULT_SEPARATION_TOL) -> 'RationalFn':
        """Rebuild the numerator by Lagrange-type interpolation from residues."""
        poles = [complex(p) for p in poles]
        numerator = CPoly()
        for k, (pk, rk) in enumerate(zip(poles, residues)):
            others = [pl for l, pl in enumerate(poles) if l != k]
            numerator = numerator + CPoly.from_roots(others, leading=complex(rk))
        if polynomial_part is not None and not polynomial_part.is_zero():
            numerator = numerator + polynomial_part * CPoly.from_roots(poles)
        return cls(numerator, tuple(poles), separation_tol)

    @property
    def denominator(self) -> CPoly:
        return CPoly.from_roots(self.poles)

    def __call__(self, z):
        return self.numerator(z) / self.denominator(z)

    def partial_fraction_value(self, z):
        total = self.polynomial_part(z) if not self.polynomial_part.is_zero() else 0j
        for pk, rk in zip(self.poles, self.residues):
            total = total + rk / (z - pk)
        return total


def partial_fractions(f: RationalFn) -> Tuple[List[Tuple[complex, complex]], CPoly]:
    return list(zip(f.poles, f.residues)), f.polynomial_part


def residue_at(f: RationalFn, z0: complex, tol: Optional[float] = None) -> complex:
    tol = f.separation_tol if tol is None else tol
    near = [k for k, pk in enumerate(f.poles) if abs(pk - z0) <= tol]
    if len(near) > 1:
        raise CollisionError(
            f"Point {z0} is within {tol:g} of several poles",
            indices=near
        )
    if near:
        return f.residues[near[0]]
    return 0j


def reconstruction_error(f: RationalFn, samples: Sequence[complex]) -> float:
    """Max relative gap between num/den and its partial-fraction expansion."""
    worst = 0.0
    for z in samples:
        direct = f(z)
        expanded = f.partial_fraction_value(z)
        worst = max(worst, abs(direct - expanded) / max(1.0, abs(direct)))
    return worst
