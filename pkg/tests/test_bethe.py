import numpy as np
import pytest

from app.config import TestingConfig
from app.models.base import ClusteredPolesError, CollisionError, InputError
from app.models.bethe import (
    BetheProblem, SolverSettings, bethe_eigenvalues, bethe_residual, master_function,
    master_function_gradient, residual_norm, solve_bethe
)


# =============================================================================
# Problem validation
# =============================================================================

def test_problem_length_mismatch():
    with pytest.raises(InputError):
        BetheProblem((0, 1), (1,), 1)


def test_problem_negative_root_count():
    with pytest.raises(InputError):
        BetheProblem((0, 1), (1, 1), -1)


def test_problem_clustered_poles():
    with pytest.raises(ClusteredPolesError):
        BetheProblem((0, 1e-12), (1, 1), 1)


def test_moving_poles_carry_weight_one():
    p = BetheProblem((0, 1), (2, 3), 1, moving_poles=(5,))
    assert p.all_poles == (0, 1, 5)
    assert p.all_weights == (2, 3, 1)


# =============================================================================
# Residuals and eigenvalues
# =============================================================================

def test_residual_at_midpoint(two_point_problem):
    assert abs(bethe_residual(two_point_problem, [0.5])[0]) < 1e-15


def test_residual_value(two_point_problem):
    assert abs(bethe_residual(two_point_problem, [0.25])[0] + 4 / 3) < 1e-14


def test_residual_without_roots(two_point_problem):
    assert bethe_residual(two_point_problem.with_roots(0), []) == []


def test_residual_collision(two_point_problem):
    with pytest.raises(CollisionError):
        bethe_residual(two_point_problem, [1.0])
    with pytest.raises(CollisionError):
        bethe_residual(two_point_problem.with_roots(2), [0.3, 0.3])


def test_residual_permutation_and_covariance():
    rng = np.random.default_rng(5)
    p = BetheProblem((0, 1, 2 + 1j), (1, 2, 1), 2)
    mu = list(rng.standard_normal(2) + 1j * rng.standard_normal(2))
    base = bethe_residual(p, mu)
    assert np.allclose(bethe_residual(p, mu[::-1]), base[::-1], atol=1e-14)

    shift = 0.7 - 0.2j
    shifted = BetheProblem(tuple(z + shift for z in p.poles), p.weights, 2)
    assert np.allclose(bethe_residual(shifted, [m + shift for m in mu]), base, atol=1e-12)

    c = 2.5j
    scaled = BetheProblem(tuple(c * z for z in p.poles), p.weights, 2)
    assert np.allclose(bethe_residual(scaled, [c * m for m in mu]), np.asarray(base) / c, atol=1e-12)


def test_master_function_gradient_matches_residual():
    rng = np.random.default_rng(2)
    p = BetheProblem((0, 1, 3), (1, 1, 2), 2)
    for _ in range(100):
        mu = list(rng.standard_normal(2) * 3 + 1j * rng.standard_normal(2))
        assert np.allclose(master_function_gradient(p, mu), bethe_residual(p, mu), atol=1e-14)


def test_master_function_finite_differences():
    p = BetheProblem((0, 1, 3), (1, 1, 2), 2)
    mu = [0.4 + 0.6j, 2.1 - 0.3j]
    gradient = master_function_gradient(p, mu)
    h = 1e-6
    for j in range(2):
        plus, minus = list(mu), list(mu)
        plus[j] += h
        minus[j] -= h
        estimate = (master_function(p, plus) - master_function(p, minus)) / (2 * h)
        assert abs(estimate - gradient[j]) < 1e-6


def test_eigenvalues_two_point(two_point_problem):
    assert np.allclose(bethe_eigenvalues(two_point_problem, [0.5]), [1.5, -1.5])


def test_vacuum_eigenvalues(two_point_problem):
    assert np.allclose(bethe_eigenvalues(two_point_problem.with_roots(0), []), [-0.5, 0.5])


def test_zero_weight_site_has_zero_eigenvalue():
    p = BetheProblem((0, 1, 2), (0, 1, 1), 1)
    chi = bethe_eigenvalues(p, [1.5])
    assert chi[0] == 0
    assert abs(sum(chi)) < 1e-10


# =============================================================================
# Solver
# =============================================================================

def test_solve_two_point(two_point_problem):
    solutions = solve_bethe(two_point_problem)
    assert len(solutions) == 1
    assert abs(solutions[0].roots[0] - 0.5) < 1e-10
    assert solutions[0].certified


def test_solve_three_point(three_point_problem):
    solutions = solve_bethe(three_point_problem)
    expected = sorted([1 - 1 / np.sqrt(3), 1 + 1 / np.sqrt(3)])
    found = sorted(s.roots[0].real for s in solutions)
    assert np.allclose(found, expected, atol=1e-9)
    assert all(s.residual <= 1e-11 for s in solutions)


def test_solve_without_roots(two_point_problem):
    solutions = solve_bethe(two_point_problem.with_roots(0))
    assert len(solutions) == 1
    assert solutions[0].roots == ()


def test_degenerate_problem_is_flagged():
    result = solve_bethe(BetheProblem((0, 1), (0, 0), 1))
    assert result == []
    assert result.degenerate


def test_regular_problems_are_not_degenerate(two_point_problem):
    assert not solve_bethe(two_point_problem).degenerate
    assert not solve_bethe(BetheProblem((0, 1), (0, 0), 0)).degenerate


def test_solver_is_deterministic():
    p = BetheProblem((0, 1, 2, 3), (1, 1, 1, 1), 2)
    first = solve_bethe(p, SolverSettings(seed=4))
    second = solve_bethe(p, SolverSettings(seed=4, jobs=4))
    assert [s.roots for s in first] == [s.roots for s in second]
    for s in first:
        assert residual_norm(p, s.roots) <= 1e-11


def test_settings_from_config():
    settings = SolverSettings.from_config(TestingConfig, seed=9, tol=None)
    assert settings.seed == 9
    assert settings.tol == TestingConfig.BETHE_TOL
