import numpy as np
import pytest

from app.config import TestingConfig
from app.models.base import ClearanceError
from app.models.bethe import BetheProblem, bethe_eigenvalues, solve_bethe
from app.models.fuchsian import FuchsianConnection, pull_back, reduce_to_scalar
from app.models.monodromy import (
    Arc, LinearSystem, LoopClass, Segment, TransportSettings, classify_matrix, classify_z2,
    default_base, detour, lasso, monodromy_matrices, reverse_path, scalar_companion, transport,
    transport_full
)
from app.models.scalar_oper import SturmLiouville, explicit_solution, oper_from_bethe


def _constant_residue(residue, pole=0):
    residue = np.asarray(residue, dtype=complex)
    return LinearSystem((pole,), lambda z: residue / (z - pole), 'diagonal')


# =============================================================================
# Paths
# =============================================================================

def test_arc_endpoints_and_reversal():
    arc = Arc(0, 2.0, 0.0, np.pi / 2)
    assert abs(arc.start - 2) < 1e-14
    assert abs(arc.end - 2j) < 1e-14
    back = arc.reversed()
    assert abs(back.start - arc.end) < 1e-14
    assert abs(back.end - arc.start) < 1e-14


def test_piece_distances():
    assert abs(Segment(-1, 1).distance_to(1j) - 1) < 1e-14
    assert abs(Segment(-1, 1).distance_to(3) - 2) < 1e-14
    assert abs(Arc(0, 1.0, 0.0, 2 * np.pi).distance_to(0.25) - 0.75) < 1e-14
    # quarter arc from 1 to i, seen from -1
    assert abs(Arc(0, 1.0, 0.0, np.pi / 2).distance_to(-1) - np.sqrt(2)) < 1e-14


def test_lasso_is_closed():
    path = lasso(3 + 1j, 0, 0.5)
    assert abs(path[0].start - (3 + 1j)) < 1e-14
    assert abs(path[-1].end - (3 + 1j)) < 1e-14
    assert abs(path[1].start - path[1].end) < 1e-12


def test_detour_bends_around_obstacle():
    center = 0.1j
    path = detour(-2, 2, [(center, 0.5)])
    assert len(path) == 3
    assert abs(path[0].start + 2) < 1e-14
    assert abs(path[-1].end - 2) < 1e-14
    for first, second in zip(path, path[1:]):
        assert abs(first.end - second.start) < 1e-12
    assert all(piece.distance_to(center) >= 0.5 - 1e-12 for piece in path)
    # minor arc stays on the chord's side of the center
    assert abs(path[1].point(0.5) - (-0.4j)) < 1e-12


def test_detour_ignores_distant_obstacles():
    path = detour(-2, 2, [(3j, 0.5), (5, 1.0)])
    assert path == [Segment(-2, 2)]


def test_lasso_detours_across_the_base_ray():
    base = default_base([0, 1, 2 + 1j])
    path = lasso(base, 1, 0.5, obstacles=[(2 + 1j, 0.5)])
    assert len(path) == 7
    assert min(piece.distance_to(2 + 1j) for piece in path) >= 0.5 - 1e-12
    assert abs(path[0].start - base) < 1e-14
    assert abs(path[-1].end - base) < 1e-12


# =============================================================================
# Transport
# =============================================================================

def test_zero_system_has_trivial_transport():
    sys = LinearSystem((0,), lambda z: np.zeros((2, 2)), 'zero')
    assert np.allclose(transport(sys, lasso(2, 0, 0.5)), np.eye(2), atol=1e-12)


def test_integer_diagonal_residue_gives_identity():
    M = transport(_constant_residue(np.diag([1, -1])), lasso(2, 0, 0.5))
    assert np.allclose(M, np.eye(2), atol=1e-8)


def test_half_integer_diagonal_residue_gives_minus_identity():
    M = transport(_constant_residue(np.diag([0.5, -0.5])), lasso(2, 0, 0.5))
    assert np.allclose(M, -np.eye(2), atol=1e-8)


def test_reversed_loop_gives_inverse():
    sys = _constant_residue([[0.3, 1], [0.2, -0.3]])
    path = lasso(2 + 1j, 0, 0.7)
    M = transport(sys, path)
    M_back = transport(sys, reverse_path(path))
    assert np.allclose(M @ M_back, np.eye(2), atol=1e-8)


def test_transport_is_path_independent():
    sys = _constant_residue([[0.3, 1], [0.2, -0.3]])
    small = transport(sys, lasso(2 + 1j, 0, 0.4))
    large = transport(sys, lasso(2 + 1j, 0, 1.2))
    assert np.allclose(small, large, atol=1e-8)


def test_determinant_follows_trace_integral():
    result = transport_full(_constant_residue([[0.75, 1], [0, 0.25]]), lasso(2, 0, 0.5))
    assert result.det_gap < 1e-8
    assert abs(result.det - np.exp(2j * np.pi)) < 1e-8


def test_clearance_violation():
    sys = _constant_residue(np.diag([1, -1]))
    with pytest.raises(ClearanceError) as excinfo:
        transport(sys, [Segment(-1, 1)])
    assert excinfo.value.details['pole'] == 0


# =============================================================================
# Classification
# =============================================================================

def test_classify_matrices():
    assert classify_matrix(np.eye(2)).kind == LoopClass.PLUS_IDENTITY
    assert classify_matrix(-np.eye(2)).kind == LoopClass.MINUS_IDENTITY
    scalar = classify_matrix(1j * np.eye(2))
    assert scalar.kind == LoopClass.SCALAR
    assert abs(scalar.scalar - 1j) < 1e-14
    jordan = classify_matrix([[1, 1], [0, 1]])
    assert jordan.kind == LoopClass.NONTRIVIAL
    assert jordan.resonant
    assert jordan.deviation > 0.5


# =============================================================================
# Monodromy of opers and connections
# =============================================================================

def test_bethe_oper_has_minus_signs(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.5, -1.5])
    report = monodromy_matrices(scalar_companion(op))
    ok, signs = classify_z2(report)
    assert ok
    assert signs == ['-', '-']
    assert report.max_det_gap < 1e-8
    assert report.product_deviation < 1e-6


def test_perturbed_oper_is_detected(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.6, -1.5])
    report = monodromy_matrices(scalar_companion(op))
    ok, signs = classify_z2(report)
    assert not ok
    assert any(loop.classification.kind == LoopClass.NONTRIVIAL for loop in report.loops)
    assert max(loop.classification.deviation for loop in report.loops) > 1e-2


def test_regular_poles_give_plus_signs():
    op = SturmLiouville((0, 1), (0, 0), (0, 0))
    ok, signs = classify_z2(monodromy_matrices(scalar_companion(op)))
    assert ok
    assert signs == ['+', '+']


def test_loop_product_relation():
    rng = np.random.default_rng(8)
    residues = rng.standard_normal((3, 2, 2)) * 0.3 + 1j * rng.standard_normal((3, 2, 2)) * 0.3
    residues -= residues.mean(axis=0)
    A = FuchsianConnection((0, 1, 2 + 1j), residues)
    report = monodromy_matrices(LinearSystem.from_connection(A))
    assert report.product_deviation < 1e-6
    assert [loop.index for loop in report.loops] != []
    assert report.to_dict()['loops'][0]['classification']['kind'] == 'nontrivial'


def test_pole_across_base_ray_is_detoured():
    op = SturmLiouville((0, 1, 2 + 1j), (0, 0, 0), (0, 0, 0))
    report = monodromy_matrices(scalar_companion(op))
    ok, signs = classify_z2(report)
    assert ok
    assert signs == ['+', '+', '+']
    assert report.converged


def test_bethe_oper_with_pole_across_base_ray():
    problem = BetheProblem((0, 1, 2 + 1j), (1, 1, 1), 1)
    solutions = [s for s in solve_bethe(problem) if s.certified]
    assert solutions
    for solution in solutions:
        op = oper_from_bethe(problem, bethe_eigenvalues(problem, solution.roots))
        ok, signs = classify_z2(monodromy_matrices(scalar_companion(op)))
        assert ok
        assert signs == ['-', '-', '-']


def test_three_point_bethe_opers(three_point_problem):
    solutions = [s for s in solve_bethe(three_point_problem) if s.certified]
    found = sorted(s.roots[0].real for s in solutions)
    assert np.allclose(found, [1 - 1 / np.sqrt(3), 1 + 1 / np.sqrt(3)], atol=1e-9)
    for solution in solutions:
        op = oper_from_bethe(three_point_problem, bethe_eigenvalues(three_point_problem, solution.roots))
        report = monodromy_matrices(scalar_companion(op))
        ok, signs = classify_z2(report)
        assert ok
        assert signs == ['-', '-', '-']
        assert report.product_deviation < 1e-7


def test_companion_transport_carries_explicit_solution(two_point_problem):
    roots = [0.5]
    op = oper_from_bethe(two_point_problem, bethe_eigenvalues(two_point_problem, roots))
    psi = explicit_solution(two_point_problem, roots)
    # upper half plane keeps every (z - p) off the principal branch cut
    a, b = 0.5 + 1j, 2 + 0.5j
    T = transport(scalar_companion(op), [Segment(a, 1.5 + 2j), Segment(1.5 + 2j, b)])
    carried = T @ np.array([psi(a), psi.derivative(a)])
    assert np.allclose(carried, [psi(b), psi.derivative(b)], atol=1e-8)


def test_pull_back_monodromy_matches_reduced_oper(pullback_instance):
    pulled = pull_back(pullback_instance['Z'], pullback_instance['W'], pullback_instance['s'],
                       [pullback_instance['gammas'][0]])
    connection_report = monodromy_matrices(LinearSystem.from_connection(pulled.connection))
    ok, signs = classify_z2(connection_report)
    assert ok
    assert signs == ['+', '+', '+']

    # the scalar reduction picks up a square root of the off-diagonal entry at every pole
    reduction = reduce_to_scalar(pulled.connection)
    ok, signs = classify_z2(monodromy_matrices(scalar_companion(reduction.oper)))
    assert ok
    assert signs == ['-', '-', '-', '-']


def test_parallel_loops_match_sequential(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.5, -1.5])
    sequential = monodromy_matrices(scalar_companion(op))
    parallel = monodromy_matrices(scalar_companion(op), settings=TransportSettings(jobs=2))
    for a, b in zip(sequential.matrices, parallel.matrices):
        assert np.allclose(a, b, atol=1e-12)


def test_base_on_pole_is_rejected(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.5, -1.5])
    with pytest.raises(ClearanceError):
        monodromy_matrices(scalar_companion(op), base=1.0)


def test_report_records_tolerance(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.5, -1.5])
    report = monodromy_matrices(scalar_companion(op), settings=TransportSettings(tol=1e-4))
    assert report.converged
    assert report.tol_used == pytest.approx(1e-4 / 100 ** report.refinements)
    assert report.product_deviation <= 1e-7
    document = report.to_dict()
    assert document['converged'] is True
    assert document['refinements'] == report.refinements


def test_unconverged_product_fails_classification(two_point_problem):
    op = oper_from_bethe(two_point_problem, [1.5, -1.5])
    report = monodromy_matrices(scalar_companion(op))
    report.converged = False
    ok, signs = classify_z2(report)
    assert not ok
    assert signs == ['-', '-']


def test_default_base_is_off_axis():
    base = default_base([0, 1, 2])
    assert base.real == 3
    assert base.imag > 0


def test_settings_from_config():
    settings = TransportSettings.from_config(TestingConfig, tol=1e-9, jobs=None)
    assert settings.tol == 1e-9
    assert settings.clearance == TestingConfig.MONODROMY_CLEARANCE
