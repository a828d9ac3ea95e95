import logging
from typing import Dict, List, Optional

import click

from app.commands import (
    connection_document, connection_from_document, io_options, jobs_option, load_problem,
    oper_document, problem_document, run_command
)
from app.commands.monodromy import monodromy_results
from app.commands.solve import solution_entry
from app.models.base import InputError
from app.models.bethe import BetheProblem, SolverSettings, bethe_eigenvalues, solve_bethe
from app.models.fuchsian import apply_connection, pull_back, reduce_to_scalar, u_potential_chain, validate_connection
from app.models.gaudin_rep import (
    TensorModel, bethe_vector, check_eigen, commutator_norms, gaudin_hamiltonians, joint_spectrum,
    spectrum_contains
)
from app.models.monodromy import TransportSettings, scalar_companion
from app.models.scalar_oper import apply_oper, explicit_solution, oper_from_bethe
from app.models.schlesinger import dual_involution_check, dual_solution, hecke_on_bethe
from app.utils.helpers import encode_complex_list, sample_points
from app.utils.responses import DocumentKind, load_document
from app.utils.validators import validate_pattern

logger = logging.getLogger(__name__)


# =============================================================================
# Helper Functions
# =============================================================================

def _require_roots(problem: BetheProblem, roots: Optional[List[complex]]) -> List[complex]:
    if roots is None:
        if problem.num_roots == 0:
            return []
        raise InputError("The document carries no roots; run `solve` first or add a roots field")
    return roots


def _exponents(problem: BetheProblem) -> List[complex]:
    return [(complex(lam) + 1) / 2 for lam in problem.weights]


def _oper_verdict(problem: BetheProblem, roots, settings: TransportSettings) -> Dict:
    op = oper_from_bethe(problem, bethe_eigenvalues(problem, roots))
    results = monodromy_results(scalar_companion(op), settings)
    return {'z2': results['z2'], 'signs': results['signs'], 'product_deviation': results['product_deviation']}


def _index_option(fn):
    return click.option('--index', type=click.IntRange(min=0), default=0, show_default=True,
                        help='Which solution of a solutions document to use.')(fn)


# =============================================================================
# Oper
# =============================================================================

@click.command('oper')
@io_options
@_index_option
@click.option('--tol', type=float, default=1e-9, show_default=True, help='Accepted annihilation residual.')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for sample points.')
@click.option('--verify', is_flag=True, default=False, help='Append residual and monodromy sections.')
@jobs_option
@click.pass_context
def oper_cmd(ctx, input_path, output, index, tol, seed, verify, jobs):
    """Build the scalar oper and its explicit solution from Bethe data."""
    config = ctx.obj
    tolerances = {'annihilation_tol': tol}

    def body():
        problem, roots = load_problem(input_path, index, config.POLE_SEPARATION_TOL)
        roots = _require_roots(problem, roots)
        chi = bethe_eigenvalues(problem, roots)
        op = oper_from_bethe(problem, chi)
        solution = explicit_solution(problem, roots)
        results = oper_document(op, solution)
        results['eigenvalues'] = encode_complex_list(chi)
        if not verify:
            return results, None

        residual = apply_oper(op, solution, seed=seed)
        settings = TransportSettings.from_config(config, jobs=jobs)
        tolerances.update(integrator_tol=settings.tol, classify_tol=settings.classify_tol)
        verdict = monodromy_results(scalar_companion(op), settings)
        results['verification'] = {
            'annihilation': residual.to_dict(),
            'monodromy': {'z2': verdict['z2'], 'signs': verdict['signs']},
        }
        return results, residual.passed(tol) and verdict['z2']

    run_command(ctx, 'oper', output, body, inputs={'input': input_path, 'index': index}, tolerances=tolerances)


# =============================================================================
# Pull-back
# =============================================================================

@click.command('pullback')
@io_options
@_index_option
@click.option('--c', 'c_value', type=complex, default=1 + 0j, show_default=True,
              help='Normalization constant of the off-diagonal entry.')
@click.option('--strict/--no-strict', default=None, help='Fail (default) or warn on a Bethe precondition miss.')
@click.option('--tol', type=float, default=1e-9, show_default=True, help='Accepted residuals under --verify.')
@click.option('--verify', is_flag=True, default=False, help='Append normalization and residual sections.')
@click.pass_context
def pullback_cmd(ctx, input_path, output, index, c_value, strict, tol, verify):
    """Fuchsian connection and matrix solution built from Bethe data over fixed and moving poles."""
    config = ctx.obj
    strict = config.PULLBACK_STRICT if strict is None else strict
    tolerances = {'bethe_tol': config.PULLBACK_BETHE_TOL, 'verify_tol': tol}

    def body():
        problem, roots = load_problem(input_path, index, config.POLE_SEPARATION_TOL)
        roots = _require_roots(problem, roots)
        result = pull_back(problem.poles, problem.moving_poles, _exponents(problem), roots, c=c_value,
                           bethe_tol=config.PULLBACK_BETHE_TOL, strict=strict,
                           separation_tol=config.POLE_SEPARATION_TOL)
        results = connection_document(result.connection)
        results['solution'] = {
            'exponents': encode_complex_list(result.solution.exponents),
            'phi1': encode_complex_list(result.solution.phi1.coeffs),
            'phi2': encode_complex_list(result.solution.phi2.coeffs),
        }
        results['alphas'] = encode_complex_list(result.alphas)
        if not verify:
            return results, None

        report = validate_connection(result.connection, tol=tol)
        residual = apply_connection(result.connection, result.solution)
        results['verification'] = {
            'normalization': report.to_dict(),
            'connection_residual': residual,
            'bethe_residual': result.bethe_residual,
            'eigenvector_gap': result.eigenvector_gap,
            'kappa_gap': result.kappa_gap,
        }
        passed = report.passed and residual <= tol and result.eigenvector_gap <= 1e3 * tol \
            and result.kappa_gap <= 1e3 * tol
        return results, passed

    run_command(ctx, 'pullback', output, body, inputs={'input': input_path, 'c': c_value, 'strict': strict},
                tolerances=tolerances)


# =============================================================================
# Reduction
# =============================================================================

@click.command('reduce')
@io_options
@click.option('--component', type=click.Choice(['first', 'second']), default='first', show_default=True)
@click.option('--tol', type=float, default=1e-9, show_default=True,
              help='Accepted gap between the closed-form and chain potentials.')
@click.option('--verify', is_flag=True, default=False, help='Cross-check against the chain formula.')
@click.pass_context
def reduce_cmd(ctx, input_path, output, component, tol, verify):
    """Reduce a Fuchsian connection to the scalar oper of one component."""
    config = ctx.obj

    def body():
        A = connection_from_document(load_document(input_path, [DocumentKind.CONNECTION]))
        reduction = reduce_to_scalar(A, component, separation_tol=config.POLE_SEPARATION_TOL)
        results = oper_document(reduction.oper)
        results.update(
            component=component,
            moving_poles=encode_complex_list(reduction.moving_poles),
            constant=reduction.constant,
        )
        if not verify:
            return results, None
        points = sample_points(list(reduction.oper.poles), count=20)
        gap = max(
            abs(reduction.oper.potential(z) - u_potential_chain(A, z, component)) / max(1.0, abs(reduction.oper.potential(z)))
            for z in points
        )
        results['verification'] = {'chain_formula_gap': gap}
        return results, gap <= tol

    run_command(ctx, 'reduce', output, body, inputs={'input': input_path, 'component': component},
                tolerances={'chain_tol': tol})


# =============================================================================
# Schlesinger / dual
# =============================================================================

@click.command('schlesinger')
@io_options
@_index_option
@click.option('--at', 'indices', type=int, nargs=2, required=True, help='Indices i j of the two fixed poles.')
@click.option('--pattern', required=True, help="Weight shifts at (z_i, z_j), e.g. '+1,-1'.")
@click.option('--tol', type=float, default=None, help='Bethe residual accepted for the input and transformed roots.')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for the factorization sample points.')
@click.option('--verify', is_flag=True, default=False, help='Append residual and monodromy verdicts.')
@jobs_option
@click.pass_context
def schlesinger_cmd(ctx, input_path, output, index, indices, pattern, tol, seed, verify, jobs):
    """Apply a two-point Hecke transformation to Bethe data."""
    config = ctx.obj
    bethe_tol = config.PULLBACK_BETHE_TOL if tol is None else tol
    tolerances = {'bethe_tol': bethe_tol, 'residue_tol': config.RESIDUE_TOL}

    def body():
        ok, shifts, error = validate_pattern(pattern)
        if not ok:
            raise InputError(error)
        problem, roots = load_problem(input_path, index, config.POLE_SEPARATION_TOL)
        roots = _require_roots(problem, roots)
        i, j = indices
        result = hecke_on_bethe(problem, roots, i, j, shifts, bethe_tol=bethe_tol,
                                residue_tol=config.RESIDUE_TOL, seed=seed)
        results = {
            'kind': DocumentKind.TRANSFORM.value,
            'problem': problem_document(result.problem, result.roots),
            'report': result.report,
        }
        if not verify:
            return results, None

        settings = TransportSettings.from_config(config, jobs=jobs)
        before = _oper_verdict(problem, roots, settings)
        after = _oper_verdict(result.problem, result.roots.roots, settings)
        results['verification'] = {
            'residual': result.roots.residual,
            'monodromy_before': before,
            'monodromy_after': after,
        }
        return results, result.roots.certified and before['z2'] == after['z2']

    run_command(ctx, 'schlesinger', output, body,
                inputs={'input': input_path, 'indices': list(indices), 'pattern': pattern, 'seed': seed},
                tolerances=tolerances)


@click.command('dual')
@io_options
@_index_option
@click.option('--tol', type=float, default=None, help='Bethe residual accepted for the input and dual roots.')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed for sample points under --verify.')
@click.option('--verify', is_flag=True, default=False, help='Append residuals and the double-dual check.')
@click.pass_context
def dual_cmd(ctx, input_path, output, index, tol, seed, verify):
    """Bethe data of the dual oper (second component of the matrix system)."""
    config = ctx.obj
    bethe_tol = config.PULLBACK_BETHE_TOL if tol is None else tol

    def body():
        problem, roots = load_problem(input_path, index, config.POLE_SEPARATION_TOL)
        roots = _require_roots(problem, roots)
        result = dual_solution(problem, roots, bethe_tol=bethe_tol)
        results = {
            'kind': DocumentKind.TRANSFORM.value,
            'problem': problem_document(result.problem, result.roots),
            'report': result.report,
        }
        if not verify:
            return results, None
        dual = result.problem
        pulled = pull_back(dual.poles, dual.moving_poles, _exponents(dual), result.roots.roots,
                           bethe_tol=bethe_tol, strict=False, separation_tol=config.POLE_SEPARATION_TOL)
        connection_residual = apply_connection(pulled.connection, pulled.solution, seed=seed)
        results['verification'] = {
            'residual': result.roots.residual,
            'connection_residual': connection_residual,
            'double_dual': dual_involution_check(problem, roots),
        }
        return results, result.roots.certified and connection_residual <= 1e3 * bethe_tol

    run_command(ctx, 'dual', output, body, inputs={'input': input_path, 'index': index, 'seed': seed},
                tolerances={'bethe_tol': bethe_tol})


# =============================================================================
# Representation check
# =============================================================================

@click.command('repcheck')
@io_options
@click.option('--tol', type=float, default=1e-8, show_default=True, help='Eigenvalue match tolerance.')
@click.option('--seed', type=int, default=None, help='Seed for the Bethe search.')
@jobs_option
@click.pass_context
def repcheck_cmd(ctx, input_path, output, tol, seed, jobs):
    """Compare Bethe eigenvalues with the spectrum of the Gaudin Hamiltonians on the tensor product."""
    config = ctx.obj

    def body():
        problem, roots = load_problem(input_path, 0, config.POLE_SEPARATION_TOL)
        settings = SolverSettings.from_config(config, seed=seed, jobs=jobs,
                                              seeds=(tuple(roots),) if roots else None)
        solutions = [s for s in solve_bethe(problem, settings) if s.certified]

        model = TensorModel(problem.all_poles, problem.all_weights, max_dim=config.REP_MAX_DIM,
                            separation_tol=config.POLE_SEPARATION_TOL)
        hams = gaudin_hamiltonians(model)
        spectrum = joint_spectrum(hams, seed=settings.seed)

        rows = []
        for solution in solutions:
            entry = solution_entry(problem, solution)
            chi = bethe_eigenvalues(problem, solution.roots)
            vector = bethe_vector(model, solution.roots)
            entry['in_spectrum'] = spectrum_contains(spectrum, chi, tol)
            if float((abs(vector) ** 2).sum()) > 0:
                check = check_eigen(hams, vector, tol=tol)
                entry['eigen_residual'] = max(check.residuals, default=0.0)
                entry['vector_eigenvalue_gap'] = max((abs(a - b) for a, b in zip(check.eigenvalues, chi)), default=0.0)
            else:
                entry['eigen_residual'] = None
            rows.append(entry)

        results = {
            'kind': DocumentKind.REPCHECK.value,
            'problem': problem_document(problem),
            'dimension': model.dim,
            'commutator_norm': commutator_norms(hams),
            'casimir_deviation': max((dev for _, dev in model.casimir_values()), default=0.0),
            'spectrum_size': len(spectrum),
            'solutions': rows,
        }
        passed = all(row['in_spectrum'] for row in rows)
        return results, passed

    run_command(ctx, 'repcheck', output, body, inputs={'input': input_path, 'seed': seed},
                tolerances={'match_tol': tol})
