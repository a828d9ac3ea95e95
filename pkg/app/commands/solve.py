import logging

import click

from app.commands import io_options, jobs_option, problem_document, problem_from_document, run_command
from app.models.bethe import SolverSettings, bethe_eigenvalues, solve_bethe
from app.utils.helpers import encode_complex_list
from app.utils.responses import DocumentKind, load_document

logger = logging.getLogger(__name__)


def solution_entry(problem, solution) -> dict:
    chi = bethe_eigenvalues(problem, solution.roots)
    return {
        'roots': encode_complex_list(solution.roots),
        'residual': solution.residual,
        'certified': solution.certified,
        'condition': solution.condition,
        'eigenvalues': encode_complex_list(chi),
        'eigenvalue_sum': abs(sum(chi)),
    }


@click.command('solve')
@io_options
@click.option('--tol', type=float, default=None, help='Residual tolerance of the Newton search.')
@click.option('--seed', type=int, default=None, help='Seed for the random starting points.')
@click.option('--starts', type=click.IntRange(min=0), default=None, help='Number of random starts.')
@jobs_option
@click.pass_context
def solve_cmd(ctx, input_path, output, tol, seed, starts, jobs):
    """Solve the Bethe system of a problem document."""
    config = ctx.obj
    inputs = {'input': input_path}
    tolerances = {'separation_tol': config.POLE_SEPARATION_TOL}

    def body():
        data = load_document(input_path, [DocumentKind.PROBLEM])
        problem, roots = problem_from_document(data, config.POLE_SEPARATION_TOL)
        settings = SolverSettings.from_config(
            config, tol=tol, num_starts=starts, jobs=jobs,
            seed=seed if seed is not None else data.get('seed'),
            seeds=(tuple(roots),) if roots else None
        )
        inputs.update(seed=settings.seed, num_starts=settings.num_starts, jobs=settings.jobs)
        tolerances.update(bethe_tol=settings.tol, dedup_tol=settings.dedup_tol)

        found = solve_bethe(problem, settings)
        certified = [s for s in found if s.certified]
        if len(certified) < len(found):
            logger.warning("Dropping %d uncertified solutions", len(found) - len(certified))
        results = {
            'kind': DocumentKind.SOLUTIONS.value,
            'problem': problem_document(problem),
            'solutions': [solution_entry(problem, s) for s in certified],
            'uncertified': len(found) - len(certified),
            'degenerate': found.degenerate,
        }
        return results, None

    run_command(ctx, 'solve', output, body, inputs=inputs, tolerances=tolerances)
