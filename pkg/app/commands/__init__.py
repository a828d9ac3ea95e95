"""Shared plumbing for the command modules: options, document codecs and the run wrapper."""
import logging
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np

from app.models.base import GaudinError, InputError
from app.models.bethe import BetheProblem, BetheRoots
from app.models.fuchsian import FuchsianConnection
from app.models.scalar_oper import QuasiPolySolution, SturmLiouville
from app.models.calgebra import CPoly, poly_roots
from app.utils.helpers import (
    decode_complex, decode_complex_list, decode_matrix, encode_complex_list, encode_matrix
)
from app.utils.responses import (
    DocumentKind, EXIT_NUMERICAL_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED, error_response,
    exit_code_for, gaudin_error_response, load_document, success_response, validation_error,
    write_document
)
from app.utils.validators import (
    validate_connection_document, validate_oper_document, validate_problem_document
)

logger = logging.getLogger(__name__)


# =============================================================================
# Options
# =============================================================================

def io_options(fn: Callable) -> Callable:
    fn = click.option('-o', '--output', default='-', show_default=True,
                      help='Output file (default stdout).')(fn)
    fn = click.option('-i', '--input', 'input_path', default='-', show_default=True,
                      type=click.Path(allow_dash=True, dir_okay=False),
                      help='Input JSON document (default stdin).')(fn)
    return fn


def jobs_option(fn: Callable) -> Callable:
    return click.option('--jobs', type=click.IntRange(min=1), envvar='GAUDIN_JOBS', default=None,
                        help='Parallelism cap for multi-start and per-loop work.')(fn)


# =============================================================================
# Document codecs
# =============================================================================

def problem_from_document(data: Dict, separation_tol: float = 1e-8) -> Tuple[BetheProblem, Optional[List[complex]]]:
    is_valid, errors = validate_problem_document(data)
    if not is_valid:
        raise validation_error(errors)
    roots = decode_complex_list(data['roots']) if data.get('roots') is not None else None
    num_roots = data.get('num_roots', len(roots) if roots is not None else 0)
    problem = BetheProblem(
        tuple(decode_complex_list(data['poles'])),
        tuple(decode_complex(w) for w in data['weights']),
        num_roots,
        tuple(decode_complex_list(data.get('moving_poles') or [])),
        separation_tol,
    )
    return problem, roots


def problem_document(problem: BetheProblem, roots=None) -> Dict[str, Any]:
    document = {
        'kind': DocumentKind.PROBLEM.value,
        'poles': encode_complex_list(problem.poles),
        'weights': list(problem.weights),
        'num_roots': problem.num_roots,
    }
    if problem.moving_poles:
        document['moving_poles'] = encode_complex_list(problem.moving_poles)
    if roots is not None:
        document['roots'] = encode_complex_list(roots.roots if isinstance(roots, BetheRoots) else roots)
    return document


def load_problem(path: str, index: int = 0, separation_tol: float = 1e-8) -> Tuple[BetheProblem, Optional[List[complex]]]:
    """Problem document, or the ``index``-th entry of a solutions document."""
    data = load_document(path, [DocumentKind.PROBLEM, DocumentKind.SOLUTIONS])
    if data.get('kind') == DocumentKind.SOLUTIONS.value:
        solutions = data.get('solutions') or []
        if not 0 <= index < len(solutions):
            raise InputError(f"Solution index {index} out of range ({len(solutions)} solutions)")
        merged = dict(data.get('problem') or {})
        merged['roots'] = solutions[index]['roots']
        merged['num_roots'] = len(merged['roots'])
        data = merged
    return problem_from_document(data, separation_tol)


def oper_from_document(data: Dict) -> Tuple[SturmLiouville, Optional[QuasiPolySolution]]:
    is_valid, errors = validate_oper_document(data)
    if not is_valid:
        raise validation_error(errors)
    op = SturmLiouville(
        tuple(decode_complex_list(data['poles'])),
        tuple(decode_complex_list(data['double_coeffs'])),
        tuple(decode_complex_list(data['residues'])),
        data.get('convention', 'minus'),
    )
    solution = None
    if data.get('solution'):
        sol = data['solution']
        solution = QuasiPolySolution(
            tuple(decode_complex_list(sol['poles'])),
            tuple(decode_complex_list(sol['exponents'])),
            CPoly.from_roots(decode_complex_list(sol.get('roots') or [])),
        )
    return op, solution


def oper_document(op: SturmLiouville, solution: Optional[QuasiPolySolution] = None) -> Dict[str, Any]:
    document = {
        'kind': DocumentKind.OPER.value,
        'convention': op.convention.value,
        'poles': encode_complex_list(op.poles),
        'double_coeffs': encode_complex_list(op.double_coeffs),
        'residues': encode_complex_list(op.residues),
    }
    if solution is not None:
        roots = poly_roots(solution.phi) if solution.phi.degree >= 1 else []
        document['solution'] = {
            'poles': encode_complex_list(solution.poles),
            'exponents': encode_complex_list(solution.exponents),
            'roots': encode_complex_list(list(roots)),
        }
    return document


def connection_from_document(data: Dict) -> FuchsianConnection:
    is_valid, errors = validate_connection_document(data)
    if not is_valid:
        raise validation_error(errors)
    return FuchsianConnection(
        tuple(decode_complex_list(data['poles'])),
        np.array([decode_matrix(m) for m in data['residues']])
    )


def connection_document(A: FuchsianConnection) -> Dict[str, Any]:
    return {
        'kind': DocumentKind.CONNECTION.value,
        'poles': encode_complex_list(A.poles),
        'residues': [encode_matrix(Ai) for Ai in A.residues],
    }


# =============================================================================
# Run wrapper
# =============================================================================

def run_command(ctx: click.Context, command: str, output: str,
                body: Callable[[], Tuple[Any, Optional[bool]]],
                inputs: Optional[Dict] = None, tolerances: Optional[Dict] = None) -> None:
    """Runs ``body`` and writes the run report or error document, then exits with the contract code.

    ``body`` returns ``(results, verified)``; ``verified`` is None when nothing was checked.
    """
    config = ctx.obj
    started = time.perf_counter()
    try:
        results, verified = body()
    except GaudinError as e:
        logger.error("%s failed at stage %s: %s", command, e.stage or command, e.message)
        write_document(gaudin_error_response(e, command), output)
        code = exit_code_for(e)
    except Exception as e:
        logger.exception("Unexpected failure in %s", command)
        write_document(error_response(str(e), 'internal_error', command=command), output)
        code = EXIT_NUMERICAL_ERROR
    else:
        document = success_response(
            command, results, inputs=inputs, tolerances=tolerances,
            started_at=started, version=config.VERSION, verified=verified
        )
        write_document(document, output)
        code = EXIT_OK if verified in (None, True) else EXIT_VERIFICATION_FAILED
    ctx.exit(code)
