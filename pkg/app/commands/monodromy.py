import logging
from typing import Optional

import click

from app.commands import connection_from_document, io_options, jobs_option, oper_from_document, run_command
from app.models.base import InputError
from app.models.monodromy import (
    LinearSystem, TransportSettings, classify_z2, monodromy_matrices, scalar_companion
)
from app.utils.helpers import decode_complex
from app.utils.responses import DocumentKind, load_document

logger = logging.getLogger(__name__)


def parse_base(value: Optional[str]) -> Optional[complex]:
    if value is None:
        return None
    text = value.strip()
    try:
        if ',' in text:
            re_part, im_part = text.split(',', 1)
            return complex(float(re_part), float(im_part))
        return decode_complex(text)
    except (ValueError, InputError):
        raise InputError(f"Cannot read a base point from {value!r}; use 're,im'")


def system_from_document(data: dict) -> LinearSystem:
    if data.get('kind') == DocumentKind.CONNECTION.value:
        return LinearSystem.from_connection(connection_from_document(data))
    op, _ = oper_from_document(data)
    return scalar_companion(op)


def monodromy_results(system: LinearSystem, settings: TransportSettings,
                      base: Optional[complex] = None) -> dict:
    report = monodromy_matrices(system, base, settings)
    verdict, signs = classify_z2(report, settings.classify_tol)
    results = {'kind': DocumentKind.MONODROMY.value, 'system': system.label}
    results.update(report.to_dict())
    results.update(z2=verdict, signs=signs)
    return results


@click.command('monodromy')
@io_options
@click.option('--tol', type=float, default=None, help='Local error target of the integrator.')
@click.option('--classify-tol', type=float, default=None, help='Distance to ±I accepted as trivial.')
@click.option('--clearance', type=float, default=None, help='Minimal distance of paths from poles.')
@click.option('--base', default=None, help="Base point as 're,im' (default above and right of all poles).")
@jobs_option
@click.pass_context
def monodromy_cmd(ctx, input_path, output, tol, classify_tol, clearance, base, jobs):
    """Loop monodromy of an oper (companion form) or a Fuchsian connection; exit 1 unless all loops are ±I."""
    config = ctx.obj
    settings = TransportSettings.from_config(config, tol=tol, classify_tol=classify_tol,
                                             clearance=clearance, jobs=jobs)
    inputs = {'input': input_path, 'base': base, 'jobs': settings.jobs}
    tolerances = {'integrator_tol': settings.tol, 'classify_tol': settings.classify_tol,
                  'clearance': settings.clearance}

    def body():
        data = load_document(input_path, [DocumentKind.OPER, DocumentKind.CONNECTION])
        results = monodromy_results(system_from_document(data), settings, parse_base(base))
        return results, results['z2']

    run_command(ctx, 'monodromy', output, body, inputs=inputs, tolerances=tolerances)
