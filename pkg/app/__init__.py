# Gaudin/Hecke toolkit - CLI Application Factory
import logging

import click

from app.config import get_config
from app.models.calgebra import init_root_finding

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.WARNING), format=LOG_FORMAT)
    logging.getLogger().setLevel(getattr(logging, str(level).upper(), logging.WARNING))


def create_cli(config_object=None) -> click.Group:
    # Load configuration
    config = config_object if config_object is not None else get_config()
    init_root_finding(config)

    @click.group(name='gaudin', help='Bethe ansatz, opers, monodromy and Hecke transformations for the sl2 Gaudin model.')
    @click.version_option(config.VERSION, prog_name='gaudin')
    @click.option('--log-level', default=None, help='Override LOG_LEVEL from the environment.')
    @click.pass_context
    def cli(ctx, log_level):
        configure_logging(log_level or config.LOG_LEVEL)
        ctx.obj = config

    # Register command groups
    from app.commands.solve import solve_cmd
    from app.commands.monodromy import monodromy_cmd
    from app.commands.pipeline import (
        dual_cmd, oper_cmd, pullback_cmd, reduce_cmd, repcheck_cmd, schlesinger_cmd
    )

    for command in (solve_cmd, monodromy_cmd, oper_cmd, pullback_cmd, reduce_cmd,
                    schlesinger_cmd, dual_cmd, repcheck_cmd):
        cli.add_command(command)

    return cli
