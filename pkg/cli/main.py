"""
Command-line entry point for stain-learn
"""
import sys

import click
import structlog
from pydantic import ValidationError

from cli.commands.baseline import baseline
from cli.commands.evaluate import evaluate
from cli.commands.predict import predict
from cli.commands.report import report
from cli.commands.synth import synth
from cli.commands.train import train
from config import settings
from errors import NslError, ValidationFailure
from utils.logger import setup_logging
from version import __version__

logger = structlog.get_logger(__name__)


class NslGroup(click.Group):
    """Click group translating library errors into the tool's exit codes.

    0 success, 1 validation (bad flags included), 2 data error, 3 numeric failure.
    """

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except NslError as e:
            logger.error("command_failed", error=type(e).__name__, reason=str(e))
            click.echo(f"Error: {type(e).__name__}: {e}", err=True)
            ctx.exit(e.exit_code)
        except ValidationError as e:
            first = e.errors()[0] if e.errors() else {}
            where = ".".join(str(part) for part in first.get("loc", ()))
            message = f"{where}: {first.get('msg', e)}" if where else str(e)
            click.echo(f"Error: invalid configuration: {message}", err=True)
            ctx.exit(ValidationFailure.exit_code)

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        if not standalone_mode:
            return super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            e.show()
            sys.exit(ValidationFailure.exit_code)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        sys.exit(rv if isinstance(rv, int) else 0)


COMMANDS = [synth, train, predict, evaluate, baseline, report]


def load_commands(group: click.Group) -> None:
    for command in COMMANDS:
        group.add_command(command)


@click.group(cls=NslGroup, context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--log-level", default=None, help="Logging level  [default: NSL_LOG_LEVEL or INFO]")
@click.option("--log-format", type=click.Choice(["console", "json"]), default=None,
              help="Log rendering  [default: NSL_LOG_FORMAT or console]")
@click.version_option(__version__, prog_name="stain-learn")
def cli(log_level, log_format):
    """Learn stain deconvolution matrices that predict spot gene expression."""
    setup_logging(log_level or settings.log_level, log_format or settings.log_format)


load_commands(cli)


if __name__ == "__main__":
    cli()
