from dotenv import load_dotenv

# Load environment variables first, before importing modules that depend on them
load_dotenv()

import logging
import sys
from typing import List, Optional

import click
import typer
from pydantic import ValidationError

from src.cli.commands.augment import augment
from src.cli.commands.evaluate import app as eval_app
from src.cli.commands.explain import app as explain_app
from src.cli.commands.synth import app as synth_app
from src.cli.commands.train import train
from src.config import LOG_LEVEL
from src.errors import TwinError
from src.reports.emit import version_string

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

app = typer.Typer(
    name="twincbr",
    help="Twin-system explanations: a network paired with a case base.",
    no_args_is_help=True,
    add_completion=False,
)


def _show_version(value: bool):
    if value:
        typer.echo(version_string())
        raise typer.Exit()


@app.callback()
def main(
    version: Optional[bool] = typer.Option(
        None, "--version", callback=_show_version, is_eager=True, help="Print the version and exit."
    ),
):
    pass


app.command("train")(train)
app.command("augment")(augment)
app.add_typer(explain_app, name="explain")
app.add_typer(eval_app, name="eval")
app.add_typer(synth_app, name="synth")


def run(argv: Optional[List[str]] = None) -> int:
    """
    Entry point. Exit codes:
      0 success, 1 usage error, 2 data or model error.
    """
    logging.basicConfig(level=getattr(logging, LOG_LEVEL.upper(), logging.INFO))
    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="twincbr", standalone_mode=False)
    except click.exceptions.NoSuchCommand as exc:
        typer.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            typer.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        typer.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        typer.echo("error: aborted", err=True)
        return EXIT_USAGE
    except ValidationError as exc:
        # out-of-range flag values rejected by a pydantic model
        first = exc.errors()[0]
        typer.echo(f"error: invalid value for {first['loc'][-1]}: {first['msg']}", err=True)
        return EXIT_USAGE
    except (TwinError, OSError) as exc:
        typer.echo(f"error: {exc}", err=True)
        return EXIT_FAILURE
    return result if isinstance(result, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(run())
