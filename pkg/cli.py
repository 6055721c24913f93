import sys
from typing import Optional, Sequence

import click

from core.middlewares import ExitStatus
from main import app


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand and return its exit status.

    Usage errors (unknown options, bad choices) count as configuration
    errors; everything else is mapped by the command wrappers.

    Example:
        To reproduce the ground-state energy of the 14-spin chain:
            $ python cli.py ground-state --config chain14.cfg

        To run the whole pipeline with random-spin feedback:
            $ python cli.py full --scheme 1 --seed 7 --out run7.csv
    """
    try:
        status = app.main(args=list(argv) if argv is not None else None, prog_name="spincool", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return ExitStatus.CONFIG_ERROR
    except click.ClickException as exc:
        exc.show()
        return ExitStatus.CONFIG_ERROR
    return int(status) if isinstance(status, int) else ExitStatus.OK


if __name__ == "__main__":
    sys.exit(cli_dispatch())
