import functools
from enum import IntEnum

import click

from core.exceptions import ConfigurationError, SpinCoolError
from core.logger import logger


class ExitStatus(IntEnum):
    OK = 0
    CONFIG_ERROR = 1
    RUNTIME_ERROR = 2
    INCOMPLETE_POLARIZATION = 3


def handle_errors(command):
    """
    Wrap a command callback so failures become diagnostics and exit statuses.

    Configuration errors exit with 1, every other simulator error with 2.
    A callback may return an ExitStatus (e.g. incomplete polarisation) which
    becomes the process status.
    """

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            status = command(*args, **kwargs)
        except ConfigurationError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            ctx.exit(ExitStatus.CONFIG_ERROR)
        except SpinCoolError as exc:
            logger.error("command failed", command=ctx.info_name, error=type(exc).__name__)
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)
        if status:
            ctx.exit(int(status))
        return ExitStatus.OK

    return wrapper
