"""
Exception hierarchy of the simulator.

Every error carries the exit status the command line reports for it, so the
middleware in ``core.middlewares`` can translate failures without knowing
where they were raised.
"""
from typing import Optional


class SpinCoolError(Exception):
    """Base class for all simulator failures (runtime errors by default)."""

    exit_code: int = 2


class ConfigurationError(SpinCoolError, ValueError):
    """
    Invalid configuration: wrong sizes, unknown keys, unparsable or out-of-range values.

    Attributes:
        key: The offending configuration key, when known.
        line: The 1-based line of the configuration file, when known.
    """

    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        self.detail = message
        location = ""
        if key is not None:
            location = f"{key}: " if line is None else f"line {line}: {key}: "
        super().__init__(f"{location}{message}")


class ContractViolation(SpinCoolError, ValueError):
    """A caller broke an operation precondition (dimension mismatch, site out of range, ...)."""


class NumericalDegeneracyError(SpinCoolError):
    """A measurement tried to project onto a branch with vanishing probability."""


class IntegrationDivergedError(SpinCoolError):
    """The integrated state stopped being finite."""


class NonConvergenceError(SpinCoolError):
    """The eigensolver ran out of iterations before meeting the residual tolerance."""

    def __init__(self, message: str, best_residual: float):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3e})")


class StorageError(SpinCoolError):
    """Reading or writing a trace, state dump or config file failed."""

    def __init__(self, message: str, path):
        self.path = path
        super().__init__(f"{path}: {message}")
