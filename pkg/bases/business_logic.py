"""
Base operation classes for the simulation phases, with validation,
pre-processing and post-processing hooks around the main step.
"""
from typing import Any, Generic, Type, TypeVar

from bases.schema import BaseSchema

ConfigT = TypeVar("ConfigT", bound=BaseSchema)


class BaseBusinessLogic(Generic[ConfigT]):
    """
    Base class for phase logic.

    Subclasses declare the schema of their configuration; the instance keeps the
    physical model it acts on and the validated configuration.
    """

    schema_in: Type[ConfigT]

    def __init__(self, model: Any, config: ConfigT):
        """
        Initialize with a model and its configuration.
        """
        if not isinstance(config, self.schema_in):
            config = self.schema_in.model_validate(config)
        self.model = model
        self.config = config


class Operation(BaseBusinessLogic[ConfigT]):
    """
    Generic operation with validation, pre, main, and post steps.
    """

    def run(self, *args, **kwargs):
        """
        Execute the operation lifecycle.
        """
        self.run_validation(*args, **kwargs)
        self.pre_run(*args, **kwargs)
        result = self._run(*args, **kwargs)
        self.on_run(result)
        return result

    def run_validation(self, *args, **kwargs):
        """
        Validate before the operation.
        """
        pass

    def pre_run(self, *args, **kwargs):
        """
        Run before the operation.
        """
        pass

    def _run(self, *args, **kwargs):
        """
        Perform the main operation.
        """
        raise NotImplementedError

    def on_run(self, result):
        """
        Run after the operation.
        """
        pass
