from dataclasses import dataclass
from typing import Any, Callable

from apps.hamiltonian.models import DriveSchedule, OperatorTermList
from apps.state.models import StateVector
from core.exceptions import ConfigurationError, ContractViolation
from core.logger import logger
from core.settings import settings


@dataclass(frozen=True)
class EvolutionContext:
    """Everything that defines H(t) = H0 + B(t) Hz + h(t) sum S^x, plus the step size."""

    bare: OperatorTermList
    zeeman: OperatorTermList
    rf: OperatorTermList
    schedule: DriveSchedule
    dt: float = 0.001

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}", key="dt")
        if not self.bare.n_spins == self.zeeman.n_spins == self.rf.n_spins:
            raise ContractViolation("bare, Zeeman and RF operators act on different spin counts")
        stiffness = self.dt * self.max_frequency
        if stiffness > settings.STABILITY_THRESHOLD:
            logger.warning(
                "time step close to the RK4 accuracy limit",
                dt=self.dt,
                max_frequency=self.max_frequency,
                threshold=settings.STABILITY_THRESHOLD,
            )

    @property
    def n_spins(self) -> int:
        return self.bare.n_spins

    @property
    def max_frequency(self) -> float:
        """Largest single-spin precession rate: field + drive + strongest coupling."""
        coupling = max((abs(term.coefficient) for term in self.bare.terms), default=0.0)
        return abs(self.schedule.b0) + abs(self.schedule.h0) + coupling

    def steps_for(self, duration: float) -> int:
        """Intervals are rounded to a whole number of steps."""
        if duration < 0:
            raise ContractViolation(f"duration must be non-negative, got {duration}")
        return int(round(duration / self.dt))

    def step_index(self, t: float) -> int:
        return int(round(t / self.dt))


@dataclass(frozen=True)
class Sampler:
    """Calls ``callback(t, psi)`` after every global step index divisible by ``every``."""

    every: int
    callback: Callable[[float, StateVector], Any]

    def __post_init__(self):
        if self.every < 1:
            raise ConfigurationError(f"sample cadence must be >= 1 step, got {self.every}", key="sample_every")
