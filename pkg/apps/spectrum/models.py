from dataclasses import dataclass, field

from apps.state.models import StateVector


@dataclass(frozen=True)
class EigenResult:
    """
    Lowest eigenpair of a term list with its residual certificate.

    ``excited_energy`` is the second-lowest eigenvalue, ``gap`` the difference.
    """

    energy: float
    state: StateVector = field(repr=False)
    residual: float
    iterations: int
    excited_energy: float

    @property
    def gap(self) -> float:
        return self.excited_energy - self.energy
