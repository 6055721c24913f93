from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from apps.state.models import StateVector
from core.exceptions import ContractViolation


class EventTag(str, Enum):
    MEASURE_UP = "measure-up"
    MEASURE_DOWN = "measure-down"
    RF_ON = "rf-on"
    RF_OFF = "rf-off"
    RAMP_START = "ramp-start"
    DONE = "done"


@dataclass(frozen=True)
class TraceSample:
    t: float
    mz: float
    energy: float
    fidelity: float
    b: float
    rf: bool
    event: Optional[EventTag] = None


class ProtocolTrace:
    """
    Time series of samples with strictly increasing times.

    A sample recorded at the time of the last one replaces it when it carries
    an event and is dropped otherwise, so every time stamp appears once. Two
    events never share a time stamp.
    """

    def __init__(self, samples: Optional[list[TraceSample]] = None):
        self._samples: list[TraceSample] = []
        for sample in samples or []:
            self.record(sample)

    def record(self, sample: TraceSample) -> TraceSample:
        if self._samples:
            last = self._samples[-1]
            if sample.t == last.t:
                if sample.event is None:
                    return last
                if last.event is not None:
                    raise ContractViolation(
                        f"{sample.event.value} would overwrite {last.event.value} at t={sample.t}"
                    )
                self._samples[-1] = sample
                return sample
            if sample.t < last.t:
                raise ContractViolation(f"trace time went backwards: {sample.t} after {last.t}")
        self._samples.append(sample)
        return sample

    @property
    def samples(self) -> tuple[TraceSample, ...]:
        return tuple(self._samples)

    @property
    def last(self) -> Optional[TraceSample]:
        return self._samples[-1] if self._samples else None

    def since(self, t: float) -> list[TraceSample]:
        return [sample for sample in self._samples if sample.t >= t]

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[TraceSample]:
        return iter(self._samples)

    def __getitem__(self, index):
        return self._samples[index]


@dataclass
class PhaseResult:
    """Outcome of one protocol phase on the shared time axis."""

    state: StateVector = field(repr=False)
    trace: ProtocolTrace = field(repr=False)
    t_start: float
    t_end: float
    completed: bool = True
    measurements: int = 0
    rf_rounds: int = 0
    downfall_time: Optional[float] = None
