import math
from enum import IntEnum
from typing import Optional

from pydantic import ConfigDict, Field, model_validator

from bases.schema import BaseSchema

HALF_RF_CYCLE = math.pi / 5.0


class Scheme(IntEnum):
    RANDOM_SPIN = 1
    SINGLE_PROBE = 2


class SchemeIConfig(BaseSchema):
    """Random-spin measurement feedback."""

    T: float = Field(HALF_RF_CYCLE, gt=0, description="Measurement period, seconds")
    k_term: Optional[int] = Field(None, ge=1, description="Consecutive down outcomes that end the phase; 10 N when unset")
    max_rounds: int = Field(1_000_000, ge=1, description="Safety cap on measurements")
    seed: int = Field(0, ge=0, lt=2**64)


class SchemeIIConfig(BaseSchema):
    """Single-probe measurement feedback."""

    probe: int = Field(0, ge=0, description="Measured site")
    T_meas: float = Field(HALF_RF_CYCLE, gt=0, description="Probe measurement period, seconds")
    target_rounds: int = Field(15_915, ge=1, description="Total measurement budget")
    min_polarization: float = Field(0.5, ge=0, le=1, description="Polarisation fraction below which the phase is incomplete")
    seed: int = Field(0, ge=0, lt=2**64)


class AdiabaticConfig(BaseSchema):
    """Exponential field ramp B0 exp(-(t - ramp_start) / T0) down to b_stop."""

    T0: float = Field(1e4, gt=0, description="Ramp time constant, seconds")
    b_stop: Optional[float] = Field(None, gt=0, description="Field at which the ramp ends; B0 * 1e-3 when unset")
    ramp_start: Optional[float] = Field(None, ge=0, description="Ramp start time; the phase start when unset")


class RunSummary(BaseSchema):
    """Headline numbers of a full polarise-then-ramp run."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=True)

    scheme: Scheme
    n_spins: int
    seed: int
    ground_energy: float
    gap: float
    final_energy: float
    final_fidelity: float
    final_mz: float
    polarization: float
    polarization_completed: bool
    measurements: int
    rf_rounds: int
    downfall_time: Optional[float] = None
    polarization_end: float
    elapsed: float

    @model_validator(mode="after")
    def check_times(self):
        if self.elapsed < self.polarization_end:
            raise ValueError("elapsed time cannot precede the end of polarisation")
        return self
