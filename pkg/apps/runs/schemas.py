import math
from enum import Enum
from typing import Optional

from pydantic import ConfigDict, Field, ValidationError, model_validator

from apps.hamiltonian.models import DistanceRule
from bases.schema import BaseSchema
from core.exceptions import ConfigurationError


class ModelKind(str, Enum):
    SHORT_RANGE = "short_range"
    LONG_RANGE = "long_range"


def configuration_error(error: ValidationError, lines: Optional[dict[str, int]] = None) -> ConfigurationError:
    """First validation failure as a ConfigurationError naming its key (and line, when known)."""
    lines = lines or {}
    first = error.errors()[0]
    cause = (first.get("ctx") or {}).get("error")
    if isinstance(cause, ConfigurationError):
        return ConfigurationError(cause.detail, key=cause.key, line=lines.get(cause.key))
    key = str(first["loc"][0]) if first["loc"] else "?"
    message = "unknown key" if first["type"] == "extra_forbidden" else first["msg"]
    if "input" in first and first["type"] != "extra_forbidden":
        message = f"{message} (got {first['input']!r})"
    return ConfigurationError(message, key=key, line=lines.get(key))


class RunConfig(BaseSchema):
    """
    Flat run configuration; every physical and protocol parameter of a run.

    Derived defaults (T = pi / omega, k_term = 10 N, b_stop = b0 * 1e-3) are
    filled after validation, so a parsed config is fully resolved. ``T0`` and
    ``ramp_start`` stay unset when not given: their defaults depend on the
    scheme and on where polarisation ends.
    """

    model_config = ConfigDict(frozen=False, extra="forbid", allow_inf_nan=False)

    n_spins: int = Field(14, ge=2, le=26)
    model: ModelKind = ModelKind.SHORT_RANGE
    jx: float = 1.0
    jy: float = -0.5
    jz: float = 0.5
    hy: float = 0.3
    periodic: bool = True
    distance_rule: DistanceRule = DistanceRule.RING
    b0: float = Field(10.0, gt=0)
    h0: float = 1.0
    omega: float = Field(5.0, gt=0)
    dt: float = Field(0.001, gt=0)
    T: Optional[float] = Field(None, gt=0)
    T0: Optional[float] = Field(None, gt=0)
    ramp_start: Optional[float] = Field(None, ge=0)
    b_stop: Optional[float] = Field(None, gt=0)
    k_term: Optional[int] = Field(None, ge=1)
    probe: int = Field(0, ge=0)
    target_rounds: int = Field(15_915, ge=1)
    max_rounds: int = Field(1_000_000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    sample_every: int = Field(100, ge=1)
    out_path: str = Field("trace.csv", min_length=1)
    tol: float = Field(1e-8, gt=0)
    min_polarization: float = Field(0.5, ge=0, le=1)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def resolve_defaults(self):
        if self.T is None:
            self.T = math.pi / self.omega
        if self.k_term is None:
            self.k_term = 10 * self.n_spins
        if self.b_stop is None:
            self.b_stop = self.b0 * 1e-3
        if self.k_term < self.n_spins:
            raise ConfigurationError(f"must be at least n_spins={self.n_spins}, got {self.k_term}", key="k_term")
        if self.probe >= self.n_spins:
            raise ConfigurationError(f"site {self.probe} outside a chain of {self.n_spins} spins", key="probe")
        if self.b_stop >= self.b0:
            raise ConfigurationError(f"must be below b0={self.b0}, got {self.b_stop}", key="b_stop")
        return self

    def with_overrides(self, **overrides) -> "RunConfig":
        """Re-validated copy with command-line overrides applied; ``None`` means keep."""
        values = self.model_dump(exclude_none=True)
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return type(self).model_validate(values)
        except ValidationError as exc:
            raise configuration_error(exc) from None


class GroundStateReport(BaseSchema):
    """Ground state of H0 and the strong-field comparison numbers."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=True)

    n_spins: int
    energy: float
    gap: float
    residual: float
    iterations: int
    field_energy: float = Field(description="Ground energy of H0 + b0 Hz")
    polarized_energy: float = Field(description="<all down| H0 + b0 Hz |all down>")
    polarized_overlap: float = Field(description="|<all down|ground of H0 + b0 Hz>|^2")


class SweepRow(BaseSchema):
    """Polarisation statistics of one seed."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=True)

    seed: int
    measurements: int
    rf_rounds: int
    downfall_time: Optional[float] = None
    final_mz: float
    completed: bool
