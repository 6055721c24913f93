"""
Cooling protocols: measurement-feedback polarisation in a strong field
(random spin or single probe) followed by adiabatic demagnetisation.

All phases share one time axis on the integration grid and append to one
ProtocolTrace.
"""
import math
from collections import deque
from dataclasses import replace
from typing import Iterable, Optional

from apps.evolution.models import EvolutionContext, Sampler
from apps.evolution.services import evolve_interval
from apps.hamiltonian.services import field_envelope
from apps.protocols.models import EventTag, PhaseResult, ProtocolTrace, TraceSample
from apps.protocols.schemas import AdiabaticConfig, RunSummary, Scheme, SchemeIConfig, SchemeIIConfig
from apps.spectrum.services import ground_state
from apps.state.models import Direction, MeasurementOutcome, RngStream, StateVector
from apps.state.services import (
    expectation,
    fidelity,
    magnetization_z,
    measure_spin_z,
    random_infinite_temperature_state,
)
from bases.business_logic import Operation
from core.exceptions import ConfigurationError, ContractViolation
from core.logger import logger
from core.settings import settings

DOWNFALL_FRACTION = 0.9


def check_termination(history: Iterable[Direction], policy: SchemeIConfig) -> bool:
    """True iff the last k_term outcomes are all down."""
    recent = list(history)
    k_term = policy.k_term
    if k_term is None or len(recent) < k_term:
        return False
    return all(Direction(outcome) is Direction.DOWN for outcome in recent[-k_term:])


class PhaseService(Operation):
    """
    Common machinery of a protocol phase: evolution on the grid and trace sampling.
    """

    def __init__(
            self,
            model: EvolutionContext,
            config,
            reference: Optional[StateVector] = None,
            trace: Optional[ProtocolTrace] = None,
            sample_every: Optional[int] = None,
    ):
        super().__init__(model, config)
        self.reference = reference
        self.trace = trace if trace is not None else ProtocolTrace()
        self.sample_every = sample_every or settings.SAMPLE_EVERY

    def sample(self, t: float, psi: StateVector, gate: bool, event: Optional[EventTag] = None) -> TraceSample:
        return TraceSample(
            t=t,
            mz=magnetization_z(psi),
            energy=expectation(psi, self.model.bare),
            fidelity=fidelity(self.reference, psi) if self.reference is not None else math.nan,
            b=field_envelope(self.model.schedule, t),
            rf=gate,
            event=event,
        )

    def record(self, t: float, psi: StateVector, gate: bool, event: Optional[EventTag] = None) -> TraceSample:
        return self.trace.record(self.sample(t, psi, gate, event))

    def grid_time(self, t: float) -> float:
        return self.model.step_index(t) * self.model.dt

    def evolve(self, psi: StateVector, t0: float, duration: float, gate: bool) -> tuple[StateVector, float]:
        """Evolve and sample; returns the state and the grid time reached."""
        sampler = Sampler(self.sample_every, lambda t, state: self.record(t, state, gate))
        psi, _ = evolve_interval(self.model, psi, t0, duration, gate, sampler)
        t_end = (self.model.step_index(t0) + self.model.steps_for(duration)) * self.model.dt
        return psi, t_end

    def downfall_time(self, t_start: float) -> Optional[float]:
        threshold = -DOWNFALL_FRACTION * self.model.n_spins / 2
        return next((sample.t for sample in self.trace.since(t_start) if sample.mz <= threshold), None)

    def run_validation(self, psi0: StateVector, *args, **kwargs):
        if psi0.n_spins != self.model.n_spins:
            raise ContractViolation(f"model has {self.model.n_spins} spins, initial state {psi0.n_spins}")


class FeedbackPolarizationService(PhaseService):
    """
    Measure a spin every period; an up outcome switches the RF drive on until
    the measured spin is found down again. The field stays at full strength.
    """

    def __init__(self, model: EvolutionContext, config, **kwargs):
        full_field = replace(model.schedule, ramp_start=math.inf)
        super().__init__(replace(model, schedule=full_field), config, **kwargs)

    @property
    def period(self) -> float:
        raise NotImplementedError

    @property
    def round_cap(self) -> int:
        raise NotImplementedError

    @property
    def history_length(self) -> int:
        return 1

    def first_target(self, rng: RngStream) -> int:
        raise NotImplementedError

    def next_target(self, outcome: MeasurementOutcome, rng: RngStream) -> int:
        raise NotImplementedError

    def is_finished(self, history: deque) -> bool:
        return False

    def is_complete(self, finished: bool, psi: StateVector) -> bool:
        raise NotImplementedError

    def run_validation(self, psi0: StateVector, t0: float = 0.0, rng: Optional[RngStream] = None):
        super().run_validation(psi0)
        if self.model.steps_for(self.period) == 0:
            raise ConfigurationError(
                f"measurement period {self.period} is shorter than half a time step {self.model.dt}", key="T"
            )

    def _run(self, psi0: StateVector, t0: float = 0.0, rng: Optional[RngStream] = None) -> PhaseResult:
        rng = rng if rng is not None else RngStream(self.config.seed)
        t_start = self.grid_time(t0)
        psi, t, gate = psi0, t_start, False
        history: deque = deque(maxlen=max(self.history_length, 1))
        measurements = rf_rounds = 0
        finished = False
        target = self.first_target(rng)
        self.record(t, psi, gate)
        logger.info("polarization started", scheme=type(self).__name__, n_spins=self.model.n_spins, t=t)

        for _ in range(self.round_cap):
            psi, t = self.evolve(psi, t, self.period, gate)
            outcome, psi = measure_spin_z(psi, target, rng, t)
            measurements += 1
            history.append(outcome.direction)
            if outcome.is_up:
                event = EventTag.MEASURE_UP if gate else EventTag.RF_ON
                rf_rounds += 0 if gate else 1
                gate = True
            else:
                event = EventTag.RF_OFF if gate else EventTag.MEASURE_DOWN
                gate = False
                target = self.next_target(outcome, rng)
            self.record(t, psi, gate, event)
            if self.is_finished(history):
                finished = True
                break

        if gate:
            # the drive is switched off one step after the last measurement
            psi, t = self.evolve(psi, t, self.model.dt, False)
            gate = False
            self.record(t, psi, gate, EventTag.RF_OFF)

        completed = self.is_complete(finished, psi)
        return PhaseResult(
            state=psi,
            trace=self.trace,
            t_start=t_start,
            t_end=t,
            completed=completed,
            measurements=measurements,
            rf_rounds=rf_rounds,
            downfall_time=self.downfall_time(t_start),
        )

    def on_run(self, result: PhaseResult):
        log = logger.info if result.completed else logger.warning
        log(
            "polarization finished" if result.completed else "polarization incomplete",
            scheme=type(self).__name__,
            measurements=result.measurements,
            rf_rounds=result.rf_rounds,
            mz=magnetization_z(result.state),
            t=result.t_end,
        )


class SchemeIService(FeedbackPolarizationService):
    """
    Random-spin feedback: a down outcome moves on to a new uniformly random
    spin (sampled with replacement); the phase ends after k_term consecutive
    down outcomes or max_rounds measurements.
    """

    schema_in = SchemeIConfig

    def __init__(self, model: EvolutionContext, config: SchemeIConfig, **kwargs):
        super().__init__(model, config, **kwargs)
        if self.config.k_term is None:
            self.config = self.config.model_copy(update={"k_term": 10 * self.model.n_spins})

    @property
    def period(self) -> float:
        return self.config.T

    @property
    def round_cap(self) -> int:
        return self.config.max_rounds

    @property
    def history_length(self) -> int:
        return self.config.k_term

    def run_validation(self, psi0: StateVector, t0: float = 0.0, rng: Optional[RngStream] = None):
        super().run_validation(psi0, t0, rng)
        if self.config.k_term < self.model.n_spins:
            raise ConfigurationError(
                f"k_term must be at least the number of spins ({self.model.n_spins}), got {self.config.k_term}",
                key="k_term",
            )

    def first_target(self, rng: RngStream) -> int:
        return rng.integer(self.model.n_spins)

    def next_target(self, outcome: MeasurementOutcome, rng: RngStream) -> int:
        return rng.integer(self.model.n_spins)

    def is_finished(self, history: deque) -> bool:
        return check_termination(history, self.config)

    def is_complete(self, finished: bool, psi: StateVector) -> bool:
        return finished


class SchemeIIService(FeedbackPolarizationService):
    """
    Single-probe feedback: the same spin is measured every T_meas for
    target_rounds measurements, letting it pass its polarisation on to the
    rest of the chain between measurements.
    """

    schema_in = SchemeIIConfig

    @property
    def period(self) -> float:
        return self.config.T_meas

    @property
    def round_cap(self) -> int:
        return self.config.target_rounds

    def run_validation(self, psi0: StateVector, t0: float = 0.0, rng: Optional[RngStream] = None):
        super().run_validation(psi0, t0, rng)
        if self.config.probe >= self.model.n_spins:
            raise ConfigurationError(f"probe {self.config.probe} outside the chain", key="probe")

    def first_target(self, rng: RngStream) -> int:
        return self.config.probe

    def next_target(self, outcome: MeasurementOutcome, rng: RngStream) -> int:
        return self.config.probe

    def is_complete(self, finished: bool, psi: StateVector) -> bool:
        return polarization_fraction(psi) >= self.config.min_polarization


class AdiabaticService(PhaseService):
    """
    RF off, field ramped down as B0 exp(-(t - ramp_start) / T0) until it
    reaches b_stop, with fidelity tracked against the bare ground state.
    """

    schema_in = AdiabaticConfig

    def b_stop(self) -> float:
        return self.config.b_stop if self.config.b_stop is not None else self.model.schedule.b0 * 1e-3

    def run_validation(self, psi0: StateVector, psi_ground: Optional[StateVector] = None, t0: float = 0.0):
        super().run_validation(psi0)
        b0 = self.model.schedule.b0
        if not 0 < self.b_stop() < b0:
            raise ConfigurationError(f"b_stop must lie in (0, {b0}), got {self.b_stop()}", key="b_stop")
        if psi_ground is not None and psi_ground.n_spins != psi0.n_spins:
            raise ContractViolation("ground-state reference and initial state differ in size")

    def _run(self, psi0: StateVector, psi_ground: Optional[StateVector] = None, t0: float = 0.0) -> PhaseResult:
        if psi_ground is not None:
            self.reference = psi_ground
        dt = self.model.dt
        t_start = self.grid_time(t0)
        requested = self.config.ramp_start if self.config.ramp_start is not None else t_start
        if requested < t_start:
            logger.warning("ramp start precedes the phase start; ramping immediately", ramp_start=requested, t=t_start)
            requested = t_start
        ramp_start = self.grid_time(requested)
        last = self.trace.last
        if last is not None and last.event is not None and last.t >= ramp_start:
            ramp_start = (self.model.step_index(last.t) + 1) * dt
        schedule = replace(self.model.schedule, ramp_start=ramp_start, t0=self.config.T0)
        self.model = replace(self.model, schedule=schedule)

        ramp_length = self.config.T0 * math.log(schedule.b0 / self.b_stop())
        stop_step = max(math.ceil((ramp_start + ramp_length) / dt - 1e-9), self.model.step_index(ramp_start) + 1)
        t_stop = stop_step * dt

        psi = psi0
        self.record(t_start, psi, False)
        logger.info("adiabatic ramp scheduled", ramp_start=ramp_start, t_stop=t_stop, T0=self.config.T0)
        if ramp_start > t_start:
            psi, _ = self.evolve(psi, t_start, ramp_start - t_start, False)
        self.record(ramp_start, psi, False, EventTag.RAMP_START)
        psi, t_end = self.evolve(psi, ramp_start, t_stop - ramp_start, False)
        self.record(t_end, psi, False, EventTag.DONE)
        return PhaseResult(state=psi, trace=self.trace, t_start=t_start, t_end=t_end)

    def on_run(self, result: PhaseResult):
        last = result.trace.last
        logger.info("adiabatic ramp finished", energy=last.energy, fidelity=last.fidelity, b=last.b, t=result.t_end)


def polarization_fraction(psi: StateVector) -> float:
    """-Mz / (N / 2): 1 for all spins down, antiparallel to the field."""
    return -magnetization_z(psi) / (psi.n_spins / 2)


def run_scheme1(
        model: EvolutionContext, cfg: SchemeIConfig, psi0: StateVector, **kwargs
) -> tuple[StateVector, ProtocolTrace]:
    result = SchemeIService(model, cfg, **kwargs).run(psi0)
    return result.state, result.trace


def run_scheme2(
        model: EvolutionContext, cfg: SchemeIIConfig, psi0: StateVector, **kwargs
) -> tuple[StateVector, ProtocolTrace]:
    result = SchemeIIService(model, cfg, **kwargs).run(psi0)
    return result.state, result.trace


def run_adiabatic(
        model: EvolutionContext, cfg: AdiabaticConfig, psi0: StateVector, psi_ground: StateVector, **kwargs
) -> tuple[StateVector, ProtocolTrace]:
    result = AdiabaticService(model, cfg, **kwargs).run(psi0, psi_ground)
    return result.state, result.trace


def default_ramp_constant(scheme: Scheme) -> float:
    return 1e4 if Scheme(scheme) is Scheme.RANDOM_SPIN else 8e3


def run_full(
        model: EvolutionContext,
        scheme: Scheme,
        polarization_cfg: SchemeIConfig | SchemeIIConfig,
        adiabatic_cfg: AdiabaticConfig,
        seed: int = 0,
        tol: Optional[float] = None,
        sample_every: Optional[int] = None,
) -> tuple[StateVector, ProtocolTrace, RunSummary]:
    """
    Random infinite-temperature state -> polarisation -> adiabatic ramp.

    The seed drives both the initial state and the measurement outcomes; the
    eigensolver start vector has its own stream with the same seed.
    """
    scheme = Scheme(scheme)
    ground = ground_state(model.bare, tol=tol, rng=RngStream(seed))
    rng = RngStream(seed)
    psi0 = random_infinite_temperature_state(model.n_spins, rng)
    trace = ProtocolTrace()
    service_class = SchemeIService if scheme is Scheme.RANDOM_SPIN else SchemeIIService
    polarizer = service_class(model, polarization_cfg, reference=ground.state, trace=trace, sample_every=sample_every)
    polarized = polarizer.run(psi0, 0.0, rng)

    ramp = AdiabaticService(model, adiabatic_cfg, reference=ground.state, trace=trace, sample_every=sample_every)
    final = ramp.run(polarized.state, ground.state, polarized.t_end)

    last = trace.last
    summary = RunSummary(
        scheme=scheme,
        n_spins=model.n_spins,
        seed=seed,
        ground_energy=ground.energy,
        gap=ground.gap,
        final_energy=last.energy,
        final_fidelity=last.fidelity,
        final_mz=last.mz,
        polarization=polarization_fraction(polarized.state),
        polarization_completed=polarized.completed,
        measurements=polarized.measurements,
        rf_rounds=polarized.rf_rounds,
        downfall_time=polarized.downfall_time,
        polarization_end=polarized.t_end,
        elapsed=final.t_end,
    )
    return final.state, trace, summary
