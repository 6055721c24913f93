import math

import numpy as np
import pytest

from apps.evolution.models import EvolutionContext
from apps.hamiltonian.models import DriveSchedule, OperatorTermList
from apps.hamiltonian.services import build_long_range_chain, build_rf, build_short_range_chain, build_zeeman
from apps.protocols.models import EventTag, ProtocolTrace, TraceSample
from apps.protocols.schemas import AdiabaticConfig, RunSummary, Scheme, SchemeIConfig, SchemeIIConfig
from apps.protocols.services import (
    AdiabaticService,
    SchemeIIService,
    SchemeIService,
    check_termination,
    default_ramp_constant,
    polarization_fraction,
    run_adiabatic,
    run_full,
    run_scheme1,
    run_scheme2,
)
from apps.spectrum.services import ground_state
from apps.state.models import Direction, RngStream
from apps.state.services import fidelity, magnetization_z, polarized_state, random_infinite_temperature_state
from conftest import SEEDS
from core.exceptions import ConfigurationError, ContractViolation

UP, DOWN = Direction.UP, Direction.DOWN


def context(n_spins=3, dt=0.01, b0=10.0, conserving=False, t0=1e4, long_range=False) -> EvolutionContext:
    if conserving:
        bare = build_short_range_chain(n_spins, jx=1.0, jy=1.0, jz=0.5, hy=0.0)
    elif long_range:
        bare = build_long_range_chain(n_spins)
    else:
        bare = build_short_range_chain(n_spins)
    return EvolutionContext(
        bare=bare,
        zeeman=build_zeeman(n_spins),
        rf=build_rf(n_spins),
        schedule=DriveSchedule(b0=b0, t0=t0),
        dt=dt,
    )


def sample(t, event=None, mz=0.0):
    return TraceSample(t=t, mz=mz, energy=0.0, fidelity=math.nan, b=10.0, rf=False, event=event)


def assert_strictly_increasing(trace: ProtocolTrace):
    times = [s.t for s in trace]
    assert all(b > a for a, b in zip(times, times[1:]))


MEASUREMENT_TAGS = (EventTag.MEASURE_UP, EventTag.MEASURE_DOWN, EventTag.RF_ON, EventTag.RF_OFF)


def measurement_events(trace: ProtocolTrace, period: float) -> list[TraceSample]:
    """Samples tagged by a measurement; the rf-off closing a phase one step after its last measurement is left out."""
    events = [s for s in trace if s.event in MEASUREMENT_TAGS]
    if len(events) >= 2 and events[-1].event is EventTag.RF_OFF and events[-1].t - events[-2].t < period / 2:
        events.pop()
    return events


def assert_rf_events_pair_up(trace: ProtocolTrace):
    switches = [s.event for s in trace if s.event in (EventTag.RF_ON, EventTag.RF_OFF)]
    assert switches == [EventTag.RF_ON, EventTag.RF_OFF] * (len(switches) // 2)
    gate = False
    for s in trace:
        if s.event is EventTag.RF_ON:
            gate = True
        elif s.event is EventTag.RF_OFF:
            gate = False
        assert s.rf is gate


@pytest.mark.parametrize(
    "history, expected",
    [
        ([DOWN] * 4, True),
        ([UP] + [DOWN] * 4, True),
        ([DOWN] * 3, False),
        ([DOWN, DOWN, UP, DOWN, DOWN], False),
        ([], False),
    ],
)
def test_check_termination(history, expected):
    assert check_termination(history, SchemeIConfig(k_term=4)) is expected


def test_trace_keeps_one_sample_per_time():
    trace = ProtocolTrace()
    trace.record(sample(0.0))
    trace.record(sample(1.0))
    trace.record(sample(1.0, EventTag.RF_ON))
    trace.record(sample(1.0))
    assert len(trace) == 2
    assert trace.last.event is EventTag.RF_ON


def test_trace_never_overwrites_an_event():
    trace = ProtocolTrace([sample(0.0), sample(1.0, EventTag.MEASURE_UP)])
    with pytest.raises(ContractViolation):
        trace.record(sample(1.0, EventTag.RAMP_START))
    assert trace.last.event is EventTag.MEASURE_UP


def test_trace_rejects_time_going_backwards():
    trace = ProtocolTrace([sample(0.0), sample(1.0)])
    with pytest.raises(ContractViolation):
        trace.record(sample(0.5))


def test_trace_since_filters_by_time():
    trace = ProtocolTrace([sample(float(t)) for t in range(5)])
    assert [s.t for s in trace.since(2.5)] == [3.0, 4.0]


def test_all_down_is_absorbing_under_scheme_one():
    model = context(conserving=True)
    cfg = SchemeIConfig(k_term=30, seed=4)
    result = SchemeIService(model, cfg).run(polarized_state(3))
    assert result.completed
    assert result.measurements == 30
    assert result.rf_rounds == 0
    assert magnetization_z(result.state) == pytest.approx(-1.5, abs=1e-12)
    events = [s.event for s in result.trace if s.event is not None]
    assert events == [EventTag.MEASURE_DOWN] * 30
    assert result.downfall_time == 0.0


def test_scheme_one_k_term_defaults_to_ten_per_spin():
    service = SchemeIService(context(n_spins=4), SchemeIConfig())
    assert service.config.k_term == 40


def test_scheme_one_rejects_short_k_term():
    with pytest.raises(ConfigurationError) as exc_info:
        SchemeIService(context(n_spins=4), SchemeIConfig(k_term=3)).run(polarized_state(4))
    assert exc_info.value.key == "k_term"


def test_scheme_one_round_cap_leaves_phase_incomplete():
    model = context()
    psi0 = random_infinite_temperature_state(3, RngStream(9))
    result = SchemeIService(model, SchemeIConfig(k_term=30, max_rounds=5, seed=9)).run(psi0)
    assert result.measurements == 5
    assert not result.completed


def test_feedback_events_match_rf_gate():
    model = context()
    rng = RngStream(3)
    psi0 = random_infinite_temperature_state(3, rng)
    result = SchemeIService(model, SchemeIConfig(k_term=30, max_rounds=60), sample_every=50).run(psi0, 0.0, rng)
    assert_strictly_increasing(result.trace)
    gate_for = {
        EventTag.RF_ON: True,
        EventTag.MEASURE_UP: True,
        EventTag.RF_OFF: False,
        EventTag.MEASURE_DOWN: False,
    }
    events = measurement_events(result.trace, SchemeIConfig().T)
    assert len(events) == result.measurements
    assert sum(s.event is EventTag.RF_ON for s in events) == result.rf_rounds
    for s in events:
        assert s.rf is gate_for[s.event]
    assert all(s.b == 10.0 for s in result.trace)
    assert_rf_events_pair_up(result.trace)


def test_polarization_ignores_configured_ramp():
    model = context()
    ramped = EvolutionContext(model.bare, model.zeeman, model.rf, DriveSchedule(b0=10.0, ramp_start=0.0), model.dt)
    result = SchemeIService(ramped, SchemeIConfig(k_term=30, max_rounds=3)).run(polarized_state(3))
    assert all(s.b == 10.0 for s in result.trace)


def test_scheme_one_is_deterministic_per_seed():
    def run():
        rng = RngStream(12)
        psi0 = random_infinite_temperature_state(3, rng)
        return SchemeIService(context(), SchemeIConfig(k_term=30, max_rounds=40)).run(psi0, 0.0, rng)

    a, b = run(), run()
    assert a.trace.samples == b.trace.samples
    np.testing.assert_array_equal(a.state.amplitudes, b.state.amplitudes)


def test_scheme_two_measures_the_probe_for_every_round():
    model = context(conserving=True)
    state, trace = run_scheme2(model, SchemeIIConfig(probe=2, target_rounds=7), polarized_state(3))
    assert sum(s.event is EventTag.MEASURE_DOWN for s in trace) == 7
    assert trace.last.t == pytest.approx(7 * round(math.pi / 5 / 0.01) * 0.01)
    assert polarization_fraction(state) == pytest.approx(1.0)


def test_scheme_two_flags_incomplete_polarization():
    model = context()
    psi0 = random_infinite_temperature_state(3, RngStream(2))
    result = SchemeIIService(model, SchemeIIConfig(target_rounds=3, min_polarization=1.0)).run(psi0)
    assert polarization_fraction(result.state) < 1.0
    assert not result.completed


def test_scheme_two_rejects_probe_outside_chain():
    with pytest.raises(ConfigurationError):
        run_scheme2(context(), SchemeIIConfig(probe=3), polarized_state(3))


def test_run_scheme1_returns_state_and_trace():
    state, trace = run_scheme1(context(conserving=True), SchemeIConfig(k_term=3), polarized_state(3))
    assert state.n_spins == 3
    assert trace.last.event is EventTag.MEASURE_DOWN


def test_adiabatic_ramp_marks_start_and_end():
    model = context(n_spins=2, b0=10.0)
    psi_ground = ground_state(model.bare).state
    cfg = AdiabaticConfig(T0=1.0, b_stop=0.1, ramp_start=0.5)
    result = AdiabaticService(model, cfg, sample_every=10).run(polarized_state(2), psi_ground)
    assert_strictly_increasing(result.trace)
    events = [(s.t, s.event) for s in result.trace if s.event is not None]
    assert events[0] == (pytest.approx(0.5), EventTag.RAMP_START)
    assert events[-1][1] is EventTag.DONE
    assert all(s.b == 10.0 for s in result.trace if s.t <= 0.5)
    assert result.trace.last.b == pytest.approx(0.1, rel=0.01)
    assert result.t_end == pytest.approx(0.5 + math.log(100.0), abs=0.01)
    assert not math.isnan(result.trace.last.fidelity)


def test_adiabatic_ramp_starts_at_phase_start_by_default():
    model = context(n_spins=2)
    result = AdiabaticService(model, AdiabaticConfig(T0=0.5, b_stop=1.0)).run(polarized_state(2), None, 2.0)
    assert result.trace[0].event is EventTag.RAMP_START
    assert result.trace[0].t == pytest.approx(2.0)
    assert math.isnan(result.trace.last.fidelity)


def test_adiabatic_rejects_b_stop_above_field():
    with pytest.raises(ConfigurationError):
        run_adiabatic(context(n_spins=2), AdiabaticConfig(T0=1.0, b_stop=20.0), polarized_state(2), None)



def test_ramp_without_couplings_keeps_all_down():
    n_spins = 2
    model = EvolutionContext(OperatorTermList(n_spins), build_zeeman(n_spins), build_rf(n_spins), DriveSchedule(), 0.01)
    all_down = polarized_state(n_spins)
    state, trace = run_adiabatic(model, AdiabaticConfig(T0=1.0, b_stop=0.1), all_down, all_down, sample_every=10)
    assert len(trace) > 10
    assert all(s.fidelity == pytest.approx(1.0, abs=1e-9) for s in trace)
    assert fidelity(all_down, state) == pytest.approx(1.0, abs=1e-9)


def test_default_ramp_constants():
    assert default_ramp_constant(Scheme.RANDOM_SPIN) == 1e4
    assert default_ramp_constant(Scheme.SINGLE_PROBE) == 8e3


def test_run_full_summary_is_consistent():
    model = context(t0=5.0)
    state, trace, summary = run_full(
        model,
        Scheme.RANDOM_SPIN,
        SchemeIConfig(k_term=30, max_rounds=200, seed=6),
        AdiabaticConfig(T0=5.0),
        seed=6,
    )
    assert isinstance(summary, RunSummary)
    assert summary.elapsed >= summary.polarization_end
    assert summary.final_fidelity == pytest.approx(fidelity(ground_state(model.bare).state, state), abs=1e-9)
    assert summary.final_mz == pytest.approx(magnetization_z(state))
    assert trace.last.event is EventTag.DONE
    assert trace.last.b == pytest.approx(10.0e-3, rel=0.05)
    assert_strictly_increasing(trace)


def test_run_full_is_reproducible():
    def run():
        return run_full(
            context(t0=2.0),
            Scheme.SINGLE_PROBE,
            SchemeIIConfig(target_rounds=10),
            AdiabaticConfig(T0=2.0),
            seed=21,
        )

    (_, trace_a, summary_a), (_, trace_b, summary_b) = run(), run()
    assert trace_a.samples == trace_b.samples
    assert summary_a == summary_b


@pytest.mark.parametrize("scheme", list(Scheme))
def test_run_full_keeps_every_measurement_event(scheme):
    if scheme is Scheme.RANDOM_SPIN:
        polarization_cfg = SchemeIConfig(k_term=30, max_rounds=40)
    else:
        polarization_cfg = SchemeIIConfig(target_rounds=15)
    for seed in SEEDS:
        _, trace, summary = run_full(context(t0=2.0), scheme, polarization_cfg, AdiabaticConfig(T0=2.0), seed=seed)
        assert_strictly_increasing(trace)
        assert len(measurement_events(trace, math.pi / 5)) == summary.measurements
        assert_rf_events_pair_up(trace)
        ramp = [s for s in trace if s.event is EventTag.RAMP_START]
        assert len(ramp) == 1
        assert ramp[0].t > summary.polarization_end
        assert [s for s in trace if s.event is EventTag.DONE] == [trace.last]


def test_ramp_after_an_event_starts_one_step_later():
    trace = ProtocolTrace([sample(0.0), sample(1.0, EventTag.MEASURE_DOWN)])
    service = AdiabaticService(context(n_spins=2), AdiabaticConfig(T0=0.5, b_stop=1.0), trace=trace)
    result = service.run(polarized_state(2), None, 1.0)
    events = [(s.t, s.event) for s in result.trace if s.event is not None]
    assert events[:2] == [(1.0, EventTag.MEASURE_DOWN), (pytest.approx(1.01), EventTag.RAMP_START)]


@pytest.mark.slow
def test_adiabatic_fidelity_improves_with_slower_ramps():
    model = context(n_spins=4, b0=10.0, dt=0.01)
    psi_start = ground_state(model.bare + model.zeeman.scaled(10.0)).state
    psi_ground = ground_state(model.bare).state
    fidelities = []
    for T0 in (10.0, 100.0, 1000.0):
        state, _ = run_adiabatic(model, AdiabaticConfig(T0=T0), psi_start, psi_ground, sample_every=10_000)
        fidelities.append(fidelity(psi_ground, state))
    assert fidelities[0] < fidelities[1] < fidelities[2]
    assert fidelities[2] > 0.99


@pytest.mark.slow
def test_frequent_measurement_freezes_the_chain():
    half_cycle = math.pi / 5

    def mean_change(period):
        changes = []
        for seed in range(20):
            rng = RngStream(seed)
            psi0 = random_infinite_temperature_state(4, rng)
            cfg = SchemeIConfig(T=period, k_term=100, max_rounds=100)
            result = SchemeIService(context(n_spins=4, dt=0.002), cfg, sample_every=10_000).run(psi0, 0.0, rng)
            changes.append(abs(magnetization_z(result.state) - magnetization_z(psi0)))
        return float(np.mean(changes))

    assert mean_change(0.01 * half_cycle) < mean_change(half_cycle)


@pytest.mark.slow
def test_two_spin_pipeline_reaches_the_ground_state():
    model = context(n_spins=2, dt=0.01, t0=1e3)
    _, _, summary = run_full(
        model, Scheme.RANDOM_SPIN, SchemeIConfig(), AdiabaticConfig(T0=1e3), seed=1, sample_every=10_000
    )
    assert summary.polarization_completed
    assert summary.final_fidelity > 0.99


@pytest.mark.slow
def test_scheme_one_polarises_eight_spins():
    dt = 0.001
    horizon = 500_000 * dt
    reached = 0
    for seed in SEEDS:
        model = context(n_spins=8, dt=dt)
        rng = RngStream(seed)
        psi0 = random_infinite_temperature_state(8, rng)
        period = round((math.pi / 5) / dt) * dt
        cfg = SchemeIConfig(max_rounds=int(horizon // period), seed=seed)
        result = SchemeIService(model, cfg, sample_every=50).run(psi0, 0.0, rng)
        if result.downfall_time is not None and result.downfall_time <= horizon:
            reached += 1
    assert reached >= 4


@pytest.mark.longrun
@pytest.mark.parametrize("scheme, cfg", [(Scheme.RANDOM_SPIN, SchemeIConfig(seed=1))])
def test_fourteen_spin_pipeline_approaches_ground_state(scheme, cfg):
    model = context(n_spins=14, dt=0.001, t0=1e4)
    _, _, summary = run_full(model, scheme, cfg, AdiabaticConfig(T0=1e4), seed=1)
    assert summary.final_energy == pytest.approx(-4.189, rel=0.01)
    assert summary.final_fidelity >= 0.90


@pytest.mark.longrun
@pytest.mark.parametrize("long_range, floor", [(False, 0.80), (True, 0.65)])
def test_fourteen_spin_single_probe_polarization(long_range, floor):
    model = context(n_spins=14, dt=0.001, long_range=long_range)
    psi0 = random_infinite_temperature_state(14, RngStream(1))
    result = SchemeIIService(model, SchemeIIConfig(target_rounds=15_915, seed=1)).run(psi0)
    assert polarization_fraction(result.state) >= floor


@pytest.mark.longrun
@pytest.mark.parametrize("long_range, energy", [(False, -3.78), (True, -4.81)])
def test_fourteen_spin_single_probe_pipeline_energy(long_range, energy):
    model = context(n_spins=14, dt=0.001, t0=8e3, long_range=long_range)
    _, _, summary = run_full(model, Scheme.SINGLE_PROBE, SchemeIIConfig(seed=1), AdiabaticConfig(T0=8e3), seed=1)
    assert summary.final_energy == pytest.approx(energy, abs=0.15)
