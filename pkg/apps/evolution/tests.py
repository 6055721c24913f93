import math

import numpy as np
import pytest

from apps.evolution.models import EvolutionContext, Sampler
from apps.evolution.services import evolve_interval, rk4_step
from apps.hamiltonian.models import DriveSchedule, OperatorTermList
from apps.hamiltonian.services import build_rf, build_short_range_chain, build_zeeman
from apps.state.models import StateVector
from apps.state.services import expectation, inner_product, magnetization_z, polarized_state, probability_up
from conftest import random_state
from core.exceptions import ConfigurationError, ContractViolation, IntegrationDivergedError


def free_spin_context(b0=10.0, h0=1.0, omega=5.0, dt=0.001) -> EvolutionContext:
    return EvolutionContext(
        bare=OperatorTermList(1),
        zeeman=build_zeeman(1),
        rf=build_rf(1),
        schedule=DriveSchedule(b0=b0, h0=h0, omega=omega),
        dt=dt,
    )


def chain_context(n_spins=2, b0=2.0, dt=0.001) -> EvolutionContext:
    return EvolutionContext(
        bare=build_short_range_chain(n_spins),
        zeeman=build_zeeman(n_spins),
        rf=build_rf(n_spins),
        schedule=DriveSchedule(b0=b0, h0=1.0, omega=5.0),
        dt=dt,
    )


def test_larmor_precession():
    ctx = free_spin_context(b0=10.0)
    sx = build_rf(1)
    psi = StateVector(1, np.array([1.0, 1.0]) / math.sqrt(2))
    t = 0.0
    for _ in range(1_000):
        psi = rk4_step(ctx, psi, t, False)
        t += ctx.dt
    assert expectation(psi, sx) / psi.norm() ** 2 == pytest.approx(0.5 * math.cos(10.0 * t), abs=1e-6)


def test_rk4_is_fourth_order(generator):
    psi0 = random_state(2, generator)

    def final_state(dt):
        psi, _ = evolve_interval(chain_context(dt=dt), psi0, 0.0, 1.0, True)
        return psi.amplitudes

    reference = final_state(0.001)
    coarse = np.linalg.norm(final_state(0.04) - reference)
    fine = np.linalg.norm(final_state(0.02) - reference)
    assert 3.7 <= math.log2(coarse / fine) <= 4.3


def test_norm_drift_over_ten_thousand_steps(generator):
    ctx = chain_context(b0=10.0)
    psi = random_state(2, generator)
    for k in range(10_000):
        psi = rk4_step(ctx, psi, k * ctx.dt, True)
    assert abs(psi.norm() - 1.0) < 1e-8


def test_resonant_drive_flips_a_spin():
    ctx = free_spin_context(b0=10.0, h0=1.0, omega=10.0)
    # half a Rabi period of the rotating-frame frequency h0 / 2
    psi, _ = evolve_interval(ctx, polarized_state(1), 0.0, 2 * math.pi / ctx.schedule.h0, True)
    assert probability_up(psi, 0) > 0.98


def test_gate_off_keeps_polarised_state_in_pure_field():
    ctx = free_spin_context()
    psi, _ = evolve_interval(ctx, polarized_state(1), 0.0, 1.0, False)
    assert probability_up(psi, 0) == pytest.approx(0.0, abs=1e-14)


def test_interval_result_is_normalised(generator):
    psi, _ = evolve_interval(chain_context(), random_state(2, generator), 0.0, 0.5, True)
    assert psi.norm() == pytest.approx(1.0, abs=1e-14)


def test_sampler_fires_on_global_step_grid(generator):
    ctx = chain_context(dt=0.001)
    sampler = Sampler(10, lambda t, psi: t)
    _, times = evolve_interval(ctx, random_state(2, generator), 0.005, 0.02, False, sampler)
    assert times == pytest.approx([0.01, 0.02])


def test_zero_duration_returns_input(generator):
    psi = random_state(2, generator)
    out, samples = evolve_interval(chain_context(), psi, 0.0, 0.0, False)
    assert out is psi
    assert samples == []


def test_negative_duration_is_rejected(generator):
    with pytest.raises(ContractViolation):
        evolve_interval(chain_context(), random_state(2, generator), 0.0, -1.0, False)


def test_non_positive_step_is_rejected():
    with pytest.raises(ConfigurationError):
        free_spin_context(dt=0.0)


def test_rk4_step_requires_unit_state():
    with pytest.raises(ContractViolation):
        rk4_step(free_spin_context(), StateVector(1, np.array([2.0, 0.0])), 0.0, False)


def test_non_finite_state_is_reported():
    with pytest.raises(IntegrationDivergedError):
        rk4_step(free_spin_context(), StateVector(1, np.array([np.nan, 0.0])), 0.0, False)


def static_context(H: OperatorTermList, zeeman: OperatorTermList | None = None, dt=0.001) -> EvolutionContext:
    """Time-independent evolution: no RF, and no field unless a Zeeman term is given."""
    n_spins = H.n_spins
    return EvolutionContext(
        bare=H,
        zeeman=zeeman if zeeman is not None else OperatorTermList(n_spins),
        rf=OperatorTermList(n_spins),
        schedule=DriveSchedule(b0=10.0),
        dt=dt,
    )


def test_bare_chain_conserves_energy_over_ten_thousand_steps(generator):
    H = build_short_range_chain(2)
    psi0 = random_state(2, generator)
    psi, _ = evolve_interval(static_context(H), psi0, 0.0, 10.0, False)
    assert expectation(psi, H) == pytest.approx(expectation(psi0, H), rel=1e-8, abs=1e-12)


@pytest.mark.slow
def test_bare_chain_conserves_energy_over_a_thousand_seconds(generator):
    H = build_short_range_chain(2)
    psi0 = random_state(2, generator)
    psi, _ = evolve_interval(static_context(H, dt=0.01), psi0, 0.0, 1_000.0, False)
    assert expectation(psi, H) == pytest.approx(expectation(psi0, H), rel=1e-6, abs=1e-10)


def test_field_alone_conserves_magnetization(generator):
    ctx = static_context(OperatorTermList(3), zeeman=build_zeeman(3))
    psi0 = random_state(3, generator)
    psi, _ = evolve_interval(ctx, psi0, 0.0, 10.0, False)
    assert abs(magnetization_z(psi) - magnetization_z(psi0)) < 1e-8


def test_co_evolved_states_keep_their_overlap(generator):
    ctx = chain_context(n_spins=3, b0=10.0)
    a, b = random_state(3, generator), random_state(3, generator)
    a_t, _ = evolve_interval(ctx, a, 0.0, 10.0, True)
    b_t, _ = evolve_interval(ctx, b, 0.0, 10.0, True)
    assert abs(inner_product(a_t, b_t) - inner_product(a, b)) < 1e-8
