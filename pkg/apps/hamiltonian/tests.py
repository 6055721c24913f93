import math

import numpy as np
import pytest

from apps.hamiltonian.models import Axis, DistanceRule, DriveSchedule, OperatorTermList, PauliTerm
from apps.hamiltonian.services import (
    apply_terms,
    build_long_range_chain,
    build_rf,
    build_short_range_chain,
    build_zeeman,
    dense_matrix,
    field_envelope,
    pair_distance,
    rf_envelope,
)
from apps.state.models import StateVector
from apps.state.services import expectation, polarized_state
from conftest import dense_chain, random_state, spin_operator
from core.exceptions import ConfigurationError, ContractViolation


@pytest.mark.parametrize("n_spins", [2, 3, 4])
@pytest.mark.parametrize("periodic", [True, False])
def test_kernel_matches_kronecker_oracle(n_spins, periodic, generator):
    H = build_short_range_chain(n_spins, periodic=periodic)
    oracle = dense_chain(n_spins, periodic=periodic)
    for _ in range(100 if n_spins == 4 else 10):
        psi = random_state(n_spins, generator)
        np.testing.assert_allclose(apply_terms(H, psi).amplitudes, oracle @ psi.amplitudes, atol=1e-10)


def test_zeeman_and_rf_match_oracle(generator):
    n_spins = 3
    zeeman = sum(spin_operator(n_spins, m, Axis.Z) for m in range(n_spins))
    rf = sum(spin_operator(n_spins, m, Axis.X) for m in range(n_spins))
    np.testing.assert_allclose(dense_matrix(build_zeeman(n_spins)), zeeman, atol=1e-14)
    np.testing.assert_allclose(dense_matrix(build_rf(n_spins)), rf, atol=1e-14)


@pytest.mark.parametrize(
    "couplings, expected",
    [
        ({}, {0: 0.125, 3: 0.375}),
        ({"jy": 0.5}, {0: 0.125, 3: 0.125}),
        ({"jx": 0.0, "jy": 0.0, "jz": 0.0, "hy": 0.3}, {1: -0.15j, 2: -0.15j}),
    ],
)
def test_two_spin_chain_applied_to_all_down(couplings, expected):
    options = {"hy": 0.0, "periodic": False} | couplings
    H = build_short_range_chain(2, **options)
    all_down = StateVector(2, np.array([1, 0, 0, 0]))
    out = np.zeros(4, dtype=complex)
    for index, amplitude in expected.items():
        out[index] = amplitude
    np.testing.assert_allclose(apply_terms(H, all_down).amplitudes, out, atol=1e-14)


@pytest.mark.parametrize(
    "builder",
    [
        lambda: build_short_range_chain(4),
        lambda: build_long_range_chain(4),
        lambda: build_long_range_chain(4, distance_rule=DistanceRule.LINEAR),
    ],
)
def test_operators_are_hermitian(builder):
    matrix = dense_matrix(builder())
    np.testing.assert_allclose(matrix, matrix.conj().T, atol=1e-14)


def test_single_spin_sy_ground_state():
    sy = OperatorTermList(1, (PauliTerm(1.0, ((0, Axis.Y),)),))
    # amplitudes are indexed (down, up): this is (|up> - i|down>) / sqrt 2
    psi = StateVector(1, np.array([-1j, 1.0]) / math.sqrt(2))
    np.testing.assert_allclose(apply_terms(sy, psi).amplitudes, -0.5 * psi.amplitudes, atol=1e-15)


def test_polarized_state_energy_in_strong_field():
    H = build_short_range_chain(14) + build_zeeman(14).scaled(10.0)
    assert expectation(polarized_state(14), H) == pytest.approx(-68.25, abs=1e-12)


def test_zero_coefficients_are_skipped():
    H = build_short_range_chain(4, jy=0.0, hy=0.0)
    axes = {axis for term in H.terms for _, axis in term.factors}
    assert Axis.Y not in axes
    assert len(H.terms) == 8


def bond_coefficients(H):
    return {tuple(site for site, _ in term.factors): term.coefficient for term in H.terms}


def test_long_range_couplings_fall_off_with_distance():
    coefficients = bond_coefficients(build_long_range_chain(5, jx=1.0, jy=0.0, jz=0.0, hy=0.0, distance_rule=DistanceRule.LINEAR))
    assert len(coefficients) == 10
    assert coefficients[(0, 1)] == pytest.approx(1.0)
    assert coefficients[(0, 4)] == pytest.approx(0.25)


def test_long_range_chain_measures_distance_around_the_ring_by_default():
    coefficients = bond_coefficients(build_long_range_chain(5, jx=1.0, jy=0.0, jz=0.0, hy=0.0))
    assert coefficients[(0, 4)] == pytest.approx(1.0)
    assert coefficients[(0, 2)] == pytest.approx(0.5)
    assert coefficients[(1, 4)] == pytest.approx(0.5)


def test_ring_distance_wraps_around():
    assert pair_distance(0, 4, 5, DistanceRule.LINEAR) == 4
    assert pair_distance(0, 4, 5, DistanceRule.RING) == 1


@pytest.mark.parametrize("builder", [build_short_range_chain, build_long_range_chain])
def test_chain_needs_two_spins(builder):
    with pytest.raises(ConfigurationError) as exc_info:
        builder(1)
    assert exc_info.value.key == "n_spins"


def test_repeated_site_in_term_is_rejected():
    with pytest.raises(ContractViolation):
        PauliTerm(1.0, ((0, Axis.X), (0, Axis.Z)))


def test_apply_rejects_mismatched_state(generator):
    with pytest.raises(ContractViolation):
        apply_terms(build_short_range_chain(3), random_state(4, generator))


def test_apply_scales_result(generator):
    H = build_short_range_chain(3)
    psi = random_state(3, generator)
    np.testing.assert_allclose(
        apply_terms(H, psi, scale=-2.0).amplitudes, -2.0 * apply_terms(H, psi).amplitudes, atol=1e-14
    )


def test_field_envelope_decays_after_ramp_start():
    schedule = DriveSchedule(b0=10.0, t0=100.0, ramp_start=50.0)
    assert field_envelope(schedule, 20.0) == 10.0
    assert field_envelope(schedule, 50.0) == pytest.approx(10.0)
    assert field_envelope(schedule, 150.0) == pytest.approx(10.0 / math.e)


def test_rf_envelope_follows_gate_on_global_clock():
    schedule = DriveSchedule(h0=2.0, omega=5.0)
    assert rf_envelope(schedule, 1.0) == 0.0
    assert rf_envelope(schedule, 1.0, gate=True) == pytest.approx(2.0 * math.cos(5.0))
    assert rf_envelope(DriveSchedule(h0=2.0, omega=5.0, rf_gate=True), 0.0) == pytest.approx(2.0)


@pytest.mark.parametrize("n_spins", [2, 5, 8])
@pytest.mark.parametrize(
    "builder",
    [
        build_short_range_chain,
        lambda n: build_short_range_chain(n, periodic=False),
        build_long_range_chain,
        lambda n: build_long_range_chain(n, distance_rule=DistanceRule.LINEAR),
        lambda n: build_zeeman(n) + build_rf(n),
    ],
    ids=["ring", "open", "long-range", "long-range-linear", "drive"],
)
def test_apply_is_hermitian_on_random_vectors(n_spins, builder, generator):
    H = builder(n_spins)
    for _ in range(10):
        phi, psi = random_state(n_spins, generator), random_state(n_spins, generator)
        left = np.vdot(phi.amplitudes, apply_terms(H, psi).amplitudes)
        right = np.conj(np.vdot(psi.amplitudes, apply_terms(H, phi).amplitudes))
        assert abs(left - right) < 1e-10


def test_periodic_chain_diagonal_is_translation_invariant():
    n_spins = 6
    diagonal = np.diag(dense_matrix(build_short_range_chain(n_spins)))
    full = (1 << n_spins) - 1
    for b in range(1 << n_spins):
        shifted = ((b << 1) | (b >> (n_spins - 1))) & full
        assert diagonal[shifted] == pytest.approx(diagonal[b], abs=1e-14)
