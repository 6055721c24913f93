import math

import numpy as np
import pytest

from apps.state.models import Direction, RngStream, StateVector
from apps.state.services import (
    basis_state,
    fidelity,
    inner_product,
    magnetization_z,
    measure_spin_z,
    polarized_state,
    probability_down,
    probability_up,
    random_infinite_temperature_state,
)
from conftest import random_state
from core.exceptions import ConfigurationError, ContractViolation, NumericalDegeneracyError


class FixedDraw:
    """Stands in for RngStream where a test needs a chosen uniform draw."""

    def __init__(self, value: float):
        self.value = value

    def uniform(self) -> float:
        return self.value


def test_basis_state_sets_bit_m_for_spin_m():
    psi = basis_state(3, ["up", "down", "up"])
    assert np.flatnonzero(psi.amplitudes).tolist() == [0b101]
    assert magnetization_z(psi) == pytest.approx(0.5)


@pytest.mark.parametrize("direction, expected", [(Direction.DOWN, -2.0), (Direction.UP, 2.0)])
def test_polarized_state_magnetization(direction, expected):
    assert magnetization_z(polarized_state(4, direction)) == pytest.approx(expected)


@pytest.mark.parametrize("n_spins", range(1, 7))
def test_basis_state_encoding_round_trip(n_spins):
    for index in range(1 << n_spins):
        pattern = [Direction.UP if (index >> m) & 1 else Direction.DOWN for m in range(n_spins)]
        psi = basis_state(n_spins, pattern)
        readout = [Direction.UP if probability_up(psi, m) > 0.5 else Direction.DOWN for m in range(n_spins)]
        assert readout == pattern
        assert np.flatnonzero(psi.amplitudes).tolist() == [index]


def test_basis_state_rejects_wrong_pattern_length():
    with pytest.raises(ConfigurationError):
        basis_state(3, ["up", "down"])


def test_state_vector_rejects_wrong_dimension():
    with pytest.raises(ContractViolation):
        StateVector(3, np.ones(7))


def test_random_state_is_normalised_and_seed_determined():
    a = random_infinite_temperature_state(5, RngStream(42))
    b = random_infinite_temperature_state(5, RngStream(42))
    c = random_infinite_temperature_state(5, RngStream(43))
    assert a.norm() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    assert not np.allclose(a.amplitudes, c.amplitudes)


def test_rng_stream_rejects_out_of_range_seed():
    with pytest.raises(ContractViolation):
        RngStream(-1)
    with pytest.raises(ContractViolation):
        RngStream(2**64)


def test_inner_product_conjugates_first_argument():
    up = basis_state(1, ["up"])
    phased = StateVector(1, np.array([0.0, 1j]))
    assert inner_product(up, phased) == pytest.approx(1j)
    assert inner_product(phased, up) == pytest.approx(-1j)
    assert fidelity(up, phased) == pytest.approx(1.0)


def test_branch_probabilities_sum_to_one(generator):
    psi = random_state(4, generator)
    for m in range(4):
        assert probability_up(psi, m) + probability_down(psi, m) == pytest.approx(1.0, abs=1e-12)


def test_probability_rejects_site_outside_chain(generator):
    psi = random_state(3, generator)
    with pytest.raises(ContractViolation):
        probability_up(psi, 3)


def test_equal_superposition_measures_up_half_the_time():
    psi = StateVector(1, np.array([1.0, 1.0]) / math.sqrt(2))
    rng = RngStream(11)
    trials = 10_000
    ups = sum(measure_spin_z(psi, 0, rng)[0].is_up for _ in range(trials))
    assert abs(ups / trials - 0.5) <= 0.015


def test_measurement_collapse_is_idempotent(generator):
    rng = RngStream(5)
    for _ in range(1_000):
        psi = random_state(3, generator)
        m = int(generator.integers(3))
        first, collapsed = measure_spin_z(psi, m, rng)
        second, again = measure_spin_z(collapsed, m, rng)
        assert second.direction is first.direction
        assert second.probability == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(again.amplitudes, collapsed.amplitudes, atol=1e-12)


def test_measurement_zeroes_the_other_branch(generator):
    psi = random_state(3, generator)
    outcome, collapsed = measure_spin_z(psi, 1, RngStream(3), time=2.5)
    assert outcome.time == 2.5
    assert collapsed.norm() == pytest.approx(1.0, abs=1e-12)
    if outcome.is_up:
        assert probability_up(collapsed, 1) == pytest.approx(1.0)
    else:
        assert probability_down(collapsed, 1) == pytest.approx(1.0)


def test_all_down_always_measures_down():
    psi = polarized_state(3)
    outcome, collapsed = measure_spin_z(psi, 2, RngStream(0))
    assert outcome.direction is Direction.DOWN
    np.testing.assert_array_equal(collapsed.amplitudes, psi.amplitudes)


def test_projection_onto_negligible_branch_raises():
    amplitudes = np.array([1.0, 1e-8], dtype=complex)
    psi = StateVector(1, amplitudes).normalized()
    with pytest.raises(NumericalDegeneracyError):
        measure_spin_z(psi, 0, FixedDraw(0.0))
