import numpy as np
import pytest

from apps.hamiltonian.services import build_long_range_chain, build_short_range_chain, build_zeeman, dense_matrix
from apps.spectrum.services import ground_state
from apps.state.models import RngStream
from apps.state.services import expectation, fidelity, polarized_state
from conftest import random_state
from core.exceptions import ConfigurationError, NonConvergenceError
from core.settings import settings


@pytest.mark.parametrize("n_spins", [2, 3, 4, 5])
@pytest.mark.parametrize("builder", [build_short_range_chain, build_long_range_chain])
def test_ground_state_matches_dense_diagonalisation(n_spins, builder):
    H = builder(n_spins)
    energies = np.linalg.eigvalsh(dense_matrix(H))
    result = ground_state(H)
    assert result.energy == pytest.approx(energies[0], abs=1e-9)
    assert result.excited_energy == pytest.approx(energies[1], abs=1e-9)
    assert result.residual < 1e-8
    assert result.state.norm() == pytest.approx(1.0, abs=1e-12)


def test_ground_state_phase_is_fixed():
    result = ground_state(build_short_range_chain(6))
    amplitudes = result.state.amplitudes
    pivot = amplitudes[np.argmax(np.abs(amplitudes))]
    assert pivot.imag == pytest.approx(0.0, abs=1e-12)
    assert pivot.real > 0


def test_ground_state_is_seed_independent():
    H = build_short_range_chain(8)
    a = ground_state(H, rng=RngStream(1))
    b = ground_state(H, rng=RngStream(2))
    assert a.energy == pytest.approx(b.energy, abs=1e-10)
    assert abs(np.vdot(a.state.amplitudes, b.state.amplitudes)) == pytest.approx(1.0, abs=1e-8)


def test_energy_equals_rayleigh_quotient():
    H = build_long_range_chain(7)
    result = ground_state(H)
    assert expectation(result.state, H) == pytest.approx(result.energy, abs=1e-12)
    assert result.gap > 0


def test_short_range_chain_ground_energy():
    assert ground_state(build_short_range_chain(14)).energy == pytest.approx(-4.189, abs=1e-3)


def test_long_range_chain_ground_energy():
    assert ground_state(build_long_range_chain(14)).energy == pytest.approx(-6.59, abs=1e-2)


def test_strong_field_ground_energy():
    H = build_short_range_chain(14) + build_zeeman(14).scaled(10.0)
    assert ground_state(H).energy == pytest.approx(-68.39, abs=1e-2)


def test_non_positive_tolerance_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        ground_state(build_short_range_chain(4), tol=0.0)


def test_exhausted_iterations_report_best_residual():
    with pytest.raises(NonConvergenceError) as exc_info:
        ground_state(build_short_range_chain(10), max_iter=1)
    assert exc_info.value.best_residual > 0


def test_ground_energy_is_a_variational_lower_bound(generator):
    H = build_short_range_chain(8)
    energy = ground_state(H).energy
    for _ in range(100):
        assert energy <= expectation(random_state(8, generator), H) + 1e-12


@pytest.mark.parametrize("builder", [build_short_range_chain, build_long_range_chain])
def test_transverse_field_lifts_ground_state_degeneracy(builder):
    assert ground_state(builder(14)).gap > 10 * settings.EIGEN_TOL


def test_strong_field_ground_state_is_close_to_all_down():
    H = build_short_range_chain(14) + build_zeeman(14).scaled(10.0)
    assert fidelity(polarized_state(14), ground_state(H).state) > 0.95
