from functools import lru_cache
from typing import Sequence

import numpy as np

from apps.hamiltonian.models import OperatorTermList
from apps.hamiltonian.services import apply_terms
from apps.state.models import Direction, MeasurementOutcome, RngStream, StateVector
from core.exceptions import ConfigurationError, ContractViolation, NumericalDegeneracyError
from core.logger import logger
from core.settings import settings


@lru_cache(maxsize=32)
def _up_counts(n_spins: int) -> np.ndarray:
    index = np.arange(1 << n_spins)
    counts = np.zeros(1 << n_spins, dtype=np.int64)
    for m in range(n_spins):
        counts += (index >> m) & 1
    counts.setflags(write=False)
    return counts


@lru_cache(maxsize=256)
def _up_mask(n_spins: int, site: int) -> np.ndarray:
    mask = ((np.arange(1 << n_spins) >> site) & 1).astype(bool)
    mask.setflags(write=False)
    return mask


def _check_site(psi: StateVector, m: int):
    if not 0 <= m < psi.n_spins:
        raise ContractViolation(f"site {m} outside [0, {psi.n_spins})")


def basis_state(n_spins: int, pattern: Sequence[Direction | str]) -> StateVector:
    """Product state with spin m up or down as pattern[m] says."""
    if n_spins < 1:
        raise ConfigurationError(f"n_spins must be >= 1, got {n_spins}", key="n_spins")
    if len(pattern) != n_spins:
        raise ConfigurationError(f"pattern has {len(pattern)} entries for {n_spins} spins", key="pattern")
    index = sum(1 << m for m, direction in enumerate(pattern) if Direction(direction) is Direction.UP)
    amplitudes = np.zeros(1 << n_spins, dtype=np.complex128)
    amplitudes[index] = 1.0
    return StateVector(n_spins, amplitudes)


def polarized_state(n_spins: int, direction: Direction = Direction.DOWN) -> StateVector:
    return basis_state(n_spins, [direction] * n_spins)


def random_infinite_temperature_state(n_spins: int, rng: RngStream) -> StateVector:
    """Normalised vector of independent complex Gaussians (typical state of the infinite-temperature ensemble)."""
    if n_spins < 1:
        raise ConfigurationError(f"n_spins must be >= 1, got {n_spins}", key="n_spins")
    return StateVector(n_spins, rng.complex_gaussian(1 << n_spins)).normalized()


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugating a."""
    if a.n_spins != b.n_spins:
        raise ContractViolation(f"states on {a.n_spins} and {b.n_spins} spins")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(reference: StateVector, psi: StateVector) -> float:
    return abs(inner_product(reference, psi)) ** 2


def magnetization_z(psi: StateVector) -> float:
    """<sum_m S^z_m>, in [-N/2, N/2]."""
    probabilities = np.abs(psi.amplitudes) ** 2
    return float(np.dot(probabilities, _up_counts(psi.n_spins) - psi.n_spins / 2))


def expectation(psi: StateVector, H: OperatorTermList) -> float:
    value = inner_product(psi, apply_terms(H, psi))
    return value.real


def probability_up(psi: StateVector, m: int) -> float:
    _check_site(psi, m)
    return float(np.sum(np.abs(psi.amplitudes[_up_mask(psi.n_spins, m)]) ** 2))


def probability_down(psi: StateVector, m: int) -> float:
    _check_site(psi, m)
    return float(np.sum(np.abs(psi.amplitudes[~_up_mask(psi.n_spins, m)]) ** 2))


def measure_spin_z(
        psi: StateVector, m: int, rng: RngStream, time: float = 0.0
) -> tuple[MeasurementOutcome, StateVector]:
    """
    Projective measurement of S^z on spin m.

    Up is realised iff a uniform draw falls below probability_up; the
    amplitudes of the other branch are zeroed and the state renormalised.
    """
    p_up = probability_up(psi, m)
    is_up = rng.uniform() < p_up
    probability = p_up if is_up else probability_down(psi, m)
    if probability < settings.DEGENERACY_THRESHOLD:
        raise NumericalDegeneracyError(
            f"cannot project spin {m} onto a branch of probability {probability:.3e}"
        )

    keep = _up_mask(psi.n_spins, m) if is_up else ~_up_mask(psi.n_spins, m)
    amplitudes = np.where(keep, psi.amplitudes, 0.0)
    outcome = MeasurementOutcome(
        spin=m, direction=Direction.UP if is_up else Direction.DOWN, probability=probability, time=time
    )
    logger.debug("spin measured", spin=m, direction=outcome.direction.value, probability=probability, t=time)
    return outcome, StateVector(psi.n_spins, amplitudes).normalized()
