import numpy as np
import pytest

from apps.hamiltonian.models import Axis
from apps.state.models import RngStream, StateVector

SEEDS = (1, 2, 3, 4, 5)

SIGMA = {
    Axis.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Axis.Y: np.array([[0, 1j], [-1j, 0]], dtype=complex),
    Axis.Z: np.array([[-1, 0], [0, 1]], dtype=complex),
}


def spin_operator(n_spins: int, site: int, axis: Axis) -> np.ndarray:
    """
    Dense S^axis on one site, Kronecker-built independently of the kernel.

    Basis index b has spin m in bit m (1 = up); single-spin basis order is
    (down, up), so site 0 is the rightmost Kronecker factor.
    """
    matrix = np.array([[1.0]], dtype=complex)
    for m in reversed(range(n_spins)):
        factor = SIGMA[axis] / 2 if m == site else np.eye(2, dtype=complex)
        matrix = np.kron(matrix, factor)
    return matrix


def dense_chain(n_spins, jx=1.0, jy=-0.5, jz=0.5, hy=0.3, periodic=True) -> np.ndarray:
    n_bonds = n_spins if periodic else n_spins - 1
    dimension = 1 << n_spins
    H = np.zeros((dimension, dimension), dtype=complex)
    for m in range(n_bonds):
        n = (m + 1) % n_spins
        for coefficient, axis in ((jx, Axis.X), (jy, Axis.Y), (jz, Axis.Z)):
            H += coefficient * spin_operator(n_spins, m, axis) @ spin_operator(n_spins, n, axis)
    for m in range(n_spins):
        H += hy * spin_operator(n_spins, m, Axis.Y)
    return H


def random_state(n_spins: int, generator: np.random.Generator) -> StateVector:
    dimension = 1 << n_spins
    amplitudes = generator.normal(size=dimension) + 1j * generator.normal(size=dimension)
    return StateVector(n_spins, amplitudes).normalized()


@pytest.fixture
def generator():
    return np.random.default_rng(20240611)


@pytest.fixture
def rng():
    return RngStream(7)
