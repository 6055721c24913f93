from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.exceptions import ContractViolation


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    Pure state of N spin-1/2 particles in the computational z-basis.

    Bit m of a basis index encodes spin m; a set bit means up (S^z = +1/2).
    """

    n_spins: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_spins < 1:
            raise ContractViolation(f"n_spins must be >= 1, got {self.n_spins}")
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (1 << self.n_spins,):
            raise ContractViolation(
                f"expected {1 << self.n_spins} amplitudes for {self.n_spins} spins, got shape {amplitudes.shape}"
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dimension(self) -> int:
        return 1 << self.n_spins

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.n_spins, self.amplitudes / self.norm())


@dataclass(frozen=True)
class MeasurementOutcome:
    """Result of one projective S^z measurement; probability is that of the realised branch."""

    spin: int
    direction: Direction
    probability: float
    time: float

    @property
    def is_up(self) -> bool:
        return self.direction is Direction.UP


class RngStream:
    """
    Seeded random stream.

    Wraps a PCG64 bit generator, whose output for a given seed is identical
    across runs and platforms, and counts the draws taken from it.
    """

    algorithm = "PCG64"

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ContractViolation(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.draws = 0
        self._generator = np.random.Generator(np.random.PCG64(seed))

    def uniform(self) -> float:
        """Uniform draw in [0, 1)."""
        self.draws += 1
        return float(self._generator.random())

    def integer(self, high: int) -> int:
        """Uniform integer in [0, high)."""
        self.draws += 1
        return int(self._generator.integers(high))

    def complex_gaussian(self, size: int) -> np.ndarray:
        """Independent standard complex Gaussians (real and imaginary parts unit normal)."""
        self.draws += 2 * size
        return self._generator.standard_normal(size) + 1j * self._generator.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, algorithm={self.algorithm}, draws={self.draws})"
