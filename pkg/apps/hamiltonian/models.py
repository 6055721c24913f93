import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from core.exceptions import ContractViolation


class Axis(str, Enum):
    X = "x"
    Y = "y"
    Z = "z"


class DistanceRule(str, Enum):
    LINEAR = "linear"
    RING = "ring"


@dataclass(frozen=True)
class PauliTerm:
    """
    coefficient * S^a1_{m1} S^a2_{m2} ..., with S = Pauli / 2 and distinct sites.
    """

    coefficient: float
    factors: tuple[tuple[int, Axis], ...]

    def __post_init__(self):
        if not math.isfinite(self.coefficient):
            raise ContractViolation(f"coefficient must be finite, got {self.coefficient}")
        sites = [site for site, _ in self.factors]
        if len(set(sites)) != len(sites):
            raise ContractViolation(f"factor sites must be distinct, got {sites}")

    @property
    def flip_mask(self) -> int:
        """Bits flipped by the S^x and S^y factors."""
        mask = 0
        for site, axis in self.factors:
            if axis is not Axis.Z:
                mask |= 1 << site
        return mask


@dataclass(frozen=True)
class CompiledTerms:
    """
    Bit-index form of a term list.

    (H psi)[a] = diagonal[a] psi[a] + sum_k coefficients[k, a] psi[permutations[k, a]]
    where permutations[k] = a XOR masks[k].
    """

    diagonal: np.ndarray = field(repr=False)
    masks: tuple[int, ...]
    permutations: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        out = self.diagonal * amplitudes
        if self.masks:
            out += np.einsum("kd,kd->d", self.coefficients, amplitudes[self.permutations])
        return out


@dataclass(frozen=True)
class OperatorTermList:
    """Hermitian operator on N spins as a weighted sum of Pauli strings; applied matrix-free."""

    n_spins: int
    terms: tuple[PauliTerm, ...] = ()

    def __post_init__(self):
        if self.n_spins < 1:
            raise ContractViolation(f"n_spins must be >= 1, got {self.n_spins}")
        for term in self.terms:
            for site, _ in term.factors:
                if not 0 <= site < self.n_spins:
                    raise ContractViolation(f"site {site} outside [0, {self.n_spins})")

    def __add__(self, other: "OperatorTermList") -> "OperatorTermList":
        if other.n_spins != self.n_spins:
            raise ContractViolation(f"cannot add operators on {self.n_spins} and {other.n_spins} spins")
        return OperatorTermList(self.n_spins, self.terms + other.terms)

    def scaled(self, factor: float) -> "OperatorTermList":
        return OperatorTermList(
            self.n_spins, tuple(PauliTerm(factor * term.coefficient, term.factors) for term in self.terms)
        )

    @cached_property
    def compiled(self) -> CompiledTerms:
        dimension = 1 << self.n_spins
        index = np.arange(dimension)
        diagonal = np.zeros(dimension, dtype=np.complex128)
        off_diagonal: dict[int, np.ndarray] = {}

        for term in self.terms:
            mask = term.flip_mask
            source = index ^ mask
            factor = np.full(dimension, term.coefficient, dtype=np.complex128)
            for site, axis in term.factors:
                bits = (source >> site) & 1
                if axis is Axis.X:
                    factor *= 0.5
                elif axis is Axis.Y:
                    # sigma_y|down> = -i|up>, sigma_y|up> = +i|down>
                    factor *= np.where(bits == 1, 0.5j, -0.5j)
                else:
                    factor *= np.where(bits == 1, 0.5, -0.5)
            if mask == 0:
                diagonal += factor
            elif mask in off_diagonal:
                off_diagonal[mask] += factor
            else:
                off_diagonal[mask] = factor

        masks = tuple(sorted(off_diagonal))
        if masks:
            permutations = np.stack([index ^ mask for mask in masks])
            coefficients = np.stack([off_diagonal[mask] for mask in masks])
        else:
            permutations = np.empty((0, dimension), dtype=index.dtype)
            coefficients = np.empty((0, dimension), dtype=np.complex128)
        return CompiledTerms(diagonal, masks, permutations, coefficients)


@dataclass(frozen=True)
class DriveSchedule:
    """
    Time envelopes of the Zeeman field and the RF drive.

    B(t) = b0 before ramp_start and b0 * exp(-(t - ramp_start) / t0) after;
    h(t) = h0 * g(t) * cos(omega * t) with g the RF gate.
    """

    b0: float = 10.0
    t0: float = 1e4
    ramp_start: float = math.inf
    h0: float = 1.0
    omega: float = 5.0
    rf_gate: bool = False

    def __post_init__(self):
        if self.t0 <= 0:
            raise ContractViolation(f"ramp time constant must be positive, got {self.t0}")
