"""
Builders for the spin-chain operators, drive envelopes and the matrix-free kernel.

All operators are spin-1/2 operators S = Pauli / 2 with hbar = gamma = 1.
"""
import math

import numpy as np

from apps.hamiltonian.models import Axis, DistanceRule, DriveSchedule, OperatorTermList, PauliTerm
from apps.state.models import StateVector
from core.exceptions import ConfigurationError, ContractViolation


def _bond_terms(m: int, n: int, jx: float, jy: float, jz: float) -> list[PauliTerm]:
    return [
        PauliTerm(coefficient, ((m, axis), (n, axis)))
        for coefficient, axis in ((jx, Axis.X), (jy, Axis.Y), (jz, Axis.Z))
        if coefficient != 0.0
    ]


def _field_terms(n_spins: int, coefficient: float, axis: Axis) -> list[PauliTerm]:
    if coefficient == 0.0:
        return []
    return [PauliTerm(coefficient, ((m, axis),)) for m in range(n_spins)]


def build_short_range_chain(
        n_spins: int,
        jx: float = 1.0,
        jy: float = -0.5,
        jz: float = 0.5,
        hy: float = 0.3,
        periodic: bool = True,
) -> OperatorTermList:
    """
    Nearest-neighbour chain sum_m Jx SxSx + Jy SySy + Jz SzSz + hy sum_m S^y.

    Defaults (1, -0.5, +0.5, 0.3) give a 14-spin ring ground energy of
    -4.189, and -68.25 for the fully polarised state in a field of 10.
    Terms with a zero coefficient are left out.
    """
    if n_spins < 2:
        raise ConfigurationError(f"a chain needs at least 2 spins, got {n_spins}", key="n_spins")
    n_bonds = n_spins if periodic else n_spins - 1
    terms = []
    for m in range(n_bonds):
        terms += _bond_terms(m, (m + 1) % n_spins, jx, jy, jz)
    terms += _field_terms(n_spins, hy, Axis.Y)
    return OperatorTermList(n_spins, tuple(terms))


def pair_distance(m: int, n: int, n_spins: int, rule: DistanceRule) -> int:
    distance = abs(m - n)
    if rule is DistanceRule.RING:
        distance = min(distance, n_spins - distance)
    return distance


def build_long_range_chain(
        n_spins: int,
        jx: float = 1.0,
        jy: float = -0.5,
        jz: float = 0.5,
        hy: float = 0.3,
        distance_rule: DistanceRule = DistanceRule.RING,
) -> OperatorTermList:
    """
    All-to-all chain with couplings (Jx, Jy, Jz) / d(m, n) for every pair m < n.

    Distances are measured around the ring by default; the 14-spin ground
    energy is then -6.59.
    """
    if n_spins < 2:
        raise ConfigurationError(f"a chain needs at least 2 spins, got {n_spins}", key="n_spins")
    rule = DistanceRule(distance_rule)
    terms = []
    for m in range(n_spins):
        for n in range(m + 1, n_spins):
            d = pair_distance(m, n, n_spins, rule)
            terms += _bond_terms(m, n, jx / d, jy / d, jz / d)
    terms += _field_terms(n_spins, hy, Axis.Y)
    return OperatorTermList(n_spins, tuple(terms))


def build_zeeman(n_spins: int) -> OperatorTermList:
    """sum_m S^z with unit coefficients; B(t) scales it."""
    return OperatorTermList(n_spins, tuple(_field_terms(n_spins, 1.0, Axis.Z)))


def build_rf(n_spins: int) -> OperatorTermList:
    """sum_m S^x with unit coefficients; h(t) scales it."""
    return OperatorTermList(n_spins, tuple(_field_terms(n_spins, 1.0, Axis.X)))


def field_envelope(sched: DriveSchedule, t: float) -> float:
    if t < sched.ramp_start:
        return sched.b0
    return sched.b0 * math.exp(-(t - sched.ramp_start) / sched.t0)


def rf_envelope(sched: DriveSchedule, t: float, gate: bool | None = None) -> float:
    """h0 cos(omega t) on the global clock while the gate is on, 0 otherwise."""
    if gate is None:
        gate = sched.rf_gate
    if not gate:
        return 0.0
    return sched.h0 * math.cos(sched.omega * t)


def apply_terms(H: OperatorTermList, psi: StateVector, scale: float = 1.0) -> StateVector:
    """scale * H * psi, not normalised."""
    if H.n_spins != psi.n_spins:
        raise ContractViolation(f"operator acts on {H.n_spins} spins, state has {psi.n_spins}")
    return StateVector(psi.n_spins, scale * H.compiled.apply(psi.amplitudes))


def dense_matrix(H: OperatorTermList) -> np.ndarray:
    """Explicit 2^N x 2^N matrix, column b = H |b>. Only sensible for small N."""
    dimension = 1 << H.n_spins
    matrix = np.zeros((dimension, dimension), dtype=np.complex128)
    basis = np.zeros(dimension, dtype=np.complex128)
    for b in range(dimension):
        basis[b] = 1.0
        matrix[:, b] = H.compiled.apply(basis)
        basis[b] = 0.0
    return matrix
