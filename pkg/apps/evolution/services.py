"""
Fixed-step fourth-order Runge-Kutta integration of  d psi / dt = -i H(t) psi.

Envelopes are evaluated at t, t + dt/2 and t + dt. Simulation times live on
the grid t = k * dt with k the global step index.
"""
from typing import Any, Optional

import numpy as np

from apps.evolution.models import EvolutionContext, Sampler
from apps.hamiltonian.services import field_envelope, rf_envelope
from apps.state.models import StateVector
from core.exceptions import ContractViolation, IntegrationDivergedError
from core.settings import settings


def _derivative(ctx: EvolutionContext, amplitudes: np.ndarray, t: float, gate: bool) -> np.ndarray:
    out = ctx.bare.compiled.apply(amplitudes)
    b = field_envelope(ctx.schedule, t)
    if b != 0.0:
        out += b * ctx.zeeman.compiled.apply(amplitudes)
    h = rf_envelope(ctx.schedule, t, gate)
    if h != 0.0:
        out += h * ctx.rf.compiled.apply(amplitudes)
    return -1j * out


def _step(ctx: EvolutionContext, amplitudes: np.ndarray, t: float, gate: bool) -> np.ndarray:
    dt = ctx.dt
    half = dt / 2.0
    k1 = _derivative(ctx, amplitudes, t, gate)
    k2 = _derivative(ctx, amplitudes + half * k1, t + half, gate)
    k3 = _derivative(ctx, amplitudes + half * k2, t + half, gate)
    k4 = _derivative(ctx, amplitudes + dt * k3, t + dt, gate)
    return amplitudes + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(amplitudes: np.ndarray, t: float):
    if not np.all(np.isfinite(amplitudes)):
        raise IntegrationDivergedError(f"state became non-finite at t={t:.6g}")


def rk4_step(ctx: EvolutionContext, psi: StateVector, t: float, gate: bool) -> StateVector:
    """One RK4 step from t to t + dt. The result is not renormalised."""
    if psi.n_spins != ctx.n_spins:
        raise ContractViolation(f"context acts on {ctx.n_spins} spins, state has {psi.n_spins}")
    if abs(psi.norm() - 1.0) > settings.NORM_TOLERANCE:
        raise ContractViolation(f"rk4_step needs a unit state, norm is {psi.norm():.9f}")
    amplitudes = _step(ctx, psi.amplitudes, t, gate)
    _check_finite(amplitudes, t + ctx.dt)
    return StateVector(psi.n_spins, amplitudes)


def evolve_interval(
        ctx: EvolutionContext,
        psi: StateVector,
        t0: float,
        duration: float,
        gate: bool,
        sampler: Optional[Sampler] = None,
) -> tuple[StateVector, list[Any]]:
    """
    Integrate over ``duration`` (rounded to whole steps) starting at ``t0``.

    The state is renormalised every ``RENORM_EVERY`` steps and at the end of a
    non-empty interval. Returns the final state and whatever the sampler
    callback produced.
    """
    if psi.n_spins != ctx.n_spins:
        raise ContractViolation(f"context acts on {ctx.n_spins} spins, state has {psi.n_spins}")
    n_steps = ctx.steps_for(duration)
    if n_steps == 0:
        return psi, []

    start = ctx.step_index(t0)
    amplitudes = psi.amplitudes
    samples = []
    for k in range(1, n_steps + 1):
        amplitudes = _step(ctx, amplitudes, (start + k - 1) * ctx.dt, gate)
        if k % settings.RENORM_EVERY == 0:
            _check_finite(amplitudes, (start + k) * ctx.dt)
            amplitudes = amplitudes / np.linalg.norm(amplitudes)
        if sampler is not None and (start + k) % sampler.every == 0:
            t = (start + k) * ctx.dt
            samples.append(sampler.callback(t, StateVector(psi.n_spins, amplitudes / np.linalg.norm(amplitudes))))

    t_end = (start + n_steps) * ctx.dt
    _check_finite(amplitudes, t_end)
    return StateVector(psi.n_spins, amplitudes).normalized(), samples
