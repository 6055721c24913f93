from typing import Optional

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from apps.hamiltonian.models import OperatorTermList
from apps.hamiltonian.services import dense_matrix
from apps.spectrum.models import EigenResult
from apps.state.models import RngStream, StateVector
from core.exceptions import ConfigurationError, NonConvergenceError
from core.logger import logger
from core.settings import settings


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude amplitude real and positive."""
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (np.conj(pivot) / abs(pivot))


def _residual(H: OperatorTermList, vector: np.ndarray, energy: float) -> float:
    return float(np.linalg.norm(H.compiled.apply(vector) - energy * vector))


def _dense_lowest(H: OperatorTermList) -> tuple[np.ndarray, np.ndarray]:
    energies, vectors = scipy.linalg.eigh(dense_matrix(H))
    return energies[:2], vectors[:, :2]


def _krylov_lowest(H: OperatorTermList, tol: float, max_iter: int, rng: RngStream, counter: list[int]):
    dimension = 1 << H.n_spins

    def matvec(x):
        counter[0] += 1
        return H.compiled.apply(np.asarray(x, dtype=np.complex128).ravel())

    operator = LinearOperator((dimension, dimension), matvec=matvec, dtype=np.complex128)
    v0 = rng.complex_gaussian(dimension)
    try:
        # tol=0 asks ARPACK for machine precision; the residual certificate is checked separately
        energies, vectors = eigsh(operator, k=2, which="SA", v0=v0, tol=0, maxiter=max_iter)
    except ArpackNoConvergence as exc:
        best = min(
            (_residual(H, exc.eigenvectors[:, i] / np.linalg.norm(exc.eigenvectors[:, i]), exc.eigenvalues[i].real)
             for i in range(len(exc.eigenvalues))),
            default=float("inf"),
        )
        raise NonConvergenceError(f"Lanczos iteration did not converge within {max_iter} restarts", best) from exc
    order = np.argsort(energies.real)
    return energies.real[order], vectors[:, order]


def ground_state(
        H: OperatorTermList,
        tol: Optional[float] = None,
        max_iter: Optional[int] = None,
        rng: Optional[RngStream] = None,
) -> EigenResult:
    """
    Lowest eigenpair of H, matrix-free.

    Uses implicitly restarted Lanczos (ARPACK) on a LinearOperator wrapping the
    bit-index kernel, started from a seeded random vector; systems of at most
    ``DENSE_CUTOFF`` spins are diagonalised densely. The two lowest eigenvalues
    are computed so the gap can be reported.
    """
    tol = settings.EIGEN_TOL if tol is None else tol
    max_iter = settings.EIGEN_MAX_ITER if max_iter is None else max_iter
    if not tol > 0:
        raise ConfigurationError(f"tolerance must be positive, got {tol}", key="tol")
    rng = rng if rng is not None else RngStream(0)

    counter = [0]
    if H.n_spins <= settings.DENSE_CUTOFF:
        energies, vectors = _dense_lowest(H)
    else:
        energies, vectors = _krylov_lowest(H, tol, max_iter, rng, counter)

    vector = _fix_phase(vectors[:, 0] / np.linalg.norm(vectors[:, 0]))
    energy = float(np.vdot(vector, H.compiled.apply(vector)).real)
    residual = _residual(H, vector, energy)
    if residual >= tol:
        raise NonConvergenceError(f"ground state residual above tolerance {tol:.1e}", residual)

    logger.info(
        "ground state found",
        n_spins=H.n_spins,
        energy=energy,
        gap=float(energies[1] - energy) if len(energies) > 1 else None,
        residual=residual,
        matvecs=counter[0],
    )
    return EigenResult(
        energy=energy,
        state=StateVector(H.n_spins, vector),
        residual=residual,
        iterations=counter[0],
        excited_energy=float(energies[1]),
    )
