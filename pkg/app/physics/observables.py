"""
Observables derived from the physical state: Bloch vector, its norm R,
populations and coherences, revival detection.
"""
import numpy as np
import numpy.typing as npt
from scipy.signal import find_peaks

from app.core.exceptions import PreconditionViolated
from app.physics.algebra import Mat2
from app.physics.integrate import Trajectory

DEFAULT_PROMINENCE = 1e-3


def bloch(rho: Mat2) -> tuple[float, float, float]:
    """``(Tr rho sx, Tr rho sy, Tr rho sz)``."""
    x, y, z = bloch_components(np.asarray(rho)[None])[0]
    return float(x), float(y), float(z)


def bloch_norm(rho: Mat2) -> float:
    return float(np.linalg.norm(bloch(rho)))


def bloch_components(rhos: npt.NDArray[np.complex128]) -> npt.NDArray[np.float64]:
    """Bloch vectors for a stack of states, shape ``(M, 3)``."""
    coherence = rhos[:, 0, 1] + np.conj(rhos[:, 1, 0])
    x = coherence.real
    y = -coherence.imag
    z = (rhos[:, 0, 0] - rhos[:, 1, 1]).real
    return np.stack([x, y, z], axis=-1)


def purity_series(traj: Trajectory) -> npt.NDArray[np.float64]:
    """R(tau) at every sample."""
    return np.linalg.norm(bloch_components(traj.rhos), axis=-1)


def cycle_envelope(traj: Trajectory) -> npt.NDArray[np.float64]:
    """
    Mean of R(tau) over each reference period, shape ``(cycles,)``.

    Whole-period averages cancel the counter-rotating ripple at twice the
    system frequency.
    """
    spc = traj.samples_per_cycle
    radius = purity_series(traj)[: traj.cycles * spc]
    return radius.reshape(traj.cycles, spc).mean(axis=1)


def revival_count(traj: Trajectory, prominence: float = DEFAULT_PROMINENCE) -> int:
    """
    Number of interior local maxima of the per-cycle envelope of R(tau)
    whose topographic prominence reaches ``prominence``.
    """
    if prominence <= 0:
        raise ValueError("prominence must be positive")
    peaks, _ = find_peaks(cycle_envelope(traj), prominence=prominence)
    return int(len(peaks))


def g_form_check(traj: Trajectory) -> float:
    """
    Max over samples of ``| |rho12/rho12(0)|^2 - rho11/rho11(0) |``.

    Both ratios are ``|G|^2`` when the undriven dynamics has the single-G
    form; the residual measures how far the evolution departs from it.
    """
    if traj.params.Delta != 0:
        raise PreconditionViolated("g_form_check needs an undriven run (Delta = 0)")
    rho11 = traj.rho11
    rho12 = traj.rho12
    if rho11[0] <= 0 or abs(rho12[0]) == 0:
        raise PreconditionViolated("initial excited population and coherence must be non-zero")
    coherence_ratio = np.abs(rho12 / rho12[0]) ** 2
    population_ratio = rho11 / rho11[0]
    return float(np.abs(coherence_ratio - population_ratio).max())
