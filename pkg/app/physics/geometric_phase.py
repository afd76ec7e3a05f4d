"""
Geometric phase of the reduced-state eigen-trajectory.

The main route is a Pancharatnam fold over the sampled leading eigenvector:
each new eigenvector is parallel transported against its predecessor and the
phase is the continuously unwrapped ``arg <v(0)|v(tau)>``. Every quantity that
enters is a Bargmann product of overlaps, so the result does not depend on the
phases the eigensolver happens to attach to its vectors.

Raw phases accumulate ``-pi (1 - cos theta0)`` per unitary cycle. Reported
phases use the positive convention ``phi = Phi + 2 pi tau / T`` so that the
unitary reference reads ``pi (1 + cos theta0)`` per cycle; the two agree mod 2 pi.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.integrate import cumulative_simpson

from app.core.exceptions import DegeneracyEncountered, OverlapTooSmall
from app.physics.algebra import Vec2, eig_hermitian, eigvalsh_stack
from app.physics.integrate import Trajectory
from app.physics.observables import bloch_components

logger = logging.getLogger(__name__)

GAP_TOL = 1e-8
NEAR_DEGENERACY = 1e-4
MIN_OVERLAP = 0.9
RATIO_FLOOR = 1e-12


def _wrap(angle: float) -> float:
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _bargmann3(a: Vec2, b: Vec2, c: Vec2) -> float:
    """``arg <a|c><c|b><b|a>``, the phase of the geodesic triangle a -> b -> c."""
    return float(np.angle(np.vdot(a, c) * np.vdot(c, b) * np.vdot(b, a)))


@dataclass
class GpAccumulator:
    """
    Sequential fold producing the geometric phase at every sample.

    ``sliver_sum`` collects three-point Bargmann phases of consecutive samples;
    one sixth of it restores the O(h^2) area between the sampled polygon and
    the smooth path.
    """

    v0: Optional[Vec2] = None
    eps0: float = 0.0
    v_prev: Optional[Vec2] = None
    v_prev2: Optional[Vec2] = None
    closure_arg: float = 0.0
    phase: float = 0.0
    connection: float = 0.0
    sliver_sum: float = 0.0
    first_sliver: Optional[float] = None
    last_sliver: float = 0.0
    events: list[dict] = field(default_factory=list)

    def push_vector(self, tau: float, v: Vec2, gap: float) -> float:
        if gap < GAP_TOL:
            self.events.append({"tau": tau, "gap": gap, "kind": "degenerate"})
            raise DegeneracyEncountered(
                f"eigenvalue gap {gap:.3e} at tau={tau:.6g}; state is maximally mixed",
                tau=tau,
                gap=gap,
            )
        if gap < NEAR_DEGENERACY and (not self.events or self.events[-1]["kind"] != "near"):
            self.events.append({"tau": tau, "gap": gap, "kind": "near"})

        v = np.asarray(v, dtype=np.complex128)
        if self.v0 is None:
            self.v0 = v
            self.v_prev = v
            return 0.0

        overlap = np.vdot(self.v_prev, v)
        if abs(overlap) < MIN_OVERLAP:
            raise OverlapTooSmall(
                f"|<v(j)|v(j+1)>| = {abs(overlap):.3f} at tau={tau:.6g}; raise samples_per_cycle",
                tau=tau,
                overlap=float(abs(overlap)),
            )
        self.connection -= float(np.angle(overlap))
        v = v * (np.conj(overlap) / abs(overlap))

        new_arg = float(np.angle(np.vdot(self.v0, v)))
        self.phase += _wrap(new_arg - self.closure_arg)
        self.closure_arg = new_arg

        if self.v_prev2 is not None:
            sliver = _bargmann3(self.v_prev2, self.v_prev, v)
            self.sliver_sum += sliver
            if self.first_sliver is None:
                self.first_sliver = sliver
            self.last_sliver = sliver

        self.v_prev2 = self.v_prev
        self.v_prev = v
        return self.value

    def push(self, tau: float, rho) -> float:
        pair = eig_hermitian(rho)
        if self.v0 is None:
            self.eps0 = pair.eps1
        return self.push_vector(tau, pair.v1, pair.gap)

    @property
    def curvature_correction(self) -> float:
        if self.first_sliver is None:
            return 0.0
        return (self.sliver_sum + 0.5 * (self.first_sliver + self.last_sliver)) / 6.0

    @property
    def value(self) -> float:
        return self.phase + self.curvature_correction


@dataclass(frozen=True)
class GpSeries:
    taus: npt.NDArray[np.float64]
    raw: npt.NDArray[np.float64]
    period: float
    theta0: float
    events: tuple = ()

    @property
    def phi(self) -> npt.NDArray[np.float64]:
        """Accumulated phase in the positive convention."""
        return self.raw + 2 * math.pi * self.taus / self.period

    @property
    def unitary(self) -> npt.NDArray[np.float64]:
        return math.pi * (1 + math.cos(self.theta0)) * self.taus / self.period

    @property
    def ratio(self) -> npt.NDArray[np.float64]:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(self.unitary) > RATIO_FLOOR, self.phi / self.unitary, np.nan)


def phases_from_vectors(
    taus: Sequence[float], vectors: Sequence[Vec2], gaps: Sequence[float]
) -> tuple[npt.NDArray[np.float64], GpAccumulator]:
    acc = GpAccumulator()
    raw = np.array([acc.push_vector(t, v, g) for t, v, g in zip(taus, vectors, gaps)])
    return raw, acc


def gp_accumulate(traj: Trajectory) -> GpSeries:
    """
    Raw geometric phase at every sample of ``traj``.

    Raises:
        DegeneracyEncountered: eigenvalue gap below 1e-8 at some sample
        OverlapTooSmall: adjacent eigenvectors overlap by less than 0.9
    """
    acc = GpAccumulator()
    raw = np.array([acc.push(t, rho) for t, rho in zip(traj.taus, traj.rhos)])
    if acc.events:
        logger.warning(f"near-degenerate spectrum on {len(acc.events)} occasion(s)")
    return GpSeries(
        taus=traj.taus,
        raw=raw,
        period=traj.period,
        theta0=traj.params.theta0,
        events=tuple(acc.events),
    )


def gp_direct(traj: Trajectory) -> npt.NDArray[np.float64]:
    """
    Raw geometric phase evaluated term by term from the weighted two-branch
    sum, with the connection integrated explicitly.

    The leading eigenvector is written in the gauge
    ``(cos(a/2), e^{i phi} sin(a/2))`` from the Bloch angles of the state; the
    connection integral is then ``int sin^2(a/2) dphi`` for both branches with
    opposite signs.
    """
    r = bloch_components(traj.rhos)
    norm = np.linalg.norm(r, axis=-1)
    if norm.min() < GAP_TOL:
        j = int(np.argmin(norm))
        raise DegeneracyEncountered(f"eigenvalue gap vanishes at tau={traj.taus[j]:.6g}", tau=float(traj.taus[j]))

    polar = np.arccos(np.clip(r[:, 2] / norm, -1.0, 1.0))
    azimuth = np.unwrap(np.arctan2(r[:, 1], r[:, 0]))
    c = np.cos(polar / 2)
    s = np.sin(polar / 2)
    v1 = np.stack([c, np.exp(1j * azimuth) * s], axis=-1)
    v2 = np.stack([-np.exp(-1j * azimuth) * s, c.astype(np.complex128)], axis=-1)

    connection = cumulative_simpson(s**2, x=azimuth, initial=0.0)
    eps = np.clip(eigvalsh_stack(traj.rhos), 0.0, None)
    w1 = np.sqrt(eps[0, 0] * eps[:, 0])
    w2 = np.sqrt(eps[0, 1] * eps[:, 1])
    total = (
        w1 * (v1 @ np.conj(v1[0])) * np.exp(-1j * connection)
        + w2 * (v2 @ np.conj(v2[0])) * np.exp(1j * connection)
    )
    return np.unwrap(np.angle(total))


def unitary_gp(theta0: float, n_cycles: int) -> float:
    """``N pi (1 + cos theta0)``."""
    return n_cycles * math.pi * (1 + math.cos(theta0))


def phase_ratio(phi: float, reference: float) -> Optional[float]:
    """``phi / reference``; None when the unitary reference vanishes (theta0 = pi)."""
    if abs(reference) < RATIO_FLOOR:
        return None
    return phi / reference


def phase_at_cycle(series: GpSeries, n_cycles: int, samples_per_cycle: int) -> float:
    return float(series.phi[n_cycles * samples_per_cycle])


def gp_ratio(
    traj: Trajectory, theta0: float, n_cycles: int, series: Optional[GpSeries] = None
) -> Optional[float]:
    series = series or gp_accumulate(traj)
    return phase_ratio(phase_at_cycle(series, n_cycles, traj.samples_per_cycle), unitary_gp(theta0, n_cycles))


def stable_cycles(series: GpSeries, samples_per_cycle: int, band: float, n_max: Optional[int] = None) -> int:
    """
    Length of the leading run of cycles ``n = 1, 2, ...`` whose phase ratio
    stays within ``band`` of one. A point stable for N cycles is stable for
    every shorter count as well.
    """
    available = (len(series.taus) - 1) // samples_per_cycle
    n_max = available if n_max is None else min(n_max, available)
    for n in range(1, n_max + 1):
        ratio = phase_ratio(phase_at_cycle(series, n, samples_per_cycle), unitary_gp(series.theta0, n))
        if ratio is None or abs(ratio - 1) > band:
            return n - 1
    return n_max


def cycle_phases(traj: Trajectory) -> npt.NDArray[np.float64]:
    """
    Phase acquired over each cycle, with that cycle's starting eigenvector as
    the reference, in the positive convention and mapped to ``[0, 2 pi)``.
    """
    spc = traj.samples_per_cycle
    pairs = [eig_hermitian(rho) for rho in traj.rhos]
    phases = []
    for n in range(traj.cycles):
        window = slice(n * spc, (n + 1) * spc + 1)
        taus = traj.taus[window]
        chunk = pairs[window]
        raw, _ = phases_from_vectors(taus, [p.v1 for p in chunk], [p.gap for p in chunk])
        phases.append((raw[-1] + 2 * math.pi * (taus[-1] - taus[0]) / traj.period) % (2 * math.pi))
    return np.array(phases)


def gauge_invariance_defect(traj: Trajectory, seed: int = 0) -> float:
    """
    Largest change of the raw phase series when every sampled eigenvector
    is multiplied by an independent random unit phase.
    """
    rng = np.random.default_rng(seed)
    pairs = [eig_hermitian(rho) for rho in traj.rhos]
    gaps = [p.gap for p in pairs]
    vectors = [p.v1 for p in pairs]
    reference, _ = phases_from_vectors(traj.taus, vectors, gaps)
    kicks = np.exp(2j * np.pi * rng.random(len(vectors)))
    scrambled, _ = phases_from_vectors(traj.taus, [v * k for v, k in zip(vectors, kicks)], gaps)
    return float(np.abs(scrambled - reference).max())
