"""
Fixed-step classical Runge-Kutta propagation of the hierarchy with periodic
sampling of the physical state.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, TypeVar

import numpy as np
import numpy.typing as npt

from app.core.exceptions import DivergenceError, UnstableStepError
from app.physics.algebra import eigvalsh_stack, hermiticity_defect
from app.physics.heom import (
    DIVERGENCE_NORM,
    HierarchyState,
    default_dt,
    hierarchy_for,
    initial_state,
    stability_bound,
)
from app.physics.model import period
from app.schemas.params import ModelParams

logger = logging.getLogger(__name__)

Y = TypeVar("Y")

REFINE_TOL = 1e-8
MAX_REFINEMENTS = 6


def rk4_update(y: Y, tau: float, dt: float, f: Callable[[Y, float], Y]) -> Y:
    """
    One classical RK4 step for ``dy/dtau = f(y, tau)``.

    Shared by the hierarchy and the pseudomode solvers.
    """
    k1 = f(y, tau)
    k2 = f(y + 0.5 * dt * k1, tau + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, tau + 0.5 * dt)
    k4 = f(y + dt * k3, tau + dt)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def check_finite(ados: npt.NDArray[np.complex128], tau: float) -> None:
    norm = float(np.linalg.norm(ados, axis=(-2, -1)).max())
    if not math.isfinite(norm) or norm > DIVERGENCE_NORM:
        raise DivergenceError(
            f"auxiliary norm {norm:.3e} at tau={tau:.6g}; truncation too shallow or dt too large",
            tau=tau,
            norm=norm,
        )


def rk4_step(s: HierarchyState, tau: float, dt: float, p: ModelParams) -> HierarchyState:
    """Advance every ADO by ``dt``; raises ``DivergenceError`` on blow-up."""
    ados = rk4_update(s.ados, tau, dt, hierarchy_for(p))
    check_finite(ados, tau + dt)
    return HierarchyState(ados=ados, tau=tau + dt)


@dataclass(frozen=True)
class StepPlan:
    """Step size aligned so that ``steps_per_sample`` steps span one sample interval."""

    period: float
    sample_interval: float
    steps_per_sample: int
    n_samples: int

    @property
    def dt(self) -> float:
        return self.sample_interval / self.steps_per_sample

    @classmethod
    def for_params(cls, p: ModelParams) -> "StepPlan":
        target = p.dt or default_dt(p)
        bound = stability_bound(p)
        if target > bound * (1 + 1e-12):
            raise UnstableStepError(
                f"dt={target:.3e} exceeds the stability bound {bound:.3e} for depth {p.depth}",
                field="dt",
            )
        return cls.aligned(p, target)

    @classmethod
    def aligned(cls, p: ModelParams, target: float) -> "StepPlan":
        cycle = period(p)
        interval = cycle / p.samples_per_cycle
        steps = max(1, math.ceil(interval / target - 1e-9))
        return cls(
            period=cycle,
            sample_interval=interval,
            steps_per_sample=steps,
            n_samples=p.cycles * p.samples_per_cycle + 1,
        )


@dataclass(frozen=True)
class Trajectory:
    """Physical state sampled on a uniform grid over ``cycles`` periods."""

    params: ModelParams
    taus: npt.NDArray[np.float64]
    rhos: npt.NDArray[np.complex128]
    final_state: Any  # HierarchyState, or the joint matrix for the pseudomode solver
    period: float
    dt: float
    steps_per_sample: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def samples_per_cycle(self) -> int:
        return self.params.samples_per_cycle

    @property
    def cycles(self) -> int:
        return (len(self.taus) - 1) // self.samples_per_cycle

    @property
    def rho11(self) -> npt.NDArray[np.float64]:
        return self.rhos[:, 0, 0].real

    @property
    def rho12(self) -> npt.NDArray[np.complex128]:
        return self.rhos[:, 0, 1]

    @property
    def cycle_index(self) -> npt.NDArray[np.int64]:
        return np.arange(len(self.taus)) // self.samples_per_cycle

    def __len__(self) -> int:
        return len(self.taus)


def summarize_samples(rhos: npt.NDArray[np.complex128]) -> dict:
    traces = np.trace(rhos, axis1=-2, axis2=-1)
    return {
        "max_trace_drift": float(np.abs(traces - 1.0).max()),
        "max_hermiticity_defect": hermiticity_defect(rhos),
        "min_eigenvalue": float(eigvalsh_stack(rhos)[:, 1].min()),
    }


def _propagate(p: ModelParams, plan: StepPlan) -> Trajectory:
    dt = plan.dt
    state = initial_state(p)
    rhos = np.empty((plan.n_samples, 2, 2), dtype=np.complex128)
    rhos[0] = state.rho
    f = hierarchy_for(p)
    ados = state.ados
    for j in range(1, plan.n_samples):
        tau0 = (j - 1) * plan.sample_interval
        for i in range(plan.steps_per_sample):
            ados = rk4_update(ados, tau0 + i * dt, dt, f)
            check_finite(ados, tau0 + (i + 1) * dt)
        rhos[j] = ados[0, 0]

    taus = np.arange(plan.n_samples) * plan.sample_interval
    logger.debug(
        f"evolved {plan.n_samples - 1} samples x {plan.steps_per_sample} steps, dt={dt:.4e}",
        extra={"depth": p.depth},
    )
    return Trajectory(
        params=p,
        taus=taus,
        rhos=rhos,
        final_state=HierarchyState(ados=ados, tau=float(taus[-1])),
        period=plan.period,
        dt=dt,
        steps_per_sample=plan.steps_per_sample,
        diagnostics=summarize_samples(rhos),
    )


def evolve(p: ModelParams) -> Trajectory:
    """
    Propagate the hierarchy over ``p.cycles`` periods and sample the physical state.

    With ``auto_refine`` the step is halved until two successive halvings
    each move R(tau) by less than ``REFINE_TOL``.

    Raises:
        UnstableStepError: requested ``dt`` beyond the stability bound
        DivergenceError: an ADO norm exceeded the sentinel
    """
    plan = StepPlan.for_params(p)
    traj = _propagate(p, plan)
    if not p.auto_refine:
        return traj

    quiet = 0
    for _ in range(MAX_REFINEMENTS):
        plan = StepPlan(
            period=plan.period,
            sample_interval=plan.sample_interval,
            steps_per_sample=2 * plan.steps_per_sample,
            n_samples=plan.n_samples,
        )
        finer = _propagate(p, plan)
        change = float(np.abs(_bloch_norms(finer.rhos) - _bloch_norms(traj.rhos)).max())
        logger.debug(f"refined dt to {plan.dt:.4e}: R moved by {change:.3e}")
        traj = finer
        quiet = quiet + 1 if change < REFINE_TOL else 0
        if quiet >= 2:
            break
    else:
        logger.warning(f"auto_refine stopped after {MAX_REFINEMENTS} halvings at dt={traj.dt:.4e}")
    return traj


def _bloch_norms(rhos: npt.NDArray[np.complex128]) -> npt.NDArray[np.float64]:
    eps = eigvalsh_stack(rhos)
    return eps[:, 0] - eps[:, 1]
