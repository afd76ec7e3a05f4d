"""
Pseudomode reference solver.

At zero temperature a Lorentzian bath is reproduced exactly by one damped
bosonic mode at the cavity frequency: ``<a(t) a^dagger(0)> = exp(-(1 + i Omega) t)``
when the mode amplitude decays at rate 1 (Lindblad rate ``kappa = 2``). The
qubit plus a Fock-truncated mode is propagated with the same RK4 update as the
hierarchy and traced down to the qubit.

Joint operators act on ``qubit (x) mode`` with the qubit index outermost.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings
from app.core.exceptions import TruncationInsufficient
from app.physics.algebra import EXCITED_PROJECTOR, IDENTITY, SIGMA_X, Mat2, commutator, eigvalsh_stack
from app.physics.heom import hierarchy_coupling, short_time_bath_coefficient as heom_bath_coefficient
from app.physics.integrate import StepPlan, Trajectory, rk4_update, summarize_samples
from app.physics.model import bath_amplitude, initial_density, omega0
from app.schemas.params import ModelParams

logger = logging.getLogger(__name__)

KAPPA = 2.0
CALIBRATION_TOL = 0.01


class PseudomodeParams(BaseModel):
    n_max: int = Field(ge=2)
    g: float = Field(ge=0)
    frequency: float
    amplitude_decay: float = Field(1.0, gt=0)

    model_config = ConfigDict(frozen=True)

    @classmethod
    def for_model(cls, p: ModelParams, n_max: Optional[int] = None) -> "PseudomodeParams":
        """Mode whose ``g^2`` equals the correlation amplitude the run's hierarchy realises."""
        return cls(
            n_max=n_max or settings.ORACLE_INITIAL_FOCK,
            g=math.sqrt(bath_amplitude(p)),
            frequency=p.Omega,
        )

    @property
    def kappa(self) -> float:
        return 2.0 * self.amplitude_decay

    @property
    def correlation_amplitude(self) -> float:
        return self.g**2


def annihilation(n_max: int) -> npt.NDArray[np.complex128]:
    return np.diag(np.sqrt(np.arange(1, n_max)), k=1).astype(np.complex128)


class JointLindbladian:
    """``drho/dtau = -i (K rho - rho K^dagger) + kappa a rho a^dagger`` with ``K = H - i kappa/2 N``."""

    def __init__(self, p: ModelParams, pm: PseudomodeParams):
        self.params = p
        a = annihilation(pm.n_max)
        mode_eye = np.eye(pm.n_max, dtype=np.complex128)
        number = a.conj().T @ a
        self.jump = np.kron(IDENTITY, a)
        self.jump_dag = self.jump.conj().T
        self.kappa = pm.kappa
        self.qubit_part = np.kron(EXCITED_PROJECTOR, mode_eye)
        static = pm.frequency * np.kron(IDENTITY, number) + pm.g * np.kron(SIGMA_X, a + a.conj().T)
        self.static = static - 0.5j * self.kappa * np.kron(IDENTITY, number)

    def __call__(self, rho: npt.NDArray[np.complex128], tau: float) -> npt.NDArray[np.complex128]:
        k = self.static + omega0(tau, self.params) * self.qubit_part
        return -1j * (k @ rho - rho @ k.conj().T) + self.kappa * (self.jump @ rho @ self.jump_dag)


def partial_trace_mode(rho: npt.NDArray[np.complex128], n_max: int) -> Mat2:
    return np.einsum("iaja->ij", rho.reshape(2, n_max, 2, n_max))


def top_fock_population(rho: npt.NDArray[np.complex128], n_max: int) -> float:
    block = rho.reshape(2, n_max, 2, n_max)
    return float(abs(block[0, -1, 0, -1] + block[1, -1, 1, -1]))


def vacuum_joint_state(theta0: float, n_max: int) -> npt.NDArray[np.complex128]:
    vacuum = np.zeros((n_max, n_max), dtype=np.complex128)
    vacuum[0, 0] = 1.0
    return np.kron(initial_density(theta0), vacuum)


def _step_target(p: ModelParams, pm: PseudomodeParams) -> float:
    fastest = (
        abs(pm.frequency) * (pm.n_max - 1)
        + abs(p.Omega) + abs(p.Delta)
        + 0.5 * pm.kappa * (pm.n_max - 1)
        + 2 * pm.g * math.sqrt(pm.n_max)
    )
    coherent = 2 * math.pi / (60 * max(abs(p.Omega) + abs(p.Delta), 1e-12))
    return min(p.dt or coherent, 0.5 / fastest)


def _evolve_fixed(p: ModelParams, pm: PseudomodeParams) -> tuple[Trajectory, float]:
    plan = StepPlan.aligned(p, _step_target(p, pm))
    dt = plan.dt
    f = JointLindbladian(p, pm)
    rho = vacuum_joint_state(p.theta0, pm.n_max)
    rhos = np.empty((plan.n_samples, 2, 2), dtype=np.complex128)
    rhos[0] = partial_trace_mode(rho, pm.n_max)
    top = 0.0
    joint_min_eig = 0.0
    joint_drift = 0.0
    for j in range(1, plan.n_samples):
        tau0 = (j - 1) * plan.sample_interval
        for i in range(plan.steps_per_sample):
            rho = rk4_update(rho, tau0 + i * dt, dt, f)
        rhos[j] = partial_trace_mode(rho, pm.n_max)
        top = max(top, top_fock_population(rho, pm.n_max))
        joint_drift = max(joint_drift, abs(np.trace(rho) - 1.0))
        joint_min_eig = min(joint_min_eig, float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))

    diagnostics = summarize_samples(rhos)
    diagnostics.update(
        n_max=pm.n_max,
        top_fock_population=top,
        joint_trace_drift=float(joint_drift),
        joint_min_eigenvalue=joint_min_eig,
    )
    traj = Trajectory(
        params=p,
        taus=np.arange(plan.n_samples) * plan.sample_interval,
        rhos=rhos,
        final_state=rho,
        period=plan.period,
        dt=dt,
        steps_per_sample=plan.steps_per_sample,
        diagnostics=diagnostics,
    )
    return traj, top


def pseudomode_evolve(
    p: ModelParams,
    pm: Optional[PseudomodeParams] = None,
    max_fock: Optional[int] = None,
    tol: Optional[float] = None,
) -> Trajectory:
    """
    Qubit trajectory from the joint qubit + pseudomode master equation.

    The Fock cutoff doubles until the top level holds less than ``tol`` of
    the population at every sample.

    Raises:
        TruncationInsufficient: the cutoff would have to exceed ``max_fock``
    """
    pm = pm or PseudomodeParams.for_model(p)
    max_fock = max_fock or settings.ORACLE_MAX_FOCK
    tol = tol if tol is not None else settings.ORACLE_TOP_POPULATION_TOL
    while True:
        traj, top = _evolve_fixed(p, pm)
        if top < tol:
            return traj
        if 2 * pm.n_max > max_fock:
            raise TruncationInsufficient(
                f"top Fock population {top:.3e} at n_max={pm.n_max}; cap is {max_fock}",
                n_max=pm.n_max,
                top_population=top,
            )
        logger.debug(f"escalating Fock cutoff {pm.n_max} -> {2 * pm.n_max} (top population {top:.2e})",
                     extra={"n_max": 2 * pm.n_max})
        pm = pm.model_copy(update={"n_max": 2 * pm.n_max})


def mode_correlation(pm: PseudomodeParams, taus: Sequence[float], dt: float) -> npt.NDArray[np.complex128]:
    """
    ``<a(t) a^dagger(0)>`` of the free damped mode in its vacuum, by quantum
    regression: propagate ``a^dagger |0><0|`` and take the expectation of ``a``.
    """
    a = annihilation(pm.n_max)
    a_dag = a.conj().T
    number = a_dag @ a
    k = pm.frequency * number - 0.5j * pm.kappa * number

    def generator(x, _tau):
        return -1j * (k @ x - x @ k.conj().T) + pm.kappa * (a @ x @ a_dag)

    vacuum = np.zeros((pm.n_max, pm.n_max), dtype=np.complex128)
    vacuum[0, 0] = 1.0
    x = a_dag @ vacuum
    out = []
    tau = 0.0
    for target in taus:
        n_steps = max(0, math.ceil((target - tau) / dt - 1e-9))
        if n_steps:
            h = (target - tau) / n_steps
            for _ in range(n_steps):
                x = rk4_update(x, tau, h, generator)
                tau += h
        tau = target
        out.append(np.trace(a @ x))
    return np.array(out)


def short_time_bath_coefficient(p: ModelParams, pm: Optional[PseudomodeParams] = None) -> float:
    """Bath coefficient of the joint model's second derivative at tau = 0; equals ``g^2``."""
    pm = pm or PseudomodeParams.for_model(p)
    rho0 = vacuum_joint_state(p.theta0, pm.n_max)

    def second_derivative(params: PseudomodeParams) -> Mat2:
        f = JointLindbladian(p, params)
        return partial_trace_mode(f(f(rho0, 0.0), 0.0), params.n_max)

    bath = second_derivative(pm) - second_derivative(pm.model_copy(update={"g": 0.0}))
    q0 = initial_density(p.theta0)
    double = commutator(SIGMA_X, commutator(SIGMA_X, q0))
    return float(-np.vdot(double, bath).real / np.vdot(double, double).real)


def calibrate_convention(p: ModelParams) -> dict:
    """
    Compare the hierarchy's short-time bath coefficient under both coupling
    conventions with the pseudomode normalised to the closed-form correlation
    (``g^2 = gamma0 / 2``).

    ``closed_form_match`` names the convention that agrees within 1 %;
    ``in_use`` is the run's own convention and ``amplitude_ratio`` its
    coefficient over the closed-form one. The oracle itself always follows
    ``in_use`` through ``PseudomodeParams.for_model``.
    """
    reference_mode = PseudomodeParams(
        n_max=settings.ORACLE_INITIAL_FOCK, g=math.sqrt(0.5 * p.gamma0), frequency=p.Omega
    )
    reference = short_time_bath_coefficient(p, reference_mode)
    report = {"reference": reference, "conventions": {}, "in_use": p.coupling_convention}
    for convention in ("correlation", "printed"):
        variant = p.with_updates(coupling_convention=convention)
        coefficient = heom_bath_coefficient(variant)
        rel = abs(coefficient - reference) / reference if reference else math.nan
        report["conventions"][convention] = {
            "coefficient": coefficient,
            "hierarchy_prefactor": hierarchy_coupling(variant),
            "relative_error": rel,
        }
    matching = [c for c, v in report["conventions"].items() if v["relative_error"] < CALIBRATION_TOL]
    report["closed_form_match"] = matching[0] if matching else None
    in_use = report["conventions"][p.coupling_convention]["coefficient"]
    report["amplitude_ratio"] = in_use / reference if reference else math.nan
    logger.info(
        f"calibration: {report['closed_form_match']} matches the closed form, "
        f"{p.coupling_convention} runs at {report['amplitude_ratio']:.3g}x"
    )
    return report


def trace_distance(rho: Mat2, sigma: Mat2) -> npt.NDArray[np.float64] | float:
    """``(1/2) sum |eig(rho - sigma)|``; broadcasts over stacks."""
    eps = eigvalsh_stack(np.asarray(rho) - np.asarray(sigma))
    distance = 0.5 * np.abs(eps).sum(axis=-1)
    return float(distance) if np.ndim(distance) == 0 else distance
