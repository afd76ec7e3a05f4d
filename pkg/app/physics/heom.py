"""
Hierarchy equations of motion for a qubit coupled through sigma_x to a single
exponential (Lorentzian, zero temperature) bath.

The auxiliary density operators live in one dense array of shape
``(N1 + 1, N2 + 1, 2, 2)``; entry ``(0, 0)`` is the physical reduced state.
Index ``k = 1`` pairs with ``nu1 = 1 - i Omega`` (right multiplication by
sigma_x in the down coupling), ``k = 2`` with ``nu2 = 1 + i Omega`` (left).
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from app.core.exceptions import NotConvergedError
from app.physics.algebra import SIGMA_X, Mat2, anticommutator, commutator, eigvalsh_stack
from app.physics.model import bath_amplitude, initial_density, omega0
from app.schemas.params import ModelParams

logger = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e6
CONVERGENCE_TOL = 1e-6

# [H, rho]_ij = (h_i - h_j) rho_ij for H = w diag(1, 0)
_LEVEL_DIFF = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class AdoIndex:
    n1: int
    n2: int

    def within(self, depth: tuple[int, int]) -> bool:
        return 0 <= self.n1 <= depth[0] and 0 <= self.n2 <= depth[1]


@dataclass(frozen=True)
class NuVector:
    nu1: complex
    nu2: complex

    @classmethod
    def for_params(cls, p: ModelParams) -> "NuVector":
        return cls(nu1=1.0 - 1j * p.Omega, nu2=1.0 + 1j * p.Omega)


@dataclass
class HierarchyState:
    """All auxiliary density operators at one time."""

    ados: npt.NDArray[np.complex128]
    tau: float = 0.0

    @property
    def depth(self) -> tuple[int, int]:
        return self.ados.shape[0] - 1, self.ados.shape[1] - 1

    @property
    def rho(self) -> Mat2:
        return self.ados[0, 0]

    def __getitem__(self, index: AdoIndex) -> Mat2:
        return self.ados[index.n1, index.n2]


def hierarchy_coupling(p: ModelParams) -> float:
    """Prefactor of ``n_k [sigma_x^x + (-1)^k sigma_x^o]`` in the down coupling."""
    return 0.5 * bath_amplitude(p)


def stability_bound(p: ModelParams) -> float:
    n_sum = p.depth[0] + p.depth[1]
    return 0.5 / (n_sum + abs(p.Omega) * n_sum)


def default_dt(p: ModelParams) -> float:
    """Step resolving the fastest coherent and dissipative scales, capped for stability."""
    coherent = 2 * math.pi / (60 * max(abs(p.Omega) + abs(p.Delta), 1e-12))
    dissipative = 0.02 / p.gamma0 if p.gamma0 > 0 else math.inf
    return min(coherent, dissipative, stability_bound(p))


class Hierarchy:
    """Vectorised right-hand side of the hierarchy for fixed parameters."""

    def __init__(self, p: ModelParams):
        self.params = p
        n1_max, n2_max = p.depth
        nu = NuVector.for_params(p)
        self.nu = nu
        n1 = np.arange(n1_max + 1)[:, None]
        n2 = np.arange(n2_max + 1)[None, :]
        self._decay = -(n1 * nu.nu1 + n2 * nu.nu2)[:, :, None, None]
        coupling = hierarchy_coupling(p)
        self._down1 = (-1j * coupling * np.arange(1, n1_max + 1))[:, None, None, None]
        self._down2 = (-1j * coupling * np.arange(1, n2_max + 1))[None, :, None, None]
        self._decoupled = coupling == 0.0

    def __call__(self, ados: npt.NDArray[np.complex128], tau: float) -> npt.NDArray[np.complex128]:
        w = omega0(tau, self.params)
        out = ados * (self._decay + (-1j * w) * _LEVEL_DIFF)

        # up couplings; the terminator drops them on the boundary
        out[:-1, :] += -1j * commutator(SIGMA_X, ados[1:, :])
        out[:, :-1] += -1j * commutator(SIGMA_X, ados[:, 1:])

        if not self._decoupled:
            lower1 = ados[:-1, :]
            out[1:, :] += self._down1 * (commutator(SIGMA_X, lower1) - anticommutator(SIGMA_X, lower1))
            lower2 = ados[:, :-1]
            out[:, 1:] += self._down2 * (commutator(SIGMA_X, lower2) + anticommutator(SIGMA_X, lower2))
        return out


@lru_cache(maxsize=32)
def hierarchy_for(p: ModelParams) -> Hierarchy:
    return Hierarchy(p)


def initial_state(p: ModelParams) -> HierarchyState:
    """Separable start: pure qubit state in ``(0, 0)``, every auxiliary zero."""
    n1_max, n2_max = p.depth
    ados = np.zeros((n1_max + 1, n2_max + 1, 2, 2), dtype=np.complex128)
    ados[0, 0] = initial_density(p.theta0)
    return HierarchyState(ados=ados, tau=0.0)


def rhs(s: HierarchyState, tau: float, p: ModelParams) -> npt.NDArray[np.complex128]:
    """Time derivative of every auxiliary density operator."""
    return hierarchy_for(p)(s.ados, tau)


def trace_drift(s: HierarchyState) -> float:
    return float(abs(np.trace(s.rho) - 1.0))


def short_time_bath_coefficient(p: ModelParams) -> float:
    """
    Coefficient ``c`` of the bath part ``-c [sx, [sx, rho0]]`` of the second
    derivative of the physical state at tau = 0.
    """
    s0 = initial_state(p)
    decoupled = p.with_updates(gamma0=0.0)

    def second_derivative(params: ModelParams) -> Mat2:
        h = Hierarchy(params)
        first = h(s0.ados, 0.0)
        return h(first, 0.0)[0, 0]

    bath = second_derivative(p) - second_derivative(decoupled)
    double = commutator(SIGMA_X, commutator(SIGMA_X, s0.rho))
    return float(-np.vdot(double, bath).real / np.vdot(double, double).real)


def conjugate_params(p: ModelParams) -> ModelParams:
    """
    Parameters with ``(Omega, Delta) -> (-Omega, -Delta)``.

    Under this map nu1 and nu2 trade places, every ADO goes to
    ``(-1)^(n1+n2) conj(rho_n)`` and the physical state to its conjugate.
    A negative drive amplitude is outside the validated parameter range,
    hence ``model_construct``.
    """
    return ModelParams.model_construct(**{**p.model_dump(), "Omega": -p.Omega, "Delta": -p.Delta})


def conjugation_defect(p: ModelParams) -> float:
    """Max distance between ``rho(0,0)`` and the conjugate of the mirrored evolution."""
    from app.physics.integrate import evolve

    direct = evolve(p)
    mirrored = evolve(conjugate_params(p).model_copy(update={"dt": direct.dt}))
    return float(np.abs(direct.rhos - np.conj(mirrored.rhos)).max())


@dataclass
class ConvergenceReport:
    depths: list[tuple[int, int]]
    distances: list[float] = field(default_factory=list)
    min_eigenvalues: list[float] = field(default_factory=list)
    converged_at: Optional[tuple[int, int]] = None

    @property
    def converged(self) -> bool:
        return self.converged_at is not None

    def to_dict(self) -> dict:
        return {
            "depths": [list(d) for d in self.depths],
            "distances": self.distances,
            "min_eigenvalues": self.min_eigenvalues,
            "converged_at": list(self.converged_at) if self.converged_at else None,
        }


def convergence_scan(
    p: ModelParams,
    depths: Sequence[tuple[int, int]],
    tol: float = CONVERGENCE_TOL,
    raise_on_failure: bool = True,
) -> ConvergenceReport:
    """
    Evolve at each truncation depth and compare consecutive depths.

    Distances are the max-over-samples Frobenius distance of rho(0,0). All
    depths share the step size of the deepest one so only truncation differs.

    Raises:
        NotConvergedError: if the largest depth pair misses ``tol``
    """
    from app.physics.integrate import evolve

    depths = [tuple(d) for d in depths]
    if depths != sorted(depths):
        raise ValueError("depths must be sorted ascending")
    shared_dt = p.dt or default_dt(p.with_updates(depth=depths[-1]))
    report = ConvergenceReport(depths=list(depths))
    previous = None
    for depth in depths:
        traj = evolve(p.with_updates(depth=depth, dt=shared_dt))
        report.min_eigenvalues.append(float(eigvalsh_stack(traj.rhos)[:, 1].min()))
        if previous is not None:
            diff = traj.rhos - previous.rhos
            distance = float(np.sqrt(np.sum(np.abs(diff) ** 2, axis=(-2, -1))).max())
            report.distances.append(distance)
            if distance < tol and report.converged_at is None:
                report.converged_at = depth
            logger.debug(f"depth {depth}: distance to previous {distance:.3e}", extra={"depth": depth})
        previous = traj

    if report.distances and report.distances[-1] >= tol:
        report.converged_at = None
        if raise_on_failure:
            raise NotConvergedError(
                f"depth {depths[-1]} differs from {depths[-2]} by {report.distances[-1]:.3e}",
                distance=report.distances[-1],
            )
    return report
