"""
Driven two-level system and its Lorentzian zero-temperature environment.

Dimensionless units throughout (lambda = 1). The cavity centre coincides with
the qubit gap Omega.
"""
import math

import numpy as np
import numpy.typing as npt

from app.core.exceptions import ConfigurationError, PreconditionViolated
from app.physics.algebra import EXCITED_PROJECTOR, Mat2
from app.schemas.params import ModelParams


def omega0(tau: float, p: ModelParams) -> float:
    """Instantaneous qubit gap ``Omega + Delta cos(omegaD tau)``."""
    return p.Omega + p.Delta * math.cos(p.omegaD * tau)


def integrated_omega0(tau: float, p: ModelParams) -> float:
    """Closed-form ``int_0^tau omega0``."""
    if p.omegaD == 0:
        return (p.Omega + p.Delta) * tau
    return p.Omega * tau + (p.Delta / p.omegaD) * math.sin(p.omegaD * tau)


def hamiltonian(tau: float, p: ModelParams) -> Mat2:
    """System Hamiltonian ``omega0(tau) sigma_+ sigma_-`` = ``diag(omega0, 0)``."""
    return omega0(tau, p) * EXCITED_PROJECTOR


def spectral_density(omega: float, p: ModelParams) -> float:
    """Lorentzian ``J(w) = (gamma0 / 2pi) / ((w - Omega)^2 + 1)``."""
    return p.gamma0 / (2 * math.pi) / ((omega - p.Omega) ** 2 + 1.0)


def correlation(t: float, p: ModelParams) -> complex:
    """Bath correlation ``C(t) = (gamma0/2) exp(-(1 + i Omega)|t|)``, conjugated for t < 0."""
    value = 0.5 * p.gamma0 * np.exp(-(1.0 + 1j * p.Omega) * abs(t))
    return complex(value if t >= 0 else np.conj(value))


def bath_amplitude(p: ModelParams) -> float:
    """
    Correlation amplitude C(0) the hierarchy realises.

    The default ``printed`` convention keeps the hierarchy prefactor gamma0/2
    on ``[sigma_x^x +- sigma_x^o]``, which amounts to C(0) = gamma0. The
    ``correlation`` convention matches the closed form (gamma0/2).
    """
    if p.coupling_convention == "printed":
        return p.gamma0
    return 0.5 * p.gamma0


def resonant_amplitude(taus, p: ModelParams) -> npt.NDArray[np.float64]:
    """
    Excited-state amplitude ``G(tau)`` of the undriven qubit in the
    rotating-wave approximation.

    With the cavity on resonance the memory kernel is ``C(0) exp(-tau)``, so
    ``G'' + G' + C(0) G = 0`` with ``G(0) = 1`` and ``G'(0) = 0``. G is real;
    it oscillates through zero once ``4 C(0) > 1``.
    """
    if p.Delta != 0:
        raise PreconditionViolated("resonant_amplitude needs an undriven run (Delta = 0)")
    taus = np.asarray(taus, dtype=float)
    d = np.sqrt(complex(1.0 - 4.0 * bath_amplitude(p)))
    if abs(d) < 1e-12:
        shape = 1.0 + 0.5 * taus
    else:
        shape = np.cosh(0.5 * d * taus) + np.sinh(0.5 * d * taus) / d
    return (np.exp(-0.5 * taus) * shape).real


def rotating_wave_density(taus, p: ModelParams) -> npt.NDArray[np.complex128]:
    """Reduced states ``rho(tau)`` built from ``resonant_amplitude``, shape ``(M, 2, 2)``."""
    taus = np.asarray(taus, dtype=float)
    g = resonant_amplitude(taus, p)
    c, s = math.cos(p.theta0 / 2), math.sin(p.theta0 / 2)
    rhos = np.zeros((len(taus), 2, 2), dtype=np.complex128)
    rhos[:, 0, 0] = c**2 * g**2
    rhos[:, 1, 1] = 1.0 - rhos[:, 0, 0]
    rhos[:, 0, 1] = c * s * np.exp(-1j * p.Omega * taus) * g
    rhos[:, 1, 0] = np.conj(rhos[:, 0, 1])
    return rhos


def period(p: ModelParams) -> float:
    """Quasi-cyclic reference period for the selected policy."""
    if p.period_policy == "omega-plus-delta":
        frequency = abs(p.Omega + p.Delta)
    elif p.period_policy == "nonsecular":
        frequency = math.hypot(p.Omega, p.Delta)
    else:
        frequency = abs(p.Omega)
    if frequency == 0:
        raise ConfigurationError("period undefined for zero system frequency", field="Omega")
    return 2 * math.pi / frequency


def regime(p: ModelParams) -> str:
    return "markovian" if p.markovian else "non-markovian"


def initial_density(theta0: float) -> Mat2:
    """Projector on ``cos(theta0/2)|0> + sin(theta0/2)|1>``."""
    psi = np.array([math.cos(theta0 / 2), math.sin(theta0 / 2)], dtype=np.complex128)
    return np.outer(psi, psi.conj())
