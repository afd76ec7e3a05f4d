import math

import numpy as np
import pytest

from app.physics.integrate import Trajectory
from app.physics.model import period, rotating_wave_density
from app.schemas.params import ModelParams


@pytest.fixture
def make_params():
    """Shallow, coarsely sampled parameters; keyword arguments override."""

    def factory(**overrides) -> ModelParams:
        values = {
            "Omega": 20.0,
            "gamma0": 0.01,
            "theta0": math.pi / 4,
            "cycles": 2,
            "depth": (3, 3),
            "samples_per_cycle": 64,
        }
        values.update(overrides)
        return ModelParams(**values)

    return factory


@pytest.fixture
def unitary_params(make_params):
    return make_params(gamma0=0.0, depth=(1, 1), dt=1e-4, cycles=1)


@pytest.fixture
def purity_trajectory():
    """Trajectory built from a prescribed R(tau) on diagonal states."""

    def factory(radii) -> Trajectory:
        radii = np.asarray(radii, dtype=float)
        rhos = np.zeros((len(radii), 2, 2), dtype=np.complex128)
        rhos[:, 0, 0] = 0.5 * (1 + radii)
        rhos[:, 1, 1] = 0.5 * (1 - radii)
        p = ModelParams(samples_per_cycle=4, cycles=max(1, (len(radii) - 1) // 4))
        return Trajectory(
            params=p,
            taus=np.arange(len(radii)) * 0.01,
            rhos=rhos,
            final_state=None,
            period=0.04,
            dt=0.01,
            steps_per_sample=1,
        )

    return factory


@pytest.fixture
def rotating_wave_trajectory():
    """Closed-form rotating-wave trajectory sampled like ``evolve`` would sample it."""

    def factory(p: ModelParams) -> Trajectory:
        cycle = period(p)
        taus = np.arange(p.cycles * p.samples_per_cycle + 1) * cycle / p.samples_per_cycle
        return Trajectory(
            params=p,
            taus=taus,
            rhos=rotating_wave_density(taus, p),
            final_state=None,
            period=cycle,
            dt=cycle / p.samples_per_cycle,
            steps_per_sample=1,
        )

    return factory
