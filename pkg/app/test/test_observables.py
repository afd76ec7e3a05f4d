import math

import numpy as np
import pytest

from app.core.exceptions import PreconditionViolated
from app.physics.algebra import IDENTITY, SIGMA_X
from app.physics.integrate import evolve
from app.physics.observables import (
    bloch,
    bloch_norm,
    cycle_envelope,
    g_form_check,
    purity_series,
    revival_count,
)


@pytest.mark.parametrize(
    "rho, expected",
    [
        (np.diag([1.0, 0.0]), (0, 0, 1)),
        (0.5 * (IDENTITY + SIGMA_X), (1, 0, 0)),
        (0.5 * IDENTITY, (0, 0, 0)),
        (np.array([[0.5, -0.5j], [0.5j, 0.5]]), (0, 1, 0)),
    ],
)
def test_bloch_components(rho, expected):
    assert bloch(rho) == pytest.approx(expected, abs=1e-12)


def test_bloch_norm_is_eigenvalue_gap():
    assert bloch_norm(np.diag([0.9, 0.1])) == pytest.approx(0.8)
    assert bloch_norm(0.5 * IDENTITY) == 0.0
    psi = np.array([math.cos(0.3), np.exp(0.7j) * math.sin(0.3)])
    assert bloch_norm(np.outer(psi, psi.conj())) == pytest.approx(1.0, abs=1e-12)


def test_revival_count_on_constant_purity(purity_trajectory):
    assert revival_count(purity_trajectory(np.ones(41))) == 0


def test_revival_count_ignores_small_ripples(purity_trajectory):
    taus = np.linspace(0, 4, 401)
    decaying = 0.6 - 1e-3 * taus + 1e-4 * np.sin(40 * taus)
    assert revival_count(purity_trajectory(decaying)) == 0


def test_revival_count_counts_prominent_bumps(purity_trajectory):
    taus = np.linspace(0, 4, 401)
    radii = 0.5 + 0.3 * np.cos(2 * math.pi * taus / 1.3)
    traj = purity_trajectory(radii)
    assert revival_count(traj) == 3
    assert revival_count(traj, prominence=0.7) == 0


def test_revival_count_requires_positive_prominence(purity_trajectory):
    with pytest.raises(ValueError):
        revival_count(purity_trajectory(np.ones(9)), prominence=0.0)


def test_purity_series_of_unitary_run(unitary_params):
    radius = purity_series(evolve(unitary_params))
    assert np.abs(radius - 1).max() < 1e-10


def test_g_form_holds_for_unitary_run(unitary_params):
    assert g_form_check(evolve(unitary_params)) < 1e-10


def test_g_form_is_small_at_weak_coupling(make_params):
    traj = evolve(make_params(gamma0=0.01, depth=(3, 3), cycles=3))
    assert g_form_check(traj) < 1e-2


def test_g_form_preconditions(make_params):
    with pytest.raises(PreconditionViolated):
        g_form_check(evolve(make_params(Delta=1.0, omegaD=1.0, cycles=1)))
    with pytest.raises(PreconditionViolated):
        g_form_check(evolve(make_params(theta0=0.0, cycles=1)))


def test_cycle_envelope_cancels_in_period_oscillation(purity_trajectory):
    taus = np.arange(41) * 0.01
    traj = purity_trajectory(0.5 + 0.2 * np.cos(2 * math.pi * taus / 0.04))
    envelope = cycle_envelope(traj)
    assert envelope.shape == (10,)
    np.testing.assert_allclose(envelope, 0.5, atol=1e-12)


def test_revival_count_ignores_counter_rotating_ripple(purity_trajectory):
    taus = np.arange(401) * 0.01
    radii = 0.9 - 0.05 * taus + 0.01 * np.cos(2 * math.pi * taus / 0.04)
    assert revival_count(purity_trajectory(radii)) == 0


@pytest.mark.parametrize("gamma0, revives", [(0.01, False), (0.1, False), (0.3, False), (0.7, True), (1.0, True)])
def test_rotating_wave_revivals_follow_coupling(make_params, rotating_wave_trajectory, gamma0, revives):
    traj = rotating_wave_trajectory(make_params(gamma0=gamma0, cycles=15))
    assert revival_count(traj) == (1 if revives else 0)


@pytest.mark.slow
@pytest.mark.parametrize("gamma0, revives", [(0.01, False), (0.1, False), (0.3, False), (0.7, True), (1.0, True)])
def test_hierarchy_revivals_follow_coupling(make_params, gamma0, revives):
    traj = evolve(make_params(gamma0=gamma0, depth=(12, 12), cycles=15))
    envelope = cycle_envelope(traj)
    if revives:
        assert revival_count(traj) >= 1
    else:
        assert revival_count(traj) == 0
        assert envelope[-1] < envelope[0]
