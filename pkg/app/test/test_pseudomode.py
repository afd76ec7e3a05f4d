import math

import numpy as np
import pytest

from app.core.exceptions import TruncationInsufficient
from app.physics.integrate import evolve
from app.physics.observables import cycle_envelope, purity_series
from app.physics.pseudomode import (
    PseudomodeParams,
    annihilation,
    calibrate_convention,
    mode_correlation,
    partial_trace_mode,
    pseudomode_evolve,
    short_time_bath_coefficient,
    trace_distance,
    vacuum_joint_state,
)
from app.schemas.params import ModelParams


def test_for_model_tracks_convention():
    p = ModelParams(gamma0=0.8)
    closed_form = p.with_updates(coupling_convention="correlation")
    assert PseudomodeParams.for_model(closed_form).correlation_amplitude == pytest.approx(0.4)
    pm = PseudomodeParams.for_model(p, n_max=8)
    assert pm.correlation_amplitude == pytest.approx(0.8)
    assert pm.n_max == 8
    assert pm.kappa == 2.0
    assert pm.frequency == p.Omega


def test_pseudomode_params_validation():
    with pytest.raises(ValueError):
        PseudomodeParams(n_max=1, g=0.1, frequency=20)


def test_annihilation_operator():
    a = annihilation(4)
    np.testing.assert_allclose(np.diag(a.conj().T @ a), [0, 1, 2, 3])


def test_partial_trace_of_product_state():
    joint = vacuum_joint_state(math.pi / 3, 5)
    reduced = partial_trace_mode(joint, 5)
    assert reduced[0, 0].real == pytest.approx(math.cos(math.pi / 6) ** 2)
    assert np.trace(joint) == pytest.approx(1.0)


def test_mode_correlation_matches_closed_form():
    pm = PseudomodeParams(n_max=4, g=0.0, frequency=20.0)
    taus = np.linspace(0, 2, 21)
    values = mode_correlation(pm, taus, dt=5e-4)
    np.testing.assert_allclose(values, np.exp(-(1 + 20j) * taus), atol=1e-8)


def test_decoupled_mode_leaves_qubit_pure(make_params):
    p = make_params(gamma0=0.0, cycles=1, dt=1e-4, samples_per_cycle=32)
    pm = PseudomodeParams(n_max=4, g=0.0, frequency=p.Omega)
    traj = pseudomode_evolve(p, pm)
    assert np.abs(purity_series(traj) - 1).max() < 1e-9
    assert traj.diagnostics["n_max"] == 4


@pytest.mark.parametrize("g", [0.3, 1.0])
def test_joint_short_time_coefficient_is_g_squared(g):
    p = ModelParams(gamma0=0.5, Delta=1.0, omegaD=2.0)
    pm = PseudomodeParams(n_max=6, g=g, frequency=p.Omega)
    assert short_time_bath_coefficient(p, pm) == pytest.approx(g**2, rel=1e-9)


def test_calibration_reports_closed_form_match():
    report = calibrate_convention(ModelParams(gamma0=0.6, depth=(3, 3)))
    assert report["closed_form_match"] == "correlation"
    assert report["in_use"] == "printed"
    assert report["amplitude_ratio"] == pytest.approx(2.0, rel=1e-9)
    assert report["reference"] == pytest.approx(0.3, rel=1e-9)
    assert report["conventions"]["correlation"]["relative_error"] < 1e-9
    assert report["conventions"]["printed"]["relative_error"] == pytest.approx(1.0, rel=1e-9)


def test_trace_distance():
    excited = np.diag([1.0, 0.0]).astype(complex)
    ground = np.diag([0.0, 1.0]).astype(complex)
    assert trace_distance(excited, excited) == 0.0
    assert trace_distance(excited, ground) == pytest.approx(1.0)
    stacked = trace_distance(np.stack([excited, excited]), np.stack([excited, 0.5 * (excited + ground)]))
    np.testing.assert_allclose(stacked, [0.0, 0.5])


def test_joint_state_stays_physical(make_params):
    p = make_params(gamma0=0.5, cycles=1, samples_per_cycle=32)
    traj = pseudomode_evolve(p)
    assert traj.diagnostics["joint_trace_drift"] < 1e-9
    assert traj.diagnostics["joint_min_eigenvalue"] >= -1e-6
    assert traj.diagnostics["top_fock_population"] < 1e-8


def test_truncation_cap_is_enforced(make_params):
    p = make_params(gamma0=1.0, cycles=1, samples_per_cycle=32)
    with pytest.raises(TruncationInsufficient):
        pseudomode_evolve(p, max_fock=4, tol=1e-12)


def test_hierarchy_matches_pseudomode_at_strong_coupling(make_params):
    p = make_params(gamma0=1.0, depth=(8, 8), cycles=2, samples_per_cycle=64)
    distance = trace_distance(evolve(p).rhos, pseudomode_evolve(p).rhos)
    assert distance.max() < 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("gamma0", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("Delta, omegaD", [(0.0, 0.0), (5.0, 5.0), (7.0, 4.0)])
def test_hierarchy_matches_pseudomode_across_regimes(make_params, gamma0, Delta, omegaD):
    p = make_params(gamma0=gamma0, Delta=Delta, omegaD=omegaD, depth=(8, 8), cycles=5, samples_per_cycle=64)
    distance = trace_distance(evolve(p).rhos, pseudomode_evolve(p).rhos)
    assert distance.max() < 1e-3


@pytest.mark.slow
def test_driven_revival_envelope_matches_pseudomode(make_params):
    p = make_params(gamma0=1.0, Delta=7.0, omegaD=4.0, depth=(8, 8), cycles=5, samples_per_cycle=64)
    hierarchy = cycle_envelope(evolve(p))
    oracle = cycle_envelope(pseudomode_evolve(p))
    np.testing.assert_allclose(hierarchy, oracle, atol=2e-3)
