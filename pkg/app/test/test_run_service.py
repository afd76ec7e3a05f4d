import json
import math

import numpy as np
import pytest

from app.core.exceptions import ConfigurationError, DivergenceError, PreconditionViolated
from app.core.run_config import load_run_config
from app.physics.geometric_phase import unitary_gp
from app.physics.integrate import evolve as real_evolve
from app.schemas.run import SAMPLE_COLUMNS, RunConfig, SweepAxis
from app.services.run_service import RunService, ensure_writable, theta_summary


def test_single_run_on_unitary_parameters(unitary_params):
    record = RunService.run_single(RunConfig(params=unitary_params))
    assert record.status == "ok"
    assert len(record.rows) == unitary_params.samples_per_cycle + 1
    assert list(record.rows[0].model_dump()) == SAMPLE_COLUMNS
    assert max(abs(r.R - 1) for r in record.rows) < 1e-9
    assert record.extras["gauge_defect"] < 1e-9
    assert record.extras["regime"]
    assert record.gp["phi_unitary"] == pytest.approx(unitary_gp(unitary_params.theta0, 1))
    assert record.revivals == 0
    assert record.config["schema_version"] == 1


def test_single_run_reports_requested_cycles(make_params):
    cfg = RunConfig(params=make_params(cycles=3, samples_per_cycle=32), sweep_cycles=[1, 3])
    record = RunService.run_single(cfg)
    assert set(record.gp["by_cycle"]) == {"1", "3"}
    assert len(record.gp["cycle_phases"]) == 3
    assert record.gp["ratio"] == pytest.approx(record.gp["by_cycle"]["3"]["ratio"])


def test_compare_periods_covers_every_policy(make_params):
    out = RunService.compare_periods(make_params(Delta=1.0, omegaD=2.0, cycles=1, samples_per_cycle=32))
    assert set(out) == {"omega", "omega-plus-delta", "nonsecular"}
    assert out["omega"]["period"] == pytest.approx(2 * math.pi / 20)
    assert out["omega-plus-delta"]["period"] == pytest.approx(2 * math.pi / 21)


def test_sweep_points_are_row_major(make_params):
    cfg = RunConfig(
        params=make_params(),
        mode="sweep",
        sweep_axes=[SweepAxis.parse("Delta:0,1"), SweepAxis.parse("omegaD:2,3,4")],
    )
    points = RunService.sweep_points(cfg)
    assert [(a1, a2) for a1, a2, _ in points] == [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]
    assert points[4][2].Delta == 1.0
    assert points[4][2].omegaD == 3.0


def test_single_point_sweep_matches_single_run(make_params):
    p = make_params(cycles=2, samples_per_cycle=32)
    sweep = RunService.run_sweep(RunConfig(params=p, mode="sweep", sweep_axes=[SweepAxis.parse("gamma0:0.01")]))
    single = RunService.run_single(RunConfig(params=p))
    assert sweep.status == "ok"
    assert len(sweep.sweep) == 1
    row = sweep.sweep[0]
    assert row.axis1 == 0.01
    assert row.axis2 is None
    assert row.N == 2
    assert row.phi_unwrapped == single.gp["phi_unwrapped"]
    assert row.ratio == single.gp["ratio"]
    assert row.revivals == single.revivals


def test_failed_point_keeps_its_place(make_params, monkeypatch):
    def flaky_evolve(p):
        if p.gamma0 == 0.5:
            raise DivergenceError("ados blew up", tau=0.1)
        return real_evolve(p)

    monkeypatch.setattr("app.services.run_service.evolve", flaky_evolve)
    cfg = RunConfig(
        params=make_params(cycles=1, samples_per_cycle=32),
        mode="sweep",
        sweep_axes=[SweepAxis.parse("gamma0:0.01,0.5,0.02")],
    )
    record = RunService.run_sweep(cfg)
    assert record.status == "partial_failure"
    assert [r.status for r in record.sweep] == ["ok", "divergence", "ok"]
    failed = record.sweep[1]
    assert failed.axis1 == 0.5
    assert failed.ratio is None
    assert "blew up" in failed.detail
    assert record.extras["failed_rows"] == 1


@pytest.mark.slow
def test_workers_do_not_change_results(make_params):
    cfg = RunConfig(
        params=make_params(cycles=1, samples_per_cycle=32),
        mode="sweep",
        sweep_axes=[SweepAxis.parse("Delta:0:2:3"), SweepAxis.parse("omegaD:1,2")],
    )
    serial = RunService.run_sweep(cfg)
    parallel = RunService.run_sweep(cfg.model_copy(update={"workers": 2}))
    assert [r.model_dump() for r in parallel.sweep] == [r.model_dump() for r in serial.sweep]


def test_unwritable_output_fails_before_compute(tmp_path, monkeypatch):
    def forbidden(_p):
        raise AssertionError("evolve should not run")

    monkeypatch.setattr("app.services.run_service.evolve", forbidden)
    cfg = RunConfig(out=tmp_path / "missing" / "run.csv")
    with pytest.raises(ConfigurationError) as info:
        RunService.run_single(cfg)
    assert info.value.field == "out"
    ensure_writable(RunConfig(out=tmp_path / "run.csv"))


def test_calibrate_mode(make_params):
    record = RunService.execute(RunConfig(params=make_params(gamma0=0.6), mode="calibrate"))
    calibration = record.extras["calibration"]
    assert calibration["closed_form_match"] == "correlation"
    assert calibration["in_use"] == "printed"
    table = record.extras["table"]
    assert [row["convention"] for row in table["rows"]] == ["correlation", "printed"]


def test_convergence_scan_mode(make_params):
    cfg = RunConfig(
        params=make_params(cycles=1, samples_per_cycle=32),
        mode="convergence-scan",
        convergence_gammas=[0.0],
        convergence_depths=[(1, 1), (2, 2)],
    )
    record = RunService.execute(cfg)
    assert record.status == "ok"
    rows = record.extras["table"]["rows"]
    assert [(r["N1"], r["N2"]) for r in rows] == [(1, 1), (2, 2)]
    assert rows[0]["distance_to_previous"] is None
    assert rows[1]["distance_to_previous"] < 1e-14
    assert record.diagnostics["convergence"]["0.0"]["converged_at"] == [2, 2]


def test_theta_scan_mode(make_params):
    cfg = RunConfig(
        params=make_params(gamma0=0.01, depth=(2, 2), cycles=2, samples_per_cycle=64),
        mode="theta-scan",
        theta_grid=[45.0, 60.0],
    )
    record = RunService.execute(cfg)
    assert record.status == "ok"
    summaries = record.extras["theta_scan"]
    assert [s["theta0_deg"] for s in summaries] == [45.0, 60.0]
    assert all(s["stable_cycles"] == 2 for s in summaries)
    rows = record.extras["table"]["rows"]
    assert len(rows) == 4
    assert rows[0]["R_min"] <= 1.0
    assert rows[3]["phi_unitary"] == pytest.approx(unitary_gp(math.radians(60.0), 2))


def test_oracle_compare_mode(make_params):
    cfg = RunConfig(params=make_params(gamma0=0.2, depth=(6, 6), cycles=1, samples_per_cycle=32), mode="oracle-compare")
    record = RunService.execute(cfg)
    assert record.extras["max_trace_distance"] < 1e-3
    rows = record.extras["table"]["rows"]
    assert len(rows) == 33
    assert rows[0]["trace_distance"] == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite([r["oracle_rho11"] for r in rows]).all()


def test_ground_state_run_reports_null_ratio(make_params):
    record = RunService.run_single(RunConfig(params=make_params(theta0=math.pi, cycles=1, samples_per_cycle=32)))
    assert record.status == "ok"
    assert record.gp["phi_unitary"] == 0.0
    assert record.gp["ratio"] is None
    assert all(math.isnan(r.ratio) for r in record.rows)
    payload = json.loads(record.model_dump_json())
    assert payload["gp"]["ratio"] is None
    assert payload["rows"][-1]["ratio"] is None


def test_sweep_records_nested_near_unity_regions(make_params):
    cfg = RunConfig(
        params=make_params(gamma0=0.01, cycles=3),
        mode="sweep",
        sweep_axes=[SweepAxis.parse("Delta:0,2,5")],
        sweep_cycles=[1, 3],
    )
    record = RunService.run_sweep(cfg)
    assert record.extras["near_unity"]["band"] == 0.05
    assert RunService.near_unity_region(record, 1) == {(0.0, None), (2.0, None), (5.0, None)}
    assert RunService.near_unity_region(record, 3) == {(0.0, None), (2.0, None)}
    with pytest.raises(PreconditionViolated):
        RunService.near_unity_region(record, 2)


@pytest.mark.slow
def test_near_unity_region_shrinks_with_cycles():
    cfg = load_run_config(preset="fig7", overrides=["depth=4,4", "samples_per_cycle=64", "near_unity=0.02"])
    assert cfg.reported_cycles == [2, 3, 4, 5, 8]
    assert len(RunService.sweep_points(cfg)) == 17 * 17
    record = RunService.run_sweep(cfg)
    regions = {n: RunService.near_unity_region(record, n) for n in cfg.reported_cycles}
    for shorter, longer in zip(cfg.reported_cycles, cfg.reported_cycles[1:]):
        assert regions[longer] <= regions[shorter]
    assert regions[8] < regions[4]
    assert (0.0, 0.0) in regions[8]


@pytest.mark.slow
def test_theta_scan_minimum_purity_follows_initial_excitation(make_params):
    p = make_params(gamma0=1.0, Delta=7.0, omegaD=4.0, depth=(12, 12), cycles=10)
    summaries = [theta_summary(p, theta) for theta in (23.5, 45.0, 73.0)]
    assert all(s["status"] == "ok" for s in summaries)
    purities = [s["min_purity"] for s in summaries]
    assert purities[0] < purities[1] < purities[2]
    for s in summaries:
        excited = math.cos(math.radians(s["theta0_deg"]) / 2) ** 2
        assert s["min_purity"] == pytest.approx(math.sqrt(1 - excited**2), abs=0.04)
