"""
Run orchestration: single trajectories, parameter sweeps, theta scans, the
pseudomode cross-check, truncation scans and convention calibration.
"""
import logging
import math
import os
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from typing import Any, Callable, Iterable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from app.core.config import settings
from app.core.exceptions import ConfigurationError, PreconditionViolated, SimulationError
from app.physics.algebra import eigvalsh_stack
from app.physics.geometric_phase import (
    GpSeries,
    cycle_phases,
    gauge_invariance_defect,
    gp_accumulate,
    phase_at_cycle,
    phase_ratio,
    stable_cycles,
    unitary_gp,
)
from app.physics.heom import convergence_scan
from app.physics.integrate import Trajectory, evolve
from app.physics.model import regime
from app.physics.observables import bloch_components, g_form_check, revival_count
from app.physics.pseudomode import calibrate_convention, pseudomode_evolve, trace_distance
from app.schemas.params import ModelParams
from app.schemas.run import RunConfig, RunRecord, SampleRow, SweepRow

logger = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-6
NEAR_UNITY = 0.05
PERIOD_POLICIES = ("omega", "omega-plus-delta", "nonsecular")


def ensure_writable(cfg: RunConfig) -> None:
    """Fail before any compute if the output location cannot be written."""
    if cfg.out is None:
        return
    parent = cfg.out.resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigurationError(f"cannot write to {cfg.out}", field="out")
    if cfg.out.exists() and not os.access(cfg.out, os.W_OK):
        raise ConfigurationError(f"{cfg.out} is not writable", field="out")


def sample_rows(traj: Trajectory, series: GpSeries) -> List[SampleRow]:
    r = bloch_components(traj.rhos)
    norm = np.linalg.norm(r, axis=-1)
    eps = eigvalsh_stack(traj.rhos)
    drift = np.abs(np.trace(traj.rhos, axis1=-2, axis2=-1) - 1.0)
    phi, unitary, ratio = series.phi, series.unitary, series.ratio
    cycles = traj.cycle_index
    return [
        SampleRow(
            tau=float(traj.taus[j]),
            cycle=int(cycles[j]),
            x=float(r[j, 0]),
            y=float(r[j, 1]),
            z=float(r[j, 2]),
            R=float(norm[j]),
            rho11=float(traj.rhos[j, 0, 0].real),
            re_rho12=float(traj.rhos[j, 0, 1].real),
            im_rho12=float(traj.rhos[j, 0, 1].imag),
            eps1=float(eps[j, 0]),
            eps2=float(eps[j, 1]),
            phi_unwrapped=float(phi[j]),
            phi_unitary=float(unitary[j]),
            ratio=float(ratio[j]),
            trace_drift=float(drift[j]),
            min_eig=float(eps[j, 1]),
        )
        for j in range(len(traj))
    ]


def gp_summary(traj: Trajectory, series: GpSeries, cycles: Iterable[int]) -> dict:
    theta0 = traj.params.theta0
    per_n = {}
    for n in cycles:
        phi = phase_at_cycle(series, n, traj.samples_per_cycle)
        reference = unitary_gp(theta0, n)
        per_n[str(n)] = {"phi_unwrapped": phi, "phi_unitary": reference, "ratio": phase_ratio(phi, reference)}
    final = per_n[str(traj.cycles)] if str(traj.cycles) in per_n else None
    if final is None:
        phi = float(series.phi[-1])
        reference = unitary_gp(theta0, traj.cycles)
        final = {"phi_unwrapped": phi, "phi_unitary": reference, "ratio": phase_ratio(phi, reference)}
    return {
        **final,
        "by_cycle": per_n,
        "cycle_phases": [float(v) for v in cycle_phases(traj)],
        "period": traj.period,
        "period_policy": traj.params.period_policy,
    }


def _evaluate_point(
    p: ModelParams, cycles: Sequence[int], prominence: float, band: float = NEAR_UNITY
) -> tuple[list[dict], Optional[int]]:
    """
    One sweep grid point; failures become status rows. Also returns how many
    leading cycles keep the phase ratio within ``band`` (None on failure).
    """
    try:
        traj = evolve(p)
        series = gp_accumulate(traj)
        revivals = revival_count(traj, prominence)
        min_eig = traj.diagnostics["min_eigenvalue"]
        status = "ok" if min_eig >= -POSITIVITY_TOL else "not_converged"
        rows = []
        for n in cycles:
            phi = phase_at_cycle(series, n, traj.samples_per_cycle)
            reference = unitary_gp(p.theta0, n)
            rows.append(
                {"N": n, "phi_unwrapped": phi, "phi_unitary": reference, "ratio": phase_ratio(phi, reference),
                 "revivals": revivals, "min_eig": min_eig, "status": status}
            )
        return rows, stable_cycles(series, traj.samples_per_cycle, band, max(cycles))
    except SimulationError as exc:
        logger.warning(f"sweep point failed: {exc}", extra={"grid_point": p.model_dump()})
        status, detail = exc.status, str(exc)
    except Exception as exc:  # noqa: BLE001
        logger.error("sweep point raised", exc_info=True, extra={"grid_point": p.model_dump()})
        status, detail = "error", f"{type(exc).__name__}: {exc}"
    rows = [
        {"N": n, "phi_unitary": unitary_gp(p.theta0, n), "status": status, "detail": detail}
        for n in cycles
    ]
    return rows, None


def _sweep_task(task: tuple[ModelParams, tuple[int, ...], float, float]) -> tuple[list[dict], Optional[int]]:
    return _evaluate_point(*task)


def _theta_task(task: tuple[ModelParams, float, float]) -> dict:
    return theta_summary(*task)


def run_tasks(fn: Callable[[Any], Any], tasks: list, workers: int, desc: str) -> list:
    """
    Map ``fn`` over ``tasks`` keeping input order, in-process for one
    worker and on a process pool otherwise.
    """
    progress = settings.SHOW_PROGRESS
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tqdm(tasks, desc=desc, disable=not progress)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(fn, tasks), total=len(tasks), desc=desc, disable=not progress))


def theta_summary(p: ModelParams, theta_deg: float, band: float = NEAR_UNITY) -> dict:
    q = p.with_updates(theta0=math.radians(theta_deg))
    try:
        traj = evolve(q)
        series = gp_accumulate(traj)
    except SimulationError as exc:
        return {"theta0_deg": theta_deg, "status": exc.status, "detail": str(exc), "cycles": []}
    norm = np.linalg.norm(bloch_components(traj.rhos), axis=-1)
    spc = traj.samples_per_cycle
    cycles = []
    for n in range(1, traj.cycles + 1):
        phi = phase_at_cycle(series, n, spc)
        reference = unitary_gp(q.theta0, n)
        cycles.append({
            "N": n,
            "R_min": float(norm[: n * spc + 1].min()),
            "phi_unwrapped": phi,
            "phi_unitary": reference,
            "ratio": phase_ratio(phi, reference),
        })
    return {
        "theta0_deg": theta_deg,
        "status": "ok",
        "min_purity": float(norm.min()),
        "revivals": revival_count(traj),
        "stable_cycles": stable_cycles(series, spc, band),
        "cycles": cycles,
    }


class RunService:
    @staticmethod
    def _record(cfg: RunConfig, started: float, **fields) -> RunRecord:
        return RunRecord(
            config=cfg.echo(),
            version=settings.VERSION,
            wall_clock=time.perf_counter() - started,
            **fields,
        )

    @staticmethod
    def run_single(cfg: RunConfig) -> RunRecord:
        """Evolve one trajectory and derive every per-sample series."""
        ensure_writable(cfg)
        started = time.perf_counter()
        p = cfg.params
        run_id = uuid.uuid4().hex[:8]
        logger.info(f"single run ({regime(p)}) started", extra={"run_id": run_id})

        traj = evolve(p)
        series = gp_accumulate(traj)
        diagnostics = {
            **traj.diagnostics,
            "dt": traj.dt,
            "steps_per_sample": traj.steps_per_sample,
            "depth": list(p.depth),
        }
        extras: dict[str, Any] = {
            "regime": regime(p),
            "gauge_defect": gauge_invariance_defect(traj, cfg.seed),
        }
        try:
            extras["g_form_residual"] = g_form_check(traj)
        except PreconditionViolated:
            pass
        if cfg.compare_periods:
            extras["period_comparison"] = RunService.compare_periods(p)

        status = "ok"
        if diagnostics["min_eigenvalue"] < -POSITIVITY_TOL:
            status = "not_converged"
            logger.warning(
                f"reduced state lost positivity (min eigenvalue {diagnostics['min_eigenvalue']:.3e})",
                extra={"run_id": run_id},
            )
        record = RunService._record(
            cfg,
            started,
            status=status,
            rows=sample_rows(traj, series),
            diagnostics=diagnostics,
            gp=gp_summary(traj, series, cfg.reported_cycles),
            revivals=revival_count(traj, cfg.prominence),
            degeneracy_events=list(series.events),
            extras=extras,
        )
        logger.info("single run finished", extra={"run_id": run_id, "elapsed": record.wall_clock})
        return record

    @staticmethod
    def compare_periods(p: ModelParams) -> dict:
        """Final phase and ratio under each period policy, each re-evolved."""
        out = {}
        for policy in PERIOD_POLICIES:
            q = p.with_updates(period_policy=policy)
            try:
                traj = evolve(q)
                series = gp_accumulate(traj)
            except SimulationError as exc:
                out[policy] = {"status": exc.status, "detail": str(exc)}
                continue
            phi = float(series.phi[-1])
            out[policy] = {
                "period": traj.period,
                "phi_unwrapped": phi,
                "ratio": phase_ratio(phi, unitary_gp(q.theta0, traj.cycles)),
            }
        return out

    @staticmethod
    def sweep_points(cfg: RunConfig) -> list[tuple[float, Optional[float], ModelParams]]:
        """Grid points in row-major order over the axes."""
        axes = cfg.sweep_axes
        grids = [axis.grid() for axis in axes]
        points = []
        for values in product(*grids):
            update = {axis.name: value for axis, value in zip(axes, values)}
            a1 = values[0]
            a2 = values[1] if len(values) > 1 else None
            points.append((a1, a2, cfg.params.with_updates(**update)))
        return points

    @staticmethod
    def run_sweep(cfg: RunConfig) -> RunRecord:
        """
        One summary row per grid point and reported cycle count. Failed points
        stay in the grid with their status; any failure marks the record
        ``partial_failure``.

        ``extras["near_unity"]`` lists, per reported N, the grid points whose
        ratio stays within ``cfg.near_unity`` of one for every cycle up to N,
        so the region for a larger N is contained in the one for a smaller N.
        """
        ensure_writable(cfg)
        started = time.perf_counter()
        points = RunService.sweep_points(cfg)
        cycles = tuple(cfg.reported_cycles)
        logger.info(f"sweep over {len(points)} points with {cfg.workers} worker(s)")

        tasks = [(p, cycles, cfg.prominence, cfg.near_unity) for _, _, p in points]
        results = run_tasks(_sweep_task, tasks, cfg.workers, desc="sweep")

        rows = []
        regions: dict[str, list] = {str(n): [] for n in cycles}
        for (a1, a2, _), (point_rows, stable) in zip(points, results):
            rows.extend(SweepRow(axis1=a1, axis2=a2, **r) for r in point_rows)
            for n in cycles:
                if stable is not None and stable >= n:
                    regions[str(n)].append([a1, a2])
        failed = sum(1 for r in rows if r.status != "ok")
        status = "partial_failure" if failed else "ok"
        if failed:
            logger.warning(f"{failed} sweep row(s) failed")
        return RunService._record(
            cfg,
            started,
            status=status,
            sweep=rows,
            extras={
                "axes": [a.name for a in cfg.sweep_axes],
                "failed_rows": failed,
                "near_unity": {"band": cfg.near_unity, "regions": regions},
            },
        )

    @staticmethod
    def near_unity_region(record: RunRecord, n_cycles: int) -> set[tuple[float, Optional[float]]]:
        """Grid points of a sweep record that stay near-unity through ``n_cycles``."""
        regions = record.extras["near_unity"]["regions"]
        if str(n_cycles) not in regions:
            raise PreconditionViolated(f"N={n_cycles} was not among the reported cycle counts")
        return {(a1, a2) for a1, a2 in regions[str(n_cycles)]}

    @staticmethod
    def run_theta_scan(cfg: RunConfig) -> RunRecord:
        """R(tau) and phase-ratio summaries for each initial polar angle."""
        ensure_writable(cfg)
        started = time.perf_counter()
        tasks = [(cfg.params, theta, cfg.near_unity) for theta in cfg.theta_grid]
        summaries = run_tasks(_theta_task, tasks, cfg.workers, desc="theta-scan")
        table = [
            {"theta0_deg": s["theta0_deg"], **c}
            for s in summaries
            for c in s["cycles"]
        ]
        failed = [s for s in summaries if s["status"] != "ok"]
        return RunService._record(
            cfg,
            started,
            status="partial_failure" if failed else "ok",
            extras={
                "theta_scan": [{k: v for k, v in s.items() if k != "cycles"} for s in summaries],
                "table": {
                    "columns": ["theta0_deg", "N", "R_min", "phi_unwrapped", "phi_unitary", "ratio"],
                    "rows": table,
                },
            },
        )

    @staticmethod
    def oracle_compare(cfg: RunConfig) -> RunRecord:
        """Trace distance between the hierarchy and the pseudomode solver at every sample."""
        ensure_writable(cfg)
        started = time.perf_counter()
        p = cfg.params
        heom = evolve(p)
        oracle = pseudomode_evolve(p)
        distance = trace_distance(heom.rhos, oracle.rhos)
        table = [
            {
                "tau": float(t),
                "heom_rho11": float(h[0, 0].real),
                "oracle_rho11": float(o[0, 0].real),
                "trace_distance": float(d),
            }
            for t, h, o, d in zip(heom.taus, heom.rhos, oracle.rhos, distance)
        ]
        logger.info(f"oracle comparison: max trace distance {distance.max():.3e}")
        return RunService._record(
            cfg,
            started,
            diagnostics={"heom": heom.diagnostics, "oracle": oracle.diagnostics},
            extras={
                "max_trace_distance": float(distance.max()),
                "n_max": oracle.diagnostics["n_max"],
                "table": {"columns": list(table[0]), "rows": table},
            },
        )

    @staticmethod
    def run_convergence_scan(cfg: RunConfig) -> RunRecord:
        """Consecutive-depth distances for each coupling in ``convergence_gammas``."""
        ensure_writable(cfg)
        started = time.perf_counter()
        reports = {}
        rows = []
        for gamma0 in cfg.convergence_gammas:
            p = cfg.params.with_updates(gamma0=gamma0)
            report = convergence_scan(p, cfg.convergence_depths, raise_on_failure=False)
            reports[repr(gamma0)] = report.to_dict()
            for i, depth in enumerate(report.depths):
                rows.append({
                    "gamma0": gamma0,
                    "N1": depth[0],
                    "N2": depth[1],
                    "distance_to_previous": report.distances[i - 1] if i else None,
                    "min_eig": report.min_eigenvalues[i],
                })
        converged = all(r["converged_at"] is not None for r in reports.values())
        return RunService._record(
            cfg,
            started,
            status="ok" if converged else "not_converged",
            diagnostics={"convergence": reports},
            extras={"table": {"columns": ["gamma0", "N1", "N2", "distance_to_previous", "min_eig"], "rows": rows}},
        )

    @staticmethod
    def calibrate(cfg: RunConfig) -> RunRecord:
        ensure_writable(cfg)
        started = time.perf_counter()
        report = calibrate_convention(cfg.params)
        rows = [{"convention": name, **values} for name, values in report["conventions"].items()]
        return RunService._record(
            cfg,
            started,
            extras={
                "calibration": report,
                "table": {"columns": ["convention", "coefficient", "hierarchy_prefactor", "relative_error"],
                          "rows": rows},
            },
        )

    @staticmethod
    def execute(cfg: RunConfig) -> RunRecord:
        handlers = {
            "single": RunService.run_single,
            "sweep": RunService.run_sweep,
            "theta-scan": RunService.run_theta_scan,
            "oracle-compare": RunService.oracle_compare,
            "convergence-scan": RunService.run_convergence_scan,
            "calibrate": RunService.calibrate,
        }
        return handlers[cfg.mode](cfg)
