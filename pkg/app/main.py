"""
Command-line entrypoint.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 degeneracy,
5 not converged, 6 partial sweep failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from app.core.config import settings
from app.core.exceptions import ConfigurationError, SimulationError
from app.core.logging_config import setup_logging
from app.core.presets import PRESETS
from app.core.run_config import load_run_config
from app.services.report_service import ReportService
from app.services.run_service import PERIOD_POLICIES, RunService

logger = logging.getLogger(__name__)

STATUS_EXIT_CODES = {"ok": 0, "not_converged": 5, "partial_failure": 6}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qubit-gp",
        description="Geometric phase of a driven qubit in a Lorentzian bath, via the hierarchy of equations of motion.",
        epilog="Step refinement is opt-in: --set auto_refine=true halves dt until R(tau) moves by less than 1e-8 "
        "between halvings. Presets leave it off and use the automatic step.",
    )
    parser.add_argument("--config", type=Path, help="KEY=VALUE config file (needs schema_version)")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="named parameter set")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    parser.add_argument("--mode", choices=["single", "sweep", "theta-scan", "oracle-compare",
                                           "convergence-scan", "calibrate"])
    parser.add_argument("--out", type=Path, help="output file; stdout when omitted")
    parser.add_argument("--format", choices=["csv", "json"])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--period-policy", choices=PERIOD_POLICIES)
    parser.add_argument("--depth", help="truncation depth as N1,N2")
    parser.add_argument("--dt", help="step size, or 'auto'")
    parser.add_argument("--compare-periods", action="store_true", default=None)
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    return parser


def _fail(exc: SimulationError) -> int:
    sys.stderr.write(json.dumps({**exc.to_dict(), "message": str(exc)}, default=str) + "\n")
    return exc.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, settings.LOG_DIR)

    flags = {
        "mode": args.mode,
        "out": args.out,
        "format": args.format,
        "workers": args.workers,
        "period_policy": args.period_policy,
        "depth": args.depth,
        "dt": args.dt,
        "compare_periods": args.compare_periods,
    }
    try:
        cfg = load_run_config(args.config, args.preset, args.overrides, flags)
    except ConfigurationError as exc:
        logger.error(f"invalid configuration: {exc}")
        return _fail(exc)

    try:
        record = RunService.execute(cfg)
    except SimulationError as exc:
        logger.error(f"run failed: {exc}")
        return _fail(exc)

    ReportService.write(record, cfg.format, cfg.out)
    return STATUS_EXIT_CODES.get(record.status, 1)


if __name__ == "__main__":
    sys.exit(main())
