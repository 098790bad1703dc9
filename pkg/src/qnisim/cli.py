"""Batch command-line front-end.

Subcommands
-----------
run       one scenario -> per-window observable tables + manifest
sweep     one ensemble per sweep value -> sweep table + manifest
estimate  background/reference/target workflow -> corrected tables
check     run the validation battery and print one line per criterion

Exit codes: 0 success, 1 invalid input, 2 runtime failure.  Failures print
a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, Scenario, load_scenario
from .io import (
    write_estimate_series_csv,
    write_estimate_totals_csv,
    write_manifest,
    write_sweep_csv,
    write_time_series_csv,
)
from .propagate import FwmDivergenceError


def _emit_error(kind: str, exc: Exception) -> None:
    payload = {"error": {"type": kind, "message": str(exc)}}
    for attr in ("path", "trajectory_index", "step_index", "bin_index"):
        if hasattr(exc, attr):
            payload["error"][attr] = getattr(exc, attr)
    print(json.dumps(payload), file=sys.stderr)


def _load(args) -> Scenario:
    scenario = load_scenario(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["ensemble.seed"] = args.seed
    if args.trajectories is not None:
        overrides["ensemble.trajectories"] = args.trajectories
    if overrides:
        scenario = scenario.with_overrides(**overrides)
    for note in scenario.runtime_warnings():
        print(f"warning: {note}", file=sys.stderr)
    return scenario


def _cmd_run(args) -> int:
    from .runner import run_bench_ensemble

    scenario = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    result = run_bench_ensemble(scenario, workers=args.workers)
    files = {}
    for m in scenario.avg_bins:
        name = f"observables_m{m}.csv"
        write_time_series_csv(out_dir / name, result.series(m))
        files[f"time_series_m{m}"] = name
    write_manifest(
        out_dir / "manifest.json", "run", scenario, files, args.workers,
        time.monotonic() - t0, extra={"totals": result.totals()},
    )
    print(f"run complete: {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    from .runner import run_sweep

    scenario = _load(args)
    if not scenario.sweep_parameter:
        raise ConfigError("sweep", "scenario has no sweep section")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    rows = run_sweep(scenario, workers=args.workers)
    write_sweep_csv(out_dir / "sweep.csv", scenario.sweep_parameter, rows)
    write_manifest(
        out_dir / "manifest.json", "sweep", scenario, {"sweep": "sweep.csv"},
        args.workers, time.monotonic() - t0,
    )
    print(f"sweep complete: {out_dir} ({len(rows)} points)")
    return 0


def _cmd_estimate(args) -> int:
    from .runner import run_estimator_workflow

    scenario = _load(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()
    output = run_estimator_workflow(scenario, workers=args.workers)
    param = scenario.sweep_parameter
    write_estimate_totals_csv(out_dir / "estimate_totals.csv", param, output)
    write_estimate_series_csv(out_dir / "estimate_series.csv", param, output)
    cost = output.rows[0].cost_factor if output.rows else 0.0
    write_manifest(
        out_dir / "manifest.json", "estimate", scenario,
        {"totals": "estimate_totals.csv", "series": "estimate_series.csv"},
        args.workers, time.monotonic() - t0,
        extra={"effective_cost_factor": cost},
    )
    print(
        f"estimate complete: {out_dir} ({len(output.rows)} targets, "
        f"background/reference cost factor ~{cost:.0f}x per target)"
    )
    return 0


def _cmd_check(args) -> int:
    from . import acceptance

    results = acceptance.run_all(
        names=args.criteria, workers=args.workers, verbose=True
    )
    return 0 if all(r.passed for r in results) else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnisim",
        description="Ensemble stochastic simulator for pulsed quantum "
        "nonlinear interferometry",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="scenario YAML file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override ensemble.seed")
        p.add_argument(
            "--trajectories", type=int, default=None, help="override ensemble.trajectories"
        )
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    common(sub.add_parser("run", help="run one scenario"))
    common(sub.add_parser("sweep", help="run the scenario's parameter sweep"))
    common(sub.add_parser("estimate", help="run the matched-noise estimator workflow"))
    check = sub.add_parser("check", help="run the validation battery")
    check.add_argument(
        "--criteria", nargs="*", default=None, help="subset of criterion names to run"
    )
    check.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "estimate": _cmd_estimate,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        _emit_error("invalid_input", exc)
        return 1
    except FwmDivergenceError as exc:
        _emit_error("divergence", exc)
        return 2
    except OSError as exc:
        _emit_error("io_failure", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
