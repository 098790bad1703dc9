"""Result files: CSV tables with documented headers plus a JSON manifest.

CSV contents are pure functions of (scenario, seed, code version); the
manifest embeds the full canonical scenario so any output can be
regenerated from the manifest alone.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

CSV_SCHEMA_VERSION = 1

TIME_SERIES_COLUMNS = (
    "t_ps", "nA", "nB", "nS1", "nS2", "nA_err", "nB_err", "V", "V_err", "V_clamped",
)
SWEEP_COLUMNS = ("nA", "nB", "nS1", "nS2", "V", "V_err", "V_peak", "V_mean")
ESTIMATE_TOTALS_COLUMNS = (
    "nA_naive", "nA_naive_err", "nA_corrected", "nA_corrected_err",
    "nB_naive", "nB_naive_err", "nB_corrected", "nB_corrected_err",
    "V_naive", "V_corrected", "cost_factor",
)
ESTIMATE_SERIES_COLUMNS = (
    "t_ps", "nA_naive", "nA_corrected", "nA_corrected_err",
    "nB_naive", "nB_corrected", "nB_corrected_err", "V_naive", "V_corrected",
)


def fmt(x) -> str:
    """Shortest round-trip decimal form; deterministic."""
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_time_series_csv(path: Path, series: dict) -> None:
    n = len(series["t_ps"])
    rows = ([series[c][j] for c in TIME_SERIES_COLUMNS] for j in range(n))
    write_csv(path, list(TIME_SERIES_COLUMNS), rows)


def write_sweep_csv(path: Path, parameter: str, rows) -> None:
    header = [parameter, *SWEEP_COLUMNS]
    out = []
    for row in rows:
        t = row.totals
        out.append(
            [row.value, t["nA"], t["nB"], t["nS1"], t["nS2"], t["V"], t["V_err"],
             row.v_peak, row.v_mean]
        )
    write_csv(path, header, out)


def write_estimate_totals_csv(path: Path, parameter: str, output) -> None:
    header = [parameter, *ESTIMATE_TOTALS_COLUMNS]
    rows = []
    for row in output.rows:
        ea, eb = row.estimates["A_tot"], row.estimates["B_tot"]
        from .detection import visibility

        v_naive = visibility(np.atleast_1d(ea.naive), np.atleast_1d(eb.naive))[0]
        v_corr = visibility(np.atleast_1d(ea.corrected), np.atleast_1d(eb.corrected))[0]
        rows.append(
            [row.value,
             float(ea.naive), float(ea.naive_err), float(ea.corrected), float(ea.corrected_err),
             float(eb.naive), float(eb.naive_err), float(eb.corrected), float(eb.corrected_err),
             float(v_naive), float(v_corr), row.cost_factor]
        )
    write_csv(path, header, rows)


def write_estimate_series_csv(path: Path, parameter: str, output) -> None:
    header = [parameter, *ESTIMATE_SERIES_COLUMNS]
    rows = []
    for row in output.rows:
        s = row.series
        for j in range(len(s["t_ps"])):
            rows.append(
                [row.value, s["t_ps"][j],
                 s["nA_naive"][j], s["nA_corrected"][j], s["nA_corrected_err"][j],
                 s["nB_naive"][j], s["nB_corrected"][j], s["nB_corrected_err"][j],
                 s["V_naive"][j], s["V_corrected"][j]]
            )
    write_csv(path, header, rows)


def write_manifest(
    path: Path,
    kind: str,
    scenario,
    files: dict[str, str],
    workers: int,
    wall_time_s: float,
    extra: dict | None = None,
) -> None:
    from . import __version__

    doc = {
        "kind": kind,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "code_version": __version__,
        "config": scenario.to_dict(),
        "config_sha256": scenario.sha256(),
        "seed": scenario.seed,
        "trajectories": scenario.trajectories,
        "workers": workers,
        "wall_time_s": wall_time_s,
        "files": files,
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
