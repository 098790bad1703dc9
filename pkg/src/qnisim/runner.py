"""Ensemble orchestration: fixed-chunk parallel execution and reduction.

Trajectory space is cut into fixed-size chunks (independent of the worker
count); each chunk is simulated by a pure task function addressed only by
(scenario, chunk range), and partial accumulators are merged in chunk
order.  Together with the keyed noise stream this makes every observable
byte-identical for any ``--workers`` setting.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bench import BenchChunkOutput, run_bench_chunk
from .config import ESTIMATOR_SWEEPABLE, ConfigError, Scenario, scenario_from_dict
from .detection import (
    CorrelationProbe,
    EnsembleAccumulator,
    EnsembleSummary,
    EstimatorTriple,
    MatchedEstimate,
    matched_estimate,
    visibility,
    visibility_error,
    window_times,
)
from .fields import IDLER, PUMP, SIGNAL
from .noise import NoiseStream
from .propagate import FieldEnsemble, StepPlan, propagate_segment

CHUNK_TRAJ = 4096

PORTS = ("A", "B", "S1", "S2")


def chunk_ranges(n_traj: int, chunk: int = CHUNK_TRAJ) -> list[tuple[int, int]]:
    return [(start, min(chunk, n_traj - start)) for start in range(0, n_traj, chunk)]


def _map_chunks(task, payloads: list, workers: int) -> list:
    if workers <= 1 or len(payloads) <= 1:
        return [task(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, payloads))


def _bench_outputs(scenario: Scenario, start: int, count: int) -> BenchChunkOutput:
    material = scenario.scaled_material()
    noise = NoiseStream(scenario.seed, scenario.grid.n_bins)
    return run_bench_chunk(
        scenario.grid,
        scenario.pump_grid(),
        material,
        material,
        scenario.bench,
        noise,
        start,
        count,
    )


def _window_products(pair, m: int) -> np.ndarray:
    from .detection import detector_average

    a, ad = pair
    return detector_average(a, ad, m)


def _totals(pair, dt: float) -> np.ndarray:
    a, ad = pair
    return np.real(ad * a).sum(axis=1) * dt


def _accumulate_bench(out: BenchChunkOutput, avg_bins, dt: float) -> EnsembleAccumulator:
    acc = EnsembleAccumulator()
    pairs = {"A": out.a, "B": out.b, "S1": out.s1, "S2": out.s2}
    for m in avg_bins:
        per_port = {}
        for port, pair in pairs.items():
            vals = _window_products(pair, m)
            per_port[port] = vals
            acc.add_samples(f"{port}@{m}", vals)
        acc.add_cross(f"A@{m}", f"B@{m}", per_port["A"], per_port["B"])
    tot = {port: _totals(pair, dt) for port, pair in pairs.items()}
    for port, vals in tot.items():
        acc.add_samples(f"{port}_tot", vals)
    acc.add_cross("A_tot", "B_tot", tot["A"], tot["B"])
    acc.set_count(out.a[0].shape[0])
    return acc


def _bench_task(payload: dict) -> EnsembleAccumulator:
    scenario = scenario_from_dict(payload["config"])
    out = _bench_outputs(scenario, payload["start"], payload["count"])
    return _accumulate_bench(out, scenario.avg_bins, scenario.grid.dt_ps)


def _merged(results: list[EnsembleAccumulator]) -> EnsembleAccumulator:
    acc = EnsembleAccumulator()
    for part in results:
        acc.merge(part)
    return acc


@dataclass
class BenchResult:
    """Ensemble observables of one bench run."""

    scenario: Scenario
    acc: EnsembleAccumulator

    def series(self, m: int) -> dict:
        acc = self.acc
        off = self.scenario.offset_fraction
        na, nb = acc.mean(f"A@{m}"), acc.mean(f"B@{m}")
        ns1, ns2 = acc.mean(f"S1@{m}"), acc.mean(f"S2@{m}")
        v = visibility(na, nb, off)
        v_err = visibility_error(
            na, nb, acc.var(f"A@{m}"), acc.var(f"B@{m}"), acc.cov(f"A@{m}", f"B@{m}"),
            acc.count, off,
        )
        return {
            "t_ps": window_times(self.scenario.grid, m),
            "nA": na,
            "nB": nb,
            "nS1": ns1,
            "nS2": ns2,
            "nA_err": acc.se(f"A@{m}"),
            "nB_err": acc.se(f"B@{m}"),
            "V": v,
            "V_err": v_err,
            "V_clamped": np.clip(v, 0.0, 1.0),
        }

    def totals(self) -> dict:
        acc = self.acc
        off = self.scenario.offset_fraction
        na, nb = acc.mean("A_tot"), acc.mean("B_tot")
        v = visibility(np.atleast_1d(na), np.atleast_1d(nb), off)[0]
        v_err = visibility_error(
            np.atleast_1d(na),
            np.atleast_1d(nb),
            np.atleast_1d(acc.var("A_tot")),
            np.atleast_1d(acc.var("B_tot")),
            np.atleast_1d(acc.cov("A_tot", "B_tot")),
            acc.count,
            off,
        )[0]
        return {
            "nA": float(na),
            "nB": float(nb),
            "nS1": float(acc.mean("S1_tot")),
            "nS2": float(acc.mean("S2_tot")),
            "nA_err": float(acc.se("A_tot")),
            "nB_err": float(acc.se("B_tot")),
            "V": float(v),
            "V_err": float(v_err),
        }


def run_bench_ensemble(scenario: Scenario, workers: int = 1) -> BenchResult:
    payloads = [
        {"config": scenario.to_dict(), "start": start, "count": count}
        for start, count in chunk_ranges(scenario.trajectories)
    ]
    acc = _merged(_map_chunks(_bench_task, payloads, workers))
    return BenchResult(scenario, acc)


# -- parameter sweeps ---------------------------------------------------


@dataclass
class SweepRow:
    value: float
    totals: dict
    v_peak: float
    v_mean: float


def run_sweep(scenario: Scenario, workers: int = 1) -> list[SweepRow]:
    """One bench ensemble per sweep value (all values share the noise seed)."""
    if not scenario.sweep_parameter:
        raise ConfigError("sweep", "scenario has no sweep section")
    m_main = scenario.avg_bins[-1]
    rows = []
    for value in scenario.sweep_values:
        scn = scenario.with_overrides(**{scenario.sweep_parameter: value})
        result = run_bench_ensemble(scn, workers)
        series = result.series(m_main)
        rows.append(
            SweepRow(
                value=value,
                totals=result.totals(),
                v_peak=float(np.max(series["V"])) if series["V"].size else 0.0,
                v_mean=float(np.mean(series["V"])) if series["V"].size else 0.0,
            )
        )
    return rows


# -- matched-noise estimator workflow -----------------------------------


def _paired_task(payload: dict) -> EnsembleAccumulator:
    """Reference and target bench chunks on identical noise; paired stats."""
    ref = scenario_from_dict(payload["config_ref"])
    tgt = scenario_from_dict(payload["config_tgt"])
    start, count = payload["start"], payload["count"]
    m_main = ref.avg_bins[-1]
    dt = ref.grid.dt_ps
    out_r = _bench_outputs(ref, start, count)
    out_t = _bench_outputs(tgt, start, count)
    acc = EnsembleAccumulator()
    for tag, out in (("ref", out_r), ("tgt", out_t)):
        pairs = {"A": out.a, "B": out.b}
        win = {p: _window_products(pair, m_main) for p, pair in pairs.items()}
        tot = {p: _totals(pair, dt) for p, pair in pairs.items()}
        for p in ("A", "B"):
            acc.add_samples(f"{tag}_{p}@{m_main}", win[p])
            acc.add_samples(f"{tag}_{p}_tot", tot[p])
        acc.add_cross(f"{tag}_A@{m_main}", f"{tag}_B@{m_main}", win["A"], win["B"])
        acc.add_cross(f"{tag}_A_tot", f"{tag}_B_tot", tot["A"], tot["B"])
    # paired differences (target - reference) for the corrected-error terms
    for p, pair_t, pair_r in (("A", out_t.a, out_r.a), ("B", out_t.b, out_r.b)):
        dw = _window_products(pair_t, m_main) - _window_products(pair_r, m_main)
        dtot = _totals(pair_t, dt) - _totals(pair_r, dt)
        acc.add_samples(f"diff_{p}@{m_main}", dw)
        acc.add_samples(f"diff_{p}_tot", dtot)
    acc.set_count(count)
    return acc


@dataclass
class EstimateRow:
    value: float
    estimates: dict[str, MatchedEstimate]
    series: dict[str, np.ndarray]
    cost_factor: float


@dataclass
class EstimatorOutput:
    background: BenchResult
    reference_trajectories: int
    rows: list[EstimateRow]


def run_estimator_workflow(scenario: Scenario, workers: int = 1) -> EstimatorOutput:
    """Background run, then noise-matched reference/target pairs per value.

    The background and reference share all parameters; each target differs
    only in the swept object/timing parameter.  Corrected means follow
    <n>_target - <n>_reference + <n>_background with matched noise making
    the first difference nearly deterministic.
    """
    if not scenario.sweep_parameter:
        raise ConfigError("sweep", "estimator workflow needs a sweep section")
    if scenario.sweep_parameter not in ESTIMATOR_SWEEPABLE:
        raise ConfigError(
            "sweep.parameter",
            f"{scenario.sweep_parameter!r} is outside the declared target-variation "
            f"set for the estimator workflow (allowed: {sorted(ESTIMATOR_SWEEPABLE)})",
        )
    if not scenario.background_trajectories:
        raise ConfigError("estimator", "missing estimator.background_trajectories")

    m_b = scenario.background_trajectories
    m_r = scenario.trajectories
    m_main = scenario.avg_bins[-1]
    bg_scenario = scenario.with_overrides(**{"ensemble.trajectories": m_b})
    background = run_bench_ensemble(bg_scenario, workers)

    rows = []
    for value in scenario.sweep_values:
        target = scenario.with_overrides(**{scenario.sweep_parameter: value})
        payloads = [
            {
                "config_ref": scenario.to_dict(),
                "config_tgt": target.to_dict(),
                "start": start,
                "count": count,
            }
            for start, count in chunk_ranges(m_r)
        ]
        acc = _merged(_map_chunks(_paired_task, payloads, workers))
        estimates: dict[str, MatchedEstimate] = {}
        for obs, bg_name in (
            (f"A@{m_main}", f"A@{m_main}"),
            (f"B@{m_main}", f"B@{m_main}"),
            ("A_tot", "A_tot"),
            ("B_tot", "B_tot"),
        ):
            triple = EstimatorTriple(
                background=EnsembleSummary(
                    m_b,
                    background.acc.mean(bg_name),
                    background.acc.var(bg_name),
                    bg_scenario.seed,
                ),
                reference=EnsembleSummary(
                    m_r, acc.mean(f"ref_{obs}"), acc.var(f"ref_{obs}"), scenario.seed
                ),
                target=EnsembleSummary(
                    m_r, acc.mean(f"tgt_{obs}"), acc.var(f"tgt_{obs}"), target.seed
                ),
                diff_var=acc.var(f"diff_{obs}"),
            )
            estimates[obs] = matched_estimate(triple)
        series = {
            "t_ps": window_times(scenario.grid, m_main),
            "nA_naive": estimates[f"A@{m_main}"].naive,
            "nA_corrected": estimates[f"A@{m_main}"].corrected,
            "nA_corrected_err": estimates[f"A@{m_main}"].corrected_err,
            "nB_naive": estimates[f"B@{m_main}"].naive,
            "nB_corrected": estimates[f"B@{m_main}"].corrected,
            "nB_corrected_err": estimates[f"B@{m_main}"].corrected_err,
            "V_naive": visibility(
                estimates[f"A@{m_main}"].naive,
                estimates[f"B@{m_main}"].naive,
                scenario.offset_fraction,
            ),
            "V_corrected": visibility(
                estimates[f"A@{m_main}"].corrected,
                estimates[f"B@{m_main}"].corrected,
                scenario.offset_fraction,
            ),
        }
        rows.append(
            EstimateRow(
                value=value,
                estimates=estimates,
                series=series,
                cost_factor=m_b / m_r,
            )
        )
    return EstimatorOutput(background, m_r, rows)


# -- single-segment studies (used by validation and the check battery) --


@dataclass
class SegmentResult:
    scenario: Scenario
    acc: EnsembleAccumulator
    checkpoints: list[int]
    pump_photons: float
    probe: CorrelationProbe | None


def _segment_task(payload: dict):
    scenario = scenario_from_dict(payload["config"])
    checkpoint_every = payload["checkpoint_every"]
    probe_idx = payload["probe_bins"]
    conjugacy = payload["conjugacy"]
    start, count = payload["start"], payload["count"]

    grid = scenario.grid
    material = scenario.scaled_material()
    pump = scenario.pump_grid()
    noise = NoiseStream(scenario.seed, grid.n_bins)
    plan = StepPlan.for_length(scenario.bench.nl1_length_m, scenario.bench.steps_per_stage)

    fe = FieldEnsemble(grid, count, start)
    fe.set_pump(pump)
    pump_photons = float(np.sum(np.real(pump.ad * pump.a)) * grid.dt_ps)

    acc = EnsembleAccumulator()
    checkpoints: list[int] = []

    def on_checkpoint(k: int, state: FieldEnsemble):
        checkpoints.append(k)
        n_s = state.photon_numbers(SIGNAL)
        n_i = state.photon_numbers(IDLER)
        n_u = state.photon_numbers(PUMP)
        acc.add_samples(f"n_s@{k}", n_s)
        acc.add_samples(f"n_i@{k}", n_i)
        acc.add_samples(f"n_u@{k}", n_u)
        acc.add_samples(f"mr_si@{k}", n_s - n_i)
        acc.add_samples(f"mr_su@{k}", n_s + 0.5 * (n_u - pump_photons))

    propagate_segment(
        fe,
        material,
        plan,
        noise,
        checkpoint_every=checkpoint_every,
        on_checkpoint=on_checkpoint if checkpoint_every else None,
    )
    if not checkpoint_every:
        on_checkpoint(plan.n_steps, fe)

    if conjugacy:
        for fid in (PUMP, SIGNAL, IDLER):
            a, ad = fe.component(fid)
            d = ad - np.conj(a)
            acc.add_samples(f"conj_{fid}_re", np.real(d).astype(complex))
            acc.add_samples(f"conj_{fid}_im", np.imag(d).astype(complex))

    probe = None
    if probe_idx is not None:
        probe = CorrelationProbe(np.asarray(probe_idx))
        probe.add(fe.as_, fe.ads, fe.ai, fe.adi)

    acc.set_count(count)
    return acc, probe, checkpoints, pump_photons


def run_segment_ensemble(
    scenario: Scenario,
    checkpoint_every: int | None = None,
    probe_bins=None,
    conjugacy: bool = False,
    workers: int = 1,
) -> SegmentResult:
    """Propagate pump + vacuum through one stage, collecting statistics."""
    payloads = [
        {
            "config": scenario.to_dict(),
            "checkpoint_every": checkpoint_every,
            "probe_bins": None if probe_bins is None else list(map(int, probe_bins)),
            "conjugacy": conjugacy,
            "start": start,
            "count": count,
        }
        for start, count in chunk_ranges(scenario.trajectories)
    ]
    parts = _map_chunks(_segment_task, payloads, workers)
    acc = EnsembleAccumulator()
    probe = None
    checkpoints: list[int] = []
    pump_photons = 0.0
    for part_acc, part_probe, cks, npump in parts:
        acc.merge(part_acc)
        checkpoints = cks
        pump_photons = npump
        if part_probe is not None:
            if probe is None:
                probe = part_probe
            else:
                probe.merge(part_probe)
    return SegmentResult(scenario, acc, checkpoints, pump_photons, probe)
