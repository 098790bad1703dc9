"""The two-stage interferometer: pair source, object, second source, mixer.

Per trajectory: the first stage converts pump photons into correlated
signal/idler amplitudes from vacuum; the signal is stored; the idler
passes the imaged object, is retimed, and seeds the second stage alongside
a fresh deterministic pump copy; the stored signal is retimed and
interfered with the second signal on a 50:50 splitter feeding detectors A
and B.

Beamsplitter convention is the zero-phase one,

    a_A = (a_1 + a_2)/sqrt(2),   a_B = (a_1 - a_2)/sqrt(2),

with the daggered components mixed identically, so a transparent object at
zero phase shift sits on the maximal-contrast operating point and a phase
shift of pi swaps the detectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import (
    FieldGrid,
    GridSpec,
    IDLER,
    PUMP,
    SIGNAL,
    SIGNAL_COPY,
    TrajectoryState,
    offset_bins,
)
from .noise import NoiseStream
from .propagate import FieldEnsemble, MaterialParams, StepPlan, propagate_segment

OBJECT_VARIANTS = ("none", "phase", "reflect", "dynamic")


@dataclass(frozen=True)
class ObjectSpec:
    """Imaged object in the idler path.

    ``phase`` applies a phase shift ``dphi``; ``reflect`` has reflectivity
    ``r`` mapped to amplitude transmission sqrt(1 - r^2) (r = 1 blocks the
    idler completely); ``dynamic`` is the linearly coupled oscillator with
    coupling ``eta``, damping ``gamma_o`` (1/ps), initial excitation
    ``beta0`` set at time ``t_o``, acting over ``interaction_length_m``.
    """

    variant: str = "none"
    dphi: float = 0.0
    r: float = 0.0
    eta: complex = 0.0
    gamma_o: float = 1.0
    beta0: complex = 0.0
    t_o_ps: float = 0.0
    interaction_length_m: float = 1.0

    def __post_init__(self):
        if self.variant not in OBJECT_VARIANTS:
            raise ValueError(f"unknown object variant {self.variant!r}")
        if self.variant == "reflect" and not 0.0 <= self.r <= 1.0:
            raise ValueError(f"reflectivity must be in [0, 1], got {self.r}")
        if self.variant == "dynamic" and self.gamma_o < 0:
            raise ValueError("gamma_o must be >= 0")


@dataclass
class DynamicObjectState:
    """Oscillator excitation amplitudes; conjugate pair at initialisation."""

    beta: complex
    beta_dagger: complex
    t_ps: float


@dataclass(frozen=True)
class BenchLayout:
    """Stage lengths, step counts, retimings, and the object."""

    nl1_length_m: float = 1.0
    nl2_length_m: float = 1.0
    steps_per_stage: int = 100
    delta_tau_s_ps: float = 20.0
    delta_tau_i_ps: float = 0.0
    object: ObjectSpec = field(default_factory=ObjectSpec)

    def __post_init__(self):
        if self.nl1_length_m <= 0 or self.nl2_length_m <= 0:
            raise ValueError("stage lengths must be > 0")
        if self.steps_per_stage < 1:
            raise ValueError("steps_per_stage must be >= 1")


def apply_phase_object_arrays(a: np.ndarray, ad: np.ndarray, dphi: float) -> None:
    a *= np.exp(1j * dphi)
    ad *= np.exp(-1j * dphi)


def apply_phase_object(idler: FieldGrid, dphi: float) -> FieldGrid:
    """Phase-shift the idler: a -> a e^{i dphi}, ad -> ad e^{-i dphi}."""
    out = idler.copy()
    apply_phase_object_arrays(out.a, out.ad, dphi)
    return out


def apply_reflective_object_arrays(a: np.ndarray, ad: np.ndarray, r: float) -> None:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {r}")
    t = np.sqrt(1.0 - r * r)
    a *= t
    ad *= t


def apply_reflective_object(idler: FieldGrid, r: float) -> FieldGrid:
    """Attenuate the idler by amplitude transmission sqrt(1 - r^2).

    Pure damping: the doubled representation needs no added noise for
    vacuum-coupled loss.
    """
    out = idler.copy()
    apply_reflective_object_arrays(out.a, out.ad, r)
    return out


def apply_dynamic_object_arrays(
    a: np.ndarray, ad: np.ndarray, spec: ObjectSpec, grid: GridSpec
) -> None:
    """Excite the oscillator along the grid, then apply its back-action.

    Pass 1 integrates d(beta) = [-gamma_o beta + conj(eta) a(t)] dt (and the
    daggered twin) bin by bin from (beta0, conj(beta0)) at t_o; bins before
    t_o are untouched.  Pass 2 updates the field with the recorded
    excitation: a -> a - eta beta(t) L/2, ad -> ad - conj(eta) beta_d(t) L/2.
    """
    dt = grid.dt_ps
    n = grid.n_bins
    start = int(np.clip(round((spec.t_o_ps - grid.t0_ps) / dt), 0, n))
    lead = a.shape[:-1]
    beta = np.full(lead, complex(spec.beta0), dtype=np.complex128)
    beta_d = np.full(lead, np.conj(complex(spec.beta0)), dtype=np.complex128)
    eta = complex(spec.eta)
    beta_hist = np.zeros(a.shape, dtype=np.complex128)
    beta_d_hist = np.zeros(a.shape, dtype=np.complex128)
    for j in range(start, n):
        beta_hist[..., j] = beta
        beta_d_hist[..., j] = beta_d
        beta = beta + (-spec.gamma_o * beta + np.conj(eta) * a[..., j]) * dt
        beta_d = beta_d + (-spec.gamma_o * beta_d + eta * ad[..., j]) * dt
        if not (np.isfinite(beta).all() and np.isfinite(beta_d).all()):
            raise RuntimeError(
                f"dynamic object excitation diverged at bin {j} "
                f"(t = {grid.t0_ps + j * dt} ps)"
            )
    half_l = 0.5 * spec.interaction_length_m
    a -= eta * beta_hist * half_l
    ad -= np.conj(eta) * beta_d_hist * half_l


def apply_dynamic_object(idler: FieldGrid, spec: ObjectSpec) -> FieldGrid:
    if spec.variant != "dynamic":
        raise ValueError("object spec is not dynamic")
    out = idler.copy()
    apply_dynamic_object_arrays(out.a, out.ad, spec, idler.spec)
    return out


def apply_object_arrays(a: np.ndarray, ad: np.ndarray, spec: ObjectSpec, grid: GridSpec) -> None:
    if spec.variant == "none":
        return
    if spec.variant == "phase":
        apply_phase_object_arrays(a, ad, spec.dphi)
    elif spec.variant == "reflect":
        apply_reflective_object_arrays(a, ad, spec.r)
    else:
        apply_dynamic_object_arrays(a, ad, spec, grid)


def apply_beamsplitter_arrays(
    a1: np.ndarray, ad1: np.ndarray, a2: np.ndarray, ad2: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    s = 1.0 / np.sqrt(2.0)
    return (
        (a1 + a2) * s,
        (ad1 + ad2) * s,
        (a1 - a2) * s,
        (ad1 - ad2) * s,
    )


def apply_beamsplitter(s1: FieldGrid, s2: FieldGrid) -> tuple[FieldGrid, FieldGrid]:
    """50:50 mix of two signal grids; per-bin flux is conserved exactly."""
    if s1.spec != s2.spec:
        raise ValueError("beamsplitter inputs must share one grid")
    a_a, ad_a, a_b, ad_b = apply_beamsplitter_arrays(s1.a, s1.ad, s2.a, s2.ad)
    return (
        FieldGrid(s1.field_id, s1.spec, a_a, ad_a),
        FieldGrid(s2.field_id, s2.spec, a_b, ad_b),
    )


@dataclass
class DetectorRecord:
    """Per-trajectory output amplitudes: ports A/B plus pre-mix signals."""

    port_a: tuple[np.ndarray, np.ndarray]
    port_b: tuple[np.ndarray, np.ndarray]
    signal_1: tuple[np.ndarray, np.ndarray]
    signal_2: tuple[np.ndarray, np.ndarray]
    spec: GridSpec


class BenchChunkOutput:
    """Detector records for a chunk of trajectories ((n_traj, n_bins) arrays)."""

    __slots__ = ("spec", "traj_start", "a", "b", "s1", "s2")

    def __init__(self, spec, traj_start, a, b, s1, s2):
        self.spec = spec
        self.traj_start = traj_start
        self.a = a
        self.b = b
        self.s1 = s1
        self.s2 = s2

    def record(self, row: int) -> DetectorRecord:
        pick = lambda pair: (pair[0][row].copy(), pair[1][row].copy())
        return DetectorRecord(
            pick(self.a), pick(self.b), pick(self.s1), pick(self.s2), self.spec
        )


def run_bench_chunk(
    spec: GridSpec,
    pump: FieldGrid,
    params1: MaterialParams,
    params2: MaterialParams,
    layout: BenchLayout,
    noise: NoiseStream,
    traj_start: int,
    n_traj: int,
) -> BenchChunkOutput:
    """Execute the full bench for a contiguous block of trajectories.

    The second stage is pumped by a fresh copy of the same deterministic
    pulse, not by the depleted first-stage pump.  Noise steps are numbered
    globally: stage 1 uses [0, steps), stage 2 uses [steps, 2*steps).
    """
    n_steps = layout.steps_per_stage
    plan1 = StepPlan.for_length(layout.nl1_length_m, n_steps)
    plan2 = StepPlan.for_length(layout.nl2_length_m, n_steps)

    fe = FieldEnsemble(spec, n_traj, traj_start)
    fe.set_pump(pump)
    propagate_segment(fe, params1, plan1, noise, step_offset=0)

    s1_a = fe.as_.copy()
    s1_ad = fe.ads.copy()

    apply_object_arrays(fe.ai, fe.adi, layout.object, spec)
    di = offset_bins(spec, layout.delta_tau_i_ps)
    if di:
        fe.ai = np.roll(fe.ai, di, axis=-1)
        fe.adi = np.roll(fe.adi, di, axis=-1)

    fe.as_[...] = 0.0
    fe.ads[...] = 0.0
    fe.set_pump(pump)
    propagate_segment(fe, params2, plan2, noise, step_offset=n_steps)

    ds = offset_bins(spec, layout.delta_tau_s_ps)
    if ds:
        s1_a = np.roll(s1_a, ds, axis=-1)
        s1_ad = np.roll(s1_ad, ds, axis=-1)

    a_a, ad_a, a_b, ad_b = apply_beamsplitter_arrays(s1_a, s1_ad, fe.as_, fe.ads)
    return BenchChunkOutput(
        spec,
        traj_start,
        (a_a, ad_a),
        (a_b, ad_b),
        (s1_a, s1_ad),
        (fe.as_, fe.ads),
    )


def run_bench(
    trajectory_index: int,
    spec: GridSpec,
    pump: FieldGrid,
    params1: MaterialParams,
    params2: MaterialParams,
    layout: BenchLayout,
    noise: NoiseStream,
) -> DetectorRecord:
    """Single-trajectory bench execution (identical to the chunked path)."""
    out = run_bench_chunk(
        spec, pump, params1, params2, layout, noise, trajectory_index, 1
    )
    return out.record(0)
