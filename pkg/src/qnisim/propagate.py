"""Stochastic propagation of field ensembles through a nonlinear medium.

One medium segment is integrated with fixed-step Ito Euler updates of the
six coupled amplitude equations, interleaved with spectral-domain
dispersion in a symmetric (Strang) split: half dispersion, mixing step,
half dispersion.  Adjacent half steps are fused except where a checkpoint
needs the state on a step boundary.

All stochastic increments are computed from pre-step values, and every
increment comes from the keyed noise stream, so the result for a
trajectory depends only on (scenario, seed, trajectory index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .dispersion import SpectralPhasePlan, apply_dispersion_arrays
from .fields import FieldGrid, GridSpec, IDLER, PUMP, SIGNAL, TrajectoryState, make_vacuum
from .noise import NoiseStream

PROPAGATING = (PUMP, SIGNAL, IDLER)

RESONANCE_TOL_THZ = 0.5


class FwmDivergenceError(RuntimeError):
    """A trajectory produced a non-finite amplitude."""

    def __init__(self, trajectory_index: int, step_index: int, bin_index: int):
        self.trajectory_index = trajectory_index
        self.step_index = step_index
        self.bin_index = bin_index
        super().__init__(
            f"non-finite amplitude in trajectory {trajectory_index}, "
            f"step {step_index}, bin {bin_index}"
        )


def chi_from_fiber(
    n2_m2_per_W: float = 3e-20,
    mode_area_um2: float = 25.0,
    photon_energy_J: float = 25e-20,
) -> float:
    """Per-photon-flux nonlinear coupling from bulk fiber numbers.

    Scales the intensity-dependent index coefficient by the power one
    photon/ps carries through the mode area:

        chi = (n2 / A_eff) * (E_photon / 1 ps)

    Defaults give 3e-16 per (photon/ps * m), the polarisation-maintaining
    silica fiber value used by the standard scenarios.
    """
    area_m2 = mode_area_um2 * 1e-12
    watts_per_flux = photon_energy_J / 1e-12
    return n2_m2_per_W / area_m2 * watts_per_flux


@dataclass(frozen=True)
class MaterialParams:
    """Medium parameters: coupling, loss, walk-off, dispersion, carriers.

    ``chi`` couples photon fluxes (photons/ps) per meter; losses are 1/m;
    group-velocity offsets are ps/m relative to the co-moving frame;
    dispersion coefficients are ps^2/km.
    """

    chi: complex = 3e-16
    loss_per_m: dict = field(
        default_factory=lambda: {PUMP: 0.004, SIGNAL: 0.004, IDLER: 0.004}
    )
    dvg_ps_per_m: dict = field(
        default_factory=lambda: {PUMP: 0.0, SIGNAL: -100.0, IDLER: 83.0}
    )
    gvd_ps2_per_km: dict = field(
        default_factory=lambda: {PUMP: 0.589, SIGNAL: 0.489, IDLER: 0.721}
    )
    center_freq_THz: dict = field(
        default_factory=lambda: {PUMP: 390.5, SIGNAL: 428.0, IDLER: 353.0}
    )

    def __post_init__(self):
        for m in PROPAGATING:
            for table in (
                self.loss_per_m,
                self.dvg_ps_per_m,
                self.gvd_ps2_per_km,
                self.center_freq_THz,
            ):
                if m not in table:
                    raise ValueError(f"missing entry for field {m!r}")
            if self.loss_per_m[m] < 0:
                raise ValueError("loss_per_m must be >= 0")
        mismatch = abs(
            2.0 * self.center_freq_THz[PUMP]
            - self.center_freq_THz[SIGNAL]
            - self.center_freq_THz[IDLER]
        )
        if mismatch > RESONANCE_TOL_THZ:
            raise ValueError(
                f"carrier frequencies violate 2*f_pump = f_signal + f_idler "
                f"by {mismatch:.3f} THz (tolerance {RESONANCE_TOL_THZ})"
            )

    def scaled(self, vg_scale: float = 1.0, gvd_scale: float = 1.0) -> "MaterialParams":
        return replace(
            self,
            dvg_ps_per_m={k: v * vg_scale for k, v in self.dvg_ps_per_m.items()},
            gvd_ps2_per_km={k: v * gvd_scale for k, v in self.gvd_ps2_per_km.items()},
        )

    def half_step_plans(self, spec: GridSpec, dz_m: float) -> dict[str, SpectralPhasePlan]:
        half = 0.5 * dz_m
        return {
            m: SpectralPhasePlan.from_coefficients(
                spec.n_bins,
                spec.dt_ps,
                self.dvg_ps_per_m[m] * half,
                self.gvd_ps2_per_km[m] * 1e-3 * half,
            )
            for m in PROPAGATING
        }


@dataclass(frozen=True)
class StepPlan:
    """Fixed-step integration plan for one segment."""

    dz_m: float
    n_steps: int
    scheme: str = "euler_maruyama"

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.n_steps > 0 and not self.dz_m > 0:
            raise ValueError("dz_m must be > 0")
        if self.scheme != "euler_maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def length_m(self) -> float:
        return self.dz_m * self.n_steps

    @classmethod
    def for_length(cls, length_m: float, n_steps: int) -> "StepPlan":
        dz = length_m / n_steps if n_steps else 0.0
        return cls(dz_m=dz, n_steps=n_steps)


class FieldEnsemble:
    """Chunk of trajectories: (n_traj, n_bins) amplitude arrays per component.

    ``traj_start`` is the global index of row 0, which fixes the noise
    addressing for every row independently of chunking.
    """

    __slots__ = ("spec", "as_", "ads", "ai", "adi", "au", "adu", "z_m", "traj_start")

    def __init__(self, spec: GridSpec, n_traj: int, traj_start: int = 0):
        shape = (n_traj, spec.n_bins)
        self.spec = spec
        self.as_ = np.zeros(shape, dtype=np.complex128)
        self.ads = np.zeros(shape, dtype=np.complex128)
        self.ai = np.zeros(shape, dtype=np.complex128)
        self.adi = np.zeros(shape, dtype=np.complex128)
        self.au = np.zeros(shape, dtype=np.complex128)
        self.adu = np.zeros(shape, dtype=np.complex128)
        self.z_m = 0.0
        self.traj_start = traj_start

    @property
    def n_traj(self) -> int:
        return self.as_.shape[0]

    def set_pump(self, grid: FieldGrid) -> None:
        self.au[...] = grid.a
        self.adu[...] = grid.ad

    def component(self, field_id: str) -> tuple[np.ndarray, np.ndarray]:
        return {
            PUMP: (self.au, self.adu),
            SIGNAL: (self.as_, self.ads),
            IDLER: (self.ai, self.adi),
        }[field_id]

    def photon_numbers(self, field_id: str) -> np.ndarray:
        """Per-trajectory photon-number estimates: sum Re(ad*a)*dt."""
        a, ad = self.component(field_id)
        return np.real(ad * a).sum(axis=1) * self.spec.dt_ps

    @classmethod
    def from_trajectory(cls, state: TrajectoryState) -> "FieldEnsemble":
        fe = cls(state.spec, 1, state.trajectory_index)
        for m in PROPAGATING:
            grid = state.fields.get(m)
            if grid is not None:
                a, ad = fe.component(m)
                a[0, :] = grid.a
                ad[0, :] = grid.ad
        fe.z_m = state.z_m
        return fe

    def to_trajectory(self, row: int = 0) -> TrajectoryState:
        fields = {}
        for m in PROPAGATING:
            a, ad = self.component(m)
            fields[m] = FieldGrid(m, self.spec, a[row].copy(), ad[row].copy())
        return TrajectoryState(fields, self.z_m, self.traj_start + row)


def fwm_step(fe: FieldEnsemble, params: MaterialParams, dz: float, xi: np.ndarray,
             step_index: int = 0) -> None:
    """Apply one Ito Euler mixing step to the ensemble, in place."""
    if dz <= 0:
        raise ValueError("dz must be > 0")
    bad_t, bad_b = kernels.fwm_step(
        fe.as_, fe.ads, fe.ai, fe.adi, fe.au, fe.adu,
        xi,
        complex(params.chi),
        params.loss_per_m[SIGNAL],
        params.loss_per_m[IDLER],
        params.loss_per_m[PUMP],
        dz,
    )
    if bad_t >= 0:
        raise FwmDivergenceError(fe.traj_start + bad_t, step_index, bad_b)


def propagate_segment(
    fe: FieldEnsemble,
    params: MaterialParams,
    plan: StepPlan,
    noise: NoiseStream,
    step_offset: int = 0,
    checkpoint_every: int | None = None,
    on_checkpoint: Callable[[int, FieldEnsemble], None] | None = None,
) -> FieldEnsemble:
    """Advance the ensemble through one segment with Strang splitting.

    Noise for step k of this segment is addressed at global step index
    ``step_offset + k``, so consecutive segments of one bench layout must
    pass disjoint offsets.  ``on_checkpoint(k, fe)`` is called with the
    state closed onto a whole-step boundary after every
    ``checkpoint_every`` steps (and receives live arrays: copy if kept).
    """
    if plan.n_steps == 0:
        return fe
    half_plans = params.half_step_plans(fe.spec, plan.dz_m)
    full_plans = {m: p.scaled(2.0) for m, p in half_plans.items()}
    dispersive = not all(p.is_identity for p in half_plans.values())

    def apply(plans):
        if dispersive:
            for m in PROPAGATING:
                a, ad = fe.component(m)
                apply_dispersion_arrays(a, ad, plans[m])

    # Interior half-step pairs are fused into full-step applications; a
    # checkpoint closes onto the step boundary and reopens afterwards.
    apply(half_plans)
    for k in range(plan.n_steps):
        xi = noise.unit_block(step_offset + k, fe.traj_start, fe.n_traj)
        fwm_step(fe, params, plan.dz_m, xi, step_index=step_offset + k)
        fe.z_m += plan.dz_m
        last = k + 1 == plan.n_steps
        at_checkpoint = (
            checkpoint_every is not None and (k + 1) % checkpoint_every == 0
        )
        if last or at_checkpoint:
            apply(half_plans)
            if at_checkpoint and on_checkpoint is not None:
                on_checkpoint(k + 1, fe)
            if not last:
                apply(half_plans)
        else:
            apply(full_plans)
    return fe


@dataclass(frozen=True)
class ManleyRoweResidual:
    """Ensemble photon-flow bookkeeping between two states of one run.

    Pair creation consumes two pump photons per signal-idler pair, so for a
    lossless run the mean changes obey dn_s = dn_i = -dn_u / 2.  The
    residual statistics are computed per trajectory, which keeps the
    strongly correlated fluctuations of the two sides paired.
    """

    dn_s: float
    dn_i: float
    dn_u: float
    si_residual: float
    si_se: float
    su_residual: float
    su_se: float


def manley_rowe_residual(
    before: dict[str, np.ndarray], after: dict[str, np.ndarray]
) -> ManleyRoweResidual:
    """Residuals from per-trajectory photon numbers of two checkpoints.

    ``before``/``after`` map field id to per-trajectory photon numbers as
    returned by :meth:`FieldEnsemble.photon_numbers`.
    """
    d = {m: after[m] - before[m] for m in PROPAGATING}
    n = len(d[SIGNAL])
    si = d[SIGNAL] - d[IDLER]
    su = d[SIGNAL] + 0.5 * d[PUMP]
    return ManleyRoweResidual(
        dn_s=float(d[SIGNAL].mean()),
        dn_i=float(d[IDLER].mean()),
        dn_u=float(d[PUMP].mean()),
        si_residual=float(si.mean()),
        si_se=float(si.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        su_residual=float(su.mean()),
        su_se=float(su.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
    )
