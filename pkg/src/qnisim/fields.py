"""Time-binned field grids in the doubled (a, ad) amplitude representation.

Each optical field is an array of complex amplitude pairs over equal time
bins.  ``a`` and ``ad`` are independent within one trajectory and only
conjugate on ensemble average; ``|a|**2`` is a photon flux (photons per
picosecond), so the photon number carried by a bin is ``|a|**2 * dt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

PUMP = "pump_u"
SIGNAL = "signal_s"
IDLER = "idler_i"
SIGNAL_COPY = "signal_copy_r"

FIELD_IDS = (PUMP, SIGNAL, IDLER, SIGNAL_COPY)


@dataclass(frozen=True)
class GridSpec:
    """Shape of the common time grid: bin count, bin duration, start time."""

    n_bins: int
    dt_ps: float
    t0_ps: float = 0.0

    def __post_init__(self):
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")
        if not self.dt_ps > 0:
            raise ValueError(f"dt_ps must be > 0, got {self.dt_ps}")

    @property
    def window_ps(self) -> float:
        return self.n_bins * self.dt_ps

    def times(self) -> np.ndarray:
        """Bin centre times in ps."""
        return self.t0_ps + (np.arange(self.n_bins) + 0.5) * self.dt_ps


class AmplitudePair(NamedTuple):
    a: complex
    ad: complex


@dataclass
class FieldGrid:
    """One field over the time grid: paired quasi-conjugate amplitudes."""

    field_id: str
    spec: GridSpec
    a: np.ndarray
    ad: np.ndarray

    def __post_init__(self):
        if self.field_id not in FIELD_IDS:
            raise ValueError(f"unknown field_id {self.field_id!r}")
        self.a = np.asarray(self.a, dtype=np.complex128)
        self.ad = np.asarray(self.ad, dtype=np.complex128)
        if self.a.shape != (self.spec.n_bins,) or self.ad.shape != (self.spec.n_bins,):
            raise ValueError("amplitude arrays must match the grid bin count")

    def pair(self, j: int) -> AmplitudePair:
        return AmplitudePair(complex(self.a[j]), complex(self.ad[j]))

    def copy(self) -> "FieldGrid":
        return FieldGrid(self.field_id, self.spec, self.a.copy(), self.ad.copy())

    def flux(self) -> np.ndarray:
        """Per-bin quasi-flux Re(ad*a) in photons/ps (real on ensemble average)."""
        return np.real(self.ad * self.a)

    def photon_number(self) -> float:
        """Total photon-number estimate: sum of Re(ad*a)*dt."""
        return float(np.sum(self.flux()) * self.spec.dt_ps)

    def amplitude_norms(self) -> tuple[float, float]:
        """(sum |a|^2, sum |ad|^2); conserved exactly by grid operations."""
        return (float(np.sum(np.abs(self.a) ** 2)), float(np.sum(np.abs(self.ad) ** 2)))


@dataclass
class TrajectoryState:
    """All co-propagating grids of one stochastic trajectory."""

    fields: dict[str, FieldGrid]
    z_m: float = 0.0
    trajectory_index: int = 0

    def __post_init__(self):
        specs = {g.spec for g in self.fields.values()}
        if len(specs) > 1:
            raise ValueError("all member grids must share one GridSpec")
        if self.trajectory_index < 0:
            raise ValueError("trajectory_index must be >= 0")

    @property
    def spec(self) -> GridSpec:
        return next(iter(self.fields.values())).spec

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(
            {k: g.copy() for k, g in self.fields.items()}, self.z_m, self.trajectory_index
        )


def make_vacuum(spec: GridSpec, field_id: str = SIGNAL) -> FieldGrid:
    """All-zero grid (the vacuum is the zero point of this representation)."""
    zeros = np.zeros(spec.n_bins, dtype=np.complex128)
    return FieldGrid(field_id, spec, zeros, zeros.copy())


def gaussian_envelope(t: np.ndarray, peak_flux: float, fwhm_ps: float, center_ps: float) -> np.ndarray:
    """Amplitude envelope whose intensity FWHM is ``fwhm_ps``."""
    return np.sqrt(peak_flux) * np.exp(-2.0 * np.log(2.0) * ((t - center_ps) / fwhm_ps) ** 2)


def make_coherent_pulse(
    spec: GridSpec,
    field_id: str,
    peak_flux: float,
    fwhm_ps: float,
    center_ps: float,
    phase: float = 0.0,
) -> FieldGrid:
    """Gaussian coherent pulse; a and ad start exactly conjugate.

    ``peak_flux`` is in photons/ps.  Rejects pulses whose 3*FWHM support
    exceeds the window, since the periodic grid would wrap their tails.
    """
    if peak_flux < 0:
        raise ValueError("peak_flux must be >= 0")
    if not fwhm_ps > 0:
        raise ValueError("fwhm_ps must be > 0")
    if not (spec.t0_ps <= center_ps <= spec.t0_ps + spec.window_ps):
        raise ValueError("pulse centre lies outside the time window")
    if 3.0 * fwhm_ps > spec.window_ps:
        raise ValueError(
            f"pulse support 3*FWHM = {3 * fwhm_ps} ps exceeds the "
            f"{spec.window_ps} ps window (wrap-around risk)"
        )
    a = gaussian_envelope(spec.times(), peak_flux, fwhm_ps, center_ps) * np.exp(1j * phase)
    return FieldGrid(field_id, spec, a, np.conj(a))


def make_flat_field(spec: GridSpec, field_id: str, flux: float, phase: float = 0.0) -> FieldGrid:
    """Constant-amplitude field (CW-like runs); a and ad exactly conjugate."""
    if flux < 0:
        raise ValueError("flux must be >= 0")
    a = np.full(spec.n_bins, np.sqrt(flux) * np.exp(1j * phase), dtype=np.complex128)
    return FieldGrid(field_id, spec, a, np.conj(a))


def offset_bins(spec: GridSpec, offset_ps: float) -> int:
    """Whole-bin count for a time offset; rejects sub-bin offsets."""
    ratio = offset_ps / spec.dt_ps
    n = round(ratio)
    if abs(ratio - n) > 1e-9:
        raise ValueError(
            f"offset {offset_ps} ps is not an integer multiple of dt = {spec.dt_ps} ps"
        )
    return int(n)


def shift_grid(grid: FieldGrid, offset_ps: float) -> FieldGrid:
    """Circular shift by a whole number of bins; photon content preserved exactly."""
    n = offset_bins(grid.spec, offset_ps)
    return FieldGrid(grid.field_id, grid.spec, np.roll(grid.a, n), np.roll(grid.ad, n))


def coarsen_grid(grid: FieldGrid, m: int) -> FieldGrid:
    """Combine m adjacent bins into one (detector-style coherent sum).

    The combined amplitude is ``m**-0.5 * sum``, the same rule the slow
    detector uses, so coarsening then reading with window 1 equals reading
    the original grid with window m.  Trailing bins that do not fill a
    window are dropped.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > grid.spec.n_bins:
        raise ValueError("m exceeds the grid bin count")
    k = grid.spec.n_bins // m
    scale = 1.0 / np.sqrt(m)
    a = grid.a[: k * m].reshape(k, m).sum(axis=1) * scale
    ad = grid.ad[: k * m].reshape(k, m).sum(axis=1) * scale
    spec = GridSpec(k, grid.spec.dt_ps * m, grid.spec.t0_ps)
    return FieldGrid(grid.field_id, spec, a, ad)
