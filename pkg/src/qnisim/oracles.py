"""Independent reference results used by tests and the acceptance suite.

Everything here is computed without the ensemble propagator: closed forms
of the linearised (undepleted-pump) theory, and a deterministic
second-moment lattice model that evolves correlation matrices directly.
Agreement between these and the stochastic engine is evidence, not
tautology.

The beamsplitter convention shared with the bench is the zero-phase 50:50
matrix: out_A = (s1 + s2)/sqrt(2), out_B = (s1 - s2)/sqrt(2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


def lowgain_pair_flux(chi: complex, pump_flux: float, z_m: float) -> float:
    """Mean signal flux from vacuum after one lossless stage.

    The linearised pair-creation equations give sinh^2(g z) with
    g = |chi| * pump_flux; valid while the pump is undepleted.
    """
    g = abs(chi) * pump_flux
    if g * z_m > 1.0:
        warnings.warn(
            f"gain g*z = {g * z_m:.3f} exceeds the low-gain validity range",
            stacklevel=2,
        )
    return math.sinh(g * z_m) ** 2


def lowgain_anomalous_moment(chi: complex, pump_flux: float, z_m: float) -> float:
    """|<a_s a_i>| of the same linearised solution: sinh(gz)*cosh(gz)."""
    g = abs(chi) * pump_flux * z_m
    return math.sinh(g) * math.cosh(g)


def two_stage_interference(
    chi: complex,
    pump_flux: float,
    z1_m: float,
    z2_m: float,
    dphi: float,
    t_amp: float,
) -> tuple[float, float]:
    """Detector fluxes of the linearised two-stage layout.

    First stage gain theta1, idler passed through a phase shift ``dphi``
    and amplitude transmission ``t_amp``, second stage gain theta2 seeded
    by that idler, outputs mixed on the zero-phase 50:50 splitter:

        n1   = sinh^2 theta1
        n2   = sinh^2 theta2 * (1 + t^2 sinh^2 theta1)
        K    = t * sinh theta1 * cosh theta1 * sinh theta2
        n_AB = (n1 + n2)/2 +- K cos(dphi)

    Blocking the idler (t = 0) removes the interference term entirely.
    """
    g = abs(chi) * pump_flux
    if g * max(z1_m, z2_m) > 1.0:
        warnings.warn(
            f"gain g*z = {g * max(z1_m, z2_m):.3f} exceeds the low-gain "
            "validity range",
            stacklevel=2,
        )
    th1 = g * z1_m
    th2 = g * z2_m
    n1 = math.sinh(th1) ** 2
    n2 = math.sinh(th2) ** 2 * (1.0 + t_amp**2 * math.sinh(th1) ** 2)
    k = t_amp * math.sinh(th1) * math.cosh(th1) * math.sinh(th2)
    base = 0.5 * (n1 + n2)
    osc = k * math.cos(dphi)
    return base + osc, base - osc


def gaussian_pulse_energy(peak_flux: float, fwhm_ps: float) -> float:
    """Photons in a Gaussian pulse of given peak flux and intensity FWHM."""
    return peak_flux * fwhm_ps * math.sqrt(math.pi / (4.0 * math.log(2.0)))


def gaussian_gvd_fwhm(fwhm_ps: float, phi2_ps2: float) -> float:
    """Intensity FWHM of a transform-limited Gaussian after quadratic phase.

    With the field envelope exp(-t^2 / (2 T0^2)) and accumulated quadratic
    spectral phase phi2, the duration grows by sqrt(1 + (phi2/T0^2)^2).
    """
    t0 = fwhm_ps / (2.0 * math.sqrt(math.log(2.0)))
    return fwhm_ps * math.sqrt(1.0 + (phi2_ps2 / t0**2) ** 2)


def detector_window_expectation(
    cross_phase: float, per_bin_flux: float, m: int, same_window: bool
) -> float:
    """Two-bin toy: expected window reading for bins with correlated phases.

    An ensemble with a(t0) = z and a(t1) = z*exp(i*phase) (z complex
    standard normal scaled to ``per_bin_flux``) has per-bin readings of
    ``per_bin_flux`` regardless of the correlation; only a window covering
    both bins exposes the cross term:

        m = 1 reading: per_bin_flux
        m = 2 reading: per_bin_flux * (1 + cos(phase))
    """
    if m == 1 or not same_window:
        return per_bin_flux
    return per_bin_flux * (1.0 + math.cos(cross_phase))


@dataclass
class LinearizedMomentModel:
    """Deterministic second-moment lattice model of one mixing stage.

    Evolves the correlation matrices of the linearised (undepleted-pump)
    theory over the discrete time grid:

        M1[p, q] = <a_s(t_p)  ad_s(t_q)>      signal occupation
        M2[p, q] = <a_i(t_p)  ad_i(t_q)>      idler occupation
        W [p, q] = <a_s(t_p)  a_i(t_q)>       pair correlation
        Wd[p, q] = <ad_s(t_p) ad_i(t_q)>

    The coupling g(t) = conj(chi) * u(t)^2 follows the deterministic pump
    envelope, which itself propagates linearly.  Dispersion is applied as
    dense matrix conjugation, built here independently of the trajectory
    engine's elementwise path.
    """

    n_bins: int
    dt_ps: float
    chi: complex
    pump_a: np.ndarray
    dvg_ps_per_m: dict
    gvd_ps2_per_km: dict

    def __post_init__(self):
        n = self.n_bins
        self.pump_a = np.asarray(self.pump_a, dtype=np.complex128).copy()
        self.pump_ad = np.conj(self.pump_a)
        self.m1 = np.zeros((n, n), dtype=np.complex128)
        self.m2 = np.zeros((n, n), dtype=np.complex128)
        self.w = np.zeros((n, n), dtype=np.complex128)
        self.wd = np.zeros((n, n), dtype=np.complex128)

    def _propagator_matrices(self, field: str, length_m: float):
        """Dense time-domain propagator pair (direct, daggered) for one field."""
        n = self.n_bins
        omega = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dt_ps)
        lin = self.dvg_ps_per_m[field] * length_m * omega
        quad = 0.5 * self.gvd_ps2_per_km[field] * 1e-3 * length_m * omega**2
        eye_spec = np.fft.fft(np.eye(n), axis=0)
        la = np.fft.ifft(np.exp(-1j * (lin + quad))[:, None] * eye_spec, axis=0)
        lad = np.fft.ifft(np.exp(-1j * (lin - quad))[:, None] * eye_spec, axis=0)
        return la, lad

    def _half_dispersion(self, dz_m: float) -> None:
        half = 0.5 * dz_m
        ls, lsd = self._propagator_matrices("signal_s", half)
        li, lid = self._propagator_matrices("idler_i", half)
        lu, _ = self._propagator_matrices("pump_u", half)
        self.m1 = ls @ self.m1 @ lsd.T
        self.m2 = li @ self.m2 @ lid.T
        self.w = ls @ self.w @ li.T
        self.wd = lsd @ self.wd @ lid.T
        self.pump_a = lu @ self.pump_a
        self.pump_ad = np.conj(self.pump_a)

    def _mixing_step(self, dz_m: float) -> None:
        """Exact per-bin pair-creation map over one step.

        With the pump frozen during the step, each bin evolves under a
        constant coupling g = conj(chi) u^2, whose one-step solution is
        the standard squeeze map with c = cosh(|g| dz) and
        s = (g/|g|) sinh(|g| dz).  The identity terms carry the
        spontaneous (vacuum-seeded) growth exactly, so only the
        dispersion interleaving contributes discretisation error.
        """
        g = np.conj(self.chi) * self.pump_a**2
        mag = np.abs(g)
        theta = mag * dz_m
        c = np.cosh(theta)
        s = np.zeros_like(g)
        nz = mag > 0
        s[nz] = (g[nz] / mag[nz]) * np.sinh(theta[nz])
        sb = np.conj(s)
        eye = np.eye(self.n_bins)
        m1, m2, w, wd = self.m1, self.m2, self.w, self.wd
        cc = c[:, None] * c[None, :]
        self.m1 = (
            cc * m1
            + (s[:, None] * c[None, :]) * wd.T
            + (c[:, None] * sb[None, :]) * w
            + (s[:, None] * sb[None, :]) * (m2.T + eye)
        )
        self.m2 = (
            cc * m2
            + (s[:, None] * c[None, :]) * wd
            + (c[:, None] * sb[None, :]) * w.T
            + (s[:, None] * sb[None, :]) * (m1.T + eye)
        )
        self.w = (
            cc * w
            + (c[:, None] * s[None, :]) * (m1 + eye)
            + (s[:, None] * c[None, :]) * m2.T
            + (s[:, None] * s[None, :]) * wd.T
        )
        self.wd = (
            cc * wd
            + (c[:, None] * sb[None, :]) * m1.T
            + (sb[:, None] * c[None, :]) * (m2 + eye)
            + (sb[:, None] * sb[None, :]) * w.T
        )

    def propagate(self, length_m: float, n_steps: int) -> "LinearizedMomentModel":
        dz = length_m / n_steps
        for _ in range(n_steps):
            self._half_dispersion(dz)
            self._mixing_step(dz)
            self._half_dispersion(dz)
        return self

    def signal_flux(self) -> np.ndarray:
        return np.real(np.diag(self.m1))

    def idler_flux(self) -> np.ndarray:
        return np.real(np.diag(self.m2))

    def pair_correlation(self) -> np.ndarray:
        """|<a_s(t) a_i(t')>| over all bin pairs (signal time, idler time)."""
        return np.abs(self.w)


def single_step_drift(
    amplitudes: dict[str, complex], chi: complex, losses: dict[str, float], dz: float
) -> dict[str, complex]:
    """Expected one-step mean increments (the noise averages to zero).

    Direct transcription of the deterministic parts of the six coupled
    equations for a single bin; used by the brute-force moment checks.
    """
    a_s = amplitudes["as"]
    a_ds = amplitudes["ads"]
    a_i = amplitudes["ai"]
    a_di = amplitudes["adi"]
    a_u = amplitudes["au"]
    a_du = amplitudes["adu"]
    cc = np.conj(chi)
    return {
        "as": (cc * a_u * a_u * a_di - losses["signal_s"] * a_s) * dz,
        "ads": (chi * a_du * a_du * a_i - losses["signal_s"] * a_ds) * dz,
        "ai": (cc * a_u * a_u * a_ds - losses["idler_i"] * a_i) * dz,
        "adi": (chi * a_du * a_du * a_s - losses["idler_i"] * a_di) * dz,
        "au": (-2.0 * chi * a_du * a_s * a_i - losses["pump_u"] * a_u) * dz,
        "adu": (-2.0 * cc * a_u * a_ds * a_di - losses["pump_u"] * a_du) * dz,
    }
