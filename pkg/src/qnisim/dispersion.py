"""Group-velocity walk-off and GVD as spectral phase multiplications.

The grid is periodic, so linear phase in the frequency domain is a circular
time shift and quadratic phase is chirp/broadening.  The daggered amplitude
must stay the statistical conjugate of the direct one under free
propagation; the operator that achieves this is the direct-field phase
conjugated *at reflected frequency*, i.e. the same linear (timing) part and
the opposite quadratic (chirp) part.  Conjugating the full phase verbatim
would time-reverse the daggered walk-off and break conjugacy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldGrid


@dataclass(frozen=True)
class SpectralPhasePlan:
    """Cached unit-modulus phase arrays for one field over one length."""

    n_bins: int
    dt_ps: float
    delay_ps: float
    gvd_ps2: float
    phase_a: np.ndarray
    phase_ad: np.ndarray

    @property
    def is_identity(self) -> bool:
        return self.delay_ps == 0.0 and self.gvd_ps2 == 0.0

    @classmethod
    def from_coefficients(
        cls, n_bins: int, dt_ps: float, delay_ps: float, gvd_ps2: float
    ) -> "SpectralPhasePlan":
        """Plan for a timing shift ``delay_ps`` and quadratic phase ``gvd_ps2``.

        ``delay_ps`` is the group-velocity offset times the propagated
        length; ``gvd_ps2`` is the dispersion coefficient times length.
        """
        omega = 2.0 * np.pi * np.fft.fftfreq(n_bins, d=dt_ps)
        lin = delay_ps * omega
        quad = 0.5 * gvd_ps2 * omega**2
        return cls(
            n_bins=n_bins,
            dt_ps=dt_ps,
            delay_ps=delay_ps,
            gvd_ps2=gvd_ps2,
            phase_a=np.exp(-1j * (lin + quad)),
            phase_ad=np.exp(-1j * (lin - quad)),
        )

    def scaled(self, factor: float) -> "SpectralPhasePlan":
        return SpectralPhasePlan.from_coefficients(
            self.n_bins, self.dt_ps, self.delay_ps * factor, self.gvd_ps2 * factor
        )


def apply_dispersion_arrays(a: np.ndarray, ad: np.ndarray, plan: SpectralPhasePlan) -> None:
    """In-place spectral phase application on (..., n_bins) amplitude arrays.

    A zero-coefficient plan is an exact no-op (no FFT round-trip), so
    dispersionless scenarios stay bit-identical.
    """
    if a.shape[-1] != plan.n_bins or ad.shape[-1] != plan.n_bins:
        raise ValueError("grid bin count does not match the plan")
    if plan.is_identity:
        return
    a[...] = np.fft.ifft(np.fft.fft(a, axis=-1) * plan.phase_a, axis=-1)
    ad[...] = np.fft.ifft(np.fft.fft(ad, axis=-1) * plan.phase_ad, axis=-1)


def apply_dispersion(grid: FieldGrid, plan: SpectralPhasePlan) -> FieldGrid:
    """Dispersed copy of ``grid``; photon flux is conserved to rounding."""
    out = grid.copy()
    apply_dispersion_arrays(out.a, out.ad, plan)
    return out
