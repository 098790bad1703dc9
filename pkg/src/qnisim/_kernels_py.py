"""Pure-NumPy mixing-step kernel (fallback when the extension is absent)."""

from __future__ import annotations

import numpy as np

COMPILED = False


def fwm_step(as_, ads, ai, adi, au, adu, xi, chi, gamma_s, gamma_i, gamma_u, dz):
    """One Ito Euler step of the six coupled field equations, in place.

    All increments are evaluated from pre-step values.  ``xi`` holds unit
    normals of shape (n_traj, 6, n_bins); terms (1,2) and (3,4) form the
    correlated complex pair increments shared between the signal and idler
    equations (direct and daggered sectors respectively), terms 5 and 6
    drive the two pump equations.  Complex square roots take the principal
    branch.

    Returns (traj, bin) of the first non-finite amplitude, or (-1, -1).
    """
    chi = complex(chi)
    cc = np.conj(chi)
    sdz = np.sqrt(dz)
    cs = np.sqrt(cc / 2.0)
    cd = np.sqrt(chi / 2.0)

    z1 = (xi[:, 0, :] + 1j * xi[:, 1, :]) * sdz
    z2 = (xi[:, 2, :] + 1j * xi[:, 3, :]) * sdz
    w5 = xi[:, 4, :] * sdz
    w6 = xi[:, 5, :] * sdz

    au2 = au * au
    adu2 = adu * adu

    d_as = (cc * au2 * adi - gamma_s * as_) * dz + (cs * au) * z1
    d_ai = (cc * au2 * ads - gamma_i * ai) * dz + (cs * au) * np.conj(z1)
    d_ads = (chi * adu2 * ai - gamma_s * ads) * dz + (cd * adu) * z2
    d_adi = (chi * adu2 * as_ - gamma_i * adi) * dz + (cd * adu) * np.conj(z2)
    d_au = (-2.0 * chi * adu * as_ * ai - gamma_u * au) * dz + 1j * np.sqrt(
        (2.0 * chi) * (as_ * ai)
    ) * w5
    d_adu = (-2.0 * cc * au * ads * adi - gamma_u * adu) * dz + 1j * np.sqrt(
        (2.0 * cc) * (ads * adi)
    ) * w6

    as_ += d_as
    ads += d_ads
    ai += d_ai
    adi += d_adi
    au += d_au
    adu += d_adu

    # Cheap health check first; localise only on failure.
    totals = as_.sum() + ads.sum() + ai.sum() + adi.sum() + au.sum() + adu.sum()
    if not np.isfinite(totals.real) or not np.isfinite(totals.imag):
        bad = ~(
            np.isfinite(as_)
            & np.isfinite(ads)
            & np.isfinite(ai)
            & np.isfinite(adi)
            & np.isfinite(au)
            & np.isfinite(adu)
        )
        t, b = np.argwhere(bad)[0]
        return int(t), int(b)
    return -1, -1
