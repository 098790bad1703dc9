# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled mixing-step kernel: hot inner loop of the ensemble propagator."""

import numpy as np

cimport cython
from libc.math cimport copysign, sqrt

COMPILED = True

ctypedef double complex dcomplex


cdef inline dcomplex csqrt_c(dcomplex w) noexcept nogil:
    """Principal-branch complex square root (amplitudes stay far from
    overflow, so the plain quadrature norm is safe)."""
    cdef double x = w.real
    cdef double y = w.imag
    cdef double r = sqrt(x * x + y * y)
    cdef double s, t
    if r == 0.0:
        return 0.0
    if x >= 0.0:
        s = sqrt(0.5 * (r + x))
        t = 0.5 * y / s
    else:
        t = copysign(sqrt(0.5 * (r - x)), y)
        s = 0.5 * y / t
    return s + 1j * t


cdef inline bint nonfinite(dcomplex v) noexcept nogil:
    # inf - inf and nan - nan are both NaN, so this flags either.
    return (v.real - v.real != 0.0) or (v.imag - v.imag != 0.0)


def fwm_step(dcomplex[:, ::1] as_, dcomplex[:, ::1] ads,
             dcomplex[:, ::1] ai, dcomplex[:, ::1] adi,
             dcomplex[:, ::1] au, dcomplex[:, ::1] adu,
             double[:, :, ::1] xi, dcomplex chi,
             double gamma_s, double gamma_i, double gamma_u, double dz):
    """One Ito Euler step of the six coupled field equations, in place.

    Mirrors the pure-Python kernel: increments from pre-step values,
    correlated complex pair noise for the signal/idler sectors, individual
    pump noise, principal-branch square roots.

    Returns (traj, bin) of the first non-finite amplitude, or (-1, -1).
    """
    cdef Py_ssize_t nt = as_.shape[0]
    cdef Py_ssize_t nb = as_.shape[1]
    cdef dcomplex cc = chi.conjugate()
    cdef double sdz = sqrt(dz)
    cdef dcomplex cs = csqrt_c(cc / 2.0)
    cdef dcomplex cd = csqrt_c(chi / 2.0)
    cdef dcomplex two_chi = 2.0 * chi
    cdef dcomplex two_cc = 2.0 * cc

    cdef Py_ssize_t t, b
    cdef dcomplex vs, vds, vi, vdi, vu, vdu
    cdef dcomplex au2, adu2, z1, z2
    cdef dcomplex ns, nds, ni, ndi, nu, ndu
    cdef Py_ssize_t bad_t = -1, bad_b = -1

    with nogil:
        for t in range(nt):
            for b in range(nb):
                vs = as_[t, b]
                vds = ads[t, b]
                vi = ai[t, b]
                vdi = adi[t, b]
                vu = au[t, b]
                vdu = adu[t, b]
                au2 = vu * vu
                adu2 = vdu * vdu
                z1 = (xi[t, 0, b] + 1j * xi[t, 1, b]) * sdz
                z2 = (xi[t, 2, b] + 1j * xi[t, 3, b]) * sdz

                ns = vs + (cc * au2 * vdi - gamma_s * vs) * dz + cs * vu * z1
                ni = vi + (cc * au2 * vds - gamma_i * vi) * dz + cs * vu * z1.conjugate()
                nds = vds + (chi * adu2 * vi - gamma_s * vds) * dz + cd * vdu * z2
                ndi = vdi + (chi * adu2 * vs - gamma_i * vdi) * dz + cd * vdu * z2.conjugate()
                nu = vu + (-two_chi * vdu * vs * vi - gamma_u * vu) * dz \
                    + 1j * csqrt_c(two_chi * vs * vi) * (xi[t, 4, b] * sdz)
                ndu = vdu + (-two_cc * vu * vds * vdi - gamma_u * vdu) * dz \
                    + 1j * csqrt_c(two_cc * vds * vdi) * (xi[t, 5, b] * sdz)

                if bad_t < 0 and (nonfinite(ns) or nonfinite(nds) or nonfinite(ni)
                                  or nonfinite(ndi) or nonfinite(nu) or nonfinite(ndu)):
                    bad_t = t
                    bad_b = b

                as_[t, b] = ns
                ads[t, b] = nds
                ai[t, b] = ni
                adi[t, b] = ndi
                au[t, b] = nu
                adu[t, b] = ndu

    return int(bad_t), int(bad_b)
