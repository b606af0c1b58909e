# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: lossless tri-axial channel forward model and the
Gauss-Newton range/angle refinement loop.

Mirrors ``_kernels_py`` step for step; see that module for the contract.
"""

from libc.math cimport sin, cos, sqrt

import numpy as np

BACKEND_NAME = "compiled"


cdef void _forward(double r, double theta, double phi, double coil_c,
                   const double* rt, const double* rr, double* out) noexcept nogil:
    # out = (C/r^3) * Rr^T (3 u u^T - I) Rt, all 3x3 row-major
    cdef double st = sin(theta)
    cdef double u0 = st * cos(phi)
    cdef double u1 = st * sin(phi)
    cdef double u2 = cos(theta)
    cdef double scale = coil_c / (r * r * r)
    cdef double g[9]
    cdef double t[9]
    cdef int i, j, k
    g[0] = 3.0 * u0 * u0 - 1.0
    g[1] = 3.0 * u0 * u1
    g[2] = 3.0 * u0 * u2
    g[3] = g[1]
    g[4] = 3.0 * u1 * u1 - 1.0
    g[5] = 3.0 * u1 * u2
    g[6] = g[2]
    g[7] = g[5]
    g[8] = 3.0 * u2 * u2 - 1.0
    # t = g @ rt
    for i in range(3):
        for j in range(3):
            t[3 * i + j] = 0.0
            for k in range(3):
                t[3 * i + j] += g[3 * i + k] * rt[3 * k + j]
    # out = rr^T @ t, scaled
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += rr[3 * k + i] * t[3 * k + j]
            out[3 * i + j] *= scale


cdef int _solve3_spd(const double* a, const double* b, double* x) noexcept nogil:
    # Cholesky solve for a 3x3 SPD system; returns 0 on failure.
    cdef double l00, l10, l11, l20, l21, l22
    cdef double y0, y1, y2
    if a[0] <= 0.0:
        return 0
    l00 = sqrt(a[0])
    l10 = a[3] / l00
    l20 = a[6] / l00
    if a[4] - l10 * l10 <= 0.0:
        return 0
    l11 = sqrt(a[4] - l10 * l10)
    l21 = (a[7] - l20 * l10) / l11
    if a[8] - l20 * l20 - l21 * l21 <= 0.0:
        return 0
    l22 = sqrt(a[8] - l20 * l20 - l21 * l21)
    y0 = b[0] / l00
    y1 = (b[1] - l10 * y0) / l11
    y2 = (b[2] - l20 * y0 - l21 * y1) / l22
    x[2] = y2 / l22
    x[1] = (y1 - l21 * x[2]) / l11
    x[0] = (y0 - l10 * x[1] - l20 * x[2]) / l00
    return 1


def channel_real(double r, double theta, double phi, double coil_c, rt, rr):
    """Lossless tri-axial channel (C/r^3) * Rr^T G(theta, phi) Rt as a
    3x3 float array."""
    cdef const double[:, ::1] rt_v = np.ascontiguousarray(rt, dtype=np.float64)
    cdef const double[:, ::1] rr_v = np.ascontiguousarray(rr, dtype=np.float64)
    out = np.empty((3, 3), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    _forward(r, theta, phi, coil_c, &rt_v[0, 0], &rr_v[0, 0], &out_v[0, 0])
    return out


def gn_refine(h_target, double r, double theta, double phi, double coil_c,
              rt, rr, int max_iter=50, double step_tol=1e-10,
              double grad_tol=1e-12, double fd_rel=1e-6, double fd_ang=1e-6,
              double ridge=1e-12):
    """Gauss-Newton fit of (r, theta, phi) to the 9 real channel entries.

    Returns ``(r, theta, phi, n_iter, converged, resid_sq)``; same
    semantics as the pure-Python twin.
    """
    cdef const double[::1] h_v = np.ascontiguousarray(h_target, dtype=np.float64).ravel()
    cdef const double[:, ::1] rt_v = np.ascontiguousarray(rt, dtype=np.float64)
    cdef const double[:, ::1] rr_v = np.ascontiguousarray(rr, dtype=np.float64)
    if h_v.shape[0] != 9:
        raise ValueError("h_target must have 9 entries")

    cdef const double* rt_p = &rt_v[0, 0]
    cdef const double* rr_p = &rr_v[0, 0]
    cdef const double* h_p = &h_v[0]
    cdef double f0[9]
    cdef double fp[9]
    cdef double fm[9]
    cdef double jac[27]          # 9x3 row-major
    cdef double resid[9]
    cdef double grad[3]
    cdef double amat[9]
    cdef double step[3]
    cdef double hr, gn, sn, rs
    cdef double scale_sq = 0.0
    cdef int it, i, j, k, n_iter = 0, ok, shrink
    cdef bint converged = False

    for i in range(9):
        scale_sq += h_v[i] * h_v[i]
    if scale_sq == 0.0:
        scale_sq = 1.0

    with nogil:
        for it in range(max_iter):
            _forward(r, theta, phi, coil_c, rt_p, rr_p, f0)
            for i in range(9):
                resid[i] = h_p[i] - f0[i]

            hr = fd_rel * r
            _forward(r + hr, theta, phi, coil_c, rt_p, rr_p, fp)
            _forward(r - hr, theta, phi, coil_c, rt_p, rr_p, fm)
            for i in range(9):
                jac[3 * i] = (fp[i] - fm[i]) / (2.0 * hr)
            _forward(r, theta + fd_ang, phi, coil_c, rt_p, rr_p, fp)
            _forward(r, theta - fd_ang, phi, coil_c, rt_p, rr_p, fm)
            for i in range(9):
                jac[3 * i + 1] = (fp[i] - fm[i]) / (2.0 * fd_ang)
            _forward(r, theta, phi + fd_ang, coil_c, rt_p, rr_p, fp)
            _forward(r, theta, phi - fd_ang, coil_c, rt_p, rr_p, fm)
            for i in range(9):
                jac[3 * i + 2] = (fp[i] - fm[i]) / (2.0 * fd_ang)

            for j in range(3):
                grad[j] = 0.0
                for i in range(9):
                    grad[j] += jac[3 * i + j] * resid[i]
            gn = sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2])
            if gn < grad_tol * scale_sq:
                converged = True
                break

            for j in range(3):
                for k in range(3):
                    amat[3 * j + k] = 0.0
                    for i in range(9):
                        amat[3 * j + k] += jac[3 * i + j] * jac[3 * i + k]
            amat[0] += ridge * scale_sq
            amat[4] += ridge * scale_sq
            amat[8] += ridge * scale_sq
            ok = _solve3_spd(amat, grad, step)
            if not ok:
                break

            shrink = 0
            while r + step[0] <= 0.0 and shrink < 60:
                step[0] *= 0.5
                step[1] *= 0.5
                step[2] *= 0.5
                shrink += 1
            if r + step[0] <= 0.0:
                break

            r += step[0]
            theta += step[1]
            phi += step[2]
            n_iter += 1
            sn = sqrt(step[0] * step[0] + step[1] * step[1] + step[2] * step[2])
            if sn < step_tol:
                converged = True
                break

        _forward(r, theta, phi, coil_c, rt_p, rr_p, f0)
        rs = 0.0
        for i in range(9):
            rs += (h_p[i] - f0[i]) * (h_p[i] - f0[i])

    return r, theta, phi, n_iter, bool(converged), rs
