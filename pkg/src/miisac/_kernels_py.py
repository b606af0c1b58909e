"""Pure-numpy implementations of the hot estimation kernels.

These are the reference semantics for the compiled extension in
``_kernels.pyx``; both follow the exact same iteration flow so results
agree to floating-point noise.  The forward model here is the lossless
tri-axial channel (real entries); the generic complex-medium path lives
in :mod:`miisac.estimation`.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


def channel_real(r, theta, phi, coil_c, rt, rr):
    """Lossless tri-axial channel (C/r^3) * Rr^T G(theta, phi) Rt as a
    3x3 float array."""
    st = math.sin(theta)
    u = np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])
    g = 3.0 * np.outer(u, u) - np.eye(3)
    return (coil_c / r**3) * (rr.T @ g @ rt)


def gn_refine(
    h_target,
    r,
    theta,
    phi,
    coil_c,
    rt,
    rr,
    max_iter=50,
    step_tol=1e-10,
    grad_tol=1e-12,
    fd_rel=1e-6,
    fd_ang=1e-6,
    ridge=1e-12,
):
    """Gauss-Newton fit of (r, theta, phi) to the 9 real channel entries.

    ``h_target`` is the row-major flattened real part of the observed 3x3
    channel.  Central-difference Jacobian with relative step ``fd_rel*r``
    for range and ``fd_ang`` rad for angles; normal equations regularized
    by ``ridge`` to ride through the degenerate poles.  The gradient
    tolerance and the ridge apply to the unit-normalized residual problem
    (target scaled to unit norm) so both are scale-free; the step test
    and the returned ``resid_sq`` are in physical units.

    Returns ``(r, theta, phi, n_iter, converged, resid_sq)``.
    """
    h_target = np.asarray(h_target, dtype=float).ravel()
    rt = np.asarray(rt, dtype=float)
    rr = np.asarray(rr, dtype=float)
    scale_sq = float(h_target @ h_target)
    if scale_sq == 0.0:
        scale_sq = 1.0
    n_iter = 0
    converged = False
    jac = np.empty((9, 3))

    for _ in range(max_iter):
        f0 = channel_real(r, theta, phi, coil_c, rt, rr).ravel()
        resid = h_target - f0

        hr = fd_rel * r
        ha = fd_ang
        jac[:, 0] = (
            channel_real(r + hr, theta, phi, coil_c, rt, rr).ravel()
            - channel_real(r - hr, theta, phi, coil_c, rt, rr).ravel()
        ) / (2.0 * hr)
        jac[:, 1] = (
            channel_real(r, theta + ha, phi, coil_c, rt, rr).ravel()
            - channel_real(r, theta - ha, phi, coil_c, rt, rr).ravel()
        ) / (2.0 * ha)
        jac[:, 2] = (
            channel_real(r, theta, phi + ha, coil_c, rt, rr).ravel()
            - channel_real(r, theta, phi - ha, coil_c, rt, rr).ravel()
        ) / (2.0 * ha)

        grad = jac.T @ resid
        if math.sqrt(float(grad @ grad)) < grad_tol * scale_sq:
            converged = True
            break

        a = jac.T @ jac
        a[0, 0] += ridge * scale_sq
        a[1, 1] += ridge * scale_sq
        a[2, 2] += ridge * scale_sq
        try:
            step = np.linalg.solve(a, grad)
        except np.linalg.LinAlgError:
            break

        # keep the range positive: halve the step until it is
        shrink = 0
        while r + step[0] <= 0.0 and shrink < 60:
            step *= 0.5
            shrink += 1
        if r + step[0] <= 0.0:
            break

        r += step[0]
        theta += step[1]
        phi += step[2]
        n_iter += 1
        if math.sqrt(float(step @ step)) < step_tol:
            converged = True
            break

    f0 = channel_real(r, theta, phi, coil_c, rt, rr).ravel()
    diff = h_target - f0
    resid_sq = float(diff @ diff)
    return r, theta, phi, n_iter, converged, resid_sq
