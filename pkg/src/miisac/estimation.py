"""Fisher information, Cramer-Rao bounds, and the channel-inversion
sensing path (closed-form initializers plus Gauss-Newton refinement).

Parameter vector order is always ``(range, theta, phi)``.  Noise is
additive white Gaussian with variance ``sigma_w^2`` per real dimension
on every receive axis; complex observations count the real and
imaginary parts as independent observations with that same variance.

Transmit power convention (this is what produces the factor 18 in the
closed-form range bound): the total power ``P`` is split equally across
the transmit axes, ``P/3`` per axis for a tri-axial head, so a frame of
``N`` symbols has excitation second moment ``(N P / 3) I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import (
    AmbiguousDirection,
    NotIdentifiable,
    SingularCurvature,
    ZeroChannel,
)
from .physics import (
    VACUUM,
    CarrierSpec,
    ChannelMatrix,
    CoilSpec,
    LinkGeometry,
    MediumModel,
    attenuation,
    coil_constant,
    unit_direction,
)

KB = 1.380649e-23  # Boltzmann constant (J/K)

_FD_REL_RANGE = 1e-6   # relative central-difference step on range
_FD_ANG = 1e-6         # absolute step (rad) on the angles
_RIDGE = 1e-12         # curvature regularization near the poles


@dataclass(frozen=True)
class NoiseModel:
    """Thermal noise floor with an aggregate front-end penalty in dB."""

    bandwidth_hz: float
    temperature_k: float = 290.0
    noise_figure_db: float = 0.0
    insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.temperature_k <= 0:
            raise ValueError("temperature_k must be > 0")
        if self.noise_figure_db < 0 or self.insertion_loss_db < 0:
            raise ValueError("dB penalties must be >= 0")


@dataclass(frozen=True)
class FrameSpec:
    """Observation frame: symbol count and total transmit power, split
    equally across the transmit axes."""

    n_symbols: int
    tx_power_w: float

    def __post_init__(self):
        if int(self.n_symbols) != self.n_symbols or self.n_symbols < 1:
            raise ValueError("n_symbols must be a positive integer")
        if self.tx_power_w <= 0:
            raise ValueError("tx_power_w must be > 0")

    def per_axis_power(self, n_tx_axes: int) -> float:
        return self.tx_power_w / n_tx_axes


@dataclass(frozen=True)
class FisherInfo:
    """Fisher information over (range, theta, phi) plus its numeric rank."""

    matrix: np.ndarray
    numeric_rank: int
    rank_tolerance: float

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


@dataclass(frozen=True)
class EstimationResult:
    range_m: float
    theta_rad: float
    phi_rad: float
    covariance_proxy: np.ndarray
    iterations: int
    converged: bool
    residual_norm: float


def effective_noise_variance(noise: NoiseModel) -> float:
    """kB * T * B scaled by the aggregate front-end penalty, per real
    dimension."""
    penalty_db = noise.noise_figure_db + noise.insertion_loss_db
    return KB * noise.temperature_k * noise.bandwidth_hz * 10.0 ** (penalty_db / 10.0)


def crb_range_analytic(
    geometry: LinkGeometry,
    coil: CoilSpec,
    carrier: CarrierSpec,
    frame: FrameSpec,
    noise: NoiseModel,
    rx_coil: CoilSpec | None = None,
) -> float:
    """Closed-form range variance bound sigma_w^2 r^8 / (18 N P C^2).

    Valid for tri-axial heads on both ends; independent of the angles
    and of either frame orientation.
    """
    rx_coil = coil if rx_coil is None else rx_coil
    if not (coil.is_triaxial and rx_coil.is_triaxial):
        raise NotIdentifiable("the closed-form range bound needs tri-axial coils on both ends")
    sigma2 = effective_noise_variance(noise)
    c = coil_constant(coil, carrier)
    return sigma2 * geometry.range_m**8 / (18.0 * frame.n_symbols * frame.tx_power_w * c * c)


def _entries_unchecked(
    r: float,
    theta: float,
    phi: float,
    rt: np.ndarray,
    rr: np.ndarray,
    coil: CoilSpec,
    rx_coil: CoilSpec,
    carrier: CarrierSpec,
    medium: MediumModel,
    coil_c: float,
) -> np.ndarray:
    """Channel entries without geometry validation (the finite-difference
    probes step slightly outside the canonical angle ranges)."""
    u = unit_direction(theta, phi)
    g = 3.0 * np.outer(u, u) - np.eye(3)
    core = rr.T @ g @ rt
    e = (attenuation(medium, carrier, r) * coil_c / r**3) * core
    if not coil.is_triaxial:
        e = e @ coil.normal.reshape(3, 1)
    if not rx_coil.is_triaxial:
        e = rx_coil.normal.reshape(1, 3) @ e
    return np.atleast_2d(e)


def _vec_ri(entries: np.ndarray) -> np.ndarray:
    v = np.asarray(entries, dtype=complex).ravel()
    return np.concatenate([v.real, v.imag])


def _stacked_jacobian(
    r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c,
    fd_rel=_FD_REL_RANGE, fd_ang=_FD_ANG,
):
    """Central-difference Jacobian of the stacked [Re; Im] channel vector
    with respect to (r, theta, phi)."""

    def vec(rr_, th_, ph_):
        return _vec_ri(
            _entries_unchecked(rr_, th_, ph_, rt, rr, coil, rx_coil, carrier, medium, coil_c)
        )

    hr = fd_rel * r
    cols = [
        (vec(r + hr, theta, phi) - vec(r - hr, theta, phi)) / (2.0 * hr),
        (vec(r, theta + fd_ang, phi) - vec(r, theta - fd_ang, phi)) / (2.0 * fd_ang),
        (vec(r, theta, phi + fd_ang) - vec(r, theta, phi - fd_ang)) / (2.0 * fd_ang),
    ]
    return np.stack(cols, axis=1)


def fim_numeric(
    geometry: LinkGeometry,
    coil: CoilSpec,
    carrier: CarrierSpec,
    frame: FrameSpec,
    noise: NoiseModel,
    medium: MediumModel = VACUUM,
    rx_coil: CoilSpec | None = None,
    rank_tolerance: float = 1e-8,
) -> FisherInfo:
    """Numeric Fisher information for (r, theta, phi) with orientations
    treated as known.

    ``FIM = (N P_axis / sigma_w^2) J^T J`` with J the stacked-real-channel
    Jacobian by central differences.  At the poles (theta in {0, pi}) the
    azimuth is unobservable and the reported rank drops; that is reported,
    not raised.
    """
    rx_coil = coil if rx_coil is None else rx_coil
    coil_c = coil_constant(coil, carrier)
    jac = _stacked_jacobian(
        geometry.range_m,
        geometry.theta_rad,
        geometry.phi_rad,
        geometry.tx_orientation,
        geometry.rx_orientation,
        coil,
        rx_coil,
        carrier,
        medium,
        coil_c,
    )
    n_tx = 3 if coil.is_triaxial else 1
    scale = frame.n_symbols * frame.per_axis_power(n_tx) / effective_noise_variance(noise)
    fim = scale * (jac.T @ jac)
    fim = 0.5 * (fim + fim.T)
    sv = np.linalg.svd(fim, compute_uv=False)
    if sv[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(sv > rank_tolerance * sv[0]))
    return FisherInfo(matrix=fim, numeric_rank=rank, rank_tolerance=rank_tolerance)


def estimate_range_closed_form(
    h_est: ChannelMatrix, coil: CoilSpec, carrier: CarrierSpec
) -> float:
    """Range from the channel Frobenius norm: (C sqrt(6) / ||H||_F)^(1/3).

    Orientation-free because ||G||_F = sqrt(6) for every direction; valid
    for a full 3x3 estimate with lossless (or pre-compensated) medium.
    """
    if h_est.entries.shape != (3, 3):
        raise ValueError("closed-form range inversion needs a 3x3 channel estimate")
    nrm = h_est.frobenius_norm
    if not nrm > 1e-300:
        raise ZeroChannel("channel estimate norm is numerically zero")
    c = coil_constant(coil, carrier)
    return float((c * math.sqrt(6.0) / nrm) ** (1.0 / 3.0))


def estimate_direction_eigen(
    h_est: ChannelMatrix,
    orientations: tuple[np.ndarray, np.ndarray],
    coil: CoilSpec,
    carrier: CarrierSpec,
    range_est: float,
    hemisphere_prior: np.ndarray = (0.0, 0.0, 1.0),
    eigengap_tol: float = 1e-6,
) -> tuple[float, float]:
    """Direction angles from the radial eigenmode of the de-rotated,
    symmetrized coupling-tensor estimate.

    The tensor is even in the direction, so the sign is resolved toward
    ``hemisphere_prior``.  Raises :class:`AmbiguousDirection` when noise
    has closed the gap between the radial and tangential modes.
    """
    if h_est.entries.shape != (3, 3):
        raise ValueError("direction estimation needs a 3x3 channel estimate")
    if range_est <= 0:
        raise ValueError("range_est must be > 0")
    rt, rr = orientations
    c = coil_constant(coil, carrier)
    g_hat = (range_est**3 / c) * (np.asarray(rr) @ h_est.entries @ np.asarray(rt).T)
    g_sym = 0.5 * (g_hat.real + g_hat.real.T)
    w, v = np.linalg.eigh(g_sym)
    if (w[2] - w[1]) < eigengap_tol:
        raise AmbiguousDirection(
            f"top eigengap {w[2] - w[1]:.3e} below {eigengap_tol:.1e}; "
            "radial and tangential modes merged"
        )
    v1 = v[:, 2]
    if float(np.dot(v1, np.asarray(hemisphere_prior, dtype=float))) < 0.0:
        v1 = -v1
    theta = float(np.arccos(np.clip(v1[2], -1.0, 1.0)))
    phi = float(np.arctan2(v1[1], v1[0]) % (2.0 * math.pi))
    return theta, phi


def _gn_refine_generic(
    target_ri, r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c,
    max_iter, step_tol, grad_tol,
):
    scale_sq = float(target_ri @ target_ri)
    if scale_sq == 0.0:
        scale_sq = 1.0
    n_iter = 0
    converged = False
    for _ in range(max_iter):
        f0 = _vec_ri(_entries_unchecked(r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c))
        resid = target_ri - f0
        jac = _stacked_jacobian(r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c)
        grad = jac.T @ resid
        if np.linalg.norm(grad) < grad_tol * scale_sq:
            converged = True
            break
        a = jac.T @ jac + _RIDGE * scale_sq * np.eye(3)
        try:
            step = np.linalg.solve(a, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularCurvature("regularized normal equations unsolvable") from exc
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
        if np.linalg.norm(step) < step_tol:
            converged = True
            break
    f0 = _vec_ri(_entries_unchecked(r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c))
    resid_sq = float(np.sum((target_ri - f0) ** 2))
    return r, theta, phi, n_iter, converged, resid_sq


def mle_refine(
    h_est: ChannelMatrix,
    initial: tuple[float, float, float],
    coil: CoilSpec,
    carrier: CarrierSpec,
    orientations: tuple[np.ndarray, np.ndarray],
    medium: MediumModel = VACUUM,
    rx_coil: CoilSpec | None = None,
    max_iter: int = 50,
    step_tol: float = 1e-10,
    grad_tol: float = 1e-12,
) -> EstimationResult:
    """Gauss-Newton least-squares fit of (r, theta, phi) to a channel
    estimate, starting from the closed-form initializer.

    Converges when the step norm drops below ``step_tol`` or the gradient
    norm of the unit-normalized residual problem drops below ``grad_tol``
    (normalization keeps the stopping rule scale-free across the channel
    magnitudes of a range sweep); otherwise returns the best iterate with
    ``converged=False`` after ``max_iter`` iterations.
    """
    rx_coil = coil if rx_coil is None else rx_coil
    rt = np.ascontiguousarray(orientations[0], dtype=float)
    rr = np.ascontiguousarray(orientations[1], dtype=float)
    coil_c = coil_constant(coil, carrier)
    r0, th0, ph0 = (float(x) for x in initial)

    fast = (
        medium.conductivity_s_per_m == 0.0
        and coil.is_triaxial
        and rx_coil.is_triaxial
        and h_est.entries.shape == (3, 3)
    )
    if fast:
        target_re = np.ascontiguousarray(h_est.entries.real.ravel())
        r, theta, phi, n_iter, converged, resid_sq = backend.gn_refine(
            target_re, r0, th0, ph0, coil_c, rt, rr,
            max_iter=max_iter, step_tol=step_tol, grad_tol=grad_tol,
            fd_rel=_FD_REL_RANGE, fd_ang=_FD_ANG, ridge=_RIDGE,
        )
        # imaginary parts are model-constant zeros; they only pad the residual
        resid_sq += float(np.sum(h_est.entries.imag**2))
    else:
        target_ri = _vec_ri(h_est.entries)
        r, theta, phi, n_iter, converged, resid_sq = _gn_refine_generic(
            target_ri, r0, th0, ph0, rt, rr, coil, rx_coil, carrier, medium, coil_c,
            max_iter, step_tol, grad_tol,
        )

    jac = _stacked_jacobian(r, theta, phi, rt, rr, coil, rx_coil, carrier, medium, coil_c)
    scale_sq = float(np.sum(np.abs(h_est.entries) ** 2)) or 1.0
    curvature = jac.T @ jac + _RIDGE * scale_sq * np.eye(3)
    try:
        cov_proxy = np.linalg.inv(curvature)
    except np.linalg.LinAlgError as exc:
        raise SingularCurvature("curvature not invertible at the solution") from exc

    return EstimationResult(
        range_m=float(r),
        theta_rad=float(theta),
        phi_rad=float(phi),
        covariance_proxy=cov_proxy,
        iterations=int(n_iter),
        converged=bool(converged),
        residual_norm=math.sqrt(resid_sq),
    )
