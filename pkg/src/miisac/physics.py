"""Reactive near-field magneto-inductive channel model.

Builds the dipole coupling tensor and the deterministic coil-to-coil
channel matrix from link geometry, coil parameters, carrier frequency,
and (optionally conductive) medium.

Conventions used throughout the package:

* Orientation matrices map a coil's local frame into the global frame,
  so identity orientations reproduce the bare coupling tensor.
* The tri-axial channel is ``H = att * (C / r^3) * Rr^T @ G(rhat) @ Rt``
  mapping transmit-frame moments to receive-frame voltages.  Single-axis
  ends project the corresponding row/column, down to a 1x1 matrix when
  both ends are single-axis.
* All quantities are SI.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGeometry, NonUnitDirection

MU0 = 4.0 * math.pi * 1e-7  # vacuum permeability (H/m)

_ROTATION_TOL = 1e-10
_UNIT_TOL = 1e-10


class DipoleRegimeWarning(UserWarning):
    """Range is small enough (r < 5a) that the point-dipole model is
    questionable; results are still computed from it."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=a.dtype, copy=True)
    out.setflags(write=False)
    return out


def unit_direction(theta_rad: float, phi_rad: float) -> np.ndarray:
    """Unit vector (sin t cos p, sin t sin p, cos t) for polar/azimuth angles."""
    st = math.sin(theta_rad)
    return np.array(
        [st * math.cos(phi_rad), st * math.sin(phi_rad), math.cos(theta_rad)]
    )


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Draw a uniformly random proper rotation (QR of a Gaussian matrix,
    sign-fixed so det = +1)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return q


def _check_rotation(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    if np.max(np.abs(m.T @ m - np.eye(3))) > _ROTATION_TOL:
        raise ValueError(f"{name} is not orthogonal within {_ROTATION_TOL}")
    if abs(np.linalg.det(m) - 1.0) > _ROTATION_TOL:
        raise ValueError(f"{name} is not proper (det != +1)")
    return m


@dataclass(frozen=True)
class CoilSpec:
    """Physical coil description.

    ``normal=None`` means a tri-axial head (three orthogonal co-located
    coils); otherwise a single-axis coil with the given unit normal in
    the coil's local frame.
    """

    radius_m: float
    turns: int
    normal: np.ndarray | None = None

    def __post_init__(self):
        if not (self.radius_m > 0 and math.isfinite(self.radius_m)):
            raise ValueError("radius_m must be a positive finite number")
        if int(self.turns) != self.turns or self.turns < 1:
            raise ValueError("turns must be a positive integer")
        if self.normal is not None:
            n = np.asarray(self.normal, dtype=float).reshape(3)
            if abs(np.linalg.norm(n) - 1.0) > 1e-12:
                raise ValueError("single-axis normal must be unit-norm")
            object.__setattr__(self, "normal", _readonly(n))

    @property
    def is_triaxial(self) -> bool:
        return self.normal is None

    @property
    def area_m2(self) -> float:
        return math.pi * self.radius_m**2


@dataclass(frozen=True)
class CarrierSpec:
    """Narrowband carrier: center frequency and signal bandwidth."""

    frequency_hz: float
    bandwidth_hz: float

    def __post_init__(self):
        if not (self.frequency_hz > 0 and math.isfinite(self.frequency_hz)):
            raise ValueError("frequency_hz must be positive")
        if not (self.bandwidth_hz > 0 and math.isfinite(self.bandwidth_hz)):
            raise ValueError("bandwidth_hz must be positive")
        if self.bandwidth_hz > self.frequency_hz:
            raise ValueError("bandwidth_hz must not exceed frequency_hz (narrowband)")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency_hz


@dataclass(frozen=True)
class MediumModel:
    """Propagation medium: conductivity sets the quasi-static skin-depth
    attenuation; permeability is fixed at mu0 (soil/seawater/tissue)."""

    conductivity_s_per_m: float = 0.0
    permeability: float = MU0

    def __post_init__(self):
        if self.conductivity_s_per_m < 0:
            raise ValueError("conductivity must be >= 0")


VACUUM = MediumModel(0.0)


@dataclass(frozen=True)
class LinkGeometry:
    """Range, direction angles, and the two frame orientations.

    Orientation matrices are proper rotations mapping local -> global.
    """

    range_m: float
    theta_rad: float
    phi_rad: float
    tx_orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    rx_orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not (math.isfinite(self.range_m) and self.range_m > 0):
            raise NonFiniteGeometry(f"range_m must be finite and > 0, got {self.range_m}")
        if not 0.0 <= self.theta_rad <= math.pi:
            raise ValueError("theta_rad must lie in [0, pi]")
        if not 0.0 <= self.phi_rad < 2.0 * math.pi:
            raise ValueError("phi_rad must lie in [0, 2*pi)")
        object.__setattr__(
            self, "tx_orientation", _readonly(_check_rotation(self.tx_orientation, "tx_orientation"))
        )
        object.__setattr__(
            self, "rx_orientation", _readonly(_check_rotation(self.rx_orientation, "rx_orientation"))
        )

    @property
    def direction(self) -> np.ndarray:
        """Unit vector from Tx to Rx in the global frame."""
        return unit_direction(self.theta_rad, self.phi_rad)


@dataclass(frozen=True)
class CouplingTensor:
    """The geometry matrix 3*rhat rhat^T - I: real symmetric, trace-free,
    eigenvalues {+2, -1, -1} for every unit direction."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("coupling tensor must be 3x3")
        if np.max(np.abs(m - m.T)) > 1e-14:
            raise ValueError("coupling tensor must be symmetric")
        if abs(np.trace(m)) > 1e-12:
            raise ValueError("coupling tensor must be trace-free")
        object.__setattr__(self, "matrix", _readonly(m))


@dataclass(frozen=True)
class ChannelMatrix:
    """Deterministic channel realization.

    ``entries`` is 3x3 for a tri-axial/tri-axial link, 3x1 / 1x3 for a
    mixed link, and 1x1 when both ends are single-axis.  Complex-valued;
    purely real when the medium is lossless and orientations are real.
    """

    entries: np.ndarray
    coil_constant: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 2 or e.shape[0] not in (1, 3) or e.shape[1] not in (1, 3):
            raise ValueError(f"channel entries must be 3x3/3x1/1x3/1x1, got {e.shape}")
        object.__setattr__(self, "entries", _readonly(e))

    @property
    def n_tx_axes(self) -> int:
        return self.entries.shape[1]

    @property
    def n_rx_axes(self) -> int:
        return self.entries.shape[0]

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def coil_constant(coil: CoilSpec, carrier: CarrierSpec) -> float:
    """Coupling constant C = mu0 * omega0 * Nt^2 * A^2 / (4 pi), A = pi a^2.

    Scales the r^-3 coupling law; in deployments it would be calibrated
    per link, here it is evaluated from the coil description.
    """
    area = coil.area_m2
    return MU0 * carrier.omega * coil.turns**2 * area**2 / (4.0 * math.pi)


def coupling_tensor(direction: np.ndarray) -> CouplingTensor:
    """Dipole coupling tensor G = 3 rhat rhat^T - I for a unit direction.

    Raises
    ------
    NonUnitDirection
        If ``direction`` deviates from unit norm by more than 1e-10.
    """
    d = np.asarray(direction, dtype=float).reshape(3)
    nrm = np.linalg.norm(d)
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise NonUnitDirection(f"direction norm {nrm!r} deviates from 1 beyond {_UNIT_TOL}")
    return CouplingTensor(3.0 * np.outer(d, d) - np.eye(3))


def skin_depth(medium: MediumModel, carrier: CarrierSpec) -> float:
    """Quasi-static skin depth sqrt(2 / (mu w sigma)); inf for a lossless medium."""
    sigma = medium.conductivity_s_per_m
    if sigma == 0.0:
        return math.inf
    return math.sqrt(2.0 / (medium.permeability * carrier.omega * sigma))


def attenuation(medium: MediumModel, carrier: CarrierSpec, range_m: float) -> complex:
    """Complex medium attenuation exp(-(1+j) r / delta).

    Exactly 1+0j in a lossless medium; the imaginary part is the hook
    through which conductivity shows up in the received coupling.
    """
    if range_m <= 0:
        raise NonFiniteGeometry("range_m must be > 0")
    if medium.conductivity_s_per_m == 0.0:
        return 1.0 + 0.0j
    delta = skin_depth(medium, carrier)
    return complex(np.exp(-(1.0 + 1.0j) * (range_m / delta)))


def channel_matrix(
    geometry: LinkGeometry,
    coil: CoilSpec,
    carrier: CarrierSpec,
    medium: MediumModel = VACUUM,
    rx_coil: CoilSpec | None = None,
) -> ChannelMatrix:
    """Deterministic MI channel for a coil pair.

    Parameters
    ----------
    geometry : LinkGeometry
        Range, direction, and both frame orientations.
    coil : CoilSpec
        Transmit coil; also used on receive unless ``rx_coil`` is given.
    carrier, medium :
        Operating frequency and medium (lossless by default).
    rx_coil : CoilSpec, optional
        Receive coil when the two ends differ (e.g. mixed axis configs).

    Returns
    -------
    ChannelMatrix
        ``att * (C/r^3) * Rr^T G Rt`` projected onto single-axis normals
        where applicable.  Identical inputs give bit-identical outputs.
    """
    rx_coil = coil if rx_coil is None else rx_coil
    r = geometry.range_m
    if not (math.isfinite(r) and r > 0):
        raise NonFiniteGeometry(f"range_m must be finite and > 0, got {r}")
    if r < 5.0 * max(coil.radius_m, rx_coil.radius_m):
        warnings.warn(
            f"range {r} m is below 5 coil radii; point-dipole model degrades",
            DipoleRegimeWarning,
            stacklevel=2,
        )

    g = coupling_tensor(geometry.direction).matrix
    core = geometry.rx_orientation.T @ g @ geometry.tx_orientation
    scale = attenuation(medium, carrier, r) * (coil_constant(coil, carrier) / r**3)

    entries = scale * core
    if not coil.is_triaxial:
        entries = entries @ coil.normal.reshape(3, 1)
    if not rx_coil.is_triaxial:
        entries = rx_coil.normal.reshape(1, 3) @ entries
    entries = np.atleast_2d(entries)
    return ChannelMatrix(entries=entries, coil_constant=coil_constant(coil, carrier))


def eigenmodes(tensor: CouplingTensor) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a coupling
    tensor.

    The leading eigenvector is the radial mode +-rhat (eigenvalue +2);
    the remaining two span the tangential plane (eigenvalue -1 each).
    """
    w, v = np.linalg.eigh(tensor.matrix)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def condition_number(eigenvalues: np.ndarray) -> float:
    """max|lambda| / min|lambda|; identically 2 for any coupling tensor."""
    a = np.abs(np.asarray(eigenvalues, dtype=float))
    return float(a.max() / a.min())
