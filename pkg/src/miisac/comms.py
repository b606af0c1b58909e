"""Symbol-level link simulation: frames, pilot-aided least-squares
channel estimation, BPSK demodulation, and decision-directed (NDA)
re-estimation using data symbols as virtual pilots.

Excitation convention (keeps the frame information identical to the
Fisher-information convention in :mod:`miisac.estimation`): pilots cycle
through the transmit axes one at a time at amplitude sqrt(P), data
symbols drive all axes simultaneously at sqrt(P/n_axes) per axis.  Either
way a frame of N symbols has excitation second moment (N P / n_axes) I,
and the instantaneous transmit power is always P.

Per-symbol SNR is defined as P ||H||_F^2 / (n_tx n_rx 2 sigma_w^2) with
sigma_w^2 the noise variance per real dimension; for a scalar link this
reduces to the textbook convention in which BPSK has bit error rate
Q(sqrt(2 SNR)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import RankDeficientPilots
from .estimation import NoiseModel, effective_noise_variance
from .physics import ChannelMatrix


@dataclass(frozen=True)
class Frame:
    """One transmit frame: a pilot preamble followed by BPSK data.

    ``pilot_axes[k]`` is the axis excited by pilot k (at amplitude
    sqrt(P)); ``data_bits`` holds one +-1 stream per transmit axis (at
    amplitude sqrt(P / n_axes) each).
    """

    n_symbols: int
    pilot_fraction: float
    tx_power_w: float
    n_axes: int
    pilot_values: np.ndarray  # (n_pilots,) complex, unit energy
    pilot_axes: np.ndarray    # (n_pilots,) int
    data_bits: np.ndarray     # (n_axes, n_data) in {-1, +1}

    @property
    def n_pilots(self) -> int:
        return len(self.pilot_values)

    @property
    def n_data(self) -> int:
        return self.data_bits.shape[1]

    def tx_matrix(self) -> np.ndarray:
        """Excitation matrix X of shape (n_axes, n_symbols), pilots first."""
        x = np.zeros((self.n_axes, self.n_symbols), dtype=complex)
        amp_pilot = math.sqrt(self.tx_power_w)
        for k in range(self.n_pilots):
            x[self.pilot_axes[k], k] = amp_pilot * self.pilot_values[k]
        amp_data = math.sqrt(self.tx_power_w / self.n_axes)
        x[:, self.n_pilots:] = amp_data * self.data_bits
        return x


@dataclass(frozen=True)
class RxObservation:
    """Received samples for one frame, plus the ground truth needed by
    oracle-style tests."""

    samples: np.ndarray  # (n_rx, n_symbols) complex
    true_channel: ChannelMatrix
    noise_variance: float  # per real dimension
    seed: object

    @property
    def n_symbols(self) -> int:
        return self.samples.shape[1]


def make_frame(
    n_symbols: int,
    pilot_fraction: float,
    tx_power_w: float,
    n_axes: int = 3,
    seed=0,
) -> Frame:
    """Build a frame with round(alpha * N) leading pilots and random BPSK
    data bits drawn from ``seed``."""
    if not 0.0 < pilot_fraction <= 1.0:
        raise ValueError("pilot_fraction must lie in (0, 1]")
    if n_axes not in (1, 3):
        raise ValueError("n_axes must be 1 (single-axis) or 3 (tri-axial)")
    n_pilots = int(round(pilot_fraction * n_symbols))
    n_pilots = min(max(n_pilots, 0), n_symbols)
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n_axes, n_symbols - n_pilots)) * 2 - 1
    return Frame(
        n_symbols=n_symbols,
        pilot_fraction=pilot_fraction,
        tx_power_w=tx_power_w,
        n_axes=n_axes,
        pilot_values=np.ones(n_pilots, dtype=complex),
        pilot_axes=np.arange(n_pilots, dtype=int) % n_axes,
        data_bits=bits.astype(np.int8),
    )


def simulate_frame(frame: Frame, channel: ChannelMatrix, noise, seed) -> RxObservation:
    """Pass a frame through the channel: y_k = H x_k + w_k.

    ``noise`` is either a :class:`NoiseModel` or a plain float taken as
    the noise variance per real dimension.  Bit-reproducible for a fixed
    integer seed.
    """
    if frame.n_axes != channel.n_tx_axes:
        raise ValueError("frame axis count does not match the channel")
    sigma2 = effective_noise_variance(noise) if isinstance(noise, NoiseModel) else float(noise)
    x = frame.tx_matrix()
    y = channel.entries @ x
    if sigma2 > 0.0:
        rng = np.random.default_rng(seed)
        sw = math.sqrt(sigma2)
        shape = y.shape
        y = y + rng.normal(0.0, sw, shape) + 1j * rng.normal(0.0, sw, shape)
    return RxObservation(
        samples=y, true_channel=channel, noise_variance=float(sigma2), seed=seed
    )


def _ls_fit(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    gram = x @ x.conj().T
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise RankDeficientPilots(
            f"excitations span {int(np.sum(sv > 1e-12 * sv[0]))} of {x.shape[0]} axes"
        )
    return (y @ x.conj().T) @ np.linalg.inv(gram)


def estimate_channel_pilot(obs: RxObservation, frame: Frame) -> ChannelMatrix:
    """Least-squares channel estimate from the pilot preamble only.

    Unbiased; per-entry error variance sigma_w^2 / (alpha N P / n_axes)
    per real dimension for cycling pilots.
    """
    n_p = frame.n_pilots
    x_p = frame.tx_matrix()[:, :n_p]
    h = _ls_fit(obs.samples[:, :n_p], x_p)
    return ChannelMatrix(entries=h, coil_constant=obs.true_channel.coil_constant)


def bpsk_ber(snr_linear) -> np.ndarray | float:
    """Theoretical BPSK bit error rate Q(sqrt(2 SNR))."""
    snr = np.asarray(snr_linear, dtype=float)
    out = 0.5 * erfc(np.sqrt(snr))  # Q(sqrt(2 s)) = erfc(sqrt(s)) / 2
    return float(out) if out.ndim == 0 else out


def nda_efficiency(snr_linear) -> np.ndarray | float:
    """Decision-directed effective-information factor (1 - 2 BER)^2.

    Monotone in SNR, 1 in the noiseless limit, 0 at BER = 1/2: a data
    symbol is worth this fraction of a dedicated pilot.
    """
    ber = bpsk_ber(snr_linear)
    return (1.0 - 2.0 * ber) ** 2


def per_symbol_snr(channel: ChannelMatrix, tx_power_w: float, noise_variance: float) -> float:
    """Frame-averaged per-symbol SNR for the excitation convention above."""
    if noise_variance <= 0.0:
        return math.inf
    n = channel.n_tx_axes * channel.n_rx_axes
    return tx_power_w * channel.frobenius_norm**2 / (n * 2.0 * noise_variance)


def noise_variance_for_snr(channel: ChannelMatrix, tx_power_w: float, snr_linear: float) -> float:
    """Noise variance per real dimension that realizes a target per-symbol SNR."""
    n = channel.n_tx_axes * channel.n_rx_axes
    return tx_power_w * channel.frobenius_norm**2 / (n * 2.0 * snr_linear)


def demodulate_and_nda_estimate(
    obs: RxObservation, frame: Frame, pilot_estimate: ChannelMatrix
) -> tuple[np.ndarray, ChannelMatrix, float]:
    """Zero-forcing BPSK decisions plus decision-directed re-estimation.

    Decided data symbols are fed back as virtual pilots, so the refined
    least-squares estimate uses the whole frame; at high SNR every symbol
    is effectively a pilot.  Returns ``(bits, refined_estimate,
    ber_oracle)`` where ``ber_oracle`` is the theoretical error rate of
    the zero-forcing decisions given the pilot estimate.
    """
    n_p = frame.n_pilots
    y = obs.samples
    h_p = pilot_estimate.entries
    w = np.linalg.pinv(h_p)

    bits = np.sign(np.real(w @ y[:, n_p:])).astype(np.int8)
    bits[bits == 0] = 1

    x_hat = frame.tx_matrix()
    x_hat[:, n_p:] = math.sqrt(frame.tx_power_w / frame.n_axes) * bits
    refined = ChannelMatrix(
        entries=_ls_fit(y, x_hat), coil_constant=obs.true_channel.coil_constant
    )

    if obs.noise_variance > 0.0:
        gain = np.real(np.diag(w @ w.conj().T))
        snr_streams = (frame.tx_power_w / frame.n_axes) / (
            2.0 * obs.noise_variance * gain
        )
        ber_oracle = float(np.mean(bpsk_ber(snr_streams)))
    else:
        ber_oracle = 0.0
    return bits, refined, ber_oracle
