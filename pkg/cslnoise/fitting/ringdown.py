"""Apparent quality factor from a free-decay record.

The record is cut into short blocks. In each block a sinusoid at f0 with a
linearly varying amplitude is fitted by least squares; the block amplitude
is the fitted quadrature pair at the block centre and the residuals give the
per-sample noise. The squared amplitudes, less their noise bias, are fitted
with a^2 exp(-2 gamma t); Q_a = pi f0 / gamma.

Blocks are processed in chunks, so memory stays flat in the record length.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from scipy.optimize import curve_fit

from cslnoise.errors import RingdownError, require
from cslnoise.types import TimeSeries

logger = logging.getLogger(__name__)

MIN_SNR = 10.0
EDGE_FRACTION = 0.03
CHUNK_SAMPLES = 1 << 20


@dataclass(frozen=True)
class QaEstimate:
    q_a: float
    sigma_q_a: float
    gamma: float  # amplitude decay rate, 1/s
    sigma_gamma: float
    amplitude: float
    snr: float
    n_blocks: int

    @property
    def inv_q_a(self) -> float:
        return 1.0 / self.q_a

    @property
    def sigma_inv_q_a(self) -> float:
        return self.sigma_q_a / self.q_a**2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q_a": self.q_a,
            "sigma_q_a": self.sigma_q_a,
            "gamma_per_s": self.gamma,
            "sigma_gamma_per_s": self.sigma_gamma,
            "amplitude": self.amplitude,
            "snr": self.snr,
            "n_blocks": self.n_blocks,
        }


def _block_basis(t: np.ndarray, omega: float, m: int) -> np.ndarray:
    """(n_blocks, m, 4) design: cos, sin and both ramped by the in-block position in [-1, 1]."""
    u = np.linspace(-1.0, 1.0, m)
    phase = omega * t.reshape(-1, m)
    c, s = np.cos(phase), np.sin(phase)
    return np.stack([c, s, u * c, u * s], axis=-1)


def block_amplitudes(values: np.ndarray, fs: float, f0: float, m: int) -> Tuple[np.ndarray, float, float]:
    """Squared block-centre amplitudes, residual variance per sample and the amplitude noise bias.

    Works through the record ``CHUNK_SAMPLES`` at a time.
    """
    n_blocks = values.size // m
    per_chunk = max(1, CHUNK_SAMPLES // m)
    omega = 2.0 * math.pi * f0
    offset = float(np.mean(values[: n_blocks * m]))
    amp_sq = np.empty(n_blocks)
    rss = 0.0
    bias = 0.0
    for b0 in range(0, n_blocks, per_chunk):
        b1 = min(n_blocks, b0 + per_chunk)
        x = (values[b0 * m : b1 * m] - offset).reshape(-1, m)
        X = _block_basis(np.arange(b0 * m, b1 * m) / fs, omega, m)
        gram = np.einsum("bki,bkj->bij", X, X)
        rhs = np.einsum("bki,bk->bi", X, x)
        coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
        amp_sq[b0:b1] = coef[:, 0] ** 2 + coef[:, 1] ** 2
        rss += float(np.sum(np.clip(np.einsum("bk,bk->b", x, x) - np.einsum("bi,bi->b", rhs, coef), 0.0, None)))
        inv = np.linalg.inv(gram)
        bias += float(np.sum(inv[:, 0, 0] + inv[:, 1, 1]))
    sigma2 = rss / (n_blocks * (m - 4))
    return amp_sq, sigma2, sigma2 * bias / n_blocks


def estimate_qa_ringdown(series: TimeSeries, f0: float, block_s: float = 5e-3) -> QaEstimate:
    """Fit the envelope decay of ``series`` around ``f0``.

    Rejects records whose initial amplitude is below ten times the
    per-sample noise, or whose envelope does not decay.
    """
    fs = series.fs
    require(0 < f0 < fs / 2, "f0 must lie below Nyquist", f0=f0, fs=fs)
    m = max(8, int(round(block_s * fs)))
    n_blocks = len(series) // m
    require(n_blocks >= 20, "ringdown record too short for the block length", n_blocks=n_blocks)

    amp_sq, sigma2, p_noise = block_amplitudes(np.asarray(series.values, dtype=float), fs, f0, m)

    edge = max(2, int(math.ceil(EDGE_FRACTION * n_blocks)))
    t = (np.arange(n_blocks) * m + 0.5 * (m - 1)) / fs
    t, y = t[edge:-edge], amp_sq[edge:-edge] - p_noise

    amp0 = math.sqrt(max(float(y[0]), 0.0))
    sigma_sample = math.sqrt(max(sigma2, 0.0))
    snr = amp0 / sigma_sample if sigma_sample > 0 else math.inf
    if snr < MIN_SNR:
        raise RingdownError("ringdown SNR too low", details={"snr": snr, "min_snr": MIN_SNR})

    sigma = np.sqrt(2.0 * np.clip(y, 0.0, None) * p_noise + p_noise**2) + 1e-12 * float(y[0])
    usable = y > 3.0 * sigma
    if usable.sum() < 3:
        raise RingdownError("no usable envelope points above the noise", details={"snr": snr})
    t0 = float(t[0])
    tt = t - t0
    slope, logc = np.polyfit(tt[usable], np.log(y[usable]), 1)
    g0 = max(-0.5 * float(slope), 1e-12)

    def model(x, a2, g):
        return a2 * np.exp(-2.0 * g * x)

    try:
        popt, pcov = curve_fit(
            model, tt, y, p0=(math.exp(logc), g0), sigma=sigma, absolute_sigma=True, maxfev=10000
        )
    except RuntimeError as e:
        raise RingdownError("envelope fit did not converge", details={"reason": str(e)}) from e
    a2, gamma = float(popt[0]), float(popt[1])
    sigma_gamma = float(math.sqrt(max(pcov[1, 1], 0.0)))
    duration = float(tt[-1])
    if not (gamma > 0 and gamma > 3.0 * sigma_gamma and gamma * duration > 1e-4):
        raise RingdownError(
            "envelope is not decaying",
            details={"gamma_per_s": gamma, "sigma_gamma_per_s": sigma_gamma, "duration_s": duration},
        )
    q_a = math.pi * f0 / gamma
    logger.debug("Ringdown: Q_a=%.4g, SNR=%.1f, %d blocks", q_a, snr, tt.size)
    return QaEstimate(
        q_a=q_a,
        sigma_q_a=q_a * sigma_gamma / gamma,
        gamma=gamma,
        sigma_gamma=sigma_gamma,
        amplitude=math.sqrt(max(a2, 0.0)) * math.exp(gamma * t0),
        snr=snr,
        n_blocks=int(tt.size),
    )
