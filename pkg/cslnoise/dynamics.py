"""Synthetic observables of the SQUID-coupled cantilever.

The mechanical mode is a damped oscillator (resonance f0, apparent quality
Q_a) driven by white force noise of one-sided PSD 4 k_B T k/(omega0 Q) + s_f0.
The SQUID output is

    S_Phi(f) = A + [B f0^4 + C (f^2 - f1^2)^2] / [(f^2 - f0^2)^2 + (f f0 / Q_a)^2]

with B = (s_f0/k^2 + 4 k_B T/(k omega0 Q)) * Phi_x^2.
"""

from __future__ import annotations

import logging
import math
from typing import Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal
from scipy.linalg import expm

from cslnoise.constants import PHYS
from cslnoise.errors import PreconditionError, require
from cslnoise.types import ResonatorParams, Spectrum, SquidReadout, TimeSeries
from cslnoise.utils_hash import sha256_text

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]
_CHUNK = 1 << 18


def apparent_q(Q: float, c: float, gain_mag: float) -> float:
    """1/Q_a = 1/Q + c/|G|."""
    require(Q > 0, "Q must be positive", Q=Q)
    require(gain_mag > 0, "gain magnitude must be positive", gain_mag=gain_mag)
    inv = 1.0 / Q + c / gain_mag
    if inv <= 0:
        raise PreconditionError(
            "net antidamping: 1/Q_a would be non-positive",
            details={"Q": Q, "c": c, "gain_mag": gain_mag},
        )
    return 1.0 / inv


def template_basis(f: np.ndarray, f0: float, f1: float, Q_a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Shape functions multiplying B and C in the flux PSD template."""
    f = np.asarray(f, dtype=float)
    detune = (f - f0) * (f + f0)
    denom = detune**2 + (f * f0 / Q_a) ** 2
    anti = (f - f1) * (f + f1)
    return f0**4 / denom, anti**2 / denom


def flux_psd_template(f: np.ndarray, A: float, B: float, C: float, f0: float, f1: float, Q_a: float) -> np.ndarray:
    g_b, g_c = template_basis(f, f0, f1, Q_a)
    return A + B * g_b + C * g_c


def thermal_force_psd(res: ResonatorParams, T: float, Q: float) -> float:
    return 4.0 * PHYS.k_B * T * res.k / (res.omega0 * Q)


def b_coefficient(res: ResonatorParams, squid: SquidReadout, T: float, Q: float, s_f0: float) -> float:
    """Peak-tail amplitude B in Wb^2/Hz."""
    s_x = s_f0 / res.k**2 + 4.0 * PHYS.k_B * T / (res.k * res.omega0 * Q)
    return s_x * squid.phi_x_sq(res.k)


def expected_flux_psd(
    res: ResonatorParams,
    squid: SquidReadout,
    T: float,
    Q: float,
    Q_a: float,
    s_f0: float,
    f_grid: Sequence[float],
) -> Spectrum:
    require(T >= 0 and s_f0 >= 0, "T and s_f0 must be non-negative", T=T, s_f0=s_f0)
    require(Q > 0 and Q_a > 0, "Q and Q_a must be positive", Q=Q, Q_a=Q_a)
    f = np.asarray(f_grid, dtype=float)
    require(bool(np.all(f > 0)), "frequency grid must be positive")
    B = b_coefficient(res, squid, T, Q, s_f0)
    psd = flux_psd_template(f, squid.A, B, squid.C, res.f0, squid.f1, Q_a)
    return Spectrum(
        f=f,
        psd=psd,
        n_av=1,
        unit="Wb^2/Hz",
        meta={"kind": "model", "temperature_k": T, "q": Q, "q_a": Q_a, "s_f0_n2_per_hz": s_f0, "B": B},
    )


def sample_averaged_spectrum(model: Spectrum, n_av: int, seed: SeedLike) -> Spectrum:
    """Bartlett statistics: each bin is model * chi2_{2 n_av} / (2 n_av)."""
    require(n_av >= 1, "n_av must be >= 1", n_av=n_av)
    rng = np.random.default_rng(seed)
    draws = rng.gamma(shape=n_av, scale=1.0 / n_av, size=len(model))
    return Spectrum(
        f=model.f,
        psd=model.psd * draws,
        n_av=n_av,
        rel_err=np.full(len(model), 1.0 / math.sqrt(n_av)),
        unit=model.unit,
        df=model.df,
        valid=model.valid,
        meta={**model.meta, "kind": "sampled", "n_av": n_av},
    )


def _van_loan(A: np.ndarray, Qc: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact transition matrix and process-noise covariance over a step h."""
    n = A.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = Qc
    M[n:, n:] = A.T
    E = expm(M * h)
    Phi = E[n:, n:].T
    Qd = Phi @ E[:n, n:]
    return Phi, 0.5 * (Qd + Qd.T)


def _input_average_gain(A: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """(1/h) int_0^h exp(A s) b ds, the covariance of the state noise with the step-averaged input."""
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = b
    return expm(M * h)[:n, n] / h


def _chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def _output_filters(Phi: np.ndarray, c: Sequence[float]):
    """Numerators/denominator mapping each state-noise component to c . X_n."""
    c1, c2 = c
    den = np.array([1.0, -np.trace(Phi), np.linalg.det(Phi)])
    b1 = np.array([c1, -c1 * Phi[1, 1] + c2 * Phi[1, 0]])
    b2 = np.array([c2, c1 * Phi[0, 1] - c2 * Phi[0, 0]])
    return b1, b2, den


def _free_response(Phi: np.ndarray, c: Sequence[float], x_prev: np.ndarray, n0: int, n: int) -> np.ndarray:
    """c . Phi^(m+1) x_prev for m = n0 .. n0+n-1."""
    lam, V = np.linalg.eig(Phi)
    coef = (np.asarray(c, dtype=complex) @ V) * (np.linalg.solve(V, x_prev.astype(complex)))
    m = np.arange(n0 + 1, n0 + n + 1)
    return np.real(np.exp(np.outer(m, np.log(lam))) @ coef)


def simulate_timeseries(
    res: ResonatorParams,
    squid: SquidReadout,
    T: float,
    Q: float,
    Q_a: float,
    s_f0: float,
    duration: float,
    fs: float,
    seed: SeedLike,
    output: Literal["flux", "displacement"] = "flux",
    initial_state: Optional[Tuple[float, float]] = None,
) -> TimeSeries:
    """Exact discrete-time simulation of the driven oscillator and readout.

    Time is scaled by omega0 so the step covariance is computed once with
    a matrix exponential (Van Loan). The C term is white feedback noise
    passed through (s^2 + w1^2)/(s^2 + s w0/Q_a + w0^2), realised with its
    own oscillator state driven by the same noise whose step average forms
    the direct path. Noise is drawn per chunk from generators spawned off
    the master seed.

    ``initial_state`` = (x0 [m], v0 [m/s]) replaces the stationary draw.
    """
    require(fs >= 10.0 * res.f0, "undersampled: fs must be at least 10 f0", fs=fs, f0=res.f0)
    require(duration > 0, "duration must be positive", duration=duration)
    require(T >= 0 and s_f0 >= 0 and Q > 0 and Q_a > 0, "invalid oscillator parameters")
    if duration * res.f0 / Q_a < 10:
        logger.warning("Record spans only %.1f relaxation times", duration * res.f0 / Q_a)

    n = int(round(duration * fs))
    w0 = res.omega0
    h = w0 / fs
    A = np.array([[0.0, 1.0], [-1.0, -1.0 / Q_a]])
    b = np.array([0.0, 1.0])
    Phi, Qd = _van_loan(A, np.diag([0.0, 1.0]), h)

    s_force = thermal_force_psd(res, T, Q) + s_f0
    # x = alpha * x', alpha^2 = (S_F/2) w0 / k^2
    alpha = math.sqrt(0.5 * s_force * w0) / res.k
    phi_x = math.sqrt(squid.phi_x_sq(res.k))

    g_avg = _input_average_gain(A, b, h)
    joint = np.zeros((3, 3))
    joint[:2, :2] = Qd
    joint[:2, 2] = joint[2, :2] = g_avg
    joint[2, 2] = 1.0 / h
    L_mech, L_c = _chol(Qd), _chol(joint)

    r1_sq = (squid.f1 / res.f0) ** 2
    c_term_row = (r1_sq - 1.0, -1.0 / Q_a)
    sigma_u = math.sqrt(0.5 * w0 * squid.C)
    sigma_a = math.sqrt(0.5 * squid.A * fs)

    bx1, bx2, den = _output_filters(Phi, (1.0, 0.0))
    bc1, bc2, _ = _output_filters(Phi, c_term_row)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = max(1, -(-n // _CHUNK))
    init_ss, *chunk_ss = ss.spawn(n_chunks + 1)
    init_rng = np.random.default_rng(init_ss)
    stat_sd = math.sqrt(0.5 * Q_a)
    if initial_state is None:
        xm_prev = init_rng.normal(0.0, stat_sd, 2)
    else:
        x0, v0 = initial_state
        xm_prev = np.array([x0, v0 / w0]) / alpha if alpha > 0 else np.zeros(2)
    xc_prev = init_rng.normal(0.0, stat_sd, 2)

    noise_scale = 1.0
    if initial_state is not None and alpha == 0:
        # noiseless free decay: scale so that x' carries metres directly
        alpha, noise_scale = 1.0, 0.0
        xm_prev = np.array([initial_state[0], initial_state[1] / w0])

    zi_x = [np.zeros(2), np.zeros(2)]
    zi_c = [np.zeros(2), np.zeros(2)]
    out = np.empty(n)
    for i, cs in enumerate(chunk_ss):
        lo, hi = i * _CHUNK, min((i + 1) * _CHUNK, n)
        m = hi - lo
        rng = np.random.default_rng(cs)
        z = rng.standard_normal((m, 6))
        w = noise_scale * (z[:, :2] @ L_mech.T)
        x, zi_x[0] = signal.lfilter(bx1, den, w[:, 0], zi=zi_x[0])
        tmp, zi_x[1] = signal.lfilter(bx2, den, w[:, 1], zi=zi_x[1])
        x = alpha * (x + tmp + _free_response(Phi, (1.0, 0.0), xm_prev, lo, m))
        if output == "displacement":
            out[lo:hi] = x
            continue
        y = phi_x * x
        if squid.C > 0:
            wc = z[:, 2:5] @ L_c.T
            yc, zi_c[0] = signal.lfilter(bc1, den, wc[:, 0], zi=zi_c[0])
            tmp, zi_c[1] = signal.lfilter(bc2, den, wc[:, 1], zi=zi_c[1])
            yc += tmp + _free_response(Phi, c_term_row, xc_prev, lo, m)
            y += sigma_u * (wc[:, 2] + yc)
        if squid.A > 0:
            y += sigma_a * z[:, 5]
        out[lo:hi] = y

    params = {"T": T, "Q": Q, "Q_a": Q_a, "s_f0": s_f0, "f0": res.f0, "k": res.k, "coupling": squid.coupling, "A": squid.A, "C": squid.C, "f1": squid.f1}
    return TimeSeries(
        values=out,
        fs=fs,
        unit="m" if output == "displacement" else "Wb",
        meta={
            "kind": "timeseries",
            "seed": int(ss.entropy) if isinstance(ss.entropy, int) else str(ss.entropy),
            "params_hash": sha256_text(repr(sorted(params.items())))[:16],
            **{k.lower(): v for k, v in params.items()},
        },
    )


def ringdown_tau(f0: float, Q_a: float) -> float:
    """Amplitude decay time Q_a / (pi f0)."""
    return Q_a / (math.pi * f0)


def simulate_ringdown(
    res: ResonatorParams,
    Q_a: float,
    x0: float,
    duration: float,
    fs: float,
    noise_floor: float,
    seed: SeedLike,
    phase: Optional[float] = None,
) -> TimeSeries:
    """x0 exp(-pi f0 t/Q_a) cos(2 pi f0 t + phi) plus white readout noise of std ``noise_floor``."""
    require(x0 > 0, "x0 must be positive", x0=x0)
    require(Q_a > 0 and duration > 0 and fs > 0, "invalid ringdown request")
    require(noise_floor >= 0, "noise floor must be non-negative")
    tau = ringdown_tau(res.f0, Q_a)
    if duration < 3 * tau:
        logger.info("Ringdown spans %.2f decay times (3 or more recommended)", duration / tau)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * math.pi) if phase is None else phase
    n = int(round(duration * fs))
    x = np.empty(n)
    # filled in chunks; the noise stream is the same as one full-length draw
    for i0 in range(0, n, _CHUNK):
        t = np.arange(i0, min(n, i0 + _CHUNK)) / fs
        seg = x[i0 : i0 + t.size]
        np.multiply(np.exp(-t / tau), np.cos(res.omega0 * t + phi), out=seg)
        seg *= x0
        if noise_floor > 0:
            seg += noise_floor * rng.standard_normal(t.size)
    return TimeSeries(
        values=x,
        fs=fs,
        unit="m",
        meta={"kind": "ringdown", "q_a": Q_a, "f0_hz": res.f0, "x0_m": x0, "noise_floor": noise_floor, "phase": phi},
    )
