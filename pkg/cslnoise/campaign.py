"""Synthetic measurement campaign.

At every bath temperature the campaign produces what the experiment
records: a ringdown Q_a table over the loop-gain sweep and one averaged
flux spectrum taken at the operating gain. The measured temperature
carries the thermometer scatter.

Random streams are spawned from the master seed per temperature and then
per ringdown / spectrum / thermometer reading, so the output does not depend
on evaluation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from cslnoise.dynamics import apparent_q, expected_flux_psd, ringdown_tau, sample_averaged_spectrum, simulate_ringdown
from cslnoise.fitting.ringdown import estimate_qa_ringdown
from cslnoise.types import CampaignPlan, ResonatorParams, Spectrum, SquidReadout, TimeSeries

logger = logging.getLogger(__name__)

RINGDOWN_X0 = 1e-9  # m; only the decay rate is used downstream


@dataclass(frozen=True)
class RingdownRecord:
    temperature: float  # setpoint, K
    gain: float
    q_a_true: float
    q_a: float
    sigma_q_a: float
    in_sweep: bool = True
    waveform: Optional[TimeSeries] = None

    @property
    def inv_gain(self) -> float:
        return 1.0 / self.gain

    @property
    def inv_q_a(self) -> float:
        return 1.0 / self.q_a

    @property
    def sigma_inv_q_a(self) -> float:
        return self.sigma_q_a / self.q_a**2

    def row(self) -> Dict[str, Any]:
        return {
            "temperature_k": self.temperature,
            "gain": self.gain,
            "q_a": self.q_a,
            "sigma_q_a": self.sigma_q_a,
            "in_sweep": self.in_sweep,
            "q_a_true": self.q_a_true,
        }


@dataclass(frozen=True)
class CampaignPoint:
    setpoint: float  # K
    temperature: float  # measured, K
    sigma_temperature: float
    q_true: float
    q_a_noise: float  # measured Q_a at the operating gain
    ringdowns: Tuple[RingdownRecord, ...]
    spectrum: Spectrum

    def sweep(self) -> List[Tuple[float, float, float]]:
        """(1/|G|, 1/Q_a, sigma) of the gain sweep."""
        return [(r.inv_gain, r.inv_q_a, r.sigma_inv_q_a) for r in self.ringdowns if r.in_sweep]


@dataclass(frozen=True)
class CampaignResult:
    plan: CampaignPlan
    points: Tuple[CampaignPoint, ...]
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def spectra(self) -> Tuple[Spectrum, ...]:
        return tuple(p.spectrum for p in self.points)

    def ringdown_rows(self) -> List[Dict[str, Any]]:
        return [r.row() for p in self.points for r in p.ringdowns]


def _record_grid(plan: CampaignPlan) -> np.ndarray:
    lo, hi = plan.record_band
    df = plan.df
    return np.arange(math.ceil(lo / df), math.floor(hi / df) + 1) * df


def _ringdown(
    res: ResonatorParams,
    plan: CampaignPlan,
    T: float,
    gain: float,
    q_a_true: float,
    ss: np.random.SeedSequence,
    in_sweep: bool,
) -> RingdownRecord:
    rd = plan.ringdown
    if rd.mode == "draw":
        rng = np.random.default_rng(ss)
        inv = (1.0 / q_a_true) * (1.0 + rd.qa_rel_sigma * rng.standard_normal())
        q_a = 1.0 / inv
        return RingdownRecord(T, gain, q_a_true, q_a, rd.qa_rel_sigma * q_a, in_sweep)
    duration = rd.duration_tau * ringdown_tau(res.f0, q_a_true)
    wave = simulate_ringdown(res, q_a_true, RINGDOWN_X0, duration, rd.fs, rd.noise_floor_rel * RINGDOWN_X0, ss)
    est = estimate_qa_ringdown(wave, res.f0, rd.block_s)
    return RingdownRecord(T, gain, q_a_true, est.q_a, est.sigma_q_a, in_sweep, wave if rd.save_waveforms else None)


def run_campaign(
    res: ResonatorParams,
    squid: SquidReadout,
    plan: CampaignPlan,
    progress: bool = False,
) -> CampaignResult:
    """Synthesise ringdown tables and averaged spectra at every temperature."""
    plan.validate_for(res)
    grid = _record_grid(plan)
    g_op = plan.operating_gain
    sweep_gains = sorted(plan.gain_magnitudes)
    extra = g_op not in sweep_gains

    root = np.random.SeedSequence(plan.seed)
    children = root.spawn(len(plan.temperatures))
    points = []
    for T, ss in tqdm(list(zip(plan.temperatures, children)), desc="Campaign", unit="T", disable=not progress):
        rd_ss, spec_ss, thermo_ss = ss.spawn(3)
        Q = res.q_at(T)
        gains = sweep_gains + ([g_op] if extra else [])
        rd_children = rd_ss.spawn(len(gains))
        records = tuple(
            _ringdown(res, plan, T, g, apparent_q(Q, squid.spring_coeff, g), c, in_sweep=i < len(sweep_gains))
            for i, (g, c) in enumerate(zip(gains, rd_children))
        )
        q_a_true = apparent_q(Q, squid.spring_coeff, g_op)
        q_a_meas = next(r.q_a for r in records if r.gain == g_op)

        T_meas = T * (1.0 + plan.thermometer_rel_sigma * np.random.default_rng(thermo_ss).standard_normal())
        model = expected_flux_psd(res, squid, T, Q, q_a_true, plan.injected_s_f0, grid)
        spec = sample_averaged_spectrum(model, plan.n_av, spec_ss).with_meta(
            temperature_k=float(T_meas),
            setpoint_k=T,
            sigma_temperature_k=plan.thermometer_rel_sigma * float(T_meas),
            q_a=q_a_meas,
            gain=g_op,
            frame_len=plan.frame_len,
            fs_hz=plan.fs,
        )
        logger.debug("T=%.1f mK: Q=%.3g, Q_a=%.3g", T * 1e3, Q, q_a_true)
        points.append(
            CampaignPoint(
                setpoint=T,
                temperature=float(T_meas),
                sigma_temperature=plan.thermometer_rel_sigma * float(T_meas),
                q_true=Q,
                q_a_noise=q_a_meas,
                ringdowns=records,
                spectrum=spec,
            )
        )
    return CampaignResult(
        plan=plan,
        points=tuple(points),
        meta={"seed": plan.seed, "ringdown_mode": plan.ringdown.mode, "operating_gain": g_op},
    )
