"""
Analysis Pipeline
=================
Chains the stages of the noise analysis:

1. ringdown sweeps -> intrinsic 1/Q per temperature
2. averaged spectra -> Lorentzian fits (A, B, C) at the measured Q_a
3. B vs T/Q weighted orthogonal regression, chi-square gate, offset scan
4. noise budget (coupling, residual force noise, estimators)
5. CSL exclusion curve from the residual force noise

Every stage is callable on its own (the CLI subcommands do exactly that);
``run_pipeline`` runs them all from one config and ``write_pipeline``
persists the artifacts as tidy CSV/JSON files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from cslnoise.budget import NoiseBudget, budget_table, build_budget
from cslnoise.campaign import CampaignResult, run_campaign
from cslnoise.config import FitConfig, ToolkitConfig
from cslnoise.csl.exclusion import ExclusionCurve, default_rc_grid, exclusion_curve
from cslnoise.csl.mass_models import MassModel
from cslnoise.errors import PreconditionError, require
from cslnoise.fitting import (
    Chi2Gate,
    Homogeneity,
    LineFit,
    LorentzFit,
    NoisePoint,
    OffsetScanResult,
    QEstimate,
    chi2_gate,
    fit_lorentzian,
    fit_noise_line,
    fit_q_vs_gain,
    homogeneity_test,
    offset_scan,
)
from cslnoise.io import write_exclusion_csv, write_json, write_spectrum_csv, write_table_csv, write_timeseries
from cslnoise.spectral import convert_spectrum
from cslnoise.types import ResonatorParams, Spectrum, SquidReadout

logger = logging.getLogger(__name__)

MATCH_REL_TOL = 0.02


def spectrum_name(temperature: float) -> str:
    return f"T{temperature * 1e3:07.2f}mK"


# ---------------------------------------------------------------- stage 1+2


def fit_spectrum(spec: Spectrum, res: ResonatorParams, squid: SquidReadout, fit_cfg: FitConfig, q_a: float) -> LorentzFit:
    """Template fit in Wb^2/Hz with f0, f1 from the config and the measured Q_a."""
    spec = convert_spectrum(spec, "Wb^2/Hz")
    fit = fit_lorentzian(
        spec,
        {"f0": res.f0, "f1": squid.f1, "q_a": q_a},
        band=tuple(fit_cfg.band_hz),
        exclude_peak_bins=fit_cfg.exclude_peak_bins,
        hold=fit_cfg.hold_si() or None,
    )
    meta = {k: spec.meta[k] for k in ("setpoint_k", "sigma_temperature_k", "gain") if k in spec.meta}
    return replace(fit, meta=meta)


def noise_point(fit: LorentzFit, q: QEstimate) -> NoisePoint:
    require(fit.temperature is not None, "fit has no temperature; spectrum metadata lacks temperature_k")
    return NoisePoint(
        temperature=fit.temperature,
        inv_q=q.inv_q,
        sigma_inv_q=q.sigma_inv_q,
        b=fit.B,
        sigma_b=fit.sigma_B,
        sigma_temperature=float(fit.meta.get("sigma_temperature_k", 0.0)),
    )


def pair_fits_with_q(
    fits: Sequence[LorentzFit], q_estimates: Sequence[QEstimate], rel_tol: float = MATCH_REL_TOL
) -> List[NoisePoint]:
    """Match every fit to the Q estimate at the nearest temperature (within ``rel_tol``)."""
    qs = [q for q in q_estimates if q.temperature is not None]
    require(len(qs) == len(q_estimates), "every Q estimate needs a temperature_k")
    points = []
    for fit in fits:
        require(fit.temperature is not None, "fit has no temperature_k")
        q = min(qs, key=lambda e: abs(e.temperature - fit.temperature))
        if abs(q.temperature - fit.temperature) > rel_tol * fit.temperature:
            raise PreconditionError(
                "no Q estimate near the fit temperature",
                details={"temperature_k": fit.temperature, "nearest_k": q.temperature, "rel_tol": rel_tol},
            )
        points.append(noise_point(fit, q))
    return sorted(points, key=lambda p: p.temperature)


# ---------------------------------------------------------------- stage 3


@dataclass(frozen=True)
class RegressionReport:
    points: Tuple[NoisePoint, ...]
    line: LineFit
    gate: Chi2Gate
    scan: Optional[OffsetScanResult]
    homogeneity: Dict[str, Homogeneity] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "points": [p.to_dict() for p in self.points],
            "line": self.line.to_dict(),
            "gate": self.gate.to_dict(),
            "offset_scan": self.scan.to_dict() if self.scan else None,
            "homogeneity": {k: h.to_dict() for k, h in sorted(self.homogeneity.items())},
        }


def fit_homogeneity(fits: Sequence[LorentzFit], n_sigma: float = 2.0) -> Dict[str, Homogeneity]:
    """Stability of the free A and C amplitudes across temperatures."""
    out = {}
    for name in ("A", "C"):
        vals = [getattr(f, name) for f in fits if name not in f.held]
        sig = [getattr(f, "sigma_" + name) for f in fits if name not in f.held]
        if len(vals) >= 2 and all(s > 0 for s in sig):
            out[name] = homogeneity_test(vals, sig, n_sigma)
    return out


def regress(
    points: Sequence[NoisePoint],
    offset_grid: Optional[Sequence[float]] = None,
    delta_chi2: float = 4.0,
    n_sigma: float = 2.0,
    homogeneity: Optional[Dict[str, Homogeneity]] = None,
) -> RegressionReport:
    require(len(points) >= 3, "B-vs-T/Q regression needs at least three temperatures", n=len(points))
    line = fit_noise_line(points)
    gate = chi2_gate(line.chi2, line.dof, n_sigma)
    if not gate.within_band:
        logger.warning("B-vs-T/Q chi2=%.2f (dof %d) outside the %g-sigma band", line.chi2, line.dof, n_sigma)
    scan = offset_scan(points, offset_grid, delta_chi2) if offset_grid else None
    return RegressionReport(tuple(points), line, gate, scan, dict(homogeneity or {}))


# ---------------------------------------------------------------- stage 5


def exclusion_for_budget(
    s_f0: float, model: MassModel, cfg: ToolkitConfig, progress: bool = False
) -> ExclusionCurve:
    ex = cfg.exclusion
    grid = default_rc_grid(ex.n_points, ex.rc_min_m, ex.rc_max_m)
    return exclusion_curve(s_f0, model, grid, ex.axis, ex.rel_tol, progress=progress)


# ---------------------------------------------------------------- full run


@dataclass(frozen=True)
class PipelineResult:
    campaign: CampaignResult
    q_estimates: Tuple[QEstimate, ...]
    fits: Tuple[LorentzFit, ...]
    fit_gates: Tuple[Chi2Gate, ...]
    regression: RegressionReport
    slope_consistency: Optional[Homogeneity]
    budget: NoiseBudget
    exclusion: Optional[ExclusionCurve]

    def summary(self) -> Dict[str, Any]:
        b = self.budget.to_dict()
        return {
            "label": self.budget.label,
            "coupling_fh": b["coupling_fh"],
            "s_f0_an2_per_hz": b["s_f0_an2_per_hz"],
            "sigma_stat_an2_per_hz": b["sigma_stat_an2_per_hz"],
            "line_chi2": self.regression.line.chi2,
            "line_dof": self.regression.line.dof,
            "line_within_band": self.regression.gate.within_band,
            "fits_within_band": sum(g.within_band for g in self.fit_gates),
            "n_fits": len(self.fits),
            "lambda_at_1e-7_m": self.exclusion.lambda_at(1e-7) if self.exclusion else None,
        }


def analyse_campaign(
    campaign: CampaignResult,
    cfg: ToolkitConfig,
    res: ResonatorParams,
    squid: SquidReadout,
    with_exclusion: bool = True,
    progress: bool = False,
) -> PipelineResult:
    n_sigma = cfg.fit.n_sigma
    qs, fits, points = [], [], []
    for p in campaign.points:
        q = fit_q_vs_gain(p.sweep(), temperature=p.temperature)
        fit = fit_spectrum(p.spectrum, res, squid, cfg.fit, p.q_a_noise)
        qs.append(q)
        fits.append(fit)
        points.append(noise_point(fit, q))
    gates = tuple(chi2_gate(f.chi2, f.dof, n_sigma) for f in fits)
    for f, g in zip(fits, gates):
        if not g.within_band:
            logger.info("Spectrum at %.1f mK: chi2/dof=%.2f outside band", f.temperature * 1e3, g.reduced)

    slopes = homogeneity_test([q.slope for q in qs], [q.sigma_slope for q in qs], n_sigma) if len(qs) >= 2 else None
    report = regress(
        points,
        cfg.regression.offset_grid(),
        cfg.regression.delta_chi2,
        n_sigma,
        fit_homogeneity(fits, n_sigma),
    )
    budget = build_budget(cfg.label, report.line, res, squid)

    curve = None
    if with_exclusion:
        if budget.s_f0 > 0:
            curve = exclusion_for_budget(budget.s_f0, cfg.mass_model(), cfg, progress)
        else:
            logger.warning("Residual force noise %.3g N^2/Hz is not positive; no exclusion curve", budget.s_f0)
    return PipelineResult(campaign, tuple(qs), tuple(fits), gates, report, slopes, budget, curve)


def run_pipeline(cfg: ToolkitConfig, seed: Optional[int] = None, with_exclusion: bool = True, progress: bool = False) -> PipelineResult:
    """Synthetic campaign plus full analysis; a pure function of (cfg, seed)."""
    res, squid = cfg.resonator_params(), cfg.squid_readout()
    campaign = run_campaign(res, squid, cfg.campaign_plan(seed), progress=progress)
    return analyse_campaign(campaign, cfg, res, squid, with_exclusion, progress)


# ---------------------------------------------------------------- artifacts


def fits_frame(fits: Sequence[LorentzFit], gates: Sequence[Chi2Gate]) -> pd.DataFrame:
    rows = []
    for f, g in zip(fits, gates):
        rows.append(
            {
                "temperature_k": f.temperature,
                "A": f.A,
                "sigma_A": f.sigma_A,
                "B": f.B,
                "sigma_B": f.sigma_B,
                "C": f.C,
                "sigma_C": f.sigma_C,
                "q_a": f.q_a,
                "chi2": f.chi2,
                "dof": f.dof,
                "within_band": g.within_band,
            }
        )
    return pd.DataFrame(rows)


def points_frame(report: RegressionReport) -> pd.DataFrame:
    rows = []
    for p in report.points:
        x, sx = p.abscissa()
        rows.append({**p.to_dict(), "t_over_q_k": x, "sigma_t_over_q_k": sx, "b_model": float(report.line(x))})
    return pd.DataFrame(rows)


def offset_frame(scan: OffsetScanResult) -> pd.DataFrame:
    return pd.DataFrame(scan.to_dict()["rows"], columns=["inv_q0", "ok", "B0", "sigma_B0", "B1", "chi2", "dof", "message"])


def write_campaign(campaign: CampaignResult, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    written = []
    for p in campaign.points:
        written.append(write_spectrum_csv(p.spectrum, out_dir / "spectra" / f"{spectrum_name(p.setpoint)}.csv"))
        for r in p.ringdowns:
            if r.waveform is not None:
                name = f"{spectrum_name(p.setpoint)}_G{r.gain:g}.csv"
                written.append(write_timeseries(r.waveform, out_dir / "ringdowns" / name))
    written.append(write_table_csv(pd.DataFrame(campaign.ringdown_rows()), out_dir / "ringdowns.csv"))
    return written


def write_pipeline(result: PipelineResult, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    written = write_campaign(result.campaign, out_dir)
    written.append(write_json([q.to_dict() for q in result.q_estimates], out_dir / "q_estimates.json"))
    written.append(write_json([f.to_dict() for f in result.fits], out_dir / "fits.json"))
    written.append(write_table_csv(fits_frame(result.fits, result.fit_gates), out_dir / "spectra_fits.csv"))
    reg = result.regression.to_dict()
    if result.slope_consistency is not None:
        reg["homogeneity"]["spring_coeff"] = result.slope_consistency.to_dict()
    written.append(write_json(reg, out_dir / "regression.json"))
    written.append(write_table_csv(points_frame(result.regression), out_dir / "regression_points.csv"))
    if result.regression.scan is not None:
        written.append(write_table_csv(offset_frame(result.regression.scan), out_dir / "offset_scan.csv"))
    written.append(write_json(result.budget.to_dict(), out_dir / "budget.json"))
    written.append(write_table_csv(budget_table([result.budget]), out_dir / "budget.csv"))
    if result.exclusion is not None:
        written.append(write_json(result.exclusion.to_dict(), out_dir / "exclusion.json"))
        written.append(write_exclusion_csv(result.exclusion, out_dir / "exclusion.csv"))
    written.append(write_json(result.summary(), out_dir / "summary.json"))
    return written
