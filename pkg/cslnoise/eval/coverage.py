"""
Campaign Coverage Evaluation
============================
Runs seeded synthetic campaigns end to end and checks that the analysis
behaves like a calibrated estimator:

1. the residual force noise recovers the injected value within its 1-sigma
   error at the nominal rate (68.27%)
2. the B-vs-T/Q line passes its chi-square gate
3. the fitted A and C amplitudes are homogeneous across temperatures
4. the chi-square-minimising 1/Q offset is consistent with zero
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats
from tqdm import tqdm

from cslnoise.config import ToolkitConfig
from cslnoise.constants import convert_units
from cslnoise.errors import CSLNoiseError
from cslnoise.pipeline import PipelineResult, run_pipeline

logger = logging.getLogger(__name__)

NOMINAL_COVERAGE = float(stats.norm.cdf(1.0) - stats.norm.cdf(-1.0))


@dataclass
class SeedOutcome:
    """Result of analysing one synthetic campaign."""

    seed: int
    s_f0: float = float("nan")  # N^2/Hz
    sigma_stat: float = float("nan")
    covered: bool = False
    line_within_band: bool = False
    homogeneous: bool = False
    offset_consistent: bool = False
    best_inv_q0: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def binomial_interval(n: int, p: float = NOMINAL_COVERAGE, n_sigma: float = 2.0) -> tuple:
    """Range of success fractions compatible with rate ``p`` over ``n`` trials."""
    tail = stats.norm.cdf(-n_sigma)
    lo = stats.binom.ppf(tail, n, p) / n
    hi = stats.binom.ppf(1.0 - tail, n, p) / n
    return float(lo), float(hi)


def outcome_from_result(seed: int, result: PipelineResult, injected: float) -> SeedOutcome:
    b = result.budget
    homo = result.regression.homogeneity
    scan = result.regression.scan
    offset_ok = False
    best = None
    if scan is not None and scan.best_inv_q0 is not None:
        best = scan.best_inv_q0
        lo, hi = scan.ci
        offset_ok = (lo is None or lo <= 0.0) and (hi is None or hi >= 0.0)
    return SeedOutcome(
        seed=seed,
        s_f0=b.s_f0,
        sigma_stat=b.sigma_stat,
        covered=abs(b.s_f0 - injected) <= b.sigma_stat,
        line_within_band=result.regression.gate.within_band,
        homogeneous=all(h.consistent for h in homo.values()),
        offset_consistent=offset_ok,
        best_inv_q0=best,
    )


@dataclass
class CampaignEvaluator:
    """
    Repeats the synthetic pipeline over many seeds.

    The CSL exclusion stage is skipped: it is deterministic given S_F0 and
    adds nothing to the statistics.
    """

    cfg: ToolkitConfig
    outcomes: List[SeedOutcome] = field(default_factory=list)

    @property
    def injected(self) -> float:
        return convert_units(self.cfg.campaign.injected_s_f0_an2_per_hz, "aN^2/Hz", "N^2/Hz")

    def evaluate_seed(self, seed: int) -> SeedOutcome:
        try:
            result = run_pipeline(self.cfg, seed=seed, with_exclusion=False)
        except CSLNoiseError as e:
            logger.warning("Seed %d failed: %s", seed, e.message)
            return SeedOutcome(seed=seed, error=e.message)
        return outcome_from_result(seed, result, self.injected)

    def run(self, seeds: Sequence[int], progress: bool = False) -> List[SeedOutcome]:
        self.outcomes = [self.evaluate_seed(int(s)) for s in tqdm(seeds, desc="Seeds", disable=not progress)]
        return self.outcomes

    def aggregates(self) -> Dict[str, float]:
        good = [o for o in self.outcomes if o.ok]
        n = len(good)
        if n == 0:
            return {"n_seeds": len(self.outcomes), "n_failed": len(self.outcomes)}
        lo, hi = binomial_interval(n)
        coverage = sum(o.covered for o in good) / n
        return {
            "n_seeds": len(self.outcomes),
            "n_failed": len(self.outcomes) - n,
            "coverage": coverage,
            "coverage_band_low": lo,
            "coverage_band_high": hi,
            "coverage_ok": float(lo <= coverage <= hi),
            "line_gate_rate": sum(o.line_within_band for o in good) / n,
            "homogeneity_rate": sum(o.homogeneous for o in good) / n,
            "offset_consistent_rate": sum(o.offset_consistent for o in good) / n,
            "mean_s_f0_an2_per_hz": convert_units(float(np.mean([o.s_f0 for o in good])), "N^2/Hz", "aN^2/Hz"),
            "injected_s_f0_an2_per_hz": self.cfg.campaign.injected_s_f0_an2_per_hz,
        }

    def generate_report(self) -> str:
        """Generate a human-readable coverage report."""
        agg = self.aggregates()
        lines = [
            "=" * 60,
            "           CSLNOISE CAMPAIGN COVERAGE REPORT",
            "=" * 60,
            "",
            f"Seeds evaluated: {agg.get('n_seeds', 0)} ({agg.get('n_failed', 0)} failed)",
        ]
        if "coverage" in agg:
            lines += [
                "",
                "AGGREGATES:",
                f"  Injected S_F0:        {agg['injected_s_f0_an2_per_hz']:.3f} aN^2/Hz",
                f"  Mean recovered S_F0:  {agg['mean_s_f0_an2_per_hz']:.3f} aN^2/Hz",
                f"  1-sigma coverage:     {agg['coverage']:.3f} "
                f"(expected {agg['coverage_band_low']:.2f}-{agg['coverage_band_high']:.2f})",
                f"  Line chi2 gate rate:  {agg['line_gate_rate']:.3f}",
                f"  A/C homogeneity rate: {agg['homogeneity_rate']:.3f}",
                f"  Offset ~ 0 rate:      {agg['offset_consistent_rate']:.3f}",
            ]
        lines += ["", "=" * 60]
        failed = [o for o in self.outcomes if not o.ok]
        if failed:
            lines.append("")
            lines.append("FAILED SEEDS:")
            for o in failed[:5]:
                lines.append(f"  - seed {o.seed}: {o.error}")
        return "\n".join(lines)
