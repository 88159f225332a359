"""Chi-square gates, homogeneity tests and the Student-t enlargement factor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy import stats

from cslnoise.errors import require


@dataclass(frozen=True)
class Chi2Gate:
    chi2: float
    dof: int
    reduced: float
    p_value: float
    band: Tuple[float, float]  # central chi2 interval for n_sigma
    n_sigma: float
    within_band: bool

    @property
    def within_2sigma(self) -> bool:
        """Same as ``within_band`` for the default two-sigma gate."""
        return self.within_band

    def to_dict(self) -> Dict[str, Any]:
        return {
            "chi2": self.chi2,
            "dof": self.dof,
            "reduced": self.reduced,
            "p_value": self.p_value,
            "band": list(self.band),
            "n_sigma": self.n_sigma,
            "within_band": self.within_band,
        }


def chi2_band(dof: int, n_sigma: float = 2.0) -> Tuple[float, float]:
    """Central interval of chi2_dof holding the Gaussian n-sigma mass (95.45% for 2)."""
    tail = stats.norm.cdf(-n_sigma)
    return float(stats.chi2.ppf(tail, dof)), float(stats.chi2.ppf(1.0 - tail, dof))


def chi2_gate(chi2: float, dof: int, n_sigma: float = 2.0) -> Chi2Gate:
    require(dof >= 1, "dof must be >= 1", dof=dof)
    require(chi2 >= 0, "chi2 must be non-negative", chi2=chi2)
    require(n_sigma > 0, "n_sigma must be positive")
    lo, hi = chi2_band(dof, n_sigma)
    return Chi2Gate(
        chi2=float(chi2),
        dof=int(dof),
        reduced=float(chi2) / dof,
        p_value=float(stats.chi2.sf(chi2, dof)),
        band=(lo, hi),
        n_sigma=float(n_sigma),
        within_band=bool(lo <= chi2 <= hi),
    )


@dataclass(frozen=True)
class Homogeneity:
    mean: float
    sigma_mean: float
    chi2: float
    dof: int
    gate: Chi2Gate

    @property
    def consistent(self) -> bool:
        # an unusually small chi2 does not make values inconsistent
        return self.chi2 <= self.gate.band[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "sigma_mean": self.sigma_mean,
            "chi2": self.chi2,
            "dof": self.dof,
            "consistent": self.consistent,
            "gate": self.gate.to_dict(),
        }


def homogeneity_test(values: Sequence[float], sigmas: Sequence[float], n_sigma: float = 2.0) -> Homogeneity:
    """Chi-square of ``values`` about their weighted mean, dof = n - 1."""
    v = np.asarray(values, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    require(v.ndim == 1 and v.shape == s.shape, "values and sigmas must match")
    require(v.size >= 2, "need at least two values", n=int(v.size))
    require(bool(np.all(s > 0)), "sigmas must be positive")
    w = 1.0 / s**2
    mean = float(np.sum(w * v) / np.sum(w))
    chi2 = float(np.sum(w * (v - mean) ** 2))
    dof = int(v.size - 1)
    return Homogeneity(mean, float(np.sqrt(1.0 / np.sum(w))), chi2, dof, chi2_gate(chi2, dof, n_sigma))


def student_t_factor(dof: int) -> float:
    """Ratio of the 68.27% Student-t quantile to the Gaussian one (1.32 at dof 2)."""
    require(dof >= 1, "dof must be >= 1", dof=dof)
    return float(stats.t.ppf(stats.norm.cdf(1.0), dof))
