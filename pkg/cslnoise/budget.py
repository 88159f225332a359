"""Noise budget: coupling, residual force noise and plausibility estimators.

Inputs and outputs are SI (Wb^2/Hz, Wb^2/(K Hz), H, N^2/Hz). Reporting
units (fH, aN^2/Hz, flux quanta) appear only in ``NoiseBudget.to_dict`` and
``budget_table``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Sequence, Tuple

import pandas as pd

from cslnoise.constants import PHYS, convert_units
from cslnoise.errors import require
from cslnoise.fitting.lines import LineFit
from cslnoise.types import ResonatorParams, SquidReadout

logger = logging.getLogger(__name__)


def coupling_from_slope(B1: float, k: float, f0: float) -> float:
    """Phi_x^2/k in henry from the thermal slope B1 = (4 k_B/omega0) Phi_x^2/k."""
    require(B1 >= 0 and k > 0 and f0 > 0, "B1 must be non-negative, k and f0 positive", B1=B1, k=k, f0=f0)
    return B1 * 2.0 * math.pi * f0 / (4.0 * PHYS.k_B)


@dataclass(frozen=True)
class ForceNoiseEstimate:
    s_f0: float  # N^2/Hz
    sigma_stat: float
    sigma_sys: float
    flags: Tuple[str, ...] = ()


def residual_force_noise(
    B0: float,
    B1: float,
    k: float,
    f0: float,
    dk_rel: float,
    sigma_B0: float = 0.0,
    sigma_B1: float = 0.0,
    cov_B0_B1: float = 0.0,
) -> ForceNoiseEstimate:
    """S_F0 = (4 k_B k / omega0) (B0 / B1) with first-order error propagation.

    The systematic error is the linear propagation of the spring-constant
    uncertainty, S_F0 * dk_rel. A negative intercept is kept and flagged.
    """
    require(B1 > 0, "B1 must be positive", B1=B1)
    require(k > 0 and f0 > 0 and dk_rel >= 0, "k, f0 must be positive and dk_rel non-negative")
    c = 4.0 * PHYS.k_B * k / (2.0 * math.pi * f0)
    s = c * B0 / B1
    d0, d1 = c / B1, -c * B0 / B1**2
    var = d0**2 * sigma_B0**2 + d1**2 * sigma_B1**2 + 2.0 * d0 * d1 * cov_B0_B1
    flags = ()
    if B0 < 0:
        logger.warning("Negative intercept B0=%.3g: residual force noise consistent with zero", B0)
        flags = ("negative_intercept",)
    return ForceNoiseEstimate(s_f0=s, sigma_stat=math.sqrt(max(var, 0.0)), sigma_sys=abs(s) * dk_rel, flags=flags)


def backaction_psd(gamma: float, t_sq: float, r_sq: float, coupling: float, k: float) -> float:
    """Clarke-Tesche current noise times Phi_x^2: (gamma k_B T_SQ / R_SQ) (coupling k)."""
    require(gamma >= 0 and t_sq >= 0 and coupling >= 0, "backaction inputs must be non-negative")
    require(r_sq > 0 and k > 0, "R_SQ and k must be positive", r_sq=r_sq, k=k)
    return gamma * PHYS.k_B * t_sq / r_sq * coupling * k


def backaction_increase(coupling_low: float, coupling_high: float, squid: SquidReadout, k: float) -> float:
    """Backaction change between two couplings of the same SQUID."""
    return backaction_psd(squid.gamma, squid.t_sq, squid.r_sq, coupling_high - coupling_low, k)


def magnetic_field_noise_equiv(s_f0: float, mu: float, l: float) -> float:
    """Field noise B_n (T/sqrt(Hz)) whose torque mu B_n on arm l gives force noise s_f0."""
    require(s_f0 >= 0, "s_f0 must be non-negative", s_f0=s_f0)
    require(mu > 0 and l > 0, "mu and l must be positive", mu=mu, l=l)
    return math.sqrt(s_f0) * l / mu


def _phi0(v: float) -> float:
    return convert_units(v, "Wb^2/Hz", "phi0^2/Hz")


def _wb(v: float) -> float:
    return convert_units(v, "phi0^2/Hz", "Wb^2/Hz")


def _an2(v: float) -> float:
    return convert_units(v, "N^2/Hz", "aN^2/Hz")


def _n2(v: float) -> float:
    return convert_units(v, "aN^2/Hz", "N^2/Hz")


def _fh(v: float) -> float:
    return convert_units(v, "H", "fH")


def _h(v: float) -> float:
    return convert_units(v, "fH", "H")


@dataclass(frozen=True)
class NoiseBudget:
    """One data set: coupling, residual force noise and estimator appendix (SI)."""

    label: str
    b0: float
    sigma_b0: float
    b1: float
    sigma_b1: float
    coupling: float
    sigma_coupling: float
    s_f0: float
    sigma_stat: float
    sigma_sys: float
    backaction: float
    magnetic_equiv_field: float
    flags: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "b0_phi0sq_per_hz": _phi0(self.b0),
            "sigma_b0_phi0sq_per_hz": _phi0(self.sigma_b0),
            "b1_phi0sq_per_nk_hz": _phi0(self.b1) * 1e-9,
            "sigma_b1_phi0sq_per_nk_hz": _phi0(self.sigma_b1) * 1e-9,
            "coupling_fh": _fh(self.coupling),
            "sigma_coupling_fh": _fh(self.sigma_coupling),
            "s_f0_an2_per_hz": _an2(self.s_f0),
            "sigma_stat_an2_per_hz": _an2(self.sigma_stat),
            "sigma_sys_an2_per_hz": _an2(self.sigma_sys),
            "backaction_an2_per_hz": _an2(self.backaction),
            "magnetic_equiv_field_t_per_rthz": self.magnetic_equiv_field,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NoiseBudget":
        return cls(
            label=d["label"],
            b0=_wb(d["b0_phi0sq_per_hz"]),
            sigma_b0=_wb(d["sigma_b0_phi0sq_per_hz"]),
            b1=_wb(d["b1_phi0sq_per_nk_hz"]) * 1e9,
            sigma_b1=_wb(d["sigma_b1_phi0sq_per_nk_hz"]) * 1e9,
            coupling=_h(d["coupling_fh"]),
            sigma_coupling=_h(d["sigma_coupling_fh"]),
            s_f0=_n2(d["s_f0_an2_per_hz"]),
            sigma_stat=_n2(d["sigma_stat_an2_per_hz"]),
            sigma_sys=_n2(d["sigma_sys_an2_per_hz"]),
            backaction=_n2(d["backaction_an2_per_hz"]),
            magnetic_equiv_field=d["magnetic_equiv_field_t_per_rthz"],
            flags=tuple(d.get("flags", ())),
        )


def build_budget(label: str, line: LineFit, res: ResonatorParams, squid: SquidReadout) -> NoiseBudget:
    """Turn a B = B0 + B1 T/Q regression into one budget row."""
    b0, b1 = line.intercept, line.slope
    coupling = coupling_from_slope(b1, res.k, res.f0)
    force = residual_force_noise(
        b0, b1, res.k, res.f0, res.dk_rel, line.sigma_intercept, line.sigma_slope, line.cov[0][1]
    )
    return NoiseBudget(
        label=label,
        b0=b0,
        sigma_b0=line.sigma_intercept,
        b1=b1,
        sigma_b1=line.sigma_slope,
        coupling=coupling,
        sigma_coupling=coupling * line.sigma_slope / b1,
        s_f0=force.s_f0,
        sigma_stat=force.sigma_stat,
        sigma_sys=force.sigma_sys,
        backaction=backaction_psd(squid.gamma, squid.t_sq, squid.r_sq, coupling, res.k),
        magnetic_equiv_field=magnetic_field_noise_equiv(max(force.s_f0, 0.0), res.magnetic_moment, res.effective_length),
        flags=force.flags,
    )


def budget_table(budgets: Sequence[NoiseBudget]) -> pd.DataFrame:
    """Rows = data sets; coupling and S_F0 with both errors in reporting units."""
    rows = [b.to_dict() for b in budgets]
    cols = [
        "label",
        "coupling_fh",
        "sigma_coupling_fh",
        "s_f0_an2_per_hz",
        "sigma_stat_an2_per_hz",
        "sigma_sys_an2_per_hz",
        "backaction_an2_per_hz",
        "magnetic_equiv_field_t_per_rthz",
    ]
    return pd.DataFrame(rows, columns=cols)
