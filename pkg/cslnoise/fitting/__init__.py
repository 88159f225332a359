"""
Fit Engine
==========
Statistical estimation for the noise analysis:

- Lorentzian template fits of averaged flux spectra
- chi-square gates and homogeneity tests
- 1/Q_a vs 1/|G| extrapolation with Student-t enlarged errors
- weighted orthogonal B-vs-T/Q regression and the 1/Q offset scan
- ringdown estimation of the apparent quality factor
"""

from .lorentzian import LorentzFit, fit_lorentzian, recompute_chi2
from .stats import Chi2Gate, Homogeneity, chi2_gate, homogeneity_test, student_t_factor
from .lines import (
    LineFit,
    NoisePoint,
    OffsetScanResult,
    QEstimate,
    fit_noise_line,
    fit_q_vs_gain,
    line_points,
    offset_scan,
    orthogonal_linear_fit,
    weighted_line,
)
from .ringdown import QaEstimate, estimate_qa_ringdown

__all__ = [
    "LorentzFit",
    "fit_lorentzian",
    "recompute_chi2",
    "Chi2Gate",
    "Homogeneity",
    "chi2_gate",
    "homogeneity_test",
    "student_t_factor",
    "LineFit",
    "NoisePoint",
    "OffsetScanResult",
    "QEstimate",
    "fit_noise_line",
    "fit_q_vs_gain",
    "line_points",
    "offset_scan",
    "orthogonal_linear_fit",
    "weighted_line",
    "QaEstimate",
    "estimate_qa_ringdown",
]
