"""
Lorentzian Template Fits
========================
Weighted Levenberg-Marquardt fit of the flux-PSD template

    S(f) = A + [B f0^4 + C (f^2 - f1^2)^2] / [(f^2 - f0^2)^2 + (f f0 / Q_a)^2]

with f0, f1 and Q_a held fixed. Bin errors are the model times the relative
error of the averaged periodogram; the first pass uses the observed values
and the fit is repeated with the updated model until the amplitudes settle,
which is the maximum-likelihood point for Gamma-distributed bins. The bins
nearest f0 are dropped from both the fit and the chi-square, since a
rectangular window broadens the very top of a narrow peak.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from cslnoise.dynamics import flux_psd_template, template_basis
from cslnoise.errors import FitError, PreconditionError, require
from cslnoise.types import Spectrum

logger = logging.getLogger(__name__)

PARAMS = ("A", "B", "C")
DEFAULT_BAND = (8100.0, 8240.0)
DEFAULT_EXCLUDED = 5
MAX_REWEIGHT = 50
REWEIGHT_TOL = 1e-10


@dataclass(frozen=True)
class LorentzFit:
    """Result of one template fit. Amplitudes carry the spectrum's unit."""

    A: float
    B: float
    C: float
    sigma_A: float
    sigma_B: float
    sigma_C: float
    cov: Tuple[Tuple[float, ...], ...]
    f0: float
    f1: float
    q_a: float
    chi2: float
    dof: int
    band: Tuple[float, float]
    excluded_bins: int
    n_bins: int
    unit: str = "Wb^2/Hz"
    converged: bool = True
    held: Tuple[str, ...] = ()
    flags: Tuple[str, ...] = ()
    message: str = ""
    spectrum_digest: str = ""
    temperature: Optional[float] = None  # K, from spectrum metadata
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def params(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C])

    @property
    def accepted(self) -> bool:
        return self.converged and self.B > 0 and not any(f.startswith("clamped") for f in self.flags)

    def model(self, f: np.ndarray) -> np.ndarray:
        return flux_psd_template(f, self.A, self.B, self.C, self.f0, self.f1, self.q_a)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "sigma_A": self.sigma_A,
            "sigma_B": self.sigma_B,
            "sigma_C": self.sigma_C,
            "cov": [list(r) for r in self.cov],
            "f0_hz": self.f0,
            "f1_hz": self.f1,
            "q_a": self.q_a,
            "chi2": self.chi2,
            "dof": self.dof,
            "band_hz": list(self.band),
            "excluded_bins": self.excluded_bins,
            "n_bins": self.n_bins,
            "unit": self.unit,
            "converged": self.converged,
            "held": list(self.held),
            "flags": list(self.flags),
            "message": self.message,
            "spectrum_digest": self.spectrum_digest,
            "temperature_k": self.temperature,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LorentzFit":
        return cls(
            A=d["A"],
            B=d["B"],
            C=d["C"],
            sigma_A=d["sigma_A"],
            sigma_B=d["sigma_B"],
            sigma_C=d["sigma_C"],
            cov=tuple(tuple(r) for r in d["cov"]),
            f0=d["f0_hz"],
            f1=d["f1_hz"],
            q_a=d["q_a"],
            chi2=d["chi2"],
            dof=d["dof"],
            band=tuple(d["band_hz"]),
            excluded_bins=d["excluded_bins"],
            n_bins=d["n_bins"],
            unit=d.get("unit", "Wb^2/Hz"),
            converged=d.get("converged", True),
            held=tuple(d.get("held", ())),
            flags=tuple(d.get("flags", ())),
            message=d.get("message", ""),
            spectrum_digest=d.get("spectrum_digest", ""),
            temperature=d.get("temperature_k"),
            meta=dict(d.get("meta", {})),
        )


def select_bins(spec: Spectrum, f0: float, band: Tuple[float, float], exclude_peak_bins: int) -> Tuple[np.ndarray, np.ndarray]:
    """Return (fit indices, excluded peak indices) inside ``band``."""
    lo, hi = band
    require(lo < hi, "band must be increasing", band=list(band))
    half = 0.5 * spec.df
    if lo < spec.f[0] - half or hi > spec.f[-1] + half:
        raise PreconditionError(
            "fit band outside the spectrum grid",
            details={"band_hz": [lo, hi], "grid_hz": [float(spec.f[0]), float(spec.f[-1])]},
        )
    idx = np.flatnonzero(spec.band_mask(lo, hi))
    n_ex = min(max(int(exclude_peak_bins), 0), idx.size)
    # stable sort keeps the choice reproducible for equidistant bins
    order = np.argsort(np.abs(spec.f[idx] - f0), kind="stable")
    excluded = np.sort(idx[order[:n_ex]])
    keep = np.setdiff1d(idx, excluded, assume_unique=True)
    return keep, excluded


def default_init(f: np.ndarray, y: np.ndarray, f0: float, f1: float, q_a: float) -> Dict[str, float]:
    """Median tail level for A, peak height for B, C at the A level."""
    span = f[-1] - f[0]
    tail = np.abs(f - f0) > 0.25 * span
    a0 = float(np.median(y[tail] if tail.any() else y))
    g_b, _ = template_basis(f, f0, f1, q_a)
    i = int(np.argmax(y))
    b0 = max(float(y[i]) - a0, a0) / float(g_b[i])
    return {"A": a0, "B": b0, "C": a0}


def _bin_sigma(y: np.ndarray, rel: np.ndarray, model: np.ndarray) -> np.ndarray:
    """Model times relative error; bins where the model is not positive fall back to the data."""
    return np.where(model > 0, model, y) * rel


def _chi2(spec_y: np.ndarray, rel: np.ndarray, model: np.ndarray) -> float:
    r = (spec_y - model) / _bin_sigma(spec_y, rel, model)
    return float(r @ r)


def _weighted_solve(
    design: np.ndarray,
    y: np.ndarray,
    sigma: np.ndarray,
    fixed_part: np.ndarray,
    scale: np.ndarray,
    x0: np.ndarray,
    max_nfev: int,
):
    J = design * scale / sigma[:, None]
    r0 = (fixed_part - y) / sigma
    return least_squares(
        lambda x: r0 + J @ x,
        x0,
        jac=lambda x: J,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=max_nfev,
    )


def fit_lorentzian(
    spec: Spectrum,
    fixed: Mapping[str, float],
    band: Tuple[float, float] = DEFAULT_BAND,
    exclude_peak_bins: int = DEFAULT_EXCLUDED,
    init: Optional[Mapping[str, float]] = None,
    hold: Optional[Mapping[str, float]] = None,
    max_nfev: int = 2000,
) -> LorentzFit:
    """
    Fit A, B, C of the flux-PSD template to ``spec``.

    Args:
        spec: averaged spectrum with per-bin relative errors
        fixed: {"f0", "f1", "q_a"} held constant
        band: fit interval in Hz
        exclude_peak_bins: bins nearest f0 dropped from fit and chi-square
        init: starting values; defaults from ``default_init``
        hold: amplitudes kept at the given value (e.g. {"A": .., "C": ..})

    Returns:
        LorentzFit. Non-convergence is reported through ``converged`` with
        the last iterate; negative amplitudes are clamped to zero and flagged.
    """
    try:
        f0, f1, q_a = float(fixed["f0"]), float(fixed["f1"]), float(fixed["q_a"])
    except KeyError as e:
        raise PreconditionError(f"missing fixed parameter {e.args[0]!r}") from None
    require(f0 > 0 and f1 > 0 and q_a > 0, "f0, f1 and Q_a must be positive", f0=f0, f1=f1, q_a=q_a)
    hold = dict(hold or {})
    unknown = set(hold) - set(PARAMS)
    require(not unknown, "only A, B, C can be held", unknown=sorted(unknown))
    free = [p for p in PARAMS if p not in hold]
    require(len(free) > 0, "nothing left to fit")

    keep, excluded = select_bins(spec, f0, band, exclude_peak_bins)
    require(keep.size > len(free), "too few bins in band", n_bins=int(keep.size), n_free=len(free))
    f, y, rel = spec.f[keep], spec.psd[keep], spec.rel_err[keep]
    require(bool(np.all(y > 0)), "fit bins must have positive PSD")

    start = default_init(f, y, f0, f1, q_a)
    if init:
        start.update({k: float(v) for k, v in init.items() if k in PARAMS})
    require(all(start[p] > 0 for p in free), "initial values must be positive", init=start)

    g_b, g_c = template_basis(f, f0, f1, q_a)
    basis = {"A": np.ones_like(f), "B": g_b, "C": g_c}
    design = np.column_stack([basis[p] for p in free])
    scale = np.array([start[p] for p in free])
    fixed_part = sum((hold[p] * basis[p] for p in hold), np.zeros_like(f))

    # first pass weighted by the data, then by the model until the amplitudes settle
    sigma = y * rel
    x = np.ones(len(free))
    converged = False
    for n_pass in range(1, MAX_REWEIGHT + 1):
        res = _weighted_solve(design, y, sigma, fixed_part, scale, x, max_nfev)
        step = float(np.max(np.abs(res.x - x) / np.maximum(np.abs(res.x), 1e-300)))
        x = res.x
        sigma = _bin_sigma(y, rel, fixed_part + design @ (x * scale))
        converged = bool(res.status > 0)
        if not converged or (n_pass > 1 and step < REWEIGHT_TOL):
            break
    else:
        converged = False
        logger.warning("Lorentzian reweighting did not settle after %d passes", MAX_REWEIGHT)
    if not converged:
        logger.warning("Lorentzian fit did not converge: %s", res.message)

    values = dict(hold)
    values.update({p: float(v) for p, v in zip(free, res.x * scale)})
    flags = []
    for p in free:
        if values[p] < 0:
            flags.append(f"clamped_{p}")
            values[p] = 0.0
    if values["B"] <= 0:
        flags.append("B_nonpositive")

    J_phys = design / sigma[:, None]
    try:
        cov_free = np.linalg.inv(J_phys.T @ J_phys)
    except np.linalg.LinAlgError as e:
        raise FitError("singular normal matrix in Lorentzian fit", details={"band_hz": list(band)}) from e
    cov = np.zeros((3, 3))
    pos = [PARAMS.index(p) for p in free]
    cov[np.ix_(pos, pos)] = cov_free
    cov = 0.5 * (cov + cov.T)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    model = flux_psd_template(f, values["A"], values["B"], values["C"], f0, f1, q_a)
    temp = spec.meta.get("temperature_k")
    return LorentzFit(
        A=values["A"],
        B=values["B"],
        C=values["C"],
        sigma_A=float(err[0]),
        sigma_B=float(err[1]),
        sigma_C=float(err[2]),
        cov=tuple(tuple(float(v) for v in row) for row in cov),
        f0=f0,
        f1=f1,
        q_a=q_a,
        chi2=_chi2(y, rel, model),
        dof=int(keep.size - len(free)),
        band=(float(band[0]), float(band[1])),
        excluded_bins=int(excluded.size),
        n_bins=int(keep.size),
        unit=spec.unit,
        converged=converged,
        held=tuple(sorted(hold)),
        flags=tuple(flags),
        message=str(res.message),
        spectrum_digest=spec.digest(),
        temperature=None if temp is None else float(temp),
    )


def recompute_chi2(fit: LorentzFit, spec: Spectrum) -> float:
    """Chi-square of ``fit`` on ``spec`` using the same bin selection."""
    keep, _ = select_bins(spec, fit.f0, fit.band, fit.excluded_bins)
    y, rel = spec.psd[keep], spec.rel_err[keep]
    return _chi2(y, rel, fit.model(spec.f[keep]))
