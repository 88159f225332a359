"""
Straight-Line Regressions
=========================
Weighted least squares for the 1/Q_a-vs-1/|G| extrapolation, the weighted
orthogonal fit of B against T/Q, and the systematic 1/Q offset scan built
on top of it.

The orthogonal fit minimises

    chi2(a, b) = sum_i (y_i - a - b x_i)^2 / (sy_i^2 + b^2 sx_i^2)

by profiling: for a fixed slope the best intercept is a weighted mean, so
only a one-dimensional bracketed minimisation over b remains.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from cslnoise.errors import FitError, PreconditionError, require
from cslnoise.fitting.stats import student_t_factor

logger = logging.getLogger(__name__)

Method = Literal["weighted-least-squares", "weighted-orthogonal"]


@dataclass(frozen=True)
class LineFit:
    intercept: float
    slope: float
    sigma_intercept: float
    sigma_slope: float
    cov: Tuple[Tuple[float, float], Tuple[float, float]]
    chi2: float
    dof: int
    method: Method
    n_points: int
    converged: bool = True

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "intercept": self.intercept,
            "slope": self.slope,
            "sigma_intercept": self.sigma_intercept,
            "sigma_slope": self.sigma_slope,
            "cov": [list(r) for r in self.cov],
            "chi2": self.chi2,
            "dof": self.dof,
            "method": self.method,
            "n_points": self.n_points,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "LineFit":
        return cls(
            intercept=d["intercept"],
            slope=d["slope"],
            sigma_intercept=d["sigma_intercept"],
            sigma_slope=d["sigma_slope"],
            cov=tuple(tuple(r) for r in d["cov"]),
            chi2=d["chi2"],
            dof=d["dof"],
            method=d["method"],
            n_points=d["n_points"],
            converged=d.get("converged", True),
        )


def _cov_tuple(cov: np.ndarray) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    cov = 0.5 * (cov + cov.T)
    return ((float(cov[0, 0]), float(cov[0, 1])), (float(cov[1, 0]), float(cov[1, 1])))


def _check_abscissas(x: np.ndarray) -> None:
    if np.ptp(x) <= 1e-12 * max(float(np.max(np.abs(x))), 1e-300):
        raise PreconditionError("degenerate abscissas: all x values coincide", details={"x": x.tolist()})


def weighted_line(x: Sequence[float], y: Sequence[float], sigma_y: Sequence[float]) -> LineFit:
    """Closed-form weighted least squares y = a + b x."""
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, sigma_y))
    require(x.shape == y.shape == s.shape and x.ndim == 1, "x, y, sigma must be matching 1D arrays")
    require(x.size >= 3, "at least three points are needed", n=int(x.size))
    require(bool(np.all(s > 0)), "sigmas must be positive")
    _check_abscissas(x)
    w = 1.0 / s**2
    S, Sx, Sy = w.sum(), (w * x).sum(), (w * y).sum()
    # centred sums avoid cancellation in S*Sxx - Sx^2
    xm = Sx / S
    Stt = (w * (x - xm) ** 2).sum()
    b = float((w * (x - xm) * y).sum() / Stt)
    a = float((Sy - b * Sx) / S)
    var_b = 1.0 / Stt
    cov_ab = -xm / Stt
    var_a = 1.0 / S + xm * xm / Stt
    r = (y - a - b * x) / s
    cov = np.array([[var_a, cov_ab], [cov_ab, var_b]])
    return LineFit(
        intercept=a,
        slope=b,
        sigma_intercept=float(np.sqrt(var_a)),
        sigma_slope=float(np.sqrt(var_b)),
        cov=_cov_tuple(cov),
        chi2=float(r @ r),
        dof=int(x.size - 2),
        method="weighted-least-squares",
        n_points=int(x.size),
    )


@dataclass(frozen=True)
class QEstimate:
    """Intrinsic 1/Q from one gain sweep; errors include the Student-t enlargement."""

    inv_q: float
    sigma_inv_q: float
    slope: float  # spring coefficient c
    sigma_slope: float
    t_factor: float
    line: LineFit
    temperature: Optional[float] = None

    @property
    def q(self) -> float:
        return 1.0 / self.inv_q

    @property
    def sigma_q(self) -> float:
        return self.sigma_inv_q / self.inv_q**2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inv_q": self.inv_q,
            "sigma_inv_q": self.sigma_inv_q,
            "q": self.q,
            "sigma_q": self.sigma_q,
            "slope_c": self.slope,
            "sigma_slope_c": self.sigma_slope,
            "t_factor": self.t_factor,
            "temperature_k": self.temperature,
            "line": self.line.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QEstimate":
        return cls(
            inv_q=d["inv_q"],
            sigma_inv_q=d["sigma_inv_q"],
            slope=d["slope_c"],
            sigma_slope=d["sigma_slope_c"],
            t_factor=d["t_factor"],
            line=LineFit.from_dict(d["line"]),
            temperature=d.get("temperature_k"),
        )


def fit_q_vs_gain(points: Sequence[Tuple[float, float, float]], temperature: Optional[float] = None) -> QEstimate:
    """
    Extrapolate 1/Q_a = 1/Q + c/|G| to infinite gain.

    Args:
        points: (1/|G|, 1/Q_a, sigma of 1/Q_a) per ringdown
        temperature: carried through for bookkeeping

    Returns:
        QEstimate whose intercept and slope errors are scaled by the
        68.27% Student-t factor for n - 2 residual degrees of freedom.
    """
    require(len(points) >= 3, "at least three ringdowns are needed per sweep", n=len(points))
    x, y, s = (np.array(col, dtype=float) for col in zip(*points))
    line = weighted_line(x, y, s)
    t = student_t_factor(line.dof)
    return QEstimate(
        inv_q=line.intercept,
        sigma_inv_q=t * line.sigma_intercept,
        slope=line.slope,
        sigma_slope=t * line.sigma_slope,
        t_factor=t,
        line=line,
        temperature=temperature,
    )


def _numerical_hessian(fun: Callable[[np.ndarray], float], p: np.ndarray, h: np.ndarray) -> np.ndarray:
    n = p.size
    H = np.empty((n, n))
    f0 = fun(p)
    e = np.eye(n) * h
    for i in range(n):
        H[i, i] = (fun(p + e[i]) - 2.0 * f0 + fun(p - e[i])) / h[i] ** 2
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (
                fun(p + e[i] + e[j]) - fun(p + e[i] - e[j]) - fun(p - e[i] + e[j]) + fun(p - e[i] - e[j])
            ) / (4.0 * h[i] * h[j])
    return H


def orthogonal_linear_fit(points: Sequence[Tuple[float, float, float, float]]) -> LineFit:
    """Weighted orthogonal fit of (x, y, sigma_x, sigma_y) points.

    The covariance is twice the inverse Hessian of chi2 at the minimum.
    With all sigma_x = 0 this reduces to weighted least squares.
    """
    require(len(points) >= 3, "at least three points are needed", n=len(points))
    x, y, sx, sy = (np.array(col, dtype=float) for col in zip(*points))
    require(bool(np.all(sy > 0)) and bool(np.all(sx >= 0)), "sigma_y must be positive and sigma_x non-negative")
    _check_abscissas(x)

    xs = float(np.max(np.abs(x)))
    ys = float(np.max(np.abs(y))) or 1.0
    u, v, su, sv = x / xs, y / ys, sx / xs, sy / ys

    def weights(b: float) -> np.ndarray:
        return 1.0 / (sv**2 + b * b * su**2)

    def profile(b: float) -> float:
        w = weights(b)
        a = np.sum(w * (v - b * u)) / np.sum(w)
        r = v - a - b * u
        return float(np.sum(w * r * r))

    def chi2(p: np.ndarray) -> float:
        r = v - p[0] - p[1] * u
        return float(np.sum(weights(p[1]) * r * r))

    start = weighted_line(u, v, np.sqrt(sv**2 + su**2))
    d = max(3.0 * start.sigma_slope, 1e-3 * abs(start.slope), 1e-12)
    try:
        res = minimize_scalar(profile, bracket=(start.slope - d, start.slope + d), method="brent", options={"xtol": 1e-12})
        ok = bool(res.success) and np.isfinite(res.x)
    except (ValueError, RuntimeError):
        ok = False
    if not ok:
        logger.debug("Bracketed search failed; falling back to bounded search")
        res = minimize_scalar(
            profile,
            bounds=(start.slope - 100.0 * d, start.slope + 100.0 * d),
            method="bounded",
            options={"xatol": 1e-12 * max(1.0, abs(start.slope))},
        )
    converged = bool(res.success)
    if not converged:
        logger.warning("Orthogonal fit did not converge: %s", getattr(res, "message", ""))

    b = float(res.x)
    w = weights(b)
    a = float(np.sum(w * (v - b * u)) / np.sum(w))
    p = np.array([a, b])
    h = np.array([max(start.sigma_intercept, 1e-12), max(start.sigma_slope, 1e-12)]) * 1e-3
    H = _numerical_hessian(chi2, p, h)
    try:
        cov_n = 2.0 * np.linalg.inv(H)
    except np.linalg.LinAlgError as e:
        raise FitError("singular curvature at the orthogonal-fit minimum") from e
    scale = np.diag([ys, ys / xs])
    cov = scale @ cov_n @ scale
    return LineFit(
        intercept=a * ys,
        slope=b * ys / xs,
        sigma_intercept=float(np.sqrt(max(cov[0, 0], 0.0))),
        sigma_slope=float(np.sqrt(max(cov[1, 1], 0.0))),
        cov=_cov_tuple(cov),
        chi2=chi2(p),
        dof=int(x.size - 2),
        method="weighted-orthogonal",
        n_points=int(x.size),
        converged=converged,
    )


@dataclass(frozen=True)
class NoisePoint:
    """One temperature of a campaign: fitted B and the intrinsic 1/Q."""

    temperature: float  # K
    inv_q: float
    sigma_inv_q: float
    b: float
    sigma_b: float
    sigma_temperature: float = 0.0

    def abscissa(self, inv_q0: float = 0.0) -> Tuple[float, float]:
        """x = T (1/Q + 1/Q0) and its standard error."""
        iq = self.inv_q + inv_q0
        x = self.temperature * iq
        sx = float(np.hypot(self.sigma_temperature * iq, self.temperature * self.sigma_inv_q))
        return x, sx

    def to_dict(self) -> Dict[str, Any]:
        return {
            "temperature_k": self.temperature,
            "inv_q": self.inv_q,
            "sigma_inv_q": self.sigma_inv_q,
            "b": self.b,
            "sigma_b": self.sigma_b,
            "sigma_temperature_k": self.sigma_temperature,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "NoisePoint":
        return cls(
            temperature=d["temperature_k"],
            inv_q=d["inv_q"],
            sigma_inv_q=d["sigma_inv_q"],
            b=d["b"],
            sigma_b=d["sigma_b"],
            sigma_temperature=d.get("sigma_temperature_k", 0.0),
        )


def line_points(points: Sequence[NoisePoint], inv_q0: float = 0.0) -> List[Tuple[float, float, float, float]]:
    out = []
    for p in points:
        x, sx = p.abscissa(inv_q0)
        out.append((x, p.b, sx, p.sigma_b))
    return out


def fit_noise_line(points: Sequence[NoisePoint], inv_q0: float = 0.0) -> LineFit:
    """B = B0 + B1 T/Q by weighted orthogonal regression."""
    return orthogonal_linear_fit(line_points(points, inv_q0))


@dataclass(frozen=True)
class OffsetRow:
    inv_q0: float
    fit: Optional[LineFit]
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.fit is not None and self.fit.converged


@dataclass(frozen=True)
class OffsetScanResult:
    rows: Tuple[OffsetRow, ...]
    best_inv_q0: Optional[float]
    best_chi2: Optional[float]
    ci: Tuple[Optional[float], Optional[float]]
    delta_chi2: float
    null_intercept_inv_q0: Optional[float]
    mean_sigma_inv_q: float
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [
                {
                    "inv_q0": r.inv_q0,
                    "ok": r.ok,
                    "message": r.message,
                    "B0": r.fit.intercept if r.fit else None,
                    "sigma_B0": r.fit.sigma_intercept if r.fit else None,
                    "B1": r.fit.slope if r.fit else None,
                    "chi2": r.fit.chi2 if r.fit else None,
                    "dof": r.fit.dof if r.fit else None,
                }
                for r in self.rows
            ],
            "best_inv_q0": self.best_inv_q0,
            "best_chi2": self.best_chi2,
            "ci": list(self.ci),
            "delta_chi2": self.delta_chi2,
            "null_intercept_inv_q0": self.null_intercept_inv_q0,
            "mean_sigma_inv_q": self.mean_sigma_inv_q,
            "meta": dict(self.meta),
        }


def offset_scan(points: Sequence[NoisePoint], inv_q0_grid: Sequence[float], delta_chi2: float = 4.0) -> OffsetScanResult:
    """
    Repeat the B-vs-T/Q fit with a constant offset added to every 1/Q.

    Besides the per-offset rows this locates the chi2-minimising offset
    (refined between grid neighbours), the interval where chi2 stays
    within ``delta_chi2`` of that minimum (None where the grid does not
    reach the boundary) and the offset that drives the intercept to zero.
    """
    grid = np.asarray(inv_q0_grid, dtype=float)
    require(grid.ndim == 1 and grid.size >= 1, "offset grid must be non-empty")
    require(bool(np.all(np.diff(grid) > 0)), "offset grid must be strictly increasing")
    require(delta_chi2 > 0, "delta_chi2 must be positive")

    rows = []
    for q0 in grid:
        try:
            rows.append(OffsetRow(float(q0), fit_noise_line(points, float(q0))))
        except (FitError, PreconditionError) as e:
            logger.warning("Offset 1/Q0=%.3g failed: %s", q0, e)
            rows.append(OffsetRow(float(q0), None, str(e)))

    mean_sig = float(np.mean([p.sigma_inv_q for p in points]))
    good = [i for i, r in enumerate(rows) if r.ok]
    if not good:
        return OffsetScanResult(tuple(rows), None, None, (None, None), delta_chi2, None, mean_sig)

    def chi2_at(q0: float) -> float:
        return fit_noise_line(points, q0).chi2

    def intercept_at(q0: float) -> float:
        return fit_noise_line(points, q0).intercept

    i = min(good, key=lambda j: rows[j].fit.chi2)
    best, best_chi2 = rows[i].inv_q0, rows[i].fit.chi2
    if 0 < i < len(rows) - 1 and rows[i - 1].ok and rows[i + 1].ok:
        ref = minimize_scalar(chi2_at, bounds=(grid[i - 1], grid[i + 1]), method="bounded", options={"xatol": 1e-6 * mean_sig})
        if ref.success and ref.fun <= best_chi2:
            best, best_chi2 = float(ref.x), float(ref.fun)

    target = best_chi2 + delta_chi2
    lower = upper = None
    for j in range(i, -1, -1):
        if rows[j].ok and rows[j].fit.chi2 >= target and rows[j].inv_q0 < best:
            lower = float(brentq(lambda q: chi2_at(q) - target, rows[j].inv_q0, best))
            break
    for j in range(i, len(rows)):
        if rows[j].ok and rows[j].fit.chi2 >= target and rows[j].inv_q0 > best:
            upper = float(brentq(lambda q: chi2_at(q) - target, best, rows[j].inv_q0))
            break

    null = None
    crossings = [
        j for j in range(len(rows) - 1)
        if rows[j].ok and rows[j + 1].ok and np.sign(rows[j].fit.intercept) != np.sign(rows[j + 1].fit.intercept)
    ]
    if crossings:
        j = min(crossings, key=lambda j: abs(rows[j].inv_q0 - best))
        null = float(brentq(intercept_at, rows[j].inv_q0, rows[j + 1].inv_q0))

    return OffsetScanResult(tuple(rows), float(best), float(best_chi2), (lower, upper), delta_chi2, null, mean_sig)
