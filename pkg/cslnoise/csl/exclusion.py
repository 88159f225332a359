"""Inversion of a measured force noise into a lambda(r_C) exclusion curve."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from cslnoise.csl.force_noise import DEFAULT_REL_TOL, csl_force_psd
from cslnoise.csl.mass_models import MassModel, model_from_description, model_id
from cslnoise.errors import QuadratureError, require

logger = logging.getLogger(__name__)

RC_MIN = 1e-8
RC_MAX = 1e-4


def default_rc_grid(n_points: int = 60, rc_min: float = RC_MIN, rc_max: float = RC_MAX) -> List[float]:
    return [float(r) for r in np.logspace(math.log10(rc_min), math.log10(rc_max), n_points)]


@dataclass(frozen=True)
class ExclusionPoint:
    r_c: float
    lambda_max: Optional[float]
    flagged: bool = False
    message: str = ""


@dataclass(frozen=True)
class ExclusionCurve:
    points: Tuple[ExclusionPoint, ...]
    s_f0_used: float
    mass_model_id: str
    model_description: Dict[str, Any] = field(default_factory=dict)
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    rel_tol: float = DEFAULT_REL_TOL

    @property
    def r_c(self) -> np.ndarray:
        return np.array([p.r_c for p in self.points])

    @property
    def lambda_max(self) -> np.ndarray:
        return np.array([np.nan if p.lambda_max is None else p.lambda_max for p in self.points])

    def lambda_at(self, r_c: float) -> float:
        """Log-log interpolation over the unflagged points."""
        good = [p for p in self.points if not p.flagged]
        require(len(good) > 0, "exclusion curve has no valid points")
        x = np.log([p.r_c for p in good])
        y = np.log([p.lambda_max for p in good])
        return float(np.exp(np.interp(math.log(r_c), x, y)))

    def verify(self, model: MassModel, rtol: float = 1e-6) -> bool:
        for p in self.points:
            if p.flagged:
                continue
            s = csl_force_psd(model, p.lambda_max, p.r_c, self.axis, self.rel_tol)
            if abs(s - self.s_f0_used) > rtol * self.s_f0_used:
                return False
        return True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "s_f0_n2_per_hz": self.s_f0_used,
            "mass_model_id": self.mass_model_id,
            "mass_model": self.model_description,
            "axis": list(self.axis),
            "quadrature_rel_tol": self.rel_tol,
            "points": [
                {"r_c_m": p.r_c, "lambda_max_per_s": p.lambda_max, "flagged": p.flagged, "message": p.message}
                for p in self.points
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExclusionCurve":
        return cls(
            points=tuple(
                ExclusionPoint(p["r_c_m"], p["lambda_max_per_s"], p.get("flagged", False), p.get("message", ""))
                for p in data["points"]
            ),
            s_f0_used=data["s_f0_n2_per_hz"],
            mass_model_id=data["mass_model_id"],
            model_description=data.get("mass_model", {}),
            axis=tuple(data.get("axis", (0.0, 0.0, 1.0))),
            rel_tol=data.get("quadrature_rel_tol", DEFAULT_REL_TOL),
        )

    def model(self) -> MassModel:
        return model_from_description(self.model_description)


def exclusion_curve(
    s_f0: float,
    model: MassModel,
    rc_grid: Sequence[float],
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    rel_tol: float = DEFAULT_REL_TOL,
    progress: bool = False,
) -> ExclusionCurve:
    """lambda_max(r_C) = s_f0 / S_F(lambda = 1, r_C), assuming all of s_f0 is CSL."""
    require(s_f0 > 0, "s_f0 must be positive", s_f0=s_f0)
    grid = [float(r) for r in rc_grid]
    require(len(grid) > 0, "rc_grid is empty")
    require(all(b > a for a, b in zip(grid, grid[1:])), "rc_grid must be strictly increasing")
    require(
        all(RC_MIN * (1 - 1e-12) <= r <= RC_MAX * (1 + 1e-12) for r in grid),
        f"rc_grid must lie within [{RC_MIN:g}, {RC_MAX:g}] m",
        rc_min=grid[0],
        rc_max=grid[-1],
    )

    points: List[ExclusionPoint] = []
    for r_c in tqdm(grid, desc="r_C scan", disable=not progress, leave=False):
        try:
            unit = csl_force_psd(model, 1.0, r_c, axis, rel_tol)
            points.append(ExclusionPoint(r_c, s_f0 / unit))
        except QuadratureError as exc:
            logger.warning("Quadrature failed at r_C=%.3e m: %s", r_c, exc.message)
            points.append(ExclusionPoint(r_c, None, flagged=True, message=exc.message))

    return ExclusionCurve(
        points=tuple(points),
        s_f0_used=float(s_f0),
        mass_model_id=model_id(model),
        model_description=model.describe(),
        axis=tuple(float(a) for a in axis),
        rel_tol=rel_tol,
    )
