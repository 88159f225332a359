"""
Reference Budget Rows
=====================
Published regression outputs for the three measured data sets, used as
golden values for the budget estimators.

A reference row stores the B-vs-T/Q intercept and slope (in flux quanta,
slope per nK) with the coupling and residual force noise derived from them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from cslnoise.budget import coupling_from_slope, residual_force_noise
from cslnoise.constants import convert_units
from cslnoise.errors import PreconditionError


@dataclass
class ReferenceRow:
    label: str
    b0_phi0sq_per_hz: float
    sigma_b0_phi0sq_per_hz: float
    b1_phi0sq_per_nk_hz: float
    sigma_b1_phi0sq_per_nk_hz: float
    coupling_fh: float
    sigma_coupling_fh: float
    s_f0_an2_per_hz: float
    sigma_stat_an2_per_hz: float
    sigma_sys_an2_per_hz: float = 0.1
    tags: List[str] = field(default_factory=list)

    def b0_si(self) -> float:
        return convert_units(self.b0_phi0sq_per_hz, "phi0^2/Hz", "Wb^2/Hz")

    def b1_si(self) -> float:
        """Slope in Wb^2/(Hz K)."""
        return convert_units(self.b1_phi0sq_per_nk_hz, "phi0^2/Hz", "Wb^2/Hz") * 1e9

    def check(self, k: float, f0: float, dk_rel: float, rel_tol: float = 0.01) -> Dict[str, float]:
        """Relative deviations of the recomputed coupling and S_F0 from the stored ones."""
        coupling = convert_units(coupling_from_slope(self.b1_si(), k, f0), "H", "fH")
        force = residual_force_noise(self.b0_si(), self.b1_si(), k, f0, dk_rel)
        s = convert_units(force.s_f0, "N^2/Hz", "aN^2/Hz")
        dev = {
            "coupling": coupling / self.coupling_fh - 1.0,
            "s_f0": s / self.s_f0_an2_per_hz - 1.0,
        }
        dev["passed"] = float(all(abs(v) <= rel_tol for v in dev.values()))
        return dev


class ReferenceSet:
    """Collection of reference rows; loads from and saves to JSON."""

    def __init__(self, rows: Optional[List[ReferenceRow]] = None):
        self.rows = rows or []

    @classmethod
    def from_json(cls, path: Path) -> "ReferenceSet":
        path = Path(path)
        if not path.exists():
            raise PreconditionError("reference set not found", details={"path": str(path)})
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls([ReferenceRow(**item) for item in data.get("rows", [])])

    def to_json(self, path: Path) -> None:
        data = {
            "version": "1.0",
            "description": "Reference noise budget rows",
            "rows": [asdict(r) for r in self.rows],
        }
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")

    def get(self, label: str) -> ReferenceRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[ReferenceRow]:
        return iter(self.rows)


REFERENCE_ROWS = [
    ReferenceRow(
        label="low-coupling",
        b0_phi0sq_per_hz=1.27e-19,
        sigma_b0_phi0sq_per_hz=0.11e-19,
        b1_phi0sq_per_nk_hz=0.291e-19,
        sigma_b1_phi0sq_per_nk_hz=0.002e-19,
        coupling_fh=116.0,
        sigma_coupling_fh=1.0,
        s_f0_an2_per_hz=1.87,
        sigma_stat_an2_per_hz=0.16,
        tags=["pulse-tube-off"],
    ),
    ReferenceRow(
        label="high-coupling",
        b0_phi0sq_per_hz=4.3e-19,
        sigma_b0_phi0sq_per_hz=0.4e-19,
        b1_phi0sq_per_nk_hz=0.872e-19,
        sigma_b1_phi0sq_per_nk_hz=0.007e-19,
        coupling_fh=347.0,
        sigma_coupling_fh=3.0,
        s_f0_an2_per_hz=2.12,
        sigma_stat_an2_per_hz=0.20,
        tags=["pulse-tube-off"],
    ),
    ReferenceRow(
        label="pulse-tube-on",
        b0_phi0sq_per_hz=1.71e-19,
        sigma_b0_phi0sq_per_hz=0.13e-19,
        b1_phi0sq_per_nk_hz=0.286e-19,
        sigma_b1_phi0sq_per_nk_hz=0.003e-19,
        coupling_fh=114.0,
        sigma_coupling_fh=2.0,
        s_f0_an2_per_hz=2.58,
        sigma_stat_an2_per_hz=0.20,
        tags=["pulse-tube-on", "held-A-C"],
    ),
]
