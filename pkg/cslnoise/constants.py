"""Physical constants and the small set of unit conversions the toolkit needs.

Everything inside the package is SI. Non-SI tags (flux quanta, atto-newtons,
femto-henry, nano-kelvin) only appear when reading configs or writing reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

from cslnoise.errors import UnitError


@dataclass(frozen=True)
class PhysConstants:
    """CODATA-2018 values, never mutated."""

    hbar: float = 1.054571817e-34  # J s
    k_B: float = 1.380649e-23  # J/K
    m0: float = 1.67262192369e-27  # kg, nucleon mass used as CSL reference
    Phi0: float = 2.067833848e-15  # Wb

    def __post_init__(self) -> None:
        for name in ("hbar", "k_B", "m0", "Phi0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


PHYS = PhysConstants()

# canonical tag -> aliases accepted at the boundaries
_ALIASES: Dict[str, str] = {
    "phi0^2/Hz": "phi0^2/Hz",
    "Φ₀²/Hz": "phi0^2/Hz",
    "phi0sq/hz": "phi0^2/Hz",
    "Wb^2/Hz": "Wb^2/Hz",
    "Wb²/Hz": "Wb^2/Hz",
    "aN^2/Hz": "aN^2/Hz",
    "aN²/Hz": "aN^2/Hz",
    "N^2/Hz": "N^2/Hz",
    "N²/Hz": "N^2/Hz",
    "m^2/Hz": "m^2/Hz",
    "m²/Hz": "m^2/Hz",
    "fH": "fH",
    "H": "H",
    "nK": "nK",
    "K": "K",
}

# (from, to) -> multiplicative factor; inverses are derived
_FACTORS: Dict[Tuple[str, str], float] = {
    ("phi0^2/Hz", "Wb^2/Hz"): PHYS.Phi0**2,
    ("aN^2/Hz", "N^2/Hz"): 1e-36,
    ("fH", "H"): 1e-15,
    ("nK", "K"): 1e-9,
}

SUPPORTED_UNITS = tuple(sorted(set(_ALIASES.values())))


def canonical_unit(tag: str) -> str:
    try:
        return _ALIASES[tag.strip()]
    except KeyError:
        raise UnitError(f"Unknown unit tag {tag!r}; supported: {', '.join(SUPPORTED_UNITS)}") from None


def convert_units(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between two tags of the same quantity.

    Only the enumerated pairs (and identity) are supported. Inverse
    conversions divide by the forward factor so that a round trip returns the
    input to within a couple of ulps.
    """
    src, dst = canonical_unit(from_unit), canonical_unit(to_unit)
    if src == dst:
        return value
    if (src, dst) in _FACTORS:
        return value * _FACTORS[(src, dst)]
    if (dst, src) in _FACTORS:
        return value / _FACTORS[(dst, src)]
    raise UnitError(
        f"Unsupported conversion {from_unit!r} -> {to_unit!r}",
        details={"from_unit": from_unit, "to_unit": to_unit},
    )


def is_si(tag: str) -> bool:
    return canonical_unit(tag) in {"Wb^2/Hz", "N^2/Hz", "H", "K"}


__all__ = ["PhysConstants", "PHYS", "SUPPORTED_UNITS", "canonical_unit", "convert_units", "is_si"]
