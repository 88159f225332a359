"""Homogeneous mass distributions: sphere, cuboid and weighted composites."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, ClassVar, Dict, Tuple, Union

import numpy as np

from cslnoise.errors import PreconditionError, require
from cslnoise.utils_hash import sha256_text


@dataclass(frozen=True)
class Sphere:
    radius: float
    density: float
    kind: ClassVar[str] = "sphere"

    def __post_init__(self) -> None:
        require(self.radius > 0, "sphere radius must be positive", radius=self.radius)
        require(self.density > 0, "sphere density must be positive", density=self.density)

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.radius**3

    @property
    def mass(self) -> float:
        return self.density * self.volume

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "radius_m": self.radius, "density_kg_per_m3": self.density}


@dataclass(frozen=True)
class Cuboid:
    """Box with edges (Lx, Ly, Lz) along the lab axes."""

    dims: Tuple[float, float, float]
    density: float
    kind: ClassVar[str] = "cuboid"

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        require(len(self.dims) == 3 and all(d > 0 for d in self.dims), "cuboid dims must be three positive lengths", dims=list(self.dims))
        require(self.density > 0, "cuboid density must be positive", density=self.density)

    @property
    def volume(self) -> float:
        return float(np.prod(self.dims))

    @property
    def mass(self) -> float:
        return self.density * self.volume

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dims_m": list(self.dims), "density_kg_per_m3": self.density}


@dataclass(frozen=True)
class Component:
    model: "MassModel"
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    weight: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "offset", tuple(float(o) for o in self.offset))
        require(len(self.offset) == 3, "component offset must be a 3-vector")
        require(0.0 <= self.weight <= 1.0, "component weight must lie in [0, 1]", weight=self.weight)


@dataclass(frozen=True)
class Composite:
    """Weighted sum of bodies.

    A weight scales the density of its body, so it enters the force noise
    squared. With ``cross_terms`` False the bodies are treated as
    uncorrelated (separations much larger than r_C).
    """

    components: Tuple[Component, ...]
    cross_terms: bool = False
    kind: ClassVar[str] = "composite"

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        require(len(self.components) > 0, "composite needs at least one component")
        require(np.isfinite(self.mass) and self.mass > 0, "composite total mass must be finite and positive")

    @property
    def mass(self) -> float:
        return float(sum(c.weight * c.model.mass for c in self.components))

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "cross_terms": self.cross_terms,
            "components": [
                {"model": c.model.describe(), "offset_m": list(c.offset), "weight": c.weight}
                for c in self.components
            ],
        }


MassModel = Union[Sphere, Cuboid, Composite]


def model_id(model: MassModel) -> str:
    """Short stable identifier derived from the model description."""
    return f"{model.kind}-{sha256_text(json.dumps(model.describe(), sort_keys=True))[:12]}"


def model_from_description(desc: Dict[str, Any]) -> MassModel:
    kind = desc.get("kind")
    if kind == "sphere":
        return Sphere(radius=desc["radius_m"], density=desc["density_kg_per_m3"])
    if kind == "cuboid":
        return Cuboid(dims=tuple(desc["dims_m"]), density=desc["density_kg_per_m3"])
    if kind == "composite":
        comps = [
            Component(
                model=model_from_description(c["model"]),
                offset=tuple(c.get("offset_m", (0.0, 0.0, 0.0))),
                weight=c.get("weight", 1.0),
            )
            for c in desc["components"]
        ]
        return Composite(components=tuple(comps), cross_terms=bool(desc.get("cross_terms", False)))
    raise PreconditionError(f"unknown mass model kind {kind!r}")


def reference_geometry(
    sphere_radius: float = 15.5e-6,
    sphere_density: float = 7430.0,
    cantilever_dims: Tuple[float, float, float] = (450e-6, 57e-6, 2.5e-6),
    cantilever_density: float = 2330.0,
    cantilever_weight: float = 0.25,
) -> Composite:
    """Microsphere on a silicon cantilever; motion along the cantilever thickness (z)."""
    return Composite(
        components=(
            Component(Sphere(sphere_radius, sphere_density), weight=1.0),
            Component(Cuboid(cantilever_dims, cantilever_density), offset=(-cantilever_dims[0] / 2, 0.0, 0.0), weight=cantilever_weight),
        )
    )
