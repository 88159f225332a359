"""Fourier transforms of homogeneous mass distributions."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy.special import spherical_jn

if TYPE_CHECKING:
    from cslnoise.csl.mass_models import MassModel


def sphere_form_factor(k_mag, R: float, mass: float):
    """mass * 3 j1(kR)/(kR), equal to mass at k = 0 and bounded by it."""
    x = np.abs(np.asarray(k_mag, dtype=float)) * R
    with np.errstate(divide="ignore", invalid="ignore"):
        shape = np.where(x == 0.0, 1.0, 3.0 * spherical_jn(1, x) / np.where(x == 0.0, 1.0, x))
    out = mass * shape
    return float(out) if out.ndim == 0 else out


def cuboid_form_factor(k_vec, dims, mass: float):
    """mass * prod sinc(k_i L_i / 2), with ``k_vec`` of shape (..., 3)."""
    k = np.asarray(k_vec, dtype=float)
    L = np.asarray(dims, dtype=float)
    # np.sinc is sin(pi x)/(pi x)
    out = mass * np.prod(np.sinc(k * L / (2.0 * np.pi)), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def model_transform(model: "MassModel", k_vec: np.ndarray) -> np.ndarray:
    """Complex transform of any mass model on an array of wave vectors (..., 3).

    Composite components are shifted by their offsets and scaled by their
    weights, so cross terms between bodies are kept.
    """
    from cslnoise.csl.mass_models import Composite, Cuboid, Sphere

    k = np.asarray(k_vec, dtype=float)
    if isinstance(model, Sphere):
        return sphere_form_factor(np.linalg.norm(k, axis=-1), model.radius, model.mass).astype(complex)
    if isinstance(model, Cuboid):
        return np.asarray(cuboid_form_factor(k, model.dims, model.mass), dtype=complex)
    if isinstance(model, Composite):
        total = np.zeros(k.shape[:-1], dtype=complex)
        for comp in model.components:
            phase = np.exp(-1j * (k @ np.asarray(comp.offset, dtype=float)))
            total += comp.weight * model_transform(comp.model, k) * phase
        return total
    raise TypeError(f"Unsupported mass model {type(model).__name__}")
