"""CSL force-noise spectral density for homogeneous bodies.

    S_F = 2 hbar^2 lambda r_C^3 / (pi^{3/2} m0^2) * I,
    I   = int d^3k (k.n)^2 exp(-k^2 r_C^2) |mu(k)|^2

where n is the direction of the monitored motion. The sphere integral is
reduced to a radial quadrature, the cuboid integral factorises into closed
forms along the three box axes. Two brute-force integrators (tensor
Gauss-Hermite cubature and Gaussian importance sampling) work for any model
and are used to cross-check the fast paths.
"""

from __future__ import annotations

import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.special import erf, gamma, gammaincc

from cslnoise.constants import PHYS
from cslnoise.csl.form_factors import model_transform
from cslnoise.csl.mass_models import Composite, Cuboid, MassModel, Sphere
from cslnoise.errors import PreconditionError, QuadratureError, require

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-4
_SQRT_PI = math.sqrt(math.pi)


def _check_axis(axis: Sequence[float]) -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise PreconditionError("axis must be a normalized 3-vector", details={"axis": list(np.ravel(n))})
    return n


def csl_prefactor(lam: float, r_c: float) -> float:
    return 2.0 * PHYS.hbar**2 * lam * r_c**3 / (math.pi**1.5 * PHYS.m0**2)


def _sphere_shape_sq(u: float) -> float:
    # (3 j1(u)/u)^2 with a series near the origin
    if u < 0.1:
        u2 = u * u
        s = 1.0 - u2 / 10.0 + u2 * u2 / 280.0 - u2**3 / 15120.0 + u2**4 / 1330560.0
    else:
        s = 3.0 * (math.sin(u) - u * math.cos(u)) / u**3
    return s * s


def sphere_k_integral(radius: float, mass: float, r_c: float, rel_tol: float = DEFAULT_REL_TOL) -> Tuple[float, float]:
    """Return (I, abserr) for a homogeneous sphere.

    With u = kR and w = R/r_C the integral becomes
    (4 pi / 3) mass^2 R^-5 int_0^umax u^4 exp(-u^2/w^2) F(u)^2 du. The range is
    cut into segments a few oscillations long; integration stops early once
    the Gaussian tail bound is negligible.
    """
    w = radius / r_c
    u_max = 20.0 * radius / min(r_c, radius)
    seg = min(8.0 * math.pi, w)
    n_seg = max(1, int(math.ceil(u_max / seg)))
    inv_w2 = 1.0 / (w * w)

    def f(u: float) -> float:
        return u**4 * math.exp(-u * u * inv_w2) * _sphere_shape_sq(u)

    total, err = 0.0, 0.0
    for i in range(n_seg):
        a, b = i * seg, min((i + 1) * seg, u_max)
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-10, limit=200)
        total += val
        err += e
        # int_b^inf u^4 exp(-u^2/w^2) du, using |F| <= 1
        tail = 0.5 * w**5 * gamma(2.5) * gammaincc(2.5, (b / w) ** 2)
        if total > 0 and tail < 1e-3 * rel_tol * total:
            break
    err += tail
    scale = 4.0 * math.pi / 3.0 * mass**2 / radius**5
    value, abserr = scale * total, scale * err
    if not (value > 0 and abserr <= rel_tol * value):
        raise QuadratureError(
            "sphere radial quadrature did not converge",
            details={"radius_m": radius, "r_c_m": r_c, "value": value, "abserr": abserr, "rel_tol": rel_tol},
        )
    return value, abserr


def _box_even(L: float, r_c: float) -> float:
    # int dk sinc^2(kL/2) exp(-k^2 r_c^2)
    a = 0.5 * L
    return (math.pi * a * erf(a / r_c) + _SQRT_PI * r_c * math.expm1(-(a / r_c) ** 2)) / (a * a)


def _box_second(L: float, r_c: float) -> float:
    # int dk k^2 sinc^2(kL/2) exp(-k^2 r_c^2)
    return -2.0 * _SQRT_PI / (L * L * r_c) * math.expm1(-((L / (2.0 * r_c)) ** 2))


def cuboid_k_integral(dims: Sequence[float], mass: float, r_c: float, axis: np.ndarray) -> float:
    """Closed form: sum_i n_i^2 J2(L_i) prod_{j != i} J0(L_j); mixed terms vanish by parity."""
    even = [_box_even(L, r_c) for L in dims]
    second = [_box_second(L, r_c) for L in dims]
    total = 0.0
    for i in range(3):
        if axis[i] == 0.0:
            continue
        others = [even[j] for j in range(3) if j != i]
        total += axis[i] ** 2 * second[i] * others[0] * others[1]
    return mass**2 * total


def _hermite_integral(model: MassModel, r_c: float, axis: np.ndarray, n_nodes: int) -> float:
    u, wts = np.polynomial.hermite.hermgauss(n_nodes)
    k1 = u / r_c
    total = 0.0
    # one slab of the tensor grid at a time keeps memory at n^2
    ky, kz = np.meshgrid(k1, k1, indexing="ij")
    wyz = np.outer(wts, wts)
    for kx, wx in zip(k1, wts):
        k = np.stack([np.full_like(ky, kx), ky, kz], axis=-1)
        proj = k @ axis
        g = proj**2 * np.abs(model_transform(model, k)) ** 2
        total += wx * float(np.sum(wyz * g))
    return total / r_c**3


def csl_force_psd_cubature(
    model: MassModel,
    lam: float,
    r_c: float,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    n_nodes: int = 64,
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """Tensor Gauss-Hermite evaluation of the full 3D integral.

    Only accurate when bodies and offsets span a few r_C; convergence is
    judged by repeating the rule with 1.5x the nodes.
    """
    n = _check_axis(axis)
    require(lam >= 0 and r_c > 0, "lambda must be >= 0 and r_C > 0", lam=lam, r_c=r_c)
    coarse = _hermite_integral(model, r_c, n, n_nodes)
    fine = _hermite_integral(model, r_c, n, n_nodes + n_nodes // 2)
    if abs(fine - coarse) > rel_tol * abs(fine):
        raise QuadratureError(
            "Gauss-Hermite cubature did not converge",
            details={"coarse": coarse, "fine": fine, "n_nodes": n_nodes, "r_c_m": r_c},
        )
    return csl_prefactor(lam, r_c) * fine


def csl_force_psd_monte_carlo(
    model: MassModel,
    lam: float,
    r_c: float,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    n_samples: int = 10_000_000,
    seed: int = 0,
    chunk: int = 1_000_000,
) -> Tuple[float, float]:
    """Gaussian importance sampling: k = u/r_C with u ~ N(0, I/2).

    Returns (S_F, standard error).
    """
    n = _check_axis(axis)
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        k = rng.normal(0.0, math.sqrt(0.5), size=(m, 3)) / r_c
        g = (k @ n) ** 2 * np.abs(model_transform(model, k)) ** 2
        s1 += float(g.sum())
        s2 += float((g * g).sum())
        done += m
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    scale = math.pi**1.5 / r_c**3 * csl_prefactor(lam, r_c)
    return scale * mean, scale * math.sqrt(var / n_samples)


def k_integral(model: MassModel, r_c: float, axis: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> float:
    if isinstance(model, Sphere):
        return sphere_k_integral(model.radius, model.mass, r_c, rel_tol)[0]
    if isinstance(model, Cuboid):
        return cuboid_k_integral(model.dims, model.mass, r_c, axis)
    if isinstance(model, Composite):
        if model.cross_terms:
            return csl_force_psd_cubature(model, 1.0, r_c, axis, rel_tol=rel_tol) / csl_prefactor(1.0, r_c)
        return sum(c.weight**2 * k_integral(c.model, r_c, axis, rel_tol) for c in model.components)
    raise TypeError(f"Unsupported mass model {type(model).__name__}")


def csl_force_psd(
    model: MassModel,
    lam: float,
    r_c: float,
    axis: Sequence[float] = (0.0, 0.0, 1.0),
    rel_tol: float = DEFAULT_REL_TOL,
) -> float:
    """One-sided white CSL force PSD in N^2/Hz along ``axis``."""
    n = _check_axis(axis)
    require(lam >= 0, "lambda must be non-negative", lam=lam)
    require(r_c > 0, "r_C must be positive", r_c=r_c)
    if lam == 0:
        return 0.0
    return csl_prefactor(lam, r_c) * k_integral(model, r_c, n, rel_tol)
