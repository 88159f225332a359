from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Literal, Optional, Tuple

import numpy as np

from cslnoise.constants import canonical_unit
from cslnoise.csl.mass_models import MassModel
from cslnoise.errors import PreconditionError, require
from cslnoise.utils_hash import sha256_arrays


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Spectrum:
    """One-sided PSD on a uniform grid.

    ``valid`` marks bins usable for fitting (DC and Nyquist bins of a
    periodogram are flagged, not deleted). ``meta`` carries provenance such
    as the measurement temperature.
    """

    f: np.ndarray
    psd: np.ndarray
    n_av: int
    rel_err: Optional[np.ndarray] = None
    unit: str = "Wb^2/Hz"
    df: Optional[float] = None
    valid: Optional[np.ndarray] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        f = _frozen_array(self.f)
        psd = _frozen_array(self.psd)
        require(f.ndim == 1 and f.shape == psd.shape and f.size > 0, "spectrum f and psd must be 1D arrays of equal length")
        require(int(self.n_av) >= 1, "n_av must be >= 1", n_av=self.n_av)
        require(bool(np.all(np.isfinite(psd))) and bool(np.all(psd >= 0)), "psd must be finite and non-negative")
        if self.df is None:
            require(f.size >= 2, "single-bin spectrum needs an explicit df")
            df = (f[-1] - f[0]) / (f.size - 1)
        else:
            df = float(self.df)
        require(df > 0, "frequency resolution must be positive", df=df)
        if f.size >= 2:
            tol = 1e-9 * df + 8 * np.finfo(float).eps * float(np.max(np.abs(f)))
            if np.max(np.abs(np.diff(f) - df)) > tol:
                raise PreconditionError("frequency grid is not uniform", details={"df": df})
        rel = np.full(f.size, 1.0 / math.sqrt(self.n_av)) if self.rel_err is None else np.asarray(self.rel_err, float)
        require(rel.shape == f.shape and bool(np.all(rel > 0)), "rel_err must be positive and match the grid")
        valid = np.ones(f.size, bool) if self.valid is None else np.asarray(self.valid, bool)
        require(valid.shape == f.shape, "valid mask must match the grid")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "psd", psd)
        object.__setattr__(self, "n_av", int(self.n_av))
        object.__setattr__(self, "rel_err", _frozen_array(rel))
        object.__setattr__(self, "valid", _frozen_array(valid, bool))
        object.__setattr__(self, "df", float(df))
        object.__setattr__(self, "unit", canonical_unit(self.unit))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return int(self.f.size)

    def band_mask(self, fmin: float, fmax: float) -> np.ndarray:
        return (self.f >= fmin) & (self.f <= fmax) & self.valid

    def with_psd(self, psd: np.ndarray, **changes: Any) -> "Spectrum":
        return replace(self, psd=psd, **changes)

    def with_meta(self, **meta: Any) -> "Spectrum":
        return replace(self, meta={**self.meta, **meta})

    def digest(self) -> str:
        return sha256_arrays(self.f, self.psd, self.rel_err)


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    fs: float
    unit: str = "Wb"
    t0: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = _frozen_array(self.values)
        require(v.ndim == 1 and v.size > 0, "time series must be a non-empty 1D array")
        require(self.fs > 0, "sampling rate must be positive", fs=self.fs)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.fs

    @property
    def duration(self) -> float:
        return self.values.size / self.fs


@dataclass(frozen=True)
class QPoint:
    temperature: float  # K
    q: float
    sigma_q: float = 0.0


@dataclass(frozen=True)
class ResonatorParams:
    f0: float  # Hz
    k: float  # N/m
    dk_rel: float
    q_table: Tuple[QPoint, ...]
    mass_model: MassModel
    effective_length: float  # m, torque-to-force arm
    magnetic_moment: float = 5e-9  # J/T

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_table", tuple(self.q_table))
        require(self.f0 > 0, "f0 must be positive", f0=self.f0)
        require(self.k > 0, "k must be positive", k=self.k)
        require(self.dk_rel >= 0, "dk_rel must be non-negative")
        require(self.effective_length > 0, "effective length must be positive")
        require(all(p.q > 0 for p in self.q_table), "every Q in q_table must be positive")
        temps = [p.temperature for p in self.q_table]
        require(all(t > 0 for t in temps), "q_table temperatures must be positive")
        require(all(b > a for a, b in zip(temps, temps[1:])), "q_table temperatures must be strictly increasing")

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.f0

    @property
    def mass(self) -> float:
        """Modal mass k / omega0^2."""
        return self.k / self.omega0**2

    def q_at(self, temperature: float) -> float:
        """Intrinsic Q at ``temperature``; 1/Q is interpolated linearly in T."""
        require(len(self.q_table) > 0, "q_table is empty")
        temps = np.array([p.temperature for p in self.q_table])
        inv_q = np.array([1.0 / p.q for p in self.q_table])
        if not (temps[0] * (1 - 1e-12) <= temperature <= temps[-1] * (1 + 1e-12)):
            raise PreconditionError(
                "temperature outside the Q(T) table",
                details={"temperature_k": temperature, "table_range_k": [float(temps[0]), float(temps[-1])]},
            )
        return float(1.0 / np.interp(temperature, temps, inv_q))


@dataclass(frozen=True)
class SquidReadout:
    A: float  # Wb^2/Hz
    C: float  # Wb^2/Hz
    f1: float  # Hz
    coupling: float  # H, Phi_x^2 / k
    spring_coeff: float  # c in 1/Q_a = 1/Q + c/|G|
    gain_magnitudes: Tuple[float, ...] = ()
    gamma: float = 11.0
    t_sq: float = 0.4  # K
    r_sq: float = 8.0  # Ohm

    def __post_init__(self) -> None:
        object.__setattr__(self, "gain_magnitudes", tuple(float(g) for g in self.gain_magnitudes))
        require(self.A >= 0 and self.C >= 0, "A and C must be non-negative", A=self.A, C=self.C)
        require(self.f1 > 0, "f1 must be positive")
        require(self.coupling > 0, "coupling must be positive")
        require(all(g >= 10.0 for g in self.gain_magnitudes), "loop gains must satisfy |G| >> 1 (>= 10)")
        require(self.gamma >= 0 and self.t_sq >= 0 and self.r_sq > 0, "backaction parameters out of range")

    def phi_x_sq(self, k: float) -> float:
        """Displacement-to-flux factor squared, Wb^2/m^2."""
        return self.coupling * k


@dataclass(frozen=True)
class RingdownPlan:
    mode: Literal["waveform", "draw"] = "waveform"
    fs: float = 40_000.0
    duration_tau: float = 3.0
    noise_floor_rel: float = 0.05
    qa_rel_sigma: float = 6e-4
    block_s: float = 5e-3
    save_waveforms: bool = False


@dataclass(frozen=True)
class CampaignPlan:
    temperatures: Tuple[float, ...]
    gain_magnitudes: Tuple[float, ...]
    n_av: int
    frame_len: int
    fs: float
    seed: int
    injected_s_f0: float  # N^2/Hz
    noise_gain: Optional[float] = None
    thermometer_rel_sigma: float = 0.005
    record_band: Tuple[float, float] = (7900.0, 8450.0)
    ringdown: RingdownPlan = field(default_factory=RingdownPlan)

    def __post_init__(self) -> None:
        object.__setattr__(self, "temperatures", tuple(float(t) for t in self.temperatures))
        object.__setattr__(self, "gain_magnitudes", tuple(float(g) for g in self.gain_magnitudes))
        t = self.temperatures
        require(len(t) > 0 and all(x > 0 for x in t), "temperatures must be positive")
        require(all(b > a for a, b in zip(t, t[1:])), "temperatures must be sorted")
        require(self.frame_len > 0 and (self.frame_len & (self.frame_len - 1)) == 0, "frame_len must be a power of two", frame_len=self.frame_len)
        require(self.n_av >= 1, "n_av must be >= 1")
        require(self.injected_s_f0 >= 0, "injected s_f0 must be non-negative")
        require(0 <= self.seed < 2**64, "seed must fit in 64 bits", seed=self.seed)
        require(len(self.gain_magnitudes) >= 3, "a ringdown sweep needs at least three gains")

    @property
    def operating_gain(self) -> float:
        return self.noise_gain if self.noise_gain is not None else max(self.gain_magnitudes)

    @property
    def df(self) -> float:
        return self.fs / self.frame_len

    def validate_for(self, res: ResonatorParams) -> None:
        require(self.fs > 4.0 * res.f0, "fs must exceed 4 f0", fs=self.fs, f0=res.f0)
        require(self.ringdown.fs > 4.0 * res.f0, "ringdown fs must exceed 4 f0", fs=self.ringdown.fs, f0=res.f0)
        lo, hi = self.record_band
        require(0 < lo < res.f0 < hi < self.fs / 2, "record band must bracket f0 below Nyquist", band=[lo, hi])
