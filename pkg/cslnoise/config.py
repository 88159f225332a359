from __future__ import annotations

from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cslnoise.constants import convert_units
from cslnoise.csl.mass_models import Component, Composite, Cuboid, MassModel, Sphere
from cslnoise.types import CampaignPlan, QPoint, ResonatorParams, RingdownPlan, SquidReadout

# Unit tags live in the key names; everything is converted to SI in the
# to_domain() builders and nowhere else.

# T/Q = 9.5 nK (T / 43 mK)^2, a Q ~ 1/T law through the measured range
DEFAULT_TEMPERATURES_MK = [43.0, 54.0, 68.0, 84.0, 102.0, 132.0, 171.0, 221.0, 281.0, 351.0]


def _default_q_table() -> List["QEntry"]:
    return [QEntry(temperature_mk=t, q=round(0.043**2 / (9.5e-9 * t * 1e-3), -3)) for t in DEFAULT_TEMPERATURES_MK]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SphereConfig(_Section):
    kind: Literal["sphere"] = "sphere"
    radius_m: float = Field(15.5e-6, gt=0)
    density_kg_per_m3: float = Field(7430.0, gt=0)

    def to_domain(self) -> Sphere:
        return Sphere(self.radius_m, self.density_kg_per_m3)


class CuboidConfig(_Section):
    kind: Literal["cuboid"] = "cuboid"
    dims_m: Tuple[float, float, float] = (450e-6, 57e-6, 2.5e-6)
    density_kg_per_m3: float = Field(2330.0, gt=0)

    def to_domain(self) -> Cuboid:
        return Cuboid(tuple(self.dims_m), self.density_kg_per_m3)


class ComponentConfig(_Section):
    model: "MassModelConfig"
    offset_m: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    weight: float = Field(1.0, ge=0, le=1)

    def to_domain(self) -> Component:
        return Component(self.model.to_domain(), tuple(self.offset_m), self.weight)


class CompositeConfig(_Section):
    kind: Literal["composite"] = "composite"
    components: List[ComponentConfig]
    cross_terms: bool = False

    def to_domain(self) -> Composite:
        return Composite(tuple(c.to_domain() for c in self.components), self.cross_terms)


MassModelConfig = Annotated[Union[SphereConfig, CuboidConfig, CompositeConfig], Field(discriminator="kind")]
ComponentConfig.model_rebuild()
CompositeConfig.model_rebuild()


def _default_mass_model() -> CompositeConfig:
    cantilever = CuboidConfig()
    return CompositeConfig(
        components=[
            ComponentConfig(model=SphereConfig()),
            # rigid-body share of the first flexural mode
            ComponentConfig(model=cantilever, offset_m=(-cantilever.dims_m[0] / 2, 0.0, 0.0), weight=0.25),
        ]
    )


class QEntry(_Section):
    temperature_mk: float = Field(gt=0)
    q: float = Field(gt=0)
    sigma_q: float = Field(0.0, ge=0)


class ResonatorConfig(_Section):
    f0_hz: float = Field(8174.01, gt=0)
    k_n_per_m: float = Field(0.40, gt=0)
    dk_rel: float = Field(0.05, ge=0)
    effective_length_m: float = Field(3.66e-4, gt=0)
    magnetic_moment_j_per_t: float = Field(5e-9, gt=0)
    q_table: List[QEntry] = Field(default_factory=_default_q_table)
    mass_model: MassModelConfig = Field(default_factory=_default_mass_model)

    def to_domain(self) -> ResonatorParams:
        table = sorted(self.q_table, key=lambda e: e.temperature_mk)
        return ResonatorParams(
            f0=self.f0_hz,
            k=self.k_n_per_m,
            dk_rel=self.dk_rel,
            q_table=tuple(QPoint(e.temperature_mk * 1e-3, e.q, e.sigma_q) for e in table),
            mass_model=self.mass_model.to_domain(),
            effective_length=self.effective_length_m,
            magnetic_moment=self.magnetic_moment_j_per_t,
        )


class SquidConfig(_Section):
    a_phi0sq_per_hz: float = Field(1.23e-13, ge=0)
    c_phi0sq_per_hz: float = Field(3.78e-13, ge=0)
    f1_minus_f0_hz: float = 1.1
    coupling_fh: float = Field(116.0, gt=0)
    # synthetic: the working-point constant and gains are not published numerically
    spring_coeff: float = Field(0.015, ge=0)
    gain_magnitudes: List[float] = Field(default_factory=lambda: [1000.0, 1500.0, 2000.0, 2500.0])
    gamma: float = Field(11.0, ge=0)
    t_sq_k: float = Field(0.4, ge=0)
    r_sq_ohm: float = Field(8.0, gt=0)

    def to_domain(self, f0: float) -> SquidReadout:
        return SquidReadout(
            A=convert_units(self.a_phi0sq_per_hz, "phi0^2/Hz", "Wb^2/Hz"),
            C=convert_units(self.c_phi0sq_per_hz, "phi0^2/Hz", "Wb^2/Hz"),
            f1=f0 + self.f1_minus_f0_hz,
            coupling=convert_units(self.coupling_fh, "fH", "H"),
            spring_coeff=self.spring_coeff,
            gain_magnitudes=tuple(self.gain_magnitudes),
            gamma=self.gamma,
            t_sq=self.t_sq_k,
            r_sq=self.r_sq_ohm,
        )


class RingdownConfig(_Section):
    mode: Literal["waveform", "draw"] = "waveform"
    fs_hz: float = Field(40_000.0, gt=0)
    duration_tau: float = Field(3.0, gt=0)
    noise_floor_rel: float = Field(0.05, ge=0)
    qa_rel_sigma: float = Field(6e-4, gt=0)
    block_s: float = Field(5e-3, gt=0)
    save_waveforms: bool = False

    def to_domain(self) -> RingdownPlan:
        return RingdownPlan(
            mode=self.mode,
            fs=self.fs_hz,
            duration_tau=self.duration_tau,
            noise_floor_rel=self.noise_floor_rel,
            qa_rel_sigma=self.qa_rel_sigma,
            block_s=self.block_s,
            save_waveforms=self.save_waveforms,
        )


class CampaignConfig(_Section):
    temperatures_mk: List[float] = Field(default_factory=lambda: list(DEFAULT_TEMPERATURES_MK))
    n_av: int = Field(120, ge=1)
    frame_len: int = Field(65536, gt=1)
    fs_hz: float = Field(100_000.0, gt=0)
    seed: int = Field(20170601, ge=0)
    injected_s_f0_an2_per_hz: float = Field(1.87, ge=0)
    noise_gain: Optional[float] = None
    thermometer_rel_sigma: float = Field(0.005, ge=0)
    record_band_hz: Tuple[float, float] = (7900.0, 8450.0)
    ringdown: RingdownConfig = Field(default_factory=RingdownConfig)

    def to_domain(self, gains: List[float], seed: Optional[int] = None) -> CampaignPlan:
        return CampaignPlan(
            temperatures=tuple(t * 1e-3 for t in self.temperatures_mk),
            gain_magnitudes=tuple(gains),
            n_av=self.n_av,
            frame_len=self.frame_len,
            fs=self.fs_hz,
            seed=self.seed if seed is None else seed,
            injected_s_f0=convert_units(self.injected_s_f0_an2_per_hz, "aN^2/Hz", "N^2/Hz"),
            noise_gain=self.noise_gain,
            thermometer_rel_sigma=self.thermometer_rel_sigma,
            record_band=tuple(self.record_band_hz),
            ringdown=self.ringdown.to_domain(),
        )


class FitConfig(_Section):
    band_hz: Tuple[float, float] = (8100.0, 8240.0)
    exclude_peak_bins: int = Field(5, ge=0)
    n_sigma: float = Field(2.0, gt=0)
    # e.g. {"A": 1.23e-13, "C": 3.78e-13} for spectra with one contaminated tail
    hold_phi0sq_per_hz: Dict[Literal["A", "B", "C"], float] = Field(default_factory=dict)

    def hold_si(self) -> Dict[str, float]:
        return {k: convert_units(v, "phi0^2/Hz", "Wb^2/Hz") for k, v in self.hold_phi0sq_per_hz.items()}


class RegressionConfig(_Section):
    offset_min: float = -1.5e-7
    offset_max: float = 1.5e-7
    offset_points: int = Field(61, ge=1)
    delta_chi2: float = Field(4.0, gt=0)

    @model_validator(mode="after")
    def _check_range(self) -> "RegressionConfig":
        if self.offset_points > 1 and not self.offset_max > self.offset_min:
            raise ValueError("offset_max must exceed offset_min")
        return self

    def offset_grid(self) -> List[float]:
        if self.offset_points == 1:
            return [self.offset_min]
        grid = np.linspace(self.offset_min, self.offset_max, self.offset_points)
        # keep an exact zero on symmetric grids
        grid[np.isclose(grid, 0.0, atol=1e-6 * (self.offset_max - self.offset_min))] = 0.0
        return grid.tolist()


class ExclusionConfig(_Section):
    rc_min_m: float = Field(1e-8, gt=0)
    rc_max_m: float = Field(1e-4, gt=0)
    n_points: int = Field(60, ge=1)
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    rel_tol: float = Field(1e-4, gt=0)
    s_f0_an2_per_hz: Optional[float] = Field(None, gt=0)


class ToolkitConfig(_Section):
    label: str = "low-coupling"
    output_dir: str = "runs"
    resonator: ResonatorConfig = Field(default_factory=ResonatorConfig)
    squid: SquidConfig = Field(default_factory=SquidConfig)
    campaign: CampaignConfig = Field(default_factory=CampaignConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    regression: RegressionConfig = Field(default_factory=RegressionConfig)
    exclusion: ExclusionConfig = Field(default_factory=ExclusionConfig)

    @model_validator(mode="after")
    def _check_sampling(self) -> "ToolkitConfig":
        f0 = self.resonator.f0_hz
        camp = self.campaign
        if not camp.fs_hz > 4.0 * f0:
            raise ValueError(f"campaign.fs_hz={camp.fs_hz} must exceed 4 f0 = {4.0 * f0}")
        if not camp.ringdown.fs_hz > 4.0 * f0:
            raise ValueError(f"campaign.ringdown.fs_hz={camp.ringdown.fs_hz} must exceed 4 f0 = {4.0 * f0}")
        lo, hi = camp.record_band_hz
        if not 0 < lo < f0 < hi < camp.fs_hz / 2:
            raise ValueError(f"campaign.record_band_hz={[lo, hi]} must bracket f0 below Nyquist")
        return self

    def resonator_params(self) -> ResonatorParams:
        return self.resonator.to_domain()

    def squid_readout(self) -> SquidReadout:
        return self.squid.to_domain(self.resonator.f0_hz)

    def campaign_plan(self, seed: Optional[int] = None) -> CampaignPlan:
        return self.campaign.to_domain(self.squid.gain_magnitudes, seed)

    def mass_model(self) -> MassModel:
        return self.resonator.mass_model.to_domain()


def load_config(path: str | Path) -> ToolkitConfig:
    path = Path(path)
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    return ToolkitConfig(**data)
