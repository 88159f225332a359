"""
Tests for constants, units, errors, domain types and configuration
"""
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from cslnoise.config import ToolkitConfig, load_config
from cslnoise.constants import PHYS, convert_units
from cslnoise.errors import NumericalError, PreconditionError, QuadratureError, RingdownError, UnitError
from cslnoise.types import CampaignPlan, Spectrum


def test_flux_quantum_conversion():
    """1 phi0^2/Hz is Phi0^2 Wb^2/Hz and converts back."""
    assert convert_units(1.0, "phi0^2/Hz", "Wb^2/Hz") == pytest.approx(4.27594e-30, rel=1e-5)
    assert PHYS.Phi0 == pytest.approx(2.0678e-15, rel=1e-4)
    v = 3.78e-13
    assert convert_units(convert_units(v, "phi0^2/Hz", "Wb^2/Hz"), "Wb^2/Hz", "phi0^2/Hz") == pytest.approx(v, rel=1e-14)


def test_reporting_units():
    assert convert_units(1.87, "aN^2/Hz", "N^2/Hz") == pytest.approx(1.87e-36)
    assert convert_units(116.0, "fH", "H") == pytest.approx(1.16e-13)
    assert convert_units(5.0, "K", "K") == 5.0


def test_unsupported_conversion_is_unit_error():
    with pytest.raises(UnitError):
        convert_units(1.0, "fH", "N^2/Hz")
    with pytest.raises(UnitError):
        convert_units(1.0, "furlong", "H")


def test_error_exit_codes():
    """Validation failures exit 2, numerical failures exit 3."""
    assert PreconditionError("x").exit_code == 2
    assert UnitError("x").exit_code == 2
    assert RingdownError("x").exit_code == 2
    assert NumericalError("x").exit_code == 3
    assert QuadratureError("x").to_dict()["error"] == "QuadratureError"


def test_spectrum_validation():
    f = np.arange(10.0) + 1.0
    spec = Spectrum(f=f, psd=np.ones(10), n_av=4)
    assert spec.df == 1.0
    assert np.allclose(spec.rel_err, 0.5)
    with pytest.raises(PreconditionError):
        Spectrum(f=f, psd=-np.ones(10), n_av=4)
    with pytest.raises(PreconditionError):
        Spectrum(f=np.array([1.0, 2.0, 4.0]), psd=np.ones(3), n_av=1)


def test_frequency_resolution_of_full_scale_frames():
    """100 kHz sampling with 2^20-sample frames gives 95.367 mHz bins."""
    plan = CampaignPlan(
        temperatures=(0.043,),
        gain_magnitudes=(1000.0, 1500.0, 2000.0),
        n_av=1,
        frame_len=2**20,
        fs=100_000.0,
        seed=1,
        injected_s_f0=0.0,
    )
    assert plan.df == pytest.approx(0.095367, abs=1e-6)


def test_default_config_builds_domain_objects(cfg):
    res, squid = cfg.resonator_params(), cfg.squid_readout()
    assert res.f0 == pytest.approx(8174.01)
    assert squid.f1 == pytest.approx(8175.11)
    assert squid.coupling == pytest.approx(116e-15)
    assert res.q_at(0.043) == pytest.approx(4.526e6, rel=1e-3)
    # Q ~ 1/T through the table
    assert res.q_at(0.351) * 0.351 == pytest.approx(res.q_at(0.043) * 0.043, rel=5e-3)
    with pytest.raises(PreconditionError):
        res.q_at(0.5)


def test_shipped_configs_load():
    root = Path(__file__).resolve().parents[1]
    ref = load_config(root / "config.json")
    full = load_config(root / "config_full_scale.yaml")
    assert ref.campaign.frame_len == 2**16
    assert full.campaign.frame_len == 2**20
    assert ref.resonator_params().k == pytest.approx(0.40)
    assert math.isclose(full.campaign_plan().df, 0.095367431640625)


def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        ToolkitConfig(resonator={"f0": 8174.0})
    with pytest.raises(ValidationError):
        ToolkitConfig(resonator={"k_n_per_m": -1.0})


def test_config_rejects_undersampling_at_load(tmp_path):
    with pytest.raises(ValidationError, match="4 f0"):
        ToolkitConfig(campaign={"fs_hz": 20_000.0, "record_band_hz": (7900.0, 8450.0)})
    with pytest.raises(ValidationError, match="ringdown"):
        ToolkitConfig(campaign={"ringdown": {"fs_hz": 30_000.0}})
    with pytest.raises(ValidationError, match="record_band_hz"):
        ToolkitConfig(campaign={"record_band_hz": (8200.0, 8450.0)})
    path = tmp_path / "slow.yaml"
    path.write_text("campaign:\n  fs_hz: 30000.0\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        load_config(path)
    # the limit follows the configured resonance
    ok = ToolkitConfig(resonator={"f0_hz": 5000.0}, campaign={"fs_hz": 25_000.0, "record_band_hz": (4800.0, 5200.0)})
    assert ok.campaign_plan().fs == 25_000.0


def test_offset_grid_contains_zero(cfg):
    grid = cfg.regression.offset_grid()
    assert len(grid) == 61
    assert 0.0 in grid
    assert grid[0] == pytest.approx(-1.5e-7)


def test_project_structure():
    """Verify essential project files exist."""
    root = Path(__file__).resolve().parents[1]
    assert (root / "cslnoise").exists()
    assert (root / "setup_env.sh").exists()
    assert (root / "pyproject.toml").exists()
