"""
Tests for the synthetic campaign and the end-to-end analysis pipeline
"""
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cslnoise.campaign import run_campaign
from cslnoise.config import ToolkitConfig, load_config
from cslnoise.constants import convert_units
from cslnoise.eval import CampaignEvaluator, binomial_interval
from cslnoise.fitting import chi2_gate, fit_noise_line, offset_scan
from cslnoise.manifest import digest_tree
from cslnoise.pipeline import run_pipeline, spectrum_name, write_campaign, write_pipeline


def test_campaign_is_deterministic(cfg, res, squid):
    a = run_campaign(res, squid, cfg.campaign_plan(seed=5))
    b = run_campaign(res, squid, cfg.campaign_plan(seed=5))
    c = run_campaign(res, squid, cfg.campaign_plan(seed=6))
    assert [s.digest() for s in a.spectra] == [s.digest() for s in b.spectra]
    assert a.ringdown_rows() == b.ringdown_rows()
    assert [s.digest() for s in a.spectra] != [s.digest() for s in c.spectra]


def test_campaign_layout(cfg, res, squid):
    plan = cfg.campaign_plan(seed=1)
    result = run_campaign(res, squid, plan)
    assert len(result.points) == 10
    p = result.points[0]
    assert p.setpoint == pytest.approx(0.043)
    assert len(p.sweep()) == 4
    assert p.spectrum.n_av == 120
    assert p.spectrum.df == pytest.approx(100_000.0 / 65536)
    meta = p.spectrum.meta
    assert meta["setpoint_k"] == pytest.approx(0.043)
    assert meta["gain"] == 2500.0
    assert meta["q_a"] == p.q_a_noise
    assert abs(meta["temperature_k"] - 0.043) < 0.043 * 0.05
    assert p.spectrum.f[0] >= 7900.0 and p.spectrum.f[-1] <= 8450.0


def test_operating_gain_outside_sweep(cfg, res, squid):
    cfg.campaign.noise_gain = 3000.0
    cfg.campaign.temperatures_mk = [43.0, 102.0]
    result = run_campaign(res, squid, cfg.campaign_plan(seed=2))
    for p in result.points:
        assert len(p.ringdowns) == 5
        assert [r.in_sweep for r in p.ringdowns] == [True, True, True, True, False]
        assert len(p.sweep()) == 4
        assert p.spectrum.meta["gain"] == 3000.0


def test_waveform_ringdowns(cfg, res, squid, tmp_path):
    cfg.campaign.temperatures_mk = [351.0]
    cfg.campaign.ringdown.mode = "waveform"
    cfg.campaign.ringdown.save_waveforms = True
    result = run_campaign(res, squid, cfg.campaign_plan(seed=3))
    for r in result.points[0].ringdowns:
        assert r.waveform is not None
        assert abs(r.q_a - r.q_a_true) < 5.0 * r.sigma_q_a
    written = write_campaign(result, tmp_path)
    names = {p.name for p in written}
    assert f"{spectrum_name(0.351)}.csv" in names
    assert f"{spectrum_name(0.351)}_G2500.csv" in names
    assert "ringdowns.csv" in names


def test_pipeline_recovers_injected_force_noise(cfg):
    result = run_pipeline(cfg, seed=20170601, with_exclusion=False)
    b = result.budget
    injected = convert_units(1.87, "aN^2/Hz", "N^2/Hz")
    assert abs(b.s_f0 - injected) < 4.0 * b.sigma_stat
    assert convert_units(b.coupling, "H", "fH") == pytest.approx(116.0, rel=0.05)
    assert len(result.fits) == 10
    assert result.regression.line.dof == 8
    assert result.exclusion is None
    summary = result.summary()
    assert summary["n_fits"] == 10
    assert summary["lambda_at_1e-7_m"] is None


def test_pipeline_artifacts(cfg, tmp_path):
    cfg.exclusion.n_points = 4
    result = run_pipeline(cfg, seed=8)
    written = write_pipeline(result, tmp_path / "run")
    names = {p.relative_to(tmp_path / "run").as_posix() for p in written}
    for expected in (
        "ringdowns.csv",
        "q_estimates.json",
        "fits.json",
        "spectra_fits.csv",
        "regression.json",
        "regression_points.csv",
        "offset_scan.csv",
        "budget.json",
        "budget.csv",
        "summary.json",
        f"spectra/{spectrum_name(0.043)}.csv",
    ):
        assert expected in names
    if result.exclusion is not None:
        assert "exclusion.csv" in names
        assert result.exclusion.verify(cfg.mass_model())


def test_pipeline_is_reproducible(cfg, tmp_path):
    cfg.campaign.temperatures_mk = [43.0, 84.0, 171.0, 351.0]
    for name in ("a", "b"):
        write_pipeline(run_pipeline(cfg, seed=4, with_exclusion=False), tmp_path / name)
    assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")


def test_binomial_interval_brackets_nominal_rate():
    lo, hi = binomial_interval(100)
    assert lo < 0.6827 < hi
    assert 0.55 < lo and hi < 0.80


@pytest.mark.slow
def test_error_bars_cover_injected_value(cfg):
    """Over 100 seeds the 1-sigma error of S_F0 covers the injected value at ~68%."""
    evaluator = CampaignEvaluator(cfg)
    outcomes = evaluator.run(range(100, 200))
    assert all(o.ok for o in outcomes)
    agg = evaluator.aggregates()
    lo, hi = binomial_interval(len(outcomes), n_sigma=3.0)
    assert lo <= agg["coverage"] <= hi
    assert agg["line_gate_rate"] > 0.8
    # Delta chi2 = 4 interval on the offset, two 2-sigma homogeneity tests
    assert agg["offset_consistent_rate"] >= 0.9
    assert agg["homogeneity_rate"] >= 0.8
    assert "COVERAGE REPORT" in evaluator.generate_report()


# full-scale frames, drawn ringdowns

FULL_SCALE_SEEDS = (20170601, 31, 32)


@pytest.fixture(scope="module")
def full_scale_runs():
    cfg = load_config(Path(__file__).resolve().parents[1] / "config_full_scale.yaml")
    cfg.campaign.ringdown.mode = "draw"
    return [run_pipeline(cfg, seed=s, with_exclusion=False) for s in FULL_SCALE_SEEDS]


@pytest.fixture(scope="module")
def desk_runs():
    cfg = ToolkitConfig()
    cfg.campaign.ringdown.mode = "draw"
    return [run_pipeline(cfg, seed=s, with_exclusion=False) for s in (41, 42, 43)]


def test_full_scale_amplitude_errors(full_scale_runs):
    """2^20-sample frames pin every B to better than 2%."""
    for result in full_scale_runs:
        assert len(result.fits) == 10
        for fit in result.fits:
            assert fit.sigma_B / fit.B < 0.02


def test_full_scale_rejects_biased_inverse_q(full_scale_runs):
    """A 1/Q error of ten mean error bars bends the B-vs-T/Q line out of the 2-sigma band."""
    out_of_band = 0
    for result in full_scale_runs:
        points = result.regression.points
        bias = 10.0 * float(np.mean([p.sigma_inv_q for p in points]))
        clean = fit_noise_line(points)
        biased = fit_noise_line(points, inv_q0=bias)
        assert biased.chi2 > clean.chi2
        out_of_band += not chi2_gate(biased.chi2, biased.dof, n_sigma=2.0).within_band
        # scanning the biased points finds the offset that undoes the bias
        shifted = [replace(p, inv_q=p.inv_q + bias) for p in points]
        scan = offset_scan(shifted, np.linspace(-3.0 * bias, 3.0 * bias, 61))
        assert scan.best_inv_q0 is not None
        assert abs(scan.best_inv_q0 + bias) < bias
    assert out_of_band >= 2


def test_fitted_readout_amplitudes_are_homogeneous(desk_runs):
    """A and C of the readout do not drift with temperature."""
    for name in ("A", "C"):
        consistent = [r.regression.homogeneity[name].consistent for r in desk_runs]
        assert sum(consistent) >= 2
    for r in desk_runs:
        assert r.regression.homogeneity["A"].dof == len(r.fits) - 1


def test_feedback_slopes_are_homogeneous(desk_runs):
    """All temperatures share one SQUID working point, so the 1/Q_a vs 1/G slopes agree."""
    for r in desk_runs:
        assert r.slope_consistency is not None
        assert r.slope_consistency.dof == 9
    assert sum(r.slope_consistency.consistent for r in desk_runs) >= 2
