"""
Tests for the fit engine: Lorentzian fits, chi-square gates, line regressions,
the 1/Q offset scan and ringdown estimation
"""
import math

import numpy as np
import pytest

from cslnoise import dynamics as dynamics_module
from cslnoise.dynamics import apparent_q, expected_flux_psd, ringdown_tau, sample_averaged_spectrum, simulate_ringdown
from cslnoise.errors import PreconditionError, RingdownError
from cslnoise.eval import binomial_interval
from cslnoise.fitting import ringdown as ringdown_module
from cslnoise.fitting import (
    LorentzFit,
    NoisePoint,
    QEstimate,
    chi2_gate,
    estimate_qa_ringdown,
    fit_lorentzian,
    fit_noise_line,
    fit_q_vs_gain,
    homogeneity_test,
    offset_scan,
    orthogonal_linear_fit,
    recompute_chi2,
    student_t_factor,
    weighted_line,
)

DF = 100_000.0 / 65536


def _model_spectrum(res, squid, T=0.043, s_f0=1.87e-36):
    Q = res.q_at(T)
    q_a = apparent_q(Q, squid.spring_coeff, 2500.0)
    f = np.arange(5300, 5410) * DF
    spec = expected_flux_psd(res, squid, T, Q, q_a, s_f0, f)
    return spec, {"f0": res.f0, "f1": squid.f1, "q_a": q_a}


# Lorentzian fits

def test_noiseless_fit_recovers_amplitudes(res, squid):
    spec, fixed = _model_spectrum(res, squid)
    fit = fit_lorentzian(spec, fixed)
    assert fit.converged and fit.accepted
    assert fit.A == pytest.approx(squid.A, rel=1e-6)
    assert fit.B == pytest.approx(spec.meta["B"], rel=1e-6)
    assert fit.C == pytest.approx(squid.C, rel=1e-6)
    assert fit.chi2 < 1e-10
    assert fit.excluded_bins == 5
    assert fit.dof == fit.n_bins - 3
    assert fit.temperature == pytest.approx(0.043)
    assert recompute_chi2(fit, spec) == pytest.approx(fit.chi2, abs=1e-12)


def test_held_amplitudes(res, squid):
    spec, fixed = _model_spectrum(res, squid)
    fit = fit_lorentzian(spec, fixed, hold={"A": squid.A, "C": squid.C})
    assert fit.held == ("A", "C")
    assert fit.B == pytest.approx(spec.meta["B"], rel=1e-6)
    assert fit.sigma_A == 0.0 and fit.sigma_C == 0.0
    assert fit.dof == fit.n_bins - 1
    with pytest.raises(PreconditionError):
        fit_lorentzian(spec, fixed, hold={"Q": 1.0})


def test_sampled_fit_passes_gate(res, squid):
    spec, fixed = _model_spectrum(res, squid)
    sample = sample_averaged_spectrum(spec, 120, seed=4)
    fit = fit_lorentzian(sample, fixed)
    gate = chi2_gate(fit.chi2, fit.dof, n_sigma=3.0)
    assert gate.within_band
    assert abs(fit.B - spec.meta["B"]) < 5.0 * fit.sigma_B
    again = LorentzFit.from_dict(fit.to_dict())
    assert again == fit


def test_fit_band_outside_grid(res, squid):
    spec, fixed = _model_spectrum(res, squid)
    with pytest.raises(PreconditionError):
        fit_lorentzian(spec, fixed, band=(7000.0, 8200.0))
    with pytest.raises(PreconditionError):
        fit_lorentzian(spec, {"f0": res.f0, "f1": squid.f1})


# chi-square and Student-t

def test_chi2_anchor_values():
    bad = chi2_gate(26.0, 8)
    assert bad.p_value == pytest.approx(0.00105, rel=0.05)
    assert not bad.within_2sigma
    assert chi2_gate(9.27, 8).within_2sigma
    assert chi2_gate(9.27, 8).reduced == pytest.approx(9.27 / 8)


def test_student_t_factor():
    assert student_t_factor(2) == pytest.approx(1.3213, abs=1e-4)
    assert student_t_factor(1000) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(PreconditionError):
        student_t_factor(0)


def test_homogeneity():
    ok = homogeneity_test([1.0, 1.02, 0.98, 1.01], [0.02] * 4)
    assert ok.consistent
    assert ok.mean == pytest.approx(1.0025)
    assert ok.dof == 3
    bad = homogeneity_test([1.0, 1.5, 0.5], [0.02] * 3)
    assert not bad.consistent
    with pytest.raises(PreconditionError):
        homogeneity_test([1.0], [0.1])


# line fits

def test_q_vs_gain_extrapolation():
    inv_q, c = 2.2e-7, 0.015
    gains = [1000.0, 1500.0, 2000.0, 2500.0]
    pts = [(1.0 / g, inv_q + c / g, 1e-8) for g in gains]
    est = fit_q_vs_gain(pts, temperature=0.043)
    assert est.inv_q == pytest.approx(inv_q, rel=1e-9)
    assert est.slope == pytest.approx(c, rel=1e-9)
    assert est.t_factor == pytest.approx(student_t_factor(2))
    assert est.sigma_inv_q == pytest.approx(est.t_factor * est.line.sigma_intercept)
    assert est.q == pytest.approx(1.0 / inv_q)
    assert QEstimate.from_dict(est.to_dict()) == est
    with pytest.raises(PreconditionError):
        fit_q_vs_gain(pts[:2])


def test_degenerate_abscissas():
    with pytest.raises(PreconditionError):
        weighted_line([1.0, 1.0, 1.0], [1.0, 2.0, 3.0], [1.0, 1.0, 1.0])


def test_orthogonal_reduces_to_weighted_least_squares():
    rng = np.random.default_rng(1)
    x = np.linspace(1.0, 10.0, 8)
    sy = np.full(8, 0.3)
    y = 2.0 + 0.5 * x + rng.normal(0.0, 0.3, 8)
    wls = weighted_line(x, y, sy)
    ortho = orthogonal_linear_fit(list(zip(x, y, np.zeros(8), sy)))
    assert ortho.slope == pytest.approx(wls.slope, rel=1e-6)
    assert ortho.intercept == pytest.approx(wls.intercept, rel=1e-6)
    assert ortho.sigma_slope == pytest.approx(wls.sigma_slope, rel=1e-3)
    assert ortho.chi2 == pytest.approx(wls.chi2, rel=1e-6)


def test_orthogonal_fit_with_x_errors():
    x = np.linspace(1.0, 10.0, 10)
    y = 1.0 + 3.0 * x
    fit = orthogonal_linear_fit(list(zip(x, y, np.full(10, 0.1), np.full(10, 0.1))))
    assert fit.slope == pytest.approx(3.0, rel=1e-6)
    assert fit.intercept == pytest.approx(1.0, abs=1e-5)
    assert fit.method == "weighted-orthogonal"
    # x errors enlarge the slope uncertainty relative to y-only weights
    y_only = orthogonal_linear_fit(list(zip(x, y, np.zeros(10), np.full(10, 0.1))))
    assert fit.sigma_slope > y_only.sigma_slope


def _campaign_points(bias=0.0, b0=5.43e-49, b1=1.244e-40):
    temps = [0.043, 0.054, 0.068, 0.084, 0.102, 0.132, 0.171, 0.221, 0.281, 0.351]
    pts = []
    for T in temps:
        inv_q_true = 9.5e-9 * T / 0.043**2
        b = b0 + b1 * T * inv_q_true
        pts.append(
            NoisePoint(
                temperature=T,
                inv_q=inv_q_true - bias,
                sigma_inv_q=0.01 * inv_q_true,
                b=b,
                sigma_b=0.02 * b,
                sigma_temperature=0.005 * T,
            )
        )
    return pts


def test_noise_line_recovers_intercept_and_slope():
    fit = fit_noise_line(_campaign_points())
    assert fit.slope == pytest.approx(1.244e-40, rel=1e-4)
    assert fit.intercept == pytest.approx(5.43e-49, rel=1e-3)
    assert fit.chi2 < 1e-6


def test_offset_scan_without_bias():
    grid = np.linspace(-1.5e-7, 1.5e-7, 61)
    scan = offset_scan(_campaign_points(), grid)
    assert scan.best_inv_q0 == pytest.approx(0.0, abs=2e-9)
    lo, hi = scan.ci
    assert lo is None or lo < 0.0
    assert hi is None or hi > 0.0
    assert len(scan.to_dict()["rows"]) == 61


def test_offset_scan_finds_bias():
    """An underestimated 1/Q shows up as the chi-square-minimising offset."""
    grid = np.linspace(-1.5e-7, 1.5e-7, 61)
    scan = offset_scan(_campaign_points(bias=5e-8), grid)
    assert scan.best_inv_q0 == pytest.approx(5e-8, abs=2e-9)
    lo, hi = scan.ci
    assert lo is None or lo < 5e-8
    assert hi is None or hi > 5e-8
    with pytest.raises(PreconditionError):
        offset_scan(_campaign_points(), grid[::-1])


# ringdown

def test_ringdown_recovers_q_a(res):
    q_a = 2e4
    tau = ringdown_tau(res.f0, q_a)
    ts = simulate_ringdown(res, q_a, 1e-9, duration=3 * tau, fs=40_000.0, noise_floor=5e-11, seed=8)
    est = estimate_qa_ringdown(ts, res.f0)
    assert est.sigma_q_a / est.q_a < 0.01
    assert abs(est.q_a - q_a) < 5.0 * est.sigma_q_a
    assert est.inv_q_a == pytest.approx(1.0 / est.q_a)
    assert est.snr > 10


def test_ringdown_rejects_noise_only(res):
    ts = simulate_ringdown(res, 2e4, 1e-9, duration=2.0, fs=40_000.0, noise_floor=1e-9, seed=8)
    with pytest.raises(RingdownError):
        estimate_qa_ringdown(ts, res.f0)


def test_ringdown_rejects_non_decaying(res):
    ts = simulate_ringdown(res, 1e10, 1e-9, duration=0.5, fs=40_000.0, noise_floor=1e-12, seed=8)
    with pytest.raises(RingdownError):
        estimate_qa_ringdown(ts, res.f0)
    assert math.isfinite(ringdown_tau(res.f0, 1e10))


def test_ringdown_noiseless_high_q(res):
    """A clean record of a Q_a = 5e6 mode gives Q_a to 1e-6."""
    q_a = 5e6
    tau = ringdown_tau(res.f0, q_a)
    ts = simulate_ringdown(res, q_a, 1e-9, duration=0.25 * tau, fs=40_000.0, noise_floor=0.0, seed=8)
    assert len(ts) > 1_900_000
    est = estimate_qa_ringdown(ts, res.f0)
    assert est.q_a == pytest.approx(q_a, rel=1e-6)
    assert est.amplitude == pytest.approx(1e-9, rel=1e-4)


def test_ringdown_result_does_not_depend_on_chunking(res, monkeypatch):
    q_a = 2e4
    tau = ringdown_tau(res.f0, q_a)
    ts = simulate_ringdown(res, q_a, 1e-9, duration=3 * tau, fs=40_000.0, noise_floor=5e-11, seed=8)
    whole = estimate_qa_ringdown(ts, res.f0)
    monkeypatch.setattr(ringdown_module, "CHUNK_SAMPLES", 4096)
    monkeypatch.setattr(dynamics_module, "_CHUNK", 1000)
    again = simulate_ringdown(res, q_a, 1e-9, duration=3 * tau, fs=40_000.0, noise_floor=5e-11, seed=8)
    assert np.array_equal(again.values, ts.values)
    chunked = estimate_qa_ringdown(again, res.f0)
    assert chunked.q_a == pytest.approx(whole.q_a, rel=1e-9)
    assert chunked.snr == pytest.approx(whole.snr, rel=1e-9)


@pytest.mark.slow
def test_ringdown_noiseless_high_q_full_record(res):
    q_a = 5e6
    tau = ringdown_tau(res.f0, q_a)
    ts = simulate_ringdown(res, q_a, 1e-9, duration=3 * tau, fs=40_000.0, noise_floor=0.0, seed=8)
    est = estimate_qa_ringdown(ts, res.f0)
    assert est.q_a == pytest.approx(q_a, rel=1e-6)


def test_single_zero_offset_scan_is_the_plain_fit():
    rng = np.random.default_rng(12)
    pts = [
        NoisePoint(p.temperature, p.inv_q * (1 + 0.01 * rng.normal()), p.sigma_inv_q, p.b * (1 + 0.02 * rng.normal()), p.sigma_b, p.sigma_temperature)
        for p in _campaign_points()
    ]
    plain = fit_noise_line(pts)
    scan = offset_scan(pts, [0.0])
    assert len(scan.rows) == 1
    assert scan.rows[0].fit == plain
    assert scan.best_inv_q0 == 0.0
    assert scan.best_chi2 == plain.chi2


def test_orthogonal_fit_is_symmetric_under_axis_exchange():
    """Swapping x and y maps (B0, B1) to (-B0/B1, 1/B1) and leaves chi2 unchanged."""
    rng = np.random.default_rng(5)
    x_true = np.linspace(1.0, 10.0, 10)
    s = np.full(10, 0.2)
    x = x_true + rng.normal(0.0, 0.2, 10)
    y = 2.0 + 1.5 * x_true + rng.normal(0.0, 0.2, 10)
    fwd = orthogonal_linear_fit(list(zip(x, y, s, s)))
    rev = orthogonal_linear_fit(list(zip(y, x, s, s)))
    assert rev.slope == pytest.approx(1.0 / fwd.slope, rel=1e-6)
    assert rev.intercept == pytest.approx(-fwd.intercept / fwd.slope, rel=1e-6)
    assert rev.chi2 == pytest.approx(fwd.chi2, rel=1e-6)


def test_lorentzian_error_bars_cover_truth(res, squid):
    """1-sigma errors of A, B and C cover the drawn truth at the nominal rate."""
    spec, fixed = _model_spectrum(res, squid)
    truth = {"A": squid.A, "B": spec.meta["B"], "C": squid.C}
    n = 300
    hits = {k: 0 for k in truth}
    for seed in range(n):
        fit = fit_lorentzian(sample_averaged_spectrum(spec, 120, seed=seed), fixed)
        for k, v in truth.items():
            hits[k] += abs(getattr(fit, k) - v) <= getattr(fit, "sigma_" + k)
    lo, hi = binomial_interval(n, n_sigma=3.0)
    for k in truth:
        assert lo <= hits[k] / n <= hi, k
