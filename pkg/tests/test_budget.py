"""
Tests for the noise budget estimators and the reference budget rows
"""
import math
from pathlib import Path

import pytest

from cslnoise.budget import (
    NoiseBudget,
    backaction_increase,
    budget_table,
    build_budget,
    coupling_from_slope,
    magnetic_field_noise_equiv,
    residual_force_noise,
)
from cslnoise.constants import convert_units
from cslnoise.errors import PreconditionError
from cslnoise.eval import REFERENCE_ROWS, ReferenceSet
from cslnoise.fitting import LineFit

GOLDEN = Path(__file__).parent / "golden_set.json"


def _slope(phi0sq_per_nk_hz):
    return convert_units(phi0sq_per_nk_hz, "phi0^2/Hz", "Wb^2/Hz") * 1e9


def _intercept(phi0sq_per_hz):
    return convert_units(phi0sq_per_hz, "phi0^2/Hz", "Wb^2/Hz")


@pytest.mark.parametrize("b1, coupling_fh", [(0.291e-19, 115.7), (0.872e-19, 346.8), (0.286e-19, 113.7)])
def test_coupling_from_slope(res, b1, coupling_fh):
    coupling = coupling_from_slope(_slope(b1), res.k, res.f0)
    assert convert_units(coupling, "H", "fH") == pytest.approx(coupling_fh, rel=2e-3)


@pytest.mark.parametrize(
    "b0, b1, s_f0_an2",
    [(1.27e-19, 0.291e-19, 1.877), (4.3e-19, 0.872e-19, 2.121), (1.71e-19, 0.286e-19, 2.572)],
)
def test_residual_force_noise(res, b0, b1, s_f0_an2):
    est = residual_force_noise(_intercept(b0), _slope(b1), res.k, res.f0, res.dk_rel)
    assert convert_units(est.s_f0, "N^2/Hz", "aN^2/Hz") == pytest.approx(s_f0_an2, rel=2e-3)
    assert est.sigma_sys == pytest.approx(0.05 * est.s_f0)
    assert est.flags == ()


def test_intercept_follows_from_force_noise_and_coupling(res):
    """B0 = S_F0 * coupling / k."""
    B0, B1 = _intercept(1.27e-19), _slope(0.291e-19)
    s = residual_force_noise(B0, B1, res.k, res.f0, 0.0).s_f0
    coupling = coupling_from_slope(B1, res.k, res.f0)
    assert s * coupling / res.k == pytest.approx(B0, rel=1e-12)


def test_error_propagation(res):
    B0, B1 = _intercept(1.27e-19), _slope(0.291e-19)
    sB0, sB1 = _intercept(0.11e-19), _slope(0.002e-19)
    est = residual_force_noise(B0, B1, res.k, res.f0, 0.0, sB0, sB1)
    expected = est.s_f0 * math.hypot(sB0 / B0, sB1 / B1)
    assert est.sigma_stat == pytest.approx(expected, rel=1e-9)
    # positive covariance between intercept and slope shrinks the ratio error
    correlated = residual_force_noise(B0, B1, res.k, res.f0, 0.0, sB0, sB1, 0.5 * sB0 * sB1)
    assert correlated.sigma_stat < est.sigma_stat


def test_negative_intercept_is_flagged(res):
    est = residual_force_noise(-_intercept(0.2e-19), _slope(0.291e-19), res.k, res.f0, 0.05)
    assert est.s_f0 < 0
    assert est.flags == ("negative_intercept",)
    assert est.sigma_sys > 0


def test_nonpositive_slope_rejected(res):
    with pytest.raises(PreconditionError):
        residual_force_noise(_intercept(1e-19), 0.0, res.k, res.f0, 0.05)
    with pytest.raises(PreconditionError):
        coupling_from_slope(-1.0, res.k, res.f0)


def test_backaction_increase_between_couplings(res, squid):
    delta = backaction_increase(115.7e-15, 346.8e-15, squid, res.k)
    assert 0.6 <= convert_units(delta, "N^2/Hz", "aN^2/Hz") <= 0.75


def test_magnetic_field_equivalent(res):
    b_n = magnetic_field_noise_equiv(1.87e-36, res.magnetic_moment, res.effective_length)
    assert b_n == pytest.approx(1.0e-13, rel=0.01)
    with pytest.raises(PreconditionError):
        magnetic_field_noise_equiv(1.87e-36, 0.0, res.effective_length)


def _line(b0, b1, s0, s1):
    return LineFit(
        intercept=b0,
        slope=b1,
        sigma_intercept=s0,
        sigma_slope=s1,
        cov=((s0 * s0, 0.0), (0.0, s1 * s1)),
        chi2=9.27,
        dof=8,
        method="weighted-orthogonal",
        n_points=10,
    )


def test_build_budget_and_round_trip(res, squid):
    line = _line(_intercept(1.27e-19), _slope(0.291e-19), _intercept(0.11e-19), _slope(0.002e-19))
    budget = build_budget("low-coupling", line, res, squid)
    d = budget.to_dict()
    assert d["coupling_fh"] == pytest.approx(115.7, rel=2e-3)
    assert d["s_f0_an2_per_hz"] == pytest.approx(1.877, rel=2e-3)
    assert d["sigma_stat_an2_per_hz"] == pytest.approx(0.16, rel=0.1)
    assert d["b1_phi0sq_per_nk_hz"] == pytest.approx(0.291e-19)
    again = NoiseBudget.from_dict(d)
    assert again.s_f0 == pytest.approx(budget.s_f0, rel=1e-12)
    assert again.b1 == pytest.approx(budget.b1, rel=1e-12)
    table = budget_table([budget])
    assert list(table["label"]) == ["low-coupling"]
    assert table.loc[0, "magnetic_equiv_field_t_per_rthz"] == pytest.approx(1.0e-13, rel=0.01)


@pytest.mark.parametrize("row", REFERENCE_ROWS, ids=lambda r: r.label)
def test_reference_rows_reproduce(res, row):
    dev = row.check(res.k, res.f0, res.dk_rel)
    assert dev["passed"] == 1.0, dev


def test_reference_set_json(tmp_path):
    refs = ReferenceSet.from_json(GOLDEN)
    assert len(refs) == 3
    assert refs.get("pulse-tube-on").s_f0_an2_per_hz == pytest.approx(2.58)
    out = tmp_path / "refs.json"
    refs.to_json(out)
    assert [r.label for r in ReferenceSet.from_json(out)] == ["low-coupling", "high-coupling", "pulse-tube-on"]
    with pytest.raises(KeyError):
        refs.get("missing")
    with pytest.raises(PreconditionError):
        ReferenceSet.from_json(tmp_path / "none.json")
