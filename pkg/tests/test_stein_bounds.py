import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbdstein.dist_core import PBDParams
from pbdstein.errors import InapplicableError, ParameterDomainError
from pbdstein.poisson_binomial import BernoulliProfile
from pbdstein.stein_bounds import (
    approx_bounds,
    factor_bounds,
    factor_bounds_ab,
    mean_bracket,
    poisson_factor_bounds,
)


def test_factor_bounds_unit():
    rep = factor_bounds(PBDParams(1, 1))
    assert rep["sup_g_15"] == pytest.approx(5 / 7)
    assert rep["sup_d2g_17"] == pytest.approx(2 + 1 / 3.5)
    assert rep["sup_d2g_17"] <= rep["sup_d2g_17_relaxed"] == 3.0
    assert rep["mean_lower_210"] == pytest.approx(2 / 3)
    assert rep["mean_upper_210"] == pytest.approx(5 / 7)


def test_factor_bounds_both_branches_meet():
    rep = factor_bounds(alpha=4.0, beta=1.0)
    assert rep["sup_g_15"] == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e4), st.floats(1e-3, 1e4))
def test_factor_bounds_direct_evaluation(alpha, beta):
    # plain (unrationalized) formulas, where they do not cancel
    rep = factor_bounds(alpha=alpha, beta=beta)
    first = 1 / (beta + 2 * alpha / (alpha + 2 * beta + 2))
    second = (math.sqrt(alpha + (beta - 1) ** 2 / 4) + (1 - beta) / 2) / alpha
    assert rep["sup_g_15"] == pytest.approx(min(first, second), rel=1e-6)
    assert rep["sup_d2g_17"] <= 3 / alpha * (1 + 1e-12)
    lo, hi = rep["mean_lower_210"], rep["mean_upper_210"]
    assert lo <= hi * (1 + 1e-12)


def test_ab_reduction_at_zero():
    rep = factor_bounds_ab(2.0, 0.0)
    assert rep["sup_gt_18"] == 1.0
    assert rep["sup_dgt_19"] == pytest.approx(1.2, abs=1e-15)
    assert rep["sup_d2gt_110"] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("a", [1.0, 2.0, 4.0, 25.0])
def test_ab_small_b_approaches_limit(a):
    at0 = factor_bounds_ab(a, 0.0)
    near = factor_bounds_ab(a, 1e-10)
    for key in ("sup_gt_18", "sup_dgt_19", "sup_d2gt_110"):
        assert near[key] == pytest.approx(at0[key], rel=1e-6)


def test_ab_matches_scaled_alpha_beta():
    # g~ = beta g, so the a/b bounds are beta times the alpha/beta ones where both are sharp forms
    a, b = 3.0, 0.5
    ab = factor_bounds_ab(a, b)
    pb = factor_bounds(PBDParams.from_ab(a, b))
    beta = 1 / b
    assert ab["sup_gt_18"] == pytest.approx(beta * pb["sup_g_15"], rel=1e-12)
    assert ab["sup_dgt_19"] == pytest.approx(beta * pb["sup_dg_16"], rel=1e-12)
    assert ab["sup_d2gt_110"] == pytest.approx(beta * pb["sup_d2g_17"], rel=1e-12)


def test_poisson_factor_bounds():
    one = poisson_factor_bounds(1.0)
    assert one["pn_g_111"] == 1.0 and one["pn_dg_112"] == 1.0
    assert one["pn_d2g_113"] == pytest.approx(4 / 3)
    assert poisson_factor_bounds(4.0)["pn_dg_112"] == pytest.approx(8 / (3 * math.sqrt(8 * math.e)))
    assert poisson_factor_bounds(4.0)["pn_dg_112"] == pytest.approx(0.5718426, abs=1e-7)


def test_approx_bounds_hundred_tenths():
    rep = approx_bounds(BernoulliProfile([0.1] * 100))
    assert rep["pbd_application_114"] == pytest.approx(0.03 + 0.6 / 8.89, rel=1e-12)
    assert rep["pbd_application_114"] == pytest.approx(0.097492, abs=1e-6)
    assert rep["bx_shifted"] == pytest.approx(4 / 9, rel=1e-12)
    assert rep["pbd_application_114"] < rep["bx_shifted"]


def test_approx_bounds_inapplicable_is_named():
    rep = approx_bounds(BernoulliProfile([0.5, 0.5]))
    assert rep["bx_shifted"] == pytest.approx(4.0)
    with pytest.raises(InapplicableError):
        rep["pbd_application_114"]
    d = rep.to_dict()
    assert d["pbd_application_114"] is None and "fit" in d["pbd_application_114_reason"]
    json.loads(rep.to_json())
    assert rep.to_csv().startswith("bound_id,value\n")


def test_sigma_bound_needs_three_summands():
    rep = approx_bounds(BernoulliProfile([0.5, 0.5]))
    assert "remark_sigma" in rep.inapplicable


def test_domain_errors():
    with pytest.raises(ParameterDomainError):
        factor_bounds(alpha=0.0, beta=1.0)
    with pytest.raises(ParameterDomainError):
        factor_bounds_ab(1.0, -1.0)
    with pytest.raises(ParameterDomainError):
        mean_bracket(1.0, -2.0)
