import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bessel_mean, bessel_pi, ratio_recursion
from pbdstein.dist_core import (
    ABParams,
    PBDParams,
    PolynomialRates,
    TruncatedPmf,
    cdf_tables,
    general_equilibrium,
    moment,
    pbd_equilibrium,
    poisson_pmf,
)
from pbdstein.errors import DivergenceError, ParameterDomainError


@pytest.mark.parametrize("alpha,beta", [(0, 1), (1, 0), (-1, 1), (math.nan, 1), (1, math.inf)])
def test_params_reject_bad_values(alpha, beta):
    with pytest.raises(ParameterDomainError):
        PBDParams(alpha, beta)


def test_ab_mapping_round_trip():
    p = PBDParams(6.0, 3.0)
    assert p.a == pytest.approx(2.0) and p.b == pytest.approx(1 / 3)
    q = PBDParams.from_ab(p.a, p.b)
    assert q.alpha == pytest.approx(6.0) and q.beta == pytest.approx(3.0)
    with pytest.raises(ParameterDomainError):
        ABParams(1.0, -0.1)


def test_unit_rates_match_bessel_oracle():
    pmf = pbd_equilibrium(PBDParams(1, 1), tol=1e-12)
    for k in range(8):
        assert pmf.probs[k] == pytest.approx(bessel_pi(k), rel=1e-13)
    assert pmf.probs[0] == pytest.approx(0.4386763, abs=1e-7)
    assert pmf.tail_bound <= 1e-12


def test_five_two_normalized_and_balanced():
    pmf = pbd_equilibrium(PBDParams(5, 2), tol=1e-10)
    assert abs(math.fsum(pmf.probs) - 1) <= 1e-10
    p = pmf.probs
    i = np.arange(pmf.N)
    death = 2 * (i + 1) + (i + 1) * i
    assert np.max(np.abs(5 * p[:-1] - death * p[1:])) < 1e-12
    ref = ratio_recursion(5, 2)
    # renormalizing the retained mass shifts every term by at most the tail bound
    assert np.allclose(p, ref[: p.size], rtol=2 * pmf.tail_bound + 1e-13, atol=0)


def test_poisson_view_is_poisson():
    pmf = pbd_equilibrium(ABParams(2.0, 0.0), tol=1e-12)
    assert pmf.probs[0] == pytest.approx(math.exp(-2), rel=1e-14)
    k = np.arange(10)
    ref = np.exp(-2) * 2.0**k / np.array([math.factorial(x) for x in k])
    assert np.allclose(pmf.probs[:10], ref, rtol=1e-13)


def test_ab_and_alpha_beta_forms_agree():
    a = pbd_equilibrium(PBDParams(6.0, 3.0), tol=1e-12)
    b = pbd_equilibrium(ABParams(2.0, 1 / 3), tol=1e-12)
    n = min(a.probs.size, b.probs.size)
    assert np.allclose(a.probs[:n], b.probs[:n], rtol=1e-12, atol=1e-300)


def test_general_poisson():
    pmf = general_equilibrium(PolynomialRates([3.0], [0.0, 1.0]), tol=1e-12)
    ref = poisson_pmf(3.0, tol=1e-12)
    n = min(pmf.probs.size, ref.probs.size)
    assert np.allclose(pmf.probs[:n], ref.probs[:n], rtol=1e-12)


def test_general_binomial_with_cap():
    rates = PolynomialRates([1.0, -0.5], [0.0, 0.5], support_cap=2)
    pmf = general_equilibrium(rates)
    assert np.allclose(pmf.probs, [0.25, 0.5, 0.25], atol=1e-15)
    assert pmf.tail_bound == 0.0


def test_general_squared_deaths_matches_pbd():
    a = general_equilibrium(PolynomialRates([1.0], [0.0, 0.0, 1.0]), tol=1e-12)
    b = pbd_equilibrium(PBDParams(1, 1), tol=1e-12)
    assert a.probs.size == b.probs.size
    assert np.array_equal(a.probs, b.probs)


def test_general_divergent_rates():
    with pytest.raises(DivergenceError):
        general_equilibrium(PolynomialRates([1.0, 2.0], [0.0, 1.0]))


def test_moments():
    assert moment(TruncatedPmf.point_mass(0), 1).value == 0.0
    assert moment(pbd_equilibrium(PBDParams(1, 1), 1e-12), 1).value == pytest.approx(bessel_mean(), abs=1e-12)
    m = moment(poisson_pmf(2.0, 1e-12), 2)
    assert abs(m.value - 6.0) <= m.tail_contribution
    assert m.tail_contribution < 1e-9


def test_cdf_tables_small_cases():
    F, Fb = cdf_tables(TruncatedPmf.point_mass(0))
    assert F.tolist() == [1.0] and Fb.tolist() == [1.0]
    F, Fb = cdf_tables(TruncatedPmf(np.array([0.7, 0.3]), 0.0))
    assert np.allclose(F, [0.7, 1.0]) and np.allclose(Fb, [1.0, 0.3])
    F, _ = cdf_tables(pbd_equilibrium(PBDParams(1, 1), 1e-12))
    assert F[1] == pytest.approx(2 * bessel_pi(0), abs=1e-13)


def test_pmf_serialization_round_trip():
    pmf = pbd_equilibrium(PBDParams(2, 3))
    back = TruncatedPmf.from_json(pmf.to_json())
    assert np.array_equal(back.probs, pmf.probs) and back.tail_bound == pmf.tail_bound
    assert json.loads(pmf.to_json())["offset"] == 0
    assert pmf.to_csv().splitlines()[0] == "k,prob"


def test_bad_tolerance():
    with pytest.raises(ParameterDomainError):
        pbd_equilibrium(PBDParams(1, 1), tol=0.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 200), st.floats(0.05, 200))
def test_equilibrium_properties(alpha, beta):
    pmf = pbd_equilibrium(PBDParams(alpha, beta), tol=1e-10)
    p = pmf.probs
    assert np.all(p >= 0)
    assert abs(math.fsum(p) - 1) <= 1e-12
    i = np.arange(1, p.size)
    lhs = alpha * p[:-1]
    rhs = (beta * i + i * (i - 1.0)) * p[1:]
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(lhs, 1e-300) + 1e-300)
