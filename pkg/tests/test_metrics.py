import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import transport_lp
from pbdstein.dist_core import TruncatedPmf, poisson_pmf
from pbdstein.errors import ParameterDomainError
from pbdstein.metrics import Method, lipschitz_witness_lb, total_variation, wasserstein


def pmf(*p):
    return TruncatedPmf(np.array(p, dtype=float), 0.0)


DELTA0, DELTA3, BERN = pmf(1), pmf(0, 0, 0, 1), pmf(0.5, 0.5)

weights = st.lists(st.floats(0, 1), min_size=1, max_size=12).filter(lambda w: sum(w) > 1e-3)


def normalize(w):
    w = np.asarray(w, dtype=float)
    return TruncatedPmf(w / w.sum(), 0.0)


def test_examples():
    assert wasserstein(BERN, BERN).value == 0.0
    assert wasserstein(DELTA0, DELTA3).value == 3.0
    assert wasserstein(BERN, DELTA0).value == pytest.approx(transport_lp([0.5, 0.5], [1.0]))
    assert wasserstein(BERN, DELTA0).method is Method.CDF_SUM
    assert total_variation(BERN, BERN).value == 0.0
    assert total_variation(DELTA0, DELTA3).value == 1.0
    assert total_variation(BERN, DELTA0).value == 0.5


def test_witness_examples():
    assert lipschitz_witness_lb(BERN, BERN).value == 0.0
    for seed in (0, 1, 99):
        assert lipschitz_witness_lb(DELTA0, DELTA3, seed=seed).value == 3.0


def test_witness_poisson_pair():
    P, Q = poisson_pmf(2.0, 1e-12), poisson_pmf(2.5, 1e-12)
    w = lipschitz_witness_lb(P, Q, trials=10_000).value
    d = wasserstein(P, Q)
    assert 0.45 <= w <= 0.5 + 1e-9
    assert w <= d.value + d.tail_error + 1e-12
    assert d.value == pytest.approx(0.5, abs=1e-9)


def test_witness_reproducible():
    P, Q = poisson_pmf(1.0), poisson_pmf(3.0)
    assert lipschitz_witness_lb(P, Q, seed=5).value == lipschitz_witness_lb(P, Q, seed=5).value
    with pytest.raises(ParameterDomainError):
        lipschitz_witness_lb(P, Q, trials=0)


def test_rejects_unnormalized():
    with pytest.raises(ParameterDomainError):
        wasserstein(pmf(0.5, 0.4), DELTA0)


def test_tail_error_reported():
    d = wasserstein(poisson_pmf(4.0, 1e-10), DELTA0)
    assert 0 < d.tail_error < 1e-8


@settings(max_examples=100, deadline=None)
@given(weights, weights, weights)
def test_metric_axioms(a, b, c):
    P, Q, R = normalize(a), normalize(b), normalize(c)
    for dist in (wasserstein, total_variation):
        pq, qp = dist(P, Q).value, dist(Q, P).value
        assert pq >= 0 and pq == pytest.approx(qp, abs=1e-15)
        assert dist(P, P).value == 0.0
        assert pq <= dist(P, R).value + dist(R, Q).value + 1e-12
    assert total_variation(P, Q).value <= wasserstein(P, Q).value + 1e-12


@settings(max_examples=40, deadline=None)
@given(weights, weights)
def test_wasserstein_equals_transport_lp(a, b):
    P, Q = normalize(a), normalize(b)
    assert wasserstein(P, Q).value == pytest.approx(transport_lp(P.probs, Q.probs), abs=1e-9)
    assert lipschitz_witness_lb(P, Q, trials=50).value <= wasserstein(P, Q).value + 1e-12
