"""Randomized invariants for polynomial algebra, resampling and grids."""
import numpy as np
from hypothesis import given, settings, strategies as st

from projection_filter.polyalg import Polynomial, eval_monomials
from projection_filter.reference import systematic_resample

coef = st.floats(-10, 10, allow_nan=False).filter(lambda c: c == 0 or abs(c) > 1e-3)


def polys(dim):
    idx = st.tuples(*[st.integers(0, 3)] * dim)
    return st.dictionaries(idx, coef, max_size=5).map(lambda t: Polynomial(dim, t))


points = st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2)


@given(polys(2), polys(2), points)
def test_product_and_sum_evaluate_pointwise(p, q, x):
    x = np.array([x])
    np.testing.assert_allclose((p * q)(x), p(x) * q(x), rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose((p + q)(x), p(x) + q(x), rtol=1e-12, atol=1e-12)


def _close(a, b):
    for k in set(a.terms) | set(b.terms):
        assert abs(a.coefficient(k) - b.coefficient(k)) <= 1e-9 * (1 + abs(b.coefficient(k)))


@given(polys(2), polys(2), polys(2))
def test_ring_laws(p, q, r):
    _close(p * q, q * p)
    assert p + q == q + p
    _close(p * (q + r), p * q + p * r)


@given(polys(2), polys(2), st.integers(0, 1))
def test_leibniz_rule(p, q, axis):
    _close((p * q).diff(axis), p.diff(axis) * q + p * q.diff(axis))


@given(polys(2))
def test_text_round_trip(p):
    assert Polynomial.parse(p.to_text(), 2) == p


@given(polys(1), st.floats(-2, 2))
def test_monomial_evaluation_matches_polynomial(p, x):
    idx = sorted(p.terms)
    if idx:
        vals = eval_monomials(np.array([[x]]), idx)[0] @ np.array([p.terms[k] for k in idx])
        np.testing.assert_allclose(vals, p(np.array([[x]]))[0], rtol=1e-12, atol=1e-12)


weights = st.lists(st.floats(0, 1), min_size=1, max_size=60).filter(lambda w: sum(w) > 1e-6)


@settings(max_examples=300)
@given(weights, st.floats(0, 1, exclude_max=True))
def test_offspring_counts_are_floor_or_ceil(w, u):
    w = np.array(w) / np.sum(w)
    counts = np.bincount(systematic_resample(w, u), minlength=len(w))
    n = len(w)
    assert counts.sum() == n
    assert np.all(counts >= np.floor(n * w - 1e-9)) and np.all(counts <= np.ceil(n * w + 1e-9))
    assert np.all(counts[w == 0] == 0)
