import math

import numpy as np
import pytest

from projection_filter.errors import CapabilityError, DomainError
from projection_filter.quadrature import (GP_MAX_LEVEL, clenshaw_curtis, gauss_chebyshev, gauss_patterson,
                                          halton, smolyak)


def test_chebyshev_single_node():
    g = gauss_chebyshev(1)
    np.testing.assert_allclose(g.nodes[:, 0], [0.0], atol=1e-16)
    np.testing.assert_allclose(g.weights, [math.pi])


def test_chebyshev_two_nodes():
    g = gauss_chebyshev(2)
    np.testing.assert_allclose(sorted(g.nodes[:, 0]), [-math.sqrt(0.5), math.sqrt(0.5)], rtol=1e-15)
    np.testing.assert_allclose(g.weights, [math.pi / 2] * 2)
    assert g.weight_function == "chebyshev"


def test_chebyshev_integrates_weight_function():
    assert gauss_chebyshev(4).integrate(lambda x: np.ones(len(x))) == pytest.approx(math.pi, rel=1e-15)


@pytest.mark.parametrize("n", [3, 7])
def test_chebyshev_nodes_in_open_interval(n):
    x = gauss_chebyshev(n).nodes
    assert np.all(np.abs(x) < 1)


def test_clenshaw_curtis_low_levels():
    g1 = clenshaw_curtis(1)
    np.testing.assert_allclose(g1.nodes[:, 0], [0.0], atol=1e-16)
    np.testing.assert_allclose(g1.weights, [2.0])
    g2 = clenshaw_curtis(2)
    np.testing.assert_allclose(g2.nodes[:, 0], [-1, 0, 1], atol=1e-15)
    np.testing.assert_allclose(g2.weights, [1 / 3, 4 / 3, 1 / 3], rtol=1e-14)
    assert g2.integrate(lambda x: x[:, 0] ** 2) == pytest.approx(2 / 3, rel=1e-14)


@pytest.mark.parametrize("level", [3, 4, 5])
def test_clenshaw_curtis_exactness(level):
    g = clenshaw_curtis(level)
    n = len(g)
    for k in range(0, n, 2):
        assert g.integrate(lambda x: x[:, 0] ** k) == pytest.approx(2 / (k + 1), rel=1e-13)


def test_patterson_level_1_and_2():
    g1 = gauss_patterson(1)
    np.testing.assert_allclose(g1.weights, [2.0])
    g2 = gauss_patterson(2)
    np.testing.assert_allclose(g2.nodes[:, 0], [-math.sqrt(0.6), 0, math.sqrt(0.6)], rtol=1e-15, atol=1e-16)
    np.testing.assert_allclose(g2.weights, [5 / 9, 8 / 9, 5 / 9], rtol=1e-15)
    assert g2.integrate(lambda x: x[:, 0] ** 4) == pytest.approx(0.4, abs=1e-14)


@pytest.mark.parametrize("level", range(1, GP_MAX_LEVEL + 1))
def test_patterson_nested_and_exact(level):
    g = gauss_patterson(level)
    assert len(g) == 2 ** level - 1
    # exactness degree 3 * 2^(level-1) - 1 for level >= 2
    top = 1 if level == 1 else 3 * 2 ** (level - 1) - 1
    for k in range(0, min(top, 60) + 1, 2):
        assert g.integrate(lambda x: x[:, 0] ** k) == pytest.approx(2 / (k + 1), rel=1e-13, abs=1e-15)
    if level > 1:
        prev = set(np.round(gauss_patterson(level - 1).nodes[:, 0], 14))
        assert prev <= set(np.round(g.nodes[:, 0], 14))


def test_patterson_level_out_of_range():
    with pytest.raises(CapabilityError):
        gauss_patterson(GP_MAX_LEVEL + 1)


@pytest.mark.parametrize("level, count", [(3, 49), (4, 129), (5, 321), (6, 769)])
def test_smolyak_patterson_counts(level, count):
    assert len(smolyak("gauss_patterson", 2, level)) == count


@pytest.mark.parametrize("rule, fn", [("gauss_patterson", gauss_patterson), ("clenshaw_curtis", clenshaw_curtis)])
@pytest.mark.parametrize("level", [0, 1, 3])
def test_smolyak_in_one_dimension_is_the_next_rule_level(rule, fn, level):
    sg, ref = smolyak(rule, 1, level), fn(level + 1)
    np.testing.assert_allclose(sg.nodes, ref.nodes, atol=1e-15)
    np.testing.assert_allclose(sg.weights, ref.weights, rtol=1e-13, atol=1e-15)


def test_smolyak_separable_moment():
    g = smolyak("gauss_patterson", 2, 3)
    assert g.integrate(lambda x: x[:, 0] ** 2 * x[:, 1] ** 2) == pytest.approx(4 / 9, abs=1e-12)


def test_smolyak_total_degree_exactness():
    g = smolyak("clenshaw_curtis", 3, 4)
    for e in [(0, 0, 0), (2, 2, 2), (4, 0, 2), (6, 0, 0), (1, 2, 0)]:
        exact = np.prod([0.0 if k % 2 else 2 / (k + 1) for k in e])
        got = g.integrate(lambda x: np.prod(x ** np.array(e), axis=1))
        assert got == pytest.approx(exact, abs=1e-12)


def test_smolyak_rejects_non_nested():
    with pytest.raises(CapabilityError):
        smolyak("gauss_chebyshev", 2, 2)


def test_smolyak_node_cap():
    with pytest.raises(CapabilityError):
        smolyak("clenshaw_curtis", 4, 6, max_nodes=100)


def test_smolyak_elide_boundary():
    g = smolyak("clenshaw_curtis", 2, 3, elide_boundary=True)
    assert np.all(np.abs(g.nodes) < 1)


def test_halton_points():
    g1 = halton(1, 3)
    np.testing.assert_allclose((g1.nodes[:, 0] + 1) / 2, [0.5, 0.25, 0.75])
    g2 = halton(2, 5)
    np.testing.assert_allclose((g2.nodes[0] + 1) / 2, [0.5, 1 / 3])


@pytest.mark.parametrize("d, n", [(1, 7), (2, 49), (3, 10)])
def test_halton_weights_integrate_volume(d, n):
    assert halton(d, n).integrate(lambda x: np.ones(len(x))) == pytest.approx(2.0 ** d, rel=1e-15)


def test_bad_arguments():
    with pytest.raises(DomainError):
        halton(0, 3)
    with pytest.raises(DomainError):
        smolyak("nope", 2, 1)


def test_grid_csv(tmp_path):
    g = smolyak("gauss_patterson", 2, 2)
    g.to_csv(tmp_path / "g.csv")
    rows = np.loadtxt(tmp_path / "g.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:, :2], g.nodes)
    np.testing.assert_array_equal(rows[:, 2], g.weights)
