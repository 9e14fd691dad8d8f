import numpy as np
import pytest
from hypothesis import given, strategies as st

from fennm.quadrature import MAX_POINTS, gauss_legendre, min_points_for_degree


@pytest.mark.parametrize("q", range(1, MAX_POINTS + 1))
def test_matches_numpy_leggauss(q):
    # [DERIVED] independent oracle: numpy's Golub-Welsch based rule
    x, w = np.polynomial.legendre.leggauss(q)
    rule = gauss_legendre(q)
    assert np.allclose(rule.nodes, x, atol=1e-14)
    assert np.allclose(rule.weights, w, atol=1e-14)


def test_two_point_rule():
    # [TRIVIAL] nodes +-1/sqrt(3), unit weights
    rule = gauss_legendre(2)
    assert np.allclose(rule.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-16)
    assert np.allclose(rule.weights, [1.0, 1.0], atol=1e-16)


@given(st.integers(1, MAX_POINTS))
def test_symmetry_and_weight_sum(q):
    rule = gauss_legendre(q)
    assert np.all(np.diff(rule.nodes) > 0)
    assert np.array_equal(rule.nodes, -rule.nodes[::-1])
    assert np.array_equal(rule.weights, rule.weights[::-1])
    assert abs(rule.weights.sum() - 2.0) < 1e-13
    assert np.all(rule.weights > 0)


@given(st.integers(1, 16), st.data())
def test_monomial_exactness(q, data):
    k = data.draw(st.integers(0, 2 * q - 1))
    exact = 0.0 if k % 2 else 2.0 / (k + 1)
    assert abs(gauss_legendre(q).integrate(lambda x: x**k) - exact) < 1e-12


def test_rule_not_exact_beyond_degree():
    # [DERIVED] x^(2Q) is the first monomial the Q-point rule misses
    q = 3
    err = gauss_legendre(q).integrate(lambda x: x ** (2 * q)) - 2.0 / (2 * q + 1)
    assert abs(err) > 1e-3


@pytest.mark.parametrize("q", [0, -1, MAX_POINTS + 1])
def test_out_of_range(q):
    with pytest.raises(ValueError):
        gauss_legendre(q)


@pytest.mark.parametrize("p, q", [(1, 1), (2, 2), (3, 2), (4, 3), (7, 4)])
def test_min_points(p, q):
    # [TRIVIAL] ceil((p + 1) / 2)
    assert min_points_for_degree(p) == q


def test_cached_and_readonly():
    a, b = gauss_legendre(5), gauss_legendre(5)
    assert a is b
    with pytest.raises(ValueError):
        a.nodes[0] = 0.0
