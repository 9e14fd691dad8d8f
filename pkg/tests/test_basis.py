import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import Polynomial

from fennm.basis import (
    SpaceKind,
    build_filter_bank,
    hermite_cubic_space,
    lagrange_space,
    make_space,
)
from fennm.quadrature import gauss_legendre, min_points_for_degree

SPACES = [lagrange_space(p) for p in range(1, 5)] + [hermite_cubic_space()]


def test_linear_values():
    s = lagrange_space(1)
    assert np.allclose(s.values(np.array([-1.0, 1.0])), [[1, 0], [0, 1]])
    assert np.allclose(s.values(np.array([0.2])), [[0.4], [0.6]])


def test_quadratic_midpoint_function():
    # [DERIVED] phi_2 = 1 - xi^2
    s = lagrange_space(2)
    v = s.values(np.array([-1.0, 0.0, 0.5, 1.0]))[1]
    assert np.allclose(v, [0.0, 1.0, 0.75, 0.0], atol=1e-15)


@pytest.mark.parametrize("p", range(1, 5))
def test_lagrange_cardinal_and_partition(p):
    s = lagrange_space(p)
    nodes = np.linspace(-1, 1, p + 1)
    assert np.allclose(s.values(nodes), np.eye(p + 1), atol=1e-14)
    xi = np.linspace(-1, 1, 17)
    assert np.allclose(s.values(xi).sum(axis=0), 1.0, atol=1e-13)
    assert np.allclose(s.values(xi, 1).sum(axis=0), 0.0, atol=1e-12)


def test_partition_quartic_at_point():
    assert abs(lagrange_space(4).values(np.array([0.3])).sum() - 1.0) < 1e-14


def test_hermite_cardinality():
    s = hermite_cubic_space()
    ends = np.array([-1.0, 1.0])
    assert np.allclose(s.values(ends, 0), [[1, 0], [0, 0], [0, 1], [0, 0]], atol=1e-15)
    assert np.allclose(s.values(ends, 1), [[0, 0], [1, 0], [0, 0], [0, 1]], atol=1e-15)
    # [DERIVED] (1 - 0)^2 (2 + 0) / 4
    assert abs(s.values(np.array([0.0]))[0, 0] - 0.5) < 1e-15


@pytest.mark.parametrize("p", [0, 5])
def test_lagrange_degree_range(p):
    with pytest.raises(ValueError):
        lagrange_space(p)


def test_make_space():
    assert make_space("hermite").kind is SpaceKind.HERMITE_CUBIC
    assert make_space(SpaceKind.LAGRANGE, 2).count == 3
    with pytest.raises(ValueError):
        make_space("legendre", 2)


@pytest.mark.parametrize("space", SPACES, ids=lambda s: f"{s.kind.value}{s.degree}")
@pytest.mark.parametrize("deriv", [1, 2])
def test_derivatives_match_finite_differences(space, deriv):
    xi = np.linspace(-0.9, 0.9, 7)
    h = 1e-5
    fd = (space.values(xi + h, deriv - 1) - space.values(xi - h, deriv - 1)) / (2 * h)
    assert np.allclose(space.values(xi, deriv), fd, atol=1e-7)


def test_linear_filters_q2():
    bank = build_filter_bank(lagrange_space(1), gauss_legendre(2))
    assert np.allclose(bank.dxi[0], [-0.5, -0.5])
    assert abs(bank.value[0].sum() - 1.0) < 1e-15


@pytest.mark.parametrize("space", SPACES, ids=lambda s: f"{s.kind.value}{s.degree}")
def test_filter_identities(space):
    for q in range(min_points_for_degree(space.degree), 12):
        bank = build_filter_bank(space, gauss_legendre(q))
        for k, poly in enumerate(space.polys):
            integ = poly.integ()
            # [DERIVED] exact integrals from numpy polynomial antiderivatives
            assert abs(bank.value[k].sum() - (integ(1) - integ(-1))) < 1e-12
            assert abs(bank.dxi[k].sum() - (poly(1) - poly(-1))) < 1e-12
            d = poly.deriv()
            assert abs(bank.dxixi[k].sum() - (d(1) - d(-1))) < 1e-12


@given(st.integers(1, 4), st.integers(0, 6), st.integers(3, 10))
def test_filter_exact_against_polynomials(p, m, q):
    space = lagrange_space(p)
    if p + m > 2 * q - 1:
        return
    bank = build_filter_bank(space, gauss_legendre(q))
    g = Polynomial([0.0] * m + [1.0])
    for k, poly in enumerate(space.polys):
        integ = (poly * g).integ()
        assert abs(bank.value[k] @ g(bank.rule.nodes) - (integ(1) - integ(-1))) < 1e-12


def test_boundary_values_have_unit_entries():
    for p in range(1, 5):
        bank = build_filter_bank(lagrange_space(p), gauss_legendre(p + 1))
        assert np.all(np.isclose(bank.boundary_values, 1.0).any(axis=0))


def test_degraded_flag():
    assert not build_filter_bank(lagrange_space(4), gauss_legendre(3)).degraded
    bank = build_filter_bank(lagrange_space(4), gauss_legendre(2))
    assert bank.degraded and bank.notes


def test_bank_is_immutable():
    bank = build_filter_bank(lagrange_space(2), gauss_legendre(3))
    with pytest.raises(ValueError):
        bank.value[0, 0] = 1.0
