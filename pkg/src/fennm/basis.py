"""Test-function spaces on the reference element and their quadrature filter banks.

A filter is the product of a quadrature weight with a test function (or one of
its local derivatives) sampled at the Gauss nodes. Applying a filter bank to a
network signal sampled at the same nodes evaluates the weighted-residual
integrals for every test function in one matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial import Polynomial

from .quadrature import QuadratureRule, min_points_for_degree


class SpaceKind(str, Enum):
    LAGRANGE = "lagrange"
    HERMITE_CUBIC = "hermite"


@dataclass(frozen=True, eq=False)
class TestFunctionSpace:
    """Polynomial test functions phi_k(xi) on xi in [-1, 1]."""

    __test__ = False  # not a pytest class

    kind: SpaceKind
    degree: int
    polys: tuple[Polynomial, ...]
    nodes: np.ndarray | None = None  # Lagrange interpolation nodes

    @property
    def count(self) -> int:
        return len(self.polys)

    def values(self, xi, deriv: int = 0) -> np.ndarray:
        """Matrix ``[k, j]`` of the deriv-th xi-derivative of phi_k at ``xi[j]``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.stack([p.deriv(deriv)(xi) if deriv else p(xi) for p in self.polys])


def lagrange_space(p: int) -> TestFunctionSpace:
    """Degree-p Lagrange cardinal polynomials on p+1 equispaced nodes of [-1, 1]."""
    if isinstance(p, bool) or int(p) != p or not 1 <= p <= 4:
        raise ValueError(f"Lagrange degree must be in 1..4, got {p!r}")
    p = int(p)
    nodes = np.linspace(-1.0, 1.0, p + 1)
    polys = []
    for k in range(p + 1):
        others = np.delete(nodes, k)
        num = Polynomial.fromroots(others)
        polys.append(num / float(np.prod(nodes[k] - others)))
    nodes.setflags(write=False)
    return TestFunctionSpace(SpaceKind.LAGRANGE, p, tuple(polys), nodes)


def hermite_cubic_space() -> TestFunctionSpace:
    """Cubic Hermite interpolators with unit value/slope (in xi) at xi = -1, +1.

    Order: value at -1, slope at -1, value at +1, slope at +1.
    """
    one_m = Polynomial([1.0, -1.0])
    one_p = Polynomial([1.0, 1.0])
    polys = (
        one_m**2 * Polynomial([2.0, 1.0]) / 4,
        one_m**2 * one_p / 4,
        one_p**2 * Polynomial([2.0, -1.0]) / 4,
        one_p**2 * Polynomial([-1.0, 1.0]) / 4,
    )
    return TestFunctionSpace(SpaceKind.HERMITE_CUBIC, 3, polys)


def make_space(kind: str | SpaceKind, degree: int = 3) -> TestFunctionSpace:
    kind = SpaceKind(kind)
    if kind is SpaceKind.HERMITE_CUBIC:
        return hermite_cubic_space()
    return lagrange_space(degree)


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Quadrature-weighted test functions for one (space, rule) pair.

    Attributes ``value``, ``dxi`` and ``dxixi`` are K x Q arrays of
    ``W_q * phi_k(xi_q)`` and the first/second xi-derivatives; ``boundary_values``
    and ``boundary_dxi`` are K x 2 arrays at xi = -1 (column 0) and +1 (column 1).
    """

    space: TestFunctionSpace
    rule: QuadratureRule
    value: np.ndarray
    dxi: np.ndarray
    dxixi: np.ndarray
    boundary_values: np.ndarray
    boundary_dxi: np.ndarray
    degraded: bool = False
    notes: tuple[str, ...] = field(default=())

    def filters(self, name: str) -> np.ndarray:
        return {"value": self.value, "dxi": self.dxi, "dxixi": self.dxixi}[name]

    def boundary(self, name: str) -> np.ndarray:
        return {"value": self.boundary_values, "dxi": self.boundary_dxi}[name]


def build_filter_bank(space: TestFunctionSpace, rule: QuadratureRule) -> FilterBank:
    """Sample the space at the rule's nodes and scale by the weights.

    A rule with fewer points than ``min_points_for_degree(space.degree)`` is
    accepted but the bank is marked ``degraded``.
    """
    w = rule.weights[None, :]
    ends = np.array([-1.0, 1.0])
    arrays = {
        "value": w * space.values(rule.nodes, 0),
        "dxi": w * space.values(rule.nodes, 1),
        "dxixi": w * space.values(rule.nodes, 2),
        "boundary_values": space.values(ends, 0),
        "boundary_dxi": space.values(ends, 1),
    }
    for a in arrays.values():
        a.setflags(write=False)
    needed = min_points_for_degree(space.degree)
    notes = ()
    if rule.order < needed:
        notes = (
            f"Q={rule.order} below minimum {needed} for degree {space.degree}; "
            "test-function integrals are not exact",
        )
    return FilterBank(space, rule, degraded=bool(notes), notes=notes, **arrays)
