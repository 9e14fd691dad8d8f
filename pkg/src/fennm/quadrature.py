"""Gauss-Legendre quadrature on the reference interval [-1, 1]."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_POINTS = 32


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Q-point Gauss-Legendre rule.

    ``nodes`` are strictly increasing in (-1, 1); ``weights`` are positive and
    sum to 2. Both arrays are read-only.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        """Apply the rule to a callable on [-1, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    # P'_n from the standard recurrence; nodes never reach +-1
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def _build(q: int) -> QuadratureRule:
    if q == 1:
        nodes = np.array([0.0])
        weights = np.array([2.0])
    else:
        half = (q + 1) // 2
        i = np.arange(1, half + 1)
        # Chebyshev-type starting guesses, descending from +1
        x = np.cos(np.pi * (i - 0.25) / (q + 0.5))
        for _ in range(100):
            p, dp = _legendre_and_derivative(q, x)
            step = p / dp
            x = x - step
            if np.max(np.abs(step)) < 1e-16:
                break
        p, dp = _legendre_and_derivative(q, x)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
        if q % 2:
            x[-1] = 0.0
        # mirror so the rule is exactly symmetric
        pos_x, pos_w = x[::-1], w[::-1]
        if q % 2:
            nodes = np.concatenate([-x[:-1], pos_x])
            weights = np.concatenate([w[:-1], pos_w])
        else:
            nodes = np.concatenate([-x, pos_x])
            weights = np.concatenate([w, pos_w])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(order=q, nodes=nodes, weights=weights)


def gauss_legendre(q: int) -> QuadratureRule:
    """Return the cached Q-point Gauss-Legendre rule, 1 <= Q <= 32.

    Nodes are the roots of the Legendre polynomial P_Q found by Newton
    iteration; the rule integrates polynomials of degree <= 2Q-1 exactly.
    """
    if isinstance(q, bool) or int(q) != q or not 1 <= q <= MAX_POINTS:
        raise ValueError(f"quadrature order must be an integer in [1, {MAX_POINTS}], got {q!r}")
    return _build(int(q))


def min_points_for_degree(p: int) -> int:
    """Smallest Gauss rule exact for a degree-p polynomial: ceil((p+1)/2)."""
    if p < 0:
        raise ValueError("polynomial degree must be nonnegative")
    return max(1, math.ceil((p + 1) / 2))
