"""Classical reference solvers: Galerkin FEM, RK45 and a 3-point finite-difference scheme."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .basis import lagrange_space
from .io import write_solution_csv
from .mesh import Mesh
from .quadrature import gauss_legendre


@dataclass(frozen=True)
class FemSolution:
    mesh: Mesh
    degree: int
    nodal: np.ndarray  # length degree * n_elements + 1

    @property
    def dof(self) -> int:
        return self.nodal.size

    def __call__(self, x) -> np.ndarray:
        """Evaluate by local Lagrange interpolation."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = self.degree
        space = lagrange_space(p)
        el = self.mesh.element_of(x)
        left = self.mesh.boundaries[el]
        jac = self.mesh.jacobians[el]
        xi = (x - left) / jac - 1.0
        phi = np.array([space.polys[k](xi) for k in range(p + 1)])
        idx = el[None, :] * p + np.arange(p + 1)[:, None]
        return np.sum(phi * self.nodal[idx], axis=0)


@dataclass(frozen=True)
class _LinearBVP:
    """-(a u')' + b u' = s with essential and natural (flux a u') data."""

    a: Callable
    b: Callable
    s: Callable
    dirichlet: dict  # x -> value
    flux: dict  # x -> value of a u' at that end


def _bvp_for(problem) -> _LinearBVP:
    name = problem.name
    if name == "equilibrium":
        # (x u')' = 2/x^2  ->  -(x u')' = -2/x^2
        return _LinearBVP(lambda x: x, lambda x: np.zeros_like(x), lambda x: -2 / x**2,
                          {1.0: 2.0}, {2.0: -0.5})
    if name == "transport":
        pe, fhat = problem.constants["Pe"], problem.constants["f_hat"]
        return _LinearBVP(lambda x: np.ones_like(x), lambda x: np.full_like(x, pe),
                          lambda x: np.full_like(x, fhat), {0.0: 0.0, 1.0: 0.0}, {})
    raise ValueError(f"FEM baseline supports equilibrium and transport, not {name!r}")


def fem_solve(problem, mesh: Mesh, p: int = 1) -> FemSolution:
    """Galerkin FEM with degree-p Lagrange elements and a banded direct solve.

    ``problem`` is a ProblemSpec or a problem name.
    """
    if p not in (1, 2):
        raise ValueError("element degree must be 1 or 2")
    if isinstance(problem, str):
        from .problems import get_problem

        problem = get_problem(problem)
    bvp = _bvp_for(problem)
    space = lagrange_space(p)
    rule = gauss_legendre(p + 2)
    phi = space.values(rule.nodes, 0)
    dphi = space.values(rule.nodes, 1)
    n_el = mesh.n_elements
    n = p * n_el + 1
    # banded storage: ab[p + i - j, j] = A[i, j]
    ab = np.zeros((2 * p + 1, n))
    rhs = np.zeros(n)
    for e in range(n_el):
        J = mesh.jacobians[e]
        xq = mesh.boundaries[e] + J * (1 + rule.nodes)
        w = rule.weights * J
        a, b, s = bvp.a(xq), bvp.b(xq), bvp.s(xq)
        # K_ij = int a phi_i' phi_j' / J^2 + b phi_i phi_j' / J
        K = (dphi * (w * a / J**2)) @ dphi.T + (phi * (w * b / J)) @ dphi.T
        F = phi @ (w * s)
        base = e * p
        for i in range(p + 1):
            rhs[base + i] += F[i]
            for j in range(p + 1):
                ab[p + i - j, base + j] += K[i, j]
    for xb, val in bvp.flux.items():
        i = 0 if abs(xb - mesh.a) < 1e-12 else n - 1
        sign = -1.0 if i == 0 else 1.0
        rhs[i] += sign * val
    for xb, val in bvp.dirichlet.items():
        i = 0 if abs(xb - mesh.a) < 1e-12 else n - 1
        for j in range(max(0, i - p), min(n, i + p + 1)):
            ab[p + i - j, j] = 0.0
        ab[p, i] = 1.0
        rhs[i] = val
    try:
        u = solve_banded((p, p), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular FEM system: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError("singular FEM system")
    return FemSolution(mesh, p, u)


def rk45_solve(rhs, y0, t_span, rel_tol: float = 1e-10, abs_tol: float = 1e-12):
    """Dormand-Prince integration; returns the dense-output callable t -> y(t)."""
    sol = solve_ivp(rhs, t_span, np.asarray(y0, dtype=float), method="RK45",
                    rtol=rel_tol, atol=abs_tol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"RK45 failed: {sol.message}")
    return sol.sol


@dataclass(frozen=True)
class GridSolution:
    x: np.ndarray
    u: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.u)


def fdm_solve(forcing: Callable | None = None, N: int = 2001, domain=(-1.0, 1.0),
              ends=(0.0, 0.0)) -> GridSolution:
    """-u'' = f on a uniform N-point grid with Dirichlet ends.

    At a jump of f the grid value is the mean of the one-sided limits, which
    keeps the scheme exact for piecewise-constant forcing with a node on the jump.
    """
    if N < 3:
        raise ValueError("need at least 3 grid points")
    if forcing is None:
        from .problems import discontinuous_forcing

        forcing = discontinuous_forcing
    a, b = domain
    x = np.linspace(a, b, N)
    h = x[1] - x[0]
    d = 1e-9 * h
    f = 0.5 * (np.asarray(forcing(x - d), float) + np.asarray(forcing(x + d), float))
    m = N - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[2, :-1] = -1.0
    r = h * h * f[1:-1]
    r[0] += ends[0]
    r[-1] += ends[1]
    u = np.empty(N)
    u[0], u[-1] = ends
    u[1:-1] = solve_banded((1, 1), ab, r)
    return GridSolution(x, u)


def export_solution(path, x, u, oracle) -> None:
    """Write a baseline solution in the FENNM solution.csv layout."""
    write_solution_csv(path, x, u, oracle)
