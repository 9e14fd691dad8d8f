"""Case studies: weak forms, boundary conditions, forcing terms and oracles."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .diffnet import NetConfig
from .mesh import Mesh, uniform_mesh
from .weakform import (
    EssentialCondition,
    FluxTerm,
    SignalSpec,
    VolumeTerm,
    jet_signal,
    source_signal,
)


@dataclass(frozen=True)
class NaturalCondition:
    """Known flux value substituted at one side of the element touching node x."""

    x: float
    side: str  # side of the element the override applies to: "left" or "right"
    flux: str
    value: float


@dataclass(frozen=True)
class Recommended:
    """Network, mesh and training settings used for a case study."""

    net: NetConfig
    n_elements: int
    space: str = "lagrange"
    degree: int = 4
    quad_points: int = 10
    adam_epochs: int = 10000
    lbfgs_epochs: int = 10000
    boundaries: tuple | None = None


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    domain: tuple[float, float]
    weak_form: SignalSpec
    essential: tuple[EssentialCondition, ...]
    natural: tuple[NaturalCondition, ...]
    forcing: Callable | None
    constants: dict
    oracle_kind: str  # "analytic", "rk45", "fdm"
    recommended: Recommended
    # exact(x, order) -> array (order+1, M) of the reference solution and derivatives
    exact: Callable | None = None
    # strong(x, jets) -> pointwise strong-form residual; needs jets up to strong_order
    strong: Callable | None = None
    strong_order: int = 2
    required_nodes: tuple[float, ...] = field(default=())

    def oracle(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.exact(x, 0)[0]

    def overrides_for(self, mesh: Mesh) -> dict:
        """Resolve natural conditions to per-element flux overrides on a mesh."""
        out = {}
        for c in self.natural:
            i = mesh.node_index(c.x)
            n = i - 1 if c.side == "right" else i
            if not 0 <= n < mesh.n_elements:
                raise ValueError(f"no element on the {c.side} side of node x={c.x}")
            out[(n, c.side, c.flux)] = c.value
        return out

    def check_mesh(self, mesh: Mesh) -> None:
        a, b = self.domain
        if abs(mesh.a - a) > 1e-12 or abs(mesh.b - b) > 1e-12:
            raise ValueError(f"mesh spans [{mesh.a}, {mesh.b}], problem needs [{a}, {b}]")
        for x in self.required_nodes + tuple(c.x for c in self.natural):
            mesh.node_index(x)

    def default_mesh(self) -> Mesh:
        rec = self.recommended
        if rec.boundaries is not None:
            return Mesh(np.array(rec.boundaries))
        return uniform_mesh(*self.domain, rec.n_elements)


def _stack(*rows):
    return np.stack([np.broadcast_to(r, np.shape(rows[0])) for r in rows])


def equilibrium_problem() -> ProblemSpec:
    """(x U')' = 2/x^2 on [1, 2], U(1) = 2, -x U'(2) = 1/2."""

    def exact(x, order=0):
        rows = [2 / x + np.log(x) / 2, -2 / x**2 + 1 / (2 * x), 4 / x**3 - 1 / (2 * x**2),
                -12 / x**4 + 1 / x**3]
        return _stack(*rows[: order + 1])

    def strong(x, jets):
        return jets[1] + x * jets[2] - 2 / x**2

    spec = SignalSpec(
        fluxes=(FluxTerm("flux", jet_signal(1, lambda x: x), "value", 1.0, 0),),
        volumes=(
            VolumeTerm(jet_signal(1, lambda x: x), "dxi", -1.0, 0),
            VolumeTerm(source_signal(lambda x: 2 / x**2), "value", -1.0, 1),
        ),
        max_order=1,
    )
    return ProblemSpec(
        name="equilibrium",
        domain=(1.0, 2.0),
        weak_form=spec,
        essential=(EssentialCondition(1.0, 0, 2.0),),
        natural=(NaturalCondition(2.0, "right", "flux", -0.5),),
        forcing=lambda x: 2 / x**2,
        constants={},
        oracle_kind="analytic",
        recommended=Recommended(NetConfig(2, 20, "tanh"), 1, "lagrange", 4, 8, 5000, 5000),
        exact=exact,
        strong=strong,
    )


BEAM = {"L": 1.0, "E": 69.9e9, "I": 9e-9, "F": 100.0}


def beam_problem() -> ProblemSpec:
    """Cantilever EI w'''' = F delta(x - L/2), clamped at 0, free at L."""
    L, E, I, F = BEAM["L"], BEAM["E"], BEAM["I"], BEAM["F"]
    EI = E * I
    half = L / 2

    def exact(x, order=0):
        left = x <= half
        k = F / EI
        w_half = k * (L * half**2 / 4 - half**3 / 6)
        s_half = k * (L * half / 2 - half**2 / 2)
        rows = [
            np.where(left, k * (L * x**2 / 4 - x**3 / 6), w_half + s_half * (x - half)),
            np.where(left, k * (L * x / 2 - x**2 / 2), s_half),
            np.where(left, k * (L / 2 - x), 0.0),
            np.where(left, -k, 0.0),
        ]
        return _stack(*rows[: order + 1])

    # Every term carries EI; the residual is divided through by it so L_R
    # starts O(1) instead of O(EI^2) and the penalty ascent stays tame.
    c = 1.0
    spec = SignalSpec(
        fluxes=(
            FluxTerm("shear", jet_signal(3), "value", c, 0),
            FluxTerm("moment", jet_signal(2), "dxi", -c, -1),
        ),
        volumes=(VolumeTerm(jet_signal(2), "dxixi", c, -1),),
        max_order=3,
    )
    natural = (
        NaturalCondition(half, "right", "shear", -F / EI),
        NaturalCondition(half, "right", "moment", 0.0),
        NaturalCondition(L, "right", "shear", 0.0),
        NaturalCondition(L, "right", "moment", 0.0),
    )
    return ProblemSpec(
        name="beam",
        domain=(0.0, L),
        weak_form=spec,
        essential=(EssentialCondition(0.0, 0, 0.0), EssentialCondition(0.0, 1, 0.0)),
        natural=natural,
        forcing=None,
        constants=dict(BEAM, EI=EI, residual_scale=1.0 / EI),
        oracle_kind="analytic",
        recommended=Recommended(NetConfig(3, 20, "tanh"), 4, "hermite", 3, 5, 5000, 10000),
        exact=exact,
        strong=None,
        required_nodes=(half,),
    )


PENDULUM = {"g": 9.81, "L": 1.0, "T": 10.0, "theta0": 3 * np.pi / 8, "damping": 0.5}


def pendulum_energy(theta, omega, g=PENDULUM["g"], length=PENDULUM["L"]):
    """Total energy per unit mass: L^2 omega^2 / 2 + g L (1 - cos theta)."""
    return 0.5 * length**2 * omega**2 + g * length * (1 - np.cos(theta))


@lru_cache(maxsize=4)
def _pendulum_reference(c: float, g: float, length: float, T: float, theta0: float):
    from .baselines import rk45_solve

    def rhs(t, y):
        return np.array([y[1], -c * y[1] - g / length * np.sin(y[0])])

    return rk45_solve(rhs, np.array([theta0, 0.0]), (0.0, T), rel_tol=1e-10, abs_tol=1e-12)


def pendulum_problem(damped: bool) -> ProblemSpec:
    """theta'' + c theta' + (g/L) sin(theta) = 0 with time treated as the mesh coordinate."""
    g, length, T, theta0 = PENDULUM["g"], PENDULUM["L"], PENDULUM["T"], PENDULUM["theta0"]
    c = PENDULUM["damping"] if damped else 0.0
    gl = g / length

    def source(x, jets):
        part = np.zeros_like(jets)
        part[0] = gl * np.cos(jets[0])
        part[1] = c
        return c * jets[1] + gl * np.sin(jets[0]), part

    source.order = 1

    def exact(x, order=0):
        sol = _pendulum_reference(c, g, length, T, theta0)
        y = sol(x)
        rows = [y[0], y[1]]
        if order >= 2:
            rows.append(-c * y[1] - gl * np.sin(y[0]))
        if order >= 3:
            raise ValueError("reference trajectory provides derivatives up to order 2")
        return np.stack(rows[: order + 1])

    def strong(x, jets):
        return jets[2] + c * jets[1] + gl * np.sin(jets[0])

    spec = SignalSpec(
        fluxes=(FluxTerm("velocity", jet_signal(1), "value", 1.0, 0),),
        volumes=(
            VolumeTerm(jet_signal(1), "dxi", -1.0, 0),
            VolumeTerm(source, "value", 1.0, 1),
        ),
        max_order=1,
    )
    return ProblemSpec(
        name="pendulum-damped" if damped else "pendulum-undamped",
        domain=(0.0, T),
        weak_form=spec,
        essential=(EssentialCondition(0.0, 0, theta0),),
        natural=(NaturalCondition(0.0, "left", "velocity", 0.0),),
        forcing=None,
        constants={"g": g, "L": length, "c": c, "T": T, "theta0": theta0},
        oracle_kind="rk45",
        recommended=Recommended(NetConfig(4, 20, "sin"), 25, "lagrange", 3, 5, 10000, 10000),
        exact=exact,
        strong=strong,
    )


TRANSPORT = {"L": 1.0, "v_x": 1.0, "alpha": 0.01, "f": 1.0}


def transport_problem() -> ProblemSpec:
    """Pe u' - u'' = f_hat on [0, 1], u(0) = u(1) = 0."""
    pe = TRANSPORT["L"] * TRANSPORT["v_x"] / TRANSPORT["alpha"]
    fhat = TRANSPORT["f"] / TRANSPORT["alpha"]
    # u = (fhat/Pe) * (x + (1 - e^{Pe x}) / (e^Pe - 1)), written without overflow
    scale = fhat / pe
    em = np.exp(-pe)

    def exact(x, order=0):
        e = np.exp(pe * (x - 1))
        d = 1 - em
        rows = [
            scale * (x + (em - e) / d),
            scale * (1 - pe * e / d),
            scale * (-(pe**2) * e / d),
            scale * (-(pe**3) * e / d),
        ]
        return _stack(*rows[: order + 1])

    def strong(x, jets):
        return pe * jets[1] - jets[2] - fhat

    spec = SignalSpec(
        fluxes=(FluxTerm("flux", jet_signal(1), "value", -1.0, 0),),
        volumes=(
            VolumeTerm(jet_signal(1), "dxi", 1.0, 0),
            VolumeTerm(jet_signal(1, pe), "value", 1.0, 1),
            VolumeTerm(source_signal(lambda x: np.full_like(x, fhat)), "value", -1.0, 1),
        ),
        max_order=1,
    )
    return ProblemSpec(
        name="transport",
        domain=(0.0, 1.0),
        weak_form=spec,
        essential=(EssentialCondition(0.0, 0, 0.0), EssentialCondition(1.0, 0, 0.0)),
        natural=(),
        forcing=lambda x: np.full_like(x, fhat),
        constants=dict(TRANSPORT, Pe=pe, f_hat=fhat),
        oracle_kind="analytic",
        recommended=Recommended(NetConfig(4, 20, "tanh"), 22, "lagrange", 1, 10, 10000, 10000),
        exact=exact,
        strong=strong,
    )


def _poisson(name, exact, forcing, rec, oracle_kind="analytic", required_nodes=()):
    """-u'' = f on [-1, 1] with Dirichlet values taken from the reference solution."""

    def strong(x, jets):
        return -jets[2] - forcing(x)

    spec = SignalSpec(
        fluxes=(FluxTerm("flux", jet_signal(1), "value", -1.0, 0),),
        volumes=(
            VolumeTerm(jet_signal(1), "dxi", 1.0, 0),
            VolumeTerm(source_signal(forcing), "value", -1.0, 1),
        ),
        max_order=1,
    )
    ends = exact(np.array([-1.0, 1.0]), 0)[0]
    return ProblemSpec(
        name=name,
        domain=(-1.0, 1.0),
        weak_form=spec,
        essential=(EssentialCondition(-1.0, 0, float(ends[0])),
                   EssentialCondition(1.0, 0, float(ends[1]))),
        natural=(),
        forcing=forcing,
        constants={"g": float(ends[0]), "h": float(ends[1])},
        oracle_kind=oracle_kind,
        recommended=rec,
        exact=exact,
        strong=strong,
        required_nodes=required_nodes,
    )


def poisson_steep_problem() -> ProblemSpec:
    """Manufactured U = 0.1 sin(8 pi x) + tanh(80 (x + 0.1))."""
    w, a = 8 * np.pi, 80.0

    def exact(x, order=0):
        t = np.tanh(a * (x + 0.1))
        s2 = 1 - t * t
        rows = [
            0.1 * np.sin(w * x) + t,
            0.1 * w * np.cos(w * x) + a * s2,
            -0.1 * w**2 * np.sin(w * x) - 2 * a**2 * t * s2,
            -0.1 * w**3 * np.cos(w * x) + 2 * a**3 * s2 * (3 * t * t - 1),
        ]
        return _stack(*rows[: order + 1])

    def forcing(x):
        t = np.tanh(a * (x + 0.1))
        return 0.1 * w**2 * np.sin(w * x) + 2 * a**2 * t * (1 - t * t)

    rec = Recommended(NetConfig(4, 20, "sin"), 30, "lagrange", 4, 10, 10000, 10000)
    return _poisson("poisson-steep", exact, forcing, rec)


def poisson_boundary_layer_problem() -> ProblemSpec:
    """Manufactured U = 0.1 sin(5 pi x) + exp(100 x - 99)."""
    w = 5 * np.pi

    def exact(x, order=0):
        e = np.exp(100 * x - 99)
        rows = [
            0.1 * np.sin(w * x) + e,
            0.1 * w * np.cos(w * x) + 100 * e,
            -0.1 * w**2 * np.sin(w * x) + 1e4 * e,
            -0.1 * w**3 * np.cos(w * x) + 1e6 * e,
        ]
        return _stack(*rows[: order + 1])

    def forcing(x):
        return 0.1 * w**2 * np.sin(w * x) - 1e4 * np.exp(100 * x - 99)

    rec = Recommended(NetConfig(4, 20, "sin"), 25, "lagrange", 4, 10, 10000, 10000)
    return _poisson("poisson-boundary-layer", exact, forcing, rec)


def discontinuous_forcing(x):
    """-10 on x < 0, +10 on x >= 0."""
    return np.where(np.asarray(x) < 0, -10.0, 10.0)


def poisson_discontinuous_problem() -> ProblemSpec:
    """-u'' = f with f = -10 on (-1, 0), +10 on [0, 1); u(-1) = u(1) = 0."""

    def exact(x, order=0):
        left = x < 0
        rows = [
            np.where(left, 5 * x * (x + 1), 5 * x * (1 - x)),
            np.where(left, 10 * x + 5, 5 - 10 * x),
            np.where(left, 10.0, -10.0),
            np.zeros_like(x),
        ]
        return _stack(*rows[: order + 1])

    # linear test functions on 40 elements keep the rounded kink inside h = 0.05
    rec = Recommended(NetConfig(4, 20, "sin"), 40, "lagrange", 1, 3, 10000, 10000)
    return _poisson("poisson-discontinuous", exact, discontinuous_forcing, rec,
                    oracle_kind="fdm", required_nodes=(0.0,))


PROBLEMS = {
    "equilibrium": equilibrium_problem,
    "beam": beam_problem,
    "pendulum-damped": lambda: pendulum_problem(True),
    "pendulum-undamped": lambda: pendulum_problem(False),
    "transport": transport_problem,
    "poisson-steep": poisson_steep_problem,
    "poisson-boundary-layer": poisson_boundary_layer_problem,
    "poisson-discontinuous": poisson_discontinuous_problem,
}


def get_problem(name: str) -> ProblemSpec:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
