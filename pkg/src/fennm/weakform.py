"""Element-wise weak-form residuals, boundary loss and self-adaptive penalties.

For element n with Jacobian J_n and test function k the residual is a sum of

* flux brackets  ``c * J_n**p * (B_k(+1) F(x_{n+1}) - B_k(-1) F(x_n))`` where B
  is the test function (or its xi-derivative) at the element ends and F a
  network signal evaluated once per mesh node, and
* volume sums    ``c * J_n**p * sum_q filter[k, q] * G(x_q)`` with the filter
  bank applied to a signal G sampled at the element's Gauss points.

Natural boundary conditions replace F at one side of one element by a known
value (a flux override). The residual loss is the mean of squared residual
entries over all elements and test functions.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

import numpy as np

from .basis import FilterBank
from .diffnet import DiffNet, JetBatch
from .mesh import Mesh

# signal(x, jets) -> (values, partials); partials has the jets' shape or is
# None when the signal does not depend on the network.
Signal = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray | None]]


def jet_signal(order: int, coeff: Callable | float | None = None) -> Signal:
    """Signal ``coeff(x) * u^(order)(x)``."""

    def signal(x, jets):
        c = 1.0 if coeff is None else (coeff(x) if callable(coeff) else coeff)
        c = np.broadcast_to(np.asarray(c, dtype=float), x.shape)
        part = np.zeros_like(jets)
        part[order] = c
        return c * jets[order], part

    signal.order = order
    return signal


def source_signal(f: Callable[[np.ndarray], np.ndarray]) -> Signal:
    """Network-independent forcing signal f(x)."""

    def signal(x, jets):
        return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape), None

    signal.order = 0
    return signal


@dataclass(frozen=True)
class FluxTerm:
    name: str
    signal: Signal
    test: str = "value"  # "value" or "dxi"
    coeff: float = 1.0
    jac_power: int = 0


@dataclass(frozen=True)
class VolumeTerm:
    signal: Signal
    filt: str = "dxi"  # "value", "dxi" or "dxixi"
    coeff: float = -1.0
    jac_power: int = 0


@dataclass(frozen=True)
class SignalSpec:
    """Weak-form recipe of one problem."""

    fluxes: tuple[FluxTerm, ...]
    volumes: tuple[VolumeTerm, ...]
    max_order: int

    def __post_init__(self):
        for t in self.fluxes + self.volumes:
            if getattr(t.signal, "order", 0) > self.max_order:
                raise ValueError("signal uses a jet order above the declared maximum")


# (element index, "left" | "right", flux name) -> substituted signal value
Overrides = Mapping[tuple[int, str, str], float]


@dataclass(frozen=True)
class EssentialCondition:
    """u^(order)(x) = value, enforced through the boundary loss."""

    x: float
    order: int
    value: float


def _flux_arrays(term: FluxTerm, n_el: int, overrides: Overrides):
    lmask = np.zeros(n_el, bool)
    rmask = np.zeros(n_el, bool)
    lval = np.zeros(n_el)
    rval = np.zeros(n_el)
    for (n, side, name), v in overrides.items():
        if name != term.name:
            continue
        if not 0 <= n < n_el:
            raise ValueError(f"override element {n} out of range")
        if side == "left":
            lmask[n], lval[n] = True, v
        elif side == "right":
            rmask[n], rval[n] = True, v
        else:
            raise ValueError(f"override side must be 'left' or 'right', got {side!r}")
    return lmask, lval, rmask, rval


def _residuals(bank: FilterBank, spec: SignalSpec, jac, xq, jq, xn, jn, overrides):
    """Residual matrix (N_el, K) plus per-term intermediates for the adjoint."""
    n_el, nq = xq.shape
    xq_flat = xq.ravel()
    jq_flat = jq.reshape(jq.shape[0], -1)
    r = np.zeros((n_el, bank.space.count))
    tape = []
    for term in spec.volumes:
        val, part = term.signal(xq_flat, jq_flat)
        scale = term.coeff * jac ** term.jac_power
        filt = bank.filters(term.filt)
        r += scale[:, None] * (val.reshape(n_el, nq) @ filt.T)
        tape.append(("volume", term, scale, filt, part))
    for term in spec.fluxes:
        val, part = term.signal(xn, jn)
        lmask, lval, rmask, rval = _flux_arrays(term, n_el, overrides)
        left = np.where(lmask, lval, val[:-1])
        right = np.where(rmask, rval, val[1:])
        B = bank.boundary(term.test)
        scale = term.coeff * jac ** term.jac_power
        r += scale[:, None] * (right[:, None] * B[None, :, 1] - left[:, None] * B[None, :, 0])
        tape.append(("flux", term, scale, B, part, lmask, rmask))
    return r, tape


def _residual_adjoint(tape, dr, shape_q, shape_n):
    """Adjoint seeds for the Gauss-point and node jets given d loss / d r."""
    n_el, nq = shape_q[1], shape_q[2]
    sq = np.zeros((shape_q[0], n_el * nq))
    sn = np.zeros(shape_n)
    for item in tape:
        if item[0] == "volume":
            _, _, scale, filt, part = item
            if part is None:
                continue
            dG = (scale[:, None] * dr) @ filt
            sq += dG.ravel()[None, :] * part
        else:
            _, _, scale, B, part, lmask, rmask = item
            if part is None:
                continue
            w = scale[:, None] * dr
            dright = np.where(rmask, 0.0, w @ B[:, 1])
            dleft = np.where(lmask, 0.0, -(w @ B[:, 0]))
            dval = np.zeros(n_el + 1)
            dval[1:] += dright
            dval[:-1] += dleft
            sn += dval[None, :] * part
    return sq.reshape(shape_q), sn


def element_residual(
    n: int,
    mesh: Mesh,
    bank: FilterBank,
    spec: SignalSpec,
    quad_jets: JetBatch,
    boundary_jets: JetBatch | None,
    overrides: Overrides | None = None,
) -> np.ndarray:
    """Residual vector (length K) of element n.

    ``quad_jets`` holds the jets at the element's Q Gauss points and
    ``boundary_jets`` the jets at its two ends [x_n, x_{n+1}].
    """
    if boundary_jets is None or boundary_jets.data.shape[1] != 2:
        raise ValueError("element residual needs jets at both element boundaries")
    if quad_jets.data.shape[1] != bank.rule.order:
        raise ValueError("quadrature jets do not match the rule")
    for jb in (quad_jets, boundary_jets):
        if jb.max_order < spec.max_order:
            raise ValueError(f"jets of order {spec.max_order} required")
    local = {
        (0, side, name): v
        for (m, side, name), v in (overrides or {}).items()
        if m == n
    }
    jac = mesh.jacobians[n:n + 1]
    xq = quad_jets.points[None, :]
    jq = quad_jets.data[: spec.max_order + 1, None, :]
    r, _ = _residuals(bank, spec, jac, xq, jq, boundary_jets.points,
                      boundary_jets.data[: spec.max_order + 1], local)
    return r[0]


class WeakFormLoss:
    """Residual and boundary losses of one (problem, mesh, bank) on a network.

    All network evaluations for a pass go through one batched jet call: Gauss
    points of every element, the N_el + 1 mesh nodes (shared by neighbouring
    elements) and the essential-condition points.
    """

    def __init__(self, mesh: Mesh, bank: FilterBank, spec: SignalSpec,
                 essential=(), overrides: Overrides | None = None):
        self.mesh = mesh
        self.bank = bank
        self.spec = spec
        self.essential = tuple(essential)
        self.overrides = dict(overrides or {})
        self.xq = mesh.quadrature_positions(bank.rule)
        self.xn = mesh.boundaries
        self.xe = np.array([c.x for c in self.essential], dtype=float)
        self.jac = mesh.jacobians
        self.order = max([spec.max_order] + [c.order for c in self.essential])
        self.points = np.concatenate([self.xq.ravel(), self.xn, self.xe])
        self._nq = self.xq.size
        self._nn = self.xn.size

    def _split(self, jets):
        a, b = self._nq, self._nq + self._nn
        R = self.spec.max_order + 1
        jq = jets[:R, :a].reshape(R, *self.xq.shape)
        return jq, jets[:R, a:b], jets[:, b:]

    def residuals(self, net: DiffNet) -> np.ndarray:
        jets, _ = net.jets(self.points, self.order)
        jq, jn, _ = self._split(jets)
        r, _ = _residuals(self.bank, self.spec, self.jac, self.xq, jq, self.xn, jn,
                          self.overrides)
        return r

    def losses(self, net: DiffNet) -> tuple[float, float]:
        jets, _ = net.jets(self.points, self.order)
        return self._losses(jets)[:2]

    def _losses(self, jets):
        jq, jn, je = self._split(jets)
        r, tape = _residuals(self.bank, self.spec, self.jac, self.xq, jq, self.xn, jn,
                             self.overrides)
        loss_r = float(np.mean(r * r))
        if self.essential:
            viol = np.array([je[c.order, i] - c.value for i, c in enumerate(self.essential)])
            loss_b = float(np.mean(viol * viol))
        else:
            viol = np.zeros(0)
            loss_b = 0.0
        return loss_r, loss_b, r, tape, viol

    def value_and_grad(self, net: DiffNet, tau_r: float = 1.0, tau_b: float = 1.0):
        """Return (L_R, L_B, gradient of tau_r*L_R + tau_b*L_B w.r.t. params)."""
        jets, cache = net.jets(self.points, self.order)
        loss_r, loss_b, r, tape, viol = self._losses(jets)
        R = self.spec.max_order + 1
        dr = (2.0 * tau_r / r.size) * r
        sq, sn = _residual_adjoint(tape, dr, (R,) + self.xq.shape, (R, self._nn))
        seeds = np.zeros_like(jets)
        seeds[:R, :self._nq] = sq.reshape(R, -1)
        seeds[:R, self._nq:self._nq + self._nn] = sn
        if viol.size:
            off = self._nq + self._nn
            for i, c in enumerate(self.essential):
                seeds[c.order, off + i] += 2.0 * tau_b * viol[i] / viol.size
        grad = net.backward(self.order, cache, seeds)
        return loss_r, loss_b, grad


def residual_loss(mesh: Mesh, bank: FilterBank, spec: SignalSpec, net: DiffNet,
                  overrides: Overrides | None = None) -> float:
    """Mean of the N_el * K squared element residuals."""
    r = WeakFormLoss(mesh, bank, spec, (), overrides).residuals(net)
    return float(np.mean(r * r))


def boundary_loss(essential, net: DiffNet) -> float:
    """Mean squared violation of the essential conditions."""
    essential = tuple(essential)
    if not essential:
        raise ValueError("at least one essential condition is required")
    order = max(c.order for c in essential)
    jets, _ = net.jets(np.array([c.x for c in essential], dtype=float), order)
    viol = np.array([jets[c.order, i] - c.value for i, c in enumerate(essential)])
    return float(np.mean(viol * viol))


@dataclass
class LossState:
    loss_r: float = 0.0
    loss_b: float = 0.0
    tau_r: float = 1.0
    tau_b: float = 1.0
    phase: str = "adam"


def total_loss(state: LossState) -> float:
    return state.tau_r * state.loss_r + state.tau_b * state.loss_b


def update_penalties(state: LossState, rate: float) -> LossState:
    """Gradient-ascent step on the penalties, clamped to be nondecreasing.

    d(total)/d(tau_R) = L_R and d(total)/d(tau_B) = L_B; the penalties are frozen
    outside the ADAM phase.
    """
    if state.phase != "adam":
        return state
    return replace(
        state,
        tau_r=max(state.tau_r, state.tau_r + rate * state.loss_r),
        tau_b=max(state.tau_b, state.tau_b + rate * state.loss_b),
    )
