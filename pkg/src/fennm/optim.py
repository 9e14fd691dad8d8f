"""ADAM and L-BFGS optimizers and the two-phase training protocol.

Training runs ADAM on the network parameters while the penalties tau_R, tau_B
take plain ascent steps, then L-BFGS with the penalties frozen.
"""
from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import line_search

from .weakform import LossState, WeakFormLoss, total_loss, update_penalties

MACHINE_EPS = 2.220e-16


class TrainingDiverged(FloatingPointError):
    """Non-finite loss or gradient; carries the history recorded so far."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history or []


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def fresh(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One bias-corrected ADAM update; returns (new state, new params)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != params.shape or grad.shape != state.m.shape:
        raise ValueError("gradient, parameters and moments must have equal length")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient in ADAM step")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    mhat = m / (1 - state.beta1**t)
    vhat = v / (1 - state.beta2**t)
    params = params - state.lr * mhat / (np.sqrt(vhat) + state.eps)
    return replace(state, m=m, v=v, t=t), params


@dataclass
class LbfgsState:
    m: int = 20
    c1: float = 1e-4
    c2: float = 0.9
    s: deque = field(default_factory=deque)
    y: deque = field(default_factory=deque)
    iteration: int = 0
    skipped: int = 0

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Store a curvature pair unless s.y <= eps * y.y.

        The test is relative so pairs keep being stored once the loss itself
        is far below 1e-14.
        """
        sy = float(s @ y)
        if sy <= 0.0 or sy <= MACHINE_EPS * float(y @ y):
            self.skipped += 1
            return False
        self.s.append(s)
        self.y.append(y)
        while len(self.s) > self.m:
            self.s.popleft()
            self.y.popleft()
        return True

    def direction(self, g: np.ndarray) -> np.ndarray:
        """-H g by the two-loop recursion."""
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(self.s), reversed(self.y)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a))
        if self.s:
            s, y = self.s[-1], self.y[-1]
            q *= (s @ y) / (y @ y)
        for (s, y), (rho, a) in zip(zip(self.s, self.y), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        return -q


class _Memo:
    """Caches the last loss_and_grad call so the line search pays once per point."""

    def __init__(self, fn):
        self.fn = fn
        self.x = None
        self.out = None
        self.calls = 0

    def __call__(self, x):
        if self.x is None or not np.array_equal(x, self.x):
            self.calls += 1
            out = self.fn(x)
            f, g = float(out[0]), np.asarray(out[1], dtype=float)
            if not np.isfinite(f) or not np.all(np.isfinite(g)):
                # the line search treats inf as "too long a step"
                f, g = np.inf, np.full_like(g, np.nan)
            self.x, self.out = x.copy(), (f, g) + tuple(out[2:])
        return self.out

    def f(self, x):
        return self(x)[0]

    def g(self, x):
        return self(x)[1]


def _search(memo, x, p, f, g, state, f_prev=None):
    # with f_prev the first trial step comes from the last decrease (capped at 1),
    # without it the search starts from the unit quasi-Newton step
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = line_search(memo.f, memo.g, x, p, gfk=g, old_fval=f, old_old_fval=f_prev,
                          c1=state.c1, c2=state.c2, maxiter=30)
    alpha = res[0]
    if alpha is None or not np.isfinite(alpha) or alpha <= 0:
        return None
    x_new = x + alpha * p
    out = memo(x_new)
    if not np.isfinite(out[0]) or out[0] > f:
        return None
    return x_new, out


def lbfgs_run(state: LbfgsState, params, loss_and_grad, max_iters: int,
              tol: float = 1e-12, loss_floor: float = MACHINE_EPS, callback=None):
    """Minimize with L-BFGS and a strong-Wolfe line search.

    ``loss_and_grad(x)`` returns ``(f, g, *extra)``; ``callback(iteration, x,
    out)`` sees each accepted point. Returns ``(params, history)`` where the
    history lists the loss after every accepted iteration.
    """
    memo = _Memo(loss_and_grad)
    x = np.array(params, dtype=float)
    out = memo(x)
    f, g = out[0], out[1]
    if not np.isfinite(f):
        raise FloatingPointError("non-finite loss at the L-BFGS start point")
    history = []
    fallback_used = False
    f_prev = f + np.linalg.norm(g) / 2
    for _ in range(max_iters):
        if f <= loss_floor or np.max(np.abs(g)) <= tol:
            break
        p = state.direction(g) if state.s else -g
        if not p @ g < 0:
            state.s.clear()
            state.y.clear()
            p = -g
        step = _search(memo, x, p, f, g, state, None if state.s else f_prev)
        if step is None:
            if fallback_used:
                break
            # steepest-descent restart with a fresh memory
            fallback_used = True
            state.s.clear()
            state.y.clear()
            step = _search(memo, x, -g, f, g, state, f + np.linalg.norm(g) / 2)
            if step is None:
                break
        else:
            fallback_used = False
        x_new, out = step
        state.push(x_new - x, out[1] - g)
        f_prev = f
        x, f, g = x_new, out[0], out[1]
        state.iteration += 1
        history.append(f)
        if callback is not None:
            callback(state.iteration, x, out)
    return x, history


@dataclass(frozen=True)
class Schedule:
    adam_epochs: int = 10000
    lbfgs_epochs: int = 10000
    lr: float = 1e-3
    eta_tau: float | None = None  # defaults to lr
    eps: float = MACHINE_EPS

    def __post_init__(self):
        if self.adam_epochs < 0 or self.lbfgs_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")

    @property
    def tau_rate(self) -> float:
        return self.lr if self.eta_tau is None else self.eta_tau


def _row(it, state: LossState):
    return {"iter": it, "loss_r": state.loss_r, "loss_b": state.loss_b,
            "tau_r": state.tau_r, "tau_b": state.tau_b, "total": total_loss(state),
            "phase": state.phase}


@dataclass
class TrainResult:
    net: object
    history: list
    state: LossState
    adam_iterations: int = 0
    lbfgs_iterations: int = 0


def train(problem, mesh, bank, net, schedule: Schedule, state: LossState | None = None,
          loss: WeakFormLoss | None = None) -> TrainResult:
    """Two-phase training of ``net`` (modified in place and returned).

    History row 0 is the initial state; each later row follows one optimizer
    iteration. ``state`` carries penalties in from a previous run.
    """
    if loss is None:
        loss = WeakFormLoss(mesh, bank, problem.weak_form, problem.essential,
                            problem.overrides_for(mesh))
    state = replace(state or LossState(), phase="adam")
    history = []

    def evaluate(tr, tb):
        lr_, lb_, g = loss.value_and_grad(net, tr, tb)
        if not (np.isfinite(lr_) and np.isfinite(lb_) and np.all(np.isfinite(g))):
            raise TrainingDiverged("non-finite loss or gradient", history)
        return lr_, lb_, g

    lr_, lb_, g = evaluate(state.tau_r, state.tau_b)
    state = replace(state, loss_r=lr_, loss_b=lb_)
    history.append(_row(0, state))
    it = 0
    adam = AdamState.fresh(net.dof, lr=schedule.lr)
    n_adam = 0
    for _ in range(schedule.adam_epochs):
        if total_loss(state) <= schedule.eps:
            break
        adam, net.params = adam_step(adam, net.params, g)
        state = update_penalties(state, schedule.tau_rate)
        lr_, lb_, g = evaluate(state.tau_r, state.tau_b)
        state = replace(state, loss_r=lr_, loss_b=lb_)
        it += 1
        n_adam += 1
        history.append(_row(it, state))

    state = replace(state, phase="lbfgs")
    n_lbfgs = 0
    if schedule.lbfgs_epochs > 0 and total_loss(state) > schedule.eps:
        tr, tb = state.tau_r, state.tau_b

        def fun(p):
            net.params = p
            lr_, lb_, g = loss.value_and_grad(net, tr, tb)
            return tr * lr_ + tb * lb_, g, lr_, lb_

        def record(i, p, out):
            nonlocal state, n_lbfgs
            state = replace(state, loss_r=out[2], loss_b=out[3])
            n_lbfgs += 1
            history.append(_row(it + i, state))

        params, _ = lbfgs_run(LbfgsState(), net.params.copy(), fun, schedule.lbfgs_epochs,
                              tol=0.0, loss_floor=schedule.eps, callback=record)
        net.params = np.ascontiguousarray(params)
    return TrainResult(net, history, state, n_adam, n_lbfgs)
