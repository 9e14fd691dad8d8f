"""Dense scalar network with input-derivative jets and exact parameter gradients.

``forward_jets`` returns u, u', u'', u''' at a batch of points by pushing
truncated Taylor jets through the layers. Parameter gradients of any scalar
built from those jets come from a reverse sweep over the same computation, so
losses containing third derivatives are differentiated exactly.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernel

ACTIVATIONS = {"tanh": kernel.TANH, "sin": kernel.SIN}
MAX_ORDER = 3


@dataclass(frozen=True)
class NetConfig:
    layers: int = 2
    width: int = 20
    activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.width < 1:
            raise ValueError("need at least one hidden layer of width >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(ACTIVATIONS)}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (1,) + (self.width,) * self.layers + (1,)


def dof_count(sizes) -> int:
    """Number of weights and biases: sum over affine layers of n_in*n_out + n_out."""
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


class DiffNet:
    """Feedforward network R -> R stored as one flat float64 parameter vector."""

    def __init__(self, config: NetConfig, params: np.ndarray | None = None):
        self.config = config
        self.sizes = config.sizes
        self._act = ACTIVATIONS[config.activation]
        n = dof_count(self.sizes)
        if params is None:
            params = np.zeros(n)
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ValueError(f"expected {n} parameters, got shape {params.shape}")
        self.params = params

    @property
    def dof(self) -> int:
        return self.params.size

    def copy(self) -> "DiffNet":
        return DiffNet(self.config, self.params.copy())

    def unflatten(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer (W, b) views, W of shape (n_out, n_in)."""
        out, off = [], 0
        for nin, nout in zip(self.sizes[:-1], self.sizes[1:]):
            W = self.params[off:off + nin * nout].reshape(nout, nin)
            off += nin * nout
            out.append((W, self.params[off:off + nout]))
            off += nout
        return out

    @staticmethod
    def flatten(layers) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in layers])

    def jets(self, x, order: int = 0):
        """Raw kernel call: (jets array of shape (order+1, M), backward cache)."""
        return kernel.forward(self.params, self.sizes, self._act, order, x)

    def backward(self, order: int, cache, seeds) -> np.ndarray:
        return kernel.backward(self.params, self.sizes, self._act, order, cache, seeds)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.jets(x, 0)[0][0]


@dataclass
class JetBatch:
    """Network value and input derivatives at a batch of points.

    ``data[r]`` is the r-th derivative; orders above ``max_order`` are absent.
    """

    points: np.ndarray
    data: np.ndarray

    @property
    def max_order(self) -> int:
        return self.data.shape[0] - 1

    def order(self, r: int) -> np.ndarray:
        if r > self.max_order:
            raise ValueError(f"derivative order {r} not computed (max {self.max_order})")
        return self.data[r]

    @property
    def u(self):
        return self.data[0]

    @property
    def du(self):
        return self.order(1)

    @property
    def d2u(self):
        return self.order(2)

    @property
    def d3u(self):
        return self.order(3)


def init_network(cfg: NetConfig) -> DiffNet:
    """Glorot-uniform weights, zero biases, reproducible from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    layers = []
    for nin, nout in zip(cfg.sizes[:-1], cfg.sizes[1:]):
        bound = np.sqrt(6.0 / (nin + nout))
        layers.append((rng.uniform(-bound, bound, size=(nout, nin)), np.zeros(nout)))
    return DiffNet(cfg, DiffNet.flatten(layers))


def _check_points(points) -> np.ndarray:
    x = np.ascontiguousarray(np.atleast_1d(np.asarray(points, dtype=float)))
    if x.ndim != 1:
        raise ValueError("points must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def forward_jets(net: DiffNet, points, max_order: int = 0) -> JetBatch:
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in 0..{MAX_ORDER}")
    x = _check_points(points)
    data, _ = net.jets(x, max_order)
    return JetBatch(x, data)


LossBuilder = Callable[[JetBatch], tuple[float, np.ndarray]]


def param_gradient(net: DiffNet, points, loss_builder: LossBuilder, max_order: int = 0):
    """Exact gradient of a scalar built from jets at fixed points.

    ``loss_builder(jets)`` returns ``(loss, seeds)`` where ``seeds`` has the
    shape of ``jets.data`` and holds d loss / d jets. Returns
    ``(loss, gradient)`` with the gradient of length ``net.dof``.
    """
    if not 0 <= max_order <= MAX_ORDER:
        raise ValueError(f"max_order must be in 0..{MAX_ORDER}")
    x = _check_points(points)
    data, cache = net.jets(x, max_order)
    loss, seeds = loss_builder(JetBatch(x, data))
    seeds = np.asarray(seeds, dtype=float)
    if seeds.shape != data.shape:
        raise ValueError(f"seed shape {seeds.shape} does not match jets {data.shape}")
    return float(loss), net.backward(max_order, cache, seeds)


_MAGIC = b"FENNMCK1"
_HEADER = struct.Struct("<8sII8sqQ")


def save_checkpoint(net: DiffNet, path) -> None:
    """Header (magic, layers, width, activation, seed, count) + little-endian float64 params."""
    c = net.config
    head = _HEADER.pack(_MAGIC, c.layers, c.width, c.activation.encode().ljust(8, b"\0"),
                        c.seed, net.dof)
    Path(path).write_bytes(head + net.params.astype("<f8").tobytes())


def load_checkpoint(path) -> DiffNet:
    raw = Path(path).read_bytes()
    magic, layers, width, act, seed, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    cfg = NetConfig(layers, width, act.rstrip(b"\0").decode(), seed)
    params = np.frombuffer(raw, dtype="<f8", count=count, offset=_HEADER.size)
    return DiffNet(cfg, params.astype(np.float64))
