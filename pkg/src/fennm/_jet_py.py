"""Numpy implementation of the jet kernel (reference and fallback).

Jets are arrays of shape (R, M, n): derivatives of order 0..R-1 with respect to
the scalar network input, for M points and n neurons. The forward pass pushes
truncated Taylor jets through the network; the backward pass is the reverse
sweep of that computation and returns the gradient of
``sum(seeds * jets_out)`` with respect to the flat parameter vector.
"""
from __future__ import annotations

import numpy as np

TANH, SIN = 0, 1


def _act_derivs(act: int, z0: np.ndarray, count: int) -> np.ndarray:
    """sigma and its first count-1 derivatives at z0, stacked on axis 0."""
    s = np.empty((count,) + z0.shape)
    if act == TANH:
        t = np.tanh(z0)
        s1 = 1.0 - t * t
        s[0] = t
        s[1] = s1
        if count > 2:
            s[2] = -2.0 * t * s1
        if count > 3:
            s[3] = s1 * (6.0 * t * t - 2.0)
        if count > 4:
            s[4] = 8.0 * t * s1 * (2.0 - 3.0 * t * t)
    else:
        sn, cs = np.sin(z0), np.cos(z0)
        cyc = (sn, cs, -sn, -cs, sn)
        for k in range(count):
            s[k] = cyc[k]
    return s


def _compose(s, z, R):
    g = np.empty_like(z)
    g[0] = s[0]
    if R > 1:
        z1 = z[1]
        g[1] = s[1] * z1
    if R > 2:
        z2 = z[2]
        g[2] = s[2] * z1 * z1 + s[1] * z2
    if R > 3:
        g[3] = s[3] * z1 * z1 * z1 + 3.0 * s[2] * z1 * z2 + s[1] * z[3]
    return g


def _compose_adjoint(s, z, dg, R):
    dz = np.empty_like(dg)
    dz[0] = dg[0] * s[1]
    if R > 1:
        z1 = z[1]
        dz[1] = dg[1] * s[1]
        dz[0] += dg[1] * s[2] * z1
    if R > 2:
        z2 = z[2]
        z1sq = z1 * z1
        dz[2] = dg[2] * s[1]
        dz[1] += 2.0 * dg[2] * s[2] * z1
        dz[0] += dg[2] * (s[3] * z1sq + s[2] * z2)
    if R > 3:
        z3 = z[3]
        dz[3] = dg[3] * s[1]
        dz[2] += 3.0 * dg[3] * s[2] * z1
        dz[1] += dg[3] * (3.0 * s[3] * z1sq + 3.0 * s[2] * z2)
        dz[0] += dg[3] * (s[4] * z1sq * z1 + 3.0 * s[3] * z1 * z2 + s[2] * z3)
    return dz


def _layers(params, sizes):
    off = 0
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        W = params[off:off + nin * nout].reshape(nout, nin)
        off += nin * nout
        b = params[off:off + nout]
        off += nout
        yield W, b


def forward(params, sizes, act, order, x):
    """Return (jets (R, M), cache) for the network at points x."""
    R = order + 1
    M = x.shape[0]
    h = np.zeros((R, M, 1))
    h[0, :, 0] = x
    if R > 1:
        h[1, :, 0] = 1.0
    layers = list(_layers(params, sizes))
    hs, zs, ss = [], [], []
    for W, b in layers[:-1]:
        z = (h.reshape(R * M, -1) @ W.T).reshape(R, M, -1)
        z[0] += b
        s = _act_derivs(act, z[0], R + 1)
        hs.append(h)
        zs.append(z)
        ss.append(s)
        h = _compose(s, z, R)
    W, b = layers[-1]
    out = (h.reshape(R * M, -1) @ W.T).reshape(R, M, -1)
    out[0] += b
    hs.append(h)
    return out[:, :, 0], (hs, zs, ss)


def backward(params, sizes, act, order, cache, seeds):
    """Gradient of sum(seeds * jets) with respect to params."""
    R = order + 1
    hs, zs, ss = cache
    layers = list(_layers(params, sizes))
    grads = []
    dz = np.ascontiguousarray(seeds, dtype=float).reshape(R, -1, 1)
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        h = hs[li]
        nout, nin = W.shape
        gW = dz.reshape(-1, nout).T @ h.reshape(-1, nin)
        gb = dz[0].sum(axis=0)
        grads.append((gW, gb))
        if li == 0:
            break
        dh = (dz.reshape(-1, nout) @ W).reshape(R, -1, nin)
        dz = _compose_adjoint(ss[li - 1], zs[li - 1], dh, R)
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return np.concatenate(flat)
