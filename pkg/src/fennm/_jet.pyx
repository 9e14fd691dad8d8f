# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled jet kernel; same contract and cache layout as ``_jet_py``.

Dense layer products go through BLAS; the Taylor-jet composition of the
activation and its reverse sweep are fused per neuron in C.
"""
import numpy as np
from libc.math cimport tanh, sin, cos

cdef enum:
    TANH = 0


cdef inline void _derivs(int act, double z, double* s) noexcept nogil:
    cdef double t, s1, sn, cs
    if act == TANH:
        t = tanh(z)
        s1 = 1.0 - t * t
        s[0] = t
        s[1] = s1
        s[2] = -2.0 * t * s1
        s[3] = s1 * (6.0 * t * t - 2.0)
        s[4] = 8.0 * t * s1 * (2.0 - 3.0 * t * t)
    else:
        sn = sin(z)
        cs = cos(z)
        s[0] = sn
        s[1] = cs
        s[2] = -sn
        s[3] = -cs
        s[4] = sn


cdef void _activate(int act, const double[:, :, ::1] z, double[:, :, ::1] s,
                    double[:, :, ::1] g) noexcept nogil:
    cdef Py_ssize_t R = z.shape[0], M = z.shape[1], n = z.shape[2]
    cdef Py_ssize_t m, o, k
    cdef double d[5]
    cdef double z1 = 0.0, z2 = 0.0
    for m in range(M):
        for o in range(n):
            _derivs(act, z[0, m, o], d)
            for k in range(R + 1):
                s[k, m, o] = d[k]
            g[0, m, o] = d[0]
            if R > 1:
                z1 = z[1, m, o]
                g[1, m, o] = d[1] * z1
            if R > 2:
                z2 = z[2, m, o]
                g[2, m, o] = d[2] * z1 * z1 + d[1] * z2
            if R > 3:
                g[3, m, o] = d[3] * z1 * z1 * z1 + 3.0 * d[2] * z1 * z2 + d[1] * z[3, m, o]


cdef void _activate_adjoint(const double[:, :, ::1] z, const double[:, :, ::1] s,
                            const double[:, :, ::1] dg, double[:, :, ::1] dz) noexcept nogil:
    cdef Py_ssize_t R = z.shape[0], M = z.shape[1], n = z.shape[2]
    cdef Py_ssize_t m, o
    cdef double z1 = 0.0, z2 = 0.0, z3 = 0.0, s1, s2 = 0.0, s3 = 0.0, s4 = 0.0
    cdef double acc0, acc1 = 0.0, acc2 = 0.0
    for m in range(M):
        for o in range(n):
            s1 = s[1, m, o]
            acc0 = dg[0, m, o] * s1
            if R > 1:
                z1 = z[1, m, o]
                s2 = s[2, m, o]
                acc1 = dg[1, m, o] * s1
                acc0 = acc0 + dg[1, m, o] * s2 * z1
            if R > 2:
                z2 = z[2, m, o]
                s3 = s[3, m, o]
                acc2 = dg[2, m, o] * s1
                acc1 = acc1 + 2.0 * dg[2, m, o] * s2 * z1
                acc0 = acc0 + dg[2, m, o] * (s3 * z1 * z1 + s2 * z2)
            if R > 3:
                z3 = z[3, m, o]
                s4 = s[4, m, o]
                dz[3, m, o] = dg[3, m, o] * s1
                acc2 = acc2 + 3.0 * dg[3, m, o] * s2 * z1
                acc1 = acc1 + dg[3, m, o] * (3.0 * s3 * z1 * z1 + 3.0 * s2 * z2)
                acc0 = acc0 + dg[3, m, o] * (s4 * z1 * z1 * z1 + 3.0 * s3 * z1 * z2 + s2 * z3)
            dz[0, m, o] = acc0
            if R > 1:
                dz[1, m, o] = acc1
            if R > 2:
                dz[2, m, o] = acc2


def _layers(double[::1] params, sizes):
    out = []
    cdef Py_ssize_t off = 0
    p = np.asarray(params)
    n = len(sizes)
    for nin, nout in zip(sizes[:n - 1], sizes[1:]):
        W = p[off:off + nin * nout].reshape(nout, nin)
        off += nin * nout
        b = p[off:off + nout]
        off += nout
        out.append((W, b))
    return out


def forward(params, sizes, int act, int order, x):
    cdef Py_ssize_t R = order + 1
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t M = x.shape[0]
    params = np.ascontiguousarray(params, dtype=np.float64)
    h = np.zeros((R, M, 1))
    h[0, :, 0] = x
    if R > 1:
        h[1, :, 0] = 1.0
    layers = _layers(params, sizes)
    cdef Py_ssize_t nl = len(layers)
    hs, zs, ss = [], [], []
    for W, b in layers[:nl - 1]:
        nout = W.shape[0]
        z = np.dot(h.reshape(R * M, h.shape[2]), W.T).reshape(R, M, nout)
        z[0] += b
        s = np.empty((R + 1, M, nout))
        g = np.empty_like(z)
        _activate(act, z, s, g)
        hs.append(h)
        zs.append(z)
        ss.append(s)
        h = g
    W, b = layers[nl - 1]
    out = np.dot(h.reshape(R * M, h.shape[2]), W.T).reshape(R, M, W.shape[0])
    out[0] += b
    hs.append(h)
    return out[:, :, 0], (hs, zs, ss)


def backward(params, sizes, int act, int order, cache, seeds):
    cdef Py_ssize_t R = order + 1
    params = np.ascontiguousarray(params, dtype=np.float64)
    hs, zs, ss = cache
    layers = _layers(params, sizes)
    dz = np.ascontiguousarray(seeds, dtype=np.float64).reshape(R, -1, 1)
    grads = []
    cdef Py_ssize_t li
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        h = hs[li]
        nout, nin = W.shape[0], W.shape[1]
        dz2 = dz.reshape(-1, nout)
        grads.append((np.dot(dz2.T, h.reshape(-1, nin)), dz[0].sum(axis=0)))
        if li == 0:
            break
        dh = np.dot(dz2, W).reshape(R, -1, nin)
        dz = np.empty_like(dh)
        _activate_adjoint(zs[li - 1], ss[li - 1], dh, dz)
    flat = []
    for gW, gb in reversed(grads):
        flat.append(gW.ravel())
        flat.append(gb)
    return np.concatenate(flat)
