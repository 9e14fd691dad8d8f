"""Jet kernel backend selection.

The compiled Cython kernel is used when it was built; otherwise the numpy
implementation is used. Set ``FENNM_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _jet_py

_py_backend = _jet_py
_compiled = None
try:
    from . import _jet as _compiled  # type: ignore[attr-defined,no-redef]
except ImportError:
    pass

if _compiled is not None and os.environ.get("FENNM_BACKEND", "").lower() != "python":
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _py_backend
    BACKEND = "python"

TANH = _jet_py.TANH
SIN = _jet_py.SIN


def available_backends() -> dict:
    out = {"python": _py_backend}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def forward(params, sizes, act, order, x):
    return _impl.forward(params, sizes, act, order, x)


def backward(params, sizes, act, order, cache, seeds):
    return _impl.backward(params, sizes, act, order, cache, seeds)
