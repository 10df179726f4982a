"""Backend selection for the hot loops.

The compiled extension ``graft._ckernels`` is used when it imports; otherwise
the pure-Python implementation in ``graft._pykernels`` is used. Setting
``GRAFT_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from graft import _pykernels

if os.environ.get("GRAFT_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from graft import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"


def pav_decreasing(y, w=None, *, backend=None):
    impl = _select(backend)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.ascontiguousarray(w, dtype=np.float64)
    return impl.pav_decreasing(y, w)


def concordance_counts(scores, times, events, *, backend=None):
    impl = _select(backend)
    return impl.concordance_counts(
        np.ascontiguousarray(scores, dtype=np.float64),
        np.ascontiguousarray(times, dtype=np.float64),
        np.ascontiguousarray(events, dtype=np.int64),
    )


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from graft import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {backend!r}")
