"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy versions in ``_pykernels`` are used. Set ``LRFACE_BACKEND=python`` to
force the fallback, or call :func:`use` at runtime. Convolutions with many
input and output channels always take the numpy path, which is faster there
(see ``benchmarks/bench_kernels.py``).
"""
import logging
import os
from contextlib import contextmanager

import numpy as np

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

_IMPLS = {"python": _pykernels}
if _ckernels is not None:
    _IMPLS["cython"] = _ckernels

_requested = os.environ.get("LRFACE_BACKEND", "").strip().lower()
if _requested and _requested not in _IMPLS:
    log.warning("backend %r unavailable, using fallback", _requested)
    _requested = ""
_active = _IMPLS[_requested or ("cython" if "cython" in _IMPLS else "python")]


def available():
    """Names of the importable backends."""
    return sorted(_IMPLS)


def backend():
    """Name of the active backend."""
    return "cython" if _active is _ckernels else "python"


def use(name):
    """Switch the active backend; returns the previous name."""
    global _active
    if name not in _IMPLS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available()}")
    prev = backend()
    _active = _IMPLS[name]
    return prev


@contextmanager
def using(name):
    prev = use(name)
    try:
        yield
    finally:
        use(prev)


def lbp_codes(padded, radius, dxs, dys):
    return _active.lbp_codes(
        np.ascontiguousarray(padded, dtype=np.float64), int(radius),
        np.ascontiguousarray(dxs, dtype=np.float64), np.ascontiguousarray(dys, dtype=np.float64),
    )


def conv2d_same(padded, weights, bias):
    impl = _active
    cout, cin = np.shape(weights)[:2]
    if cin >= 8 and cout >= 4:
        # wide layers: the numpy version's batched matmul beats the scalar loop
        impl = _pykernels
    return impl.conv2d_same(
        np.ascontiguousarray(padded, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(bias, dtype=np.float64),
    )


def chi2_matrix(probes, gallery):
    return _active.chi2_matrix(
        np.ascontiguousarray(probes, dtype=np.float64),
        np.ascontiguousarray(gallery, dtype=np.float64),
    )
