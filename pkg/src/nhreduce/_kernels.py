"""Kernel dispatch: the compiled extension when built, numpy otherwise.

Set ``NHREDUCE_PURE_PYTHON=1`` to force the numpy versions.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("NHREDUCE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def exterior_assemble(Dalpha, alpha, C):
    return _impl.exterior_assemble(_c(Dalpha), _c(alpha), _c(C))


def expm_so3(w):
    return _impl.expm_so3(_c(w))


def polar_so3(R):
    return _impl.polar_so3(_c(R))


def small_solve(A, b):
    return _impl.small_solve(_c(A), _c(b))


def rk4_combine(y, k1, k2, k3, k4, dt):
    return _impl.rk4_combine(_c(y), _c(k1), _c(k2), _c(k3), _c(k4), float(dt))
