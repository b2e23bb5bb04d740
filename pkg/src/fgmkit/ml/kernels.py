"""Kernel selector: the compiled extension when built, else pure Python.

Set FGMKIT_PURE_PYTHON=1 to force the pure-Python kernels.
"""

import os

import numpy as np

from . import _pykernels

_compiled = None
if os.environ.get("FGMKIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def best_split(X, y, features, min_leaf):
    if _compiled is None:
        return _pykernels.best_split(X, y, features, min_leaf)
    return _compiled.best_split(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(features, dtype=np.int_),
        int(min_leaf),
    )


def smo_solve(K, y, C, epsilon, tol, max_iter):
    if _compiled is None:
        return _pykernels.smo_solve(K, y, C, epsilon, tol, max_iter)
    return _compiled.smo_solve(
        np.ascontiguousarray(K, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        float(C), float(epsilon), float(tol), int(max_iter),
    )
