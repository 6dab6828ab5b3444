"""Kernel dispatch: compiled Cython core when available, numpy otherwise.

Set ``MULTISENS_PURE_PYTHON=1`` to force the numpy backend.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("MULTISENS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def ou_integrate(f, noise, z0, v0, eps, dt_macro, dt_micro, n_micro, window_average=False):
    """Forward Euler-Maruyama micro steps of the fast OU variable, forward Euler macro steps.

    ``noise`` has shape ``(n, n_macro * n_micro)``; returns ``(n, n_macro)``
    slow-variable values after each macro step.
    """
    f = np.ascontiguousarray(f, dtype=float)
    noise = np.ascontiguousarray(noise, dtype=float)
    return _impl.ou_integrate(f, noise, float(z0), float(v0), float(eps), float(dt_macro),
                              float(dt_micro), int(n_micro), bool(window_average))


def ks_statistic(a_sorted, b_sorted):
    """sup |ECDF_a - ECDF_b| for two already sorted samples."""
    return float(_impl.ks_statistic(np.ascontiguousarray(a_sorted, dtype=float),
                                    np.ascontiguousarray(b_sorted, dtype=float)))


def jansen_bootstrap(fA, fB, fAB, idx):
    """Jansen total indices for each bootstrap row-index resample in ``idx``."""
    return _impl.jansen_bootstrap(np.ascontiguousarray(fA, dtype=float),
                                  np.ascontiguousarray(fB, dtype=float),
                                  np.ascontiguousarray(fAB, dtype=float),
                                  np.ascontiguousarray(idx, dtype=np.int64))


def python_backend():
    """The numpy reference module, regardless of the active backend."""
    return _kernels_py


def compiled_backend():
    """The compiled module, or ``None`` when it is not built."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels
