"""Backend selection for the Fourier field kernels.

The compiled extension ``flowsym._ckernels`` is used when it imports; the
numpy implementation in ``flowsym._kernels_py`` is the fallback. Setting
``FLOWSYM_BACKEND=python`` forces the fallback, ``FLOWSYM_BACKEND=compiled``
makes a missing extension an import error.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_requested = os.environ.get("FLOWSYM_BACKEND", "auto").strip().lower()
if _requested == "compiled" and _ckernels is None:
    raise ImportError("FLOWSYM_BACKEND=compiled but flowsym._ckernels is not built")

BACKEND = "compiled" if (_ckernels is not None and _requested != "python") else "python"
HAVE_COMPILED = _ckernels is not None


def _c_forward(theta, u, order=0):
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    n = len(u)
    F = np.empty((n, 2))
    J = np.empty((n, 2, 2)) if order >= 1 else np.empty((1, 2, 2))
    H = np.empty((n, 2, 2, 2)) if order >= 2 else np.empty((1, 2, 2, 2))
    _ckernels.fourier_forward_into(theta, u, int(order), F, J, H)
    return F, (J if order >= 1 else None), (H if order >= 2 else None)


def _c_adjoint(shape, u, wF=None, wJ=None):
    u = np.ascontiguousarray(u, dtype=np.float64)
    grad = np.zeros(shape)
    wF_ = np.ascontiguousarray(wF, dtype=np.float64) if wF is not None else np.zeros((1, 2))
    wJ_ = np.ascontiguousarray(wJ, dtype=np.float64) if wJ is not None else np.zeros((1, 2, 2))
    _ckernels.fourier_adjoint_into(u, wF_, wJ_, int(wF is not None), int(wJ is not None), grad)
    return grad


def get_backend(name: str | None = None):
    """Return ``(forward, adjoint)`` for ``name`` in {"python", "compiled"}; default is the active backend."""
    name = BACKEND if name is None else name
    if name == "python":
        return _kernels_py.fourier_forward, _kernels_py.fourier_adjoint
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not available")
        return _c_forward, _c_adjoint
    raise ValueError(f"unknown backend {name!r}")


fourier_forward, fourier_adjoint = get_backend()
