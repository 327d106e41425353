"""Pure-numpy Fourier field kernels (reference backend).

Coefficients ``theta`` have shape ``(2, 4, I, J)`` with ``I = omega1 + 1``
and ``J = omega2 + 1``. Term ``l`` multiplies ``a_l(2 pi i x) b_l(2 pi j y)``
with ``(a, b)`` in ``(cos, cos), (cos, sin), (sin, cos), (sin, sin)``.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def _basis(u, n1, n2):
    wx = TWO_PI * np.arange(n1)
    wy = TWO_PI * np.arange(n2)
    ax = u[:, 0:1] * wx
    ay = u[:, 1:2] * wy
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    A = np.stack([cx, cx, sx, sx])
    dA = np.stack([-wx * sx, -wx * sx, wx * cx, wx * cx])
    B = np.stack([cy, sy, cy, sy])
    dB = np.stack([-wy * sy, wy * cy, -wy * sy, wy * cy])
    return A, dA, B, dB, wx, wy


def fourier_forward(theta, u, order=0):
    """Evaluate the field (order 0), its Jacobian (1) and Hessian (2) at points ``u``.

    Returns ``(F, J, H)`` with shapes ``(N, 2)``, ``(N, 2, 2)``, ``(N, 2, 2, 2)``;
    entries above the requested order are ``None``. ``J[n, k, d]`` is
    ``d f_k / d u_d``.
    """
    n1, n2 = theta.shape[2], theta.shape[3]
    A, dA, B, dB, wx, wy = _basis(u, n1, n2)
    TB = np.einsum("klij,lnj->klni", theta, B)
    F = np.einsum("klni,lni->nk", TB, A)
    J = H = None
    if order >= 1:
        TdB = np.einsum("klij,lnj->klni", theta, dB)
        J = np.empty((len(u), 2, 2))
        J[:, :, 0] = np.einsum("klni,lni->nk", TB, dA)
        J[:, :, 1] = np.einsum("klni,lni->nk", TdB, A)
        if order >= 2:
            Td2B = np.einsum("klij,lnj->klni", theta * -(wy**2), B)
            H = np.empty((len(u), 2, 2, 2))
            H[:, :, 0, 0] = np.einsum("klni,lni->nk", TB, A * -(wx**2))
            H[:, :, 0, 1] = np.einsum("klni,lni->nk", TdB, dA)
            H[:, :, 1, 0] = H[:, :, 0, 1]
            H[:, :, 1, 1] = np.einsum("klni,lni->nk", Td2B, A)
    return F, J, H


def fourier_adjoint(shape, u, wF=None, wJ=None):
    """Gradient of ``sum_n <wF[n], F(u_n)> + <wJ[n], J(u_n)>`` w.r.t. ``theta``."""
    n1, n2 = shape[2], shape[3]
    A, dA, B, dB, _, _ = _basis(u, n1, n2)
    grad = np.zeros(shape)
    if wF is not None:
        alpha = np.einsum("nk,lni->klni", wF, A)
    else:
        alpha = np.zeros((2, 4, len(u), n1))
    if wJ is not None:
        alpha = alpha + np.einsum("nk,lni->klni", wJ[:, :, 0], dA)
        beta = np.einsum("nk,lni->klni", wJ[:, :, 1], A)
        grad += np.einsum("klni,lnj->klij", beta, dB)
    grad += np.einsum("klni,lnj->klij", alpha, B)
    return grad
