# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Fourier field kernels; same contract as ``flowsym._kernels_py``."""

from libc.math cimport cos, sin, M_PI
from libc.stdlib cimport malloc, free

import numpy as np


cdef inline void _trig(double x, int n, double* c, double* s, double* w) noexcept nogil:
    # angle addition from one cos/sin pair; rounding error grows ~ i * eps
    cdef int i
    cdef double c1, s1
    if n < 1:
        return
    c[0] = 1.0
    s[0] = 0.0
    w[0] = 0.0
    if n < 2:
        return
    c1 = cos(2.0 * M_PI * x)
    s1 = sin(2.0 * M_PI * x)
    for i in range(1, n):
        c[i] = c[i - 1] * c1 - s[i - 1] * s1
        s[i] = s[i - 1] * c1 + c[i - 1] * s1
        w[i] = 2.0 * M_PI * i


def fourier_forward_into(const double[:, :, :, ::1] theta, const double[:, ::1] u, int order,
                         double[:, ::1] F, double[:, :, ::1] J, double[:, :, :, ::1] H):
    cdef Py_ssize_t N = u.shape[0]
    cdef int n1 = theta.shape[2]
    cdef int n2 = theta.shape[3]
    cdef Py_ssize_t n
    cdef int k, l, i, j, ia, ib
    cdef double s0, s1, s2, a, da, t
    cdef double f0, jx, jy, hxx, hxy, hyy
    cdef double* buf = <double*> malloc(sizeof(double) * (3 * n1 + 3 * n2 + 4 * n1 + 4 * n2))
    if buf == NULL:
        raise MemoryError()
    cdef double* cx = buf
    cdef double* sx = cx + n1
    cdef double* wx = sx + n1
    cdef double* cy = wx + n1
    cdef double* sy = cy + n2
    cdef double* wy = sy + n2
    # per-term views: a[ia], da[ia], b[ib], db[ib]
    cdef double* A0 = wy + n2
    cdef double* A1 = A0 + n1
    cdef double* dA0 = A1 + n1
    cdef double* dA1 = dA0 + n1
    cdef double* B0 = dA1 + n1
    cdef double* B1 = B0 + n2
    cdef double* dB0 = B1 + n2
    cdef double* dB1 = dB0 + n2
    cdef double* Ap
    cdef double* dAp
    cdef double* Bp
    cdef double* dBp
    try:
        with nogil:
            for n in range(N):
                _trig(u[n, 0], n1, cx, sx, wx)
                _trig(u[n, 1], n2, cy, sy, wy)
                for i in range(n1):
                    A0[i] = cx[i]
                    A1[i] = sx[i]
                    dA0[i] = -wx[i] * sx[i]
                    dA1[i] = wx[i] * cx[i]
                for j in range(n2):
                    B0[j] = cy[j]
                    B1[j] = sy[j]
                    dB0[j] = -wy[j] * sy[j]
                    dB1[j] = wy[j] * cy[j]
                for k in range(2):
                    f0 = 0.0
                    jx = 0.0
                    jy = 0.0
                    hxx = 0.0
                    hxy = 0.0
                    hyy = 0.0
                    for l in range(4):
                        ia = l >> 1
                        ib = l & 1
                        Ap = A1 if ia else A0
                        dAp = dA1 if ia else dA0
                        Bp = B1 if ib else B0
                        dBp = dB1 if ib else dB0
                        for i in range(n1):
                            s0 = 0.0
                            s1 = 0.0
                            s2 = 0.0
                            if order == 0:
                                for j in range(n2):
                                    s0 = s0 + theta[k, l, i, j] * Bp[j]
                            else:
                                for j in range(n2):
                                    t = theta[k, l, i, j]
                                    s0 = s0 + t * Bp[j]
                                    s1 = s1 + t * dBp[j]
                                    if order >= 2:
                                        s2 = s2 - t * wy[j] * wy[j] * Bp[j]
                            a = Ap[i]
                            f0 = f0 + a * s0
                            if order >= 1:
                                da = dAp[i]
                                jx = jx + da * s0
                                jy = jy + a * s1
                                if order >= 2:
                                    hxx = hxx - wx[i] * wx[i] * a * s0
                                    hxy = hxy + da * s1
                                    hyy = hyy + a * s2
                    F[n, k] = f0
                    if order >= 1:
                        J[n, k, 0] = jx
                        J[n, k, 1] = jy
                        if order >= 2:
                            H[n, k, 0, 0] = hxx
                            H[n, k, 0, 1] = hxy
                            H[n, k, 1, 0] = hxy
                            H[n, k, 1, 1] = hyy
    finally:
        free(buf)


def fourier_adjoint_into(const double[:, ::1] u, const double[:, ::1] wF, const double[:, :, ::1] wJ,
                         int has_wF, int has_wJ, double[:, :, :, ::1] grad):
    """Accumulate into ``grad`` (shape (2, 4, I, J))."""
    cdef Py_ssize_t N = u.shape[0]
    cdef int n1 = grad.shape[2]
    cdef int n2 = grad.shape[3]
    cdef Py_ssize_t n
    cdef int k, l, i, j, ia, ib
    cdef double alpha, beta, a, da, g0, g1, g2
    cdef double* buf = <double*> malloc(sizeof(double) * (3 * n1 + 3 * n2 + 4 * n1 + 4 * n2))
    if buf == NULL:
        raise MemoryError()
    cdef double* cx = buf
    cdef double* sx = cx + n1
    cdef double* wx = sx + n1
    cdef double* cy = wx + n1
    cdef double* sy = cy + n2
    cdef double* wy = sy + n2
    cdef double* A0 = wy + n2
    cdef double* A1 = A0 + n1
    cdef double* dA0 = A1 + n1
    cdef double* dA1 = dA0 + n1
    cdef double* B0 = dA1 + n1
    cdef double* B1 = B0 + n2
    cdef double* dB0 = B1 + n2
    cdef double* dB1 = dB0 + n2
    cdef double* Ap
    cdef double* dAp
    cdef double* Bp
    cdef double* dBp
    try:
        with nogil:
            for n in range(N):
                _trig(u[n, 0], n1, cx, sx, wx)
                _trig(u[n, 1], n2, cy, sy, wy)
                for i in range(n1):
                    A0[i] = cx[i]
                    A1[i] = sx[i]
                    dA0[i] = -wx[i] * sx[i]
                    dA1[i] = wx[i] * cx[i]
                for j in range(n2):
                    B0[j] = cy[j]
                    B1[j] = sy[j]
                    dB0[j] = -wy[j] * sy[j]
                    dB1[j] = wy[j] * cy[j]
                for k in range(2):
                    g0 = wF[n, k] if has_wF else 0.0
                    g1 = wJ[n, k, 0] if has_wJ else 0.0
                    g2 = wJ[n, k, 1] if has_wJ else 0.0
                    if g0 == 0.0 and g1 == 0.0 and g2 == 0.0:
                        continue
                    for l in range(4):
                        ia = l >> 1
                        ib = l & 1
                        Ap = A1 if ia else A0
                        dAp = dA1 if ia else dA0
                        Bp = B1 if ib else B0
                        dBp = dB1 if ib else dB0
                        for i in range(n1):
                            a = Ap[i]
                            da = dAp[i]
                            alpha = g0 * a + g1 * da
                            beta = g2 * a
                            if beta == 0.0:
                                for j in range(n2):
                                    grad[k, l, i, j] += alpha * Bp[j]
                            else:
                                for j in range(n2):
                                    grad[k, l, i, j] += alpha * Bp[j] + beta * dBp[j]
    finally:
        free(buf)
