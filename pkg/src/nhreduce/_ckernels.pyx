# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the small dense kernels.

The matrices in the right-hand sides are at most about 30 x 30, where numpy
call overhead dominates.  These loops avoid it.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs

cnp.import_array()


def exterior_assemble(double[:, ::1] Dalpha, double[::1] alpha, double[:, :, ::1] C):
    cdef Py_ssize_t n = Dalpha.shape[0], a, b, c
    cdef double s
    out = np.empty((n, n))
    cdef double[:, ::1] o = out
    for a in range(n):
        o[a, a] = 0.0
        for b in range(a + 1, n):
            s = Dalpha[a, b] - Dalpha[b, a]
            for c in range(n):
                s -= alpha[c] * C[c, a, b]
            o[a, b] = s
            o[b, a] = -s
    return out


def expm_so3(double[::1] w):
    cdef double th = sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    cdef double a, b
    cdef double K[3][3]
    cdef Py_ssize_t i, j, l
    if th < 1e-8:
        a = 1.0 - th * th / 6.0
        b = 0.5 - th * th / 24.0
    else:
        a = sin(th) / th
        b = (1.0 - cos(th)) / (th * th)
    K[0][0] = 0.0; K[0][1] = -w[2]; K[0][2] = w[1]
    K[1][0] = w[2]; K[1][1] = 0.0; K[1][2] = -w[0]
    K[2][0] = -w[1]; K[2][1] = w[0]; K[2][2] = 0.0
    out = np.empty((3, 3))
    cdef double[:, ::1] o = out
    cdef double kk
    for i in range(3):
        for j in range(3):
            kk = 0.0
            for l in range(3):
                kk += K[i][l] * K[l][j]
            o[i, j] = (1.0 if i == j else 0.0) + a * K[i][j] + b * kk
    return out


cdef void _inv3(double[3][3] M, double[3][3] out, double* det):
    det[0] = (M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
              - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
              + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0]))
    cdef double d = det[0]
    out[0][0] = (M[1][1] * M[2][2] - M[1][2] * M[2][1]) / d
    out[0][1] = (M[0][2] * M[2][1] - M[0][1] * M[2][2]) / d
    out[0][2] = (M[0][1] * M[1][2] - M[0][2] * M[1][1]) / d
    out[1][0] = (M[1][2] * M[2][0] - M[1][0] * M[2][2]) / d
    out[1][1] = (M[0][0] * M[2][2] - M[0][2] * M[2][0]) / d
    out[1][2] = (M[0][2] * M[1][0] - M[0][0] * M[1][2]) / d
    out[2][0] = (M[1][0] * M[2][1] - M[1][1] * M[2][0]) / d
    out[2][1] = (M[0][1] * M[2][0] - M[0][0] * M[2][1]) / d
    out[2][2] = (M[0][0] * M[1][1] - M[0][1] * M[1][0]) / d


def polar_so3(double[:, ::1] R):
    """Newton iteration X <- (X + X^-T) / 2 for the orthogonal polar factor.

    Converges quadratically for matrices near SO(3), which is the only use
    (re-projection after an integrator step).  Falls back to SVD otherwise.
    """
    cdef double X[3][3]
    cdef double Xi[3][3]
    cdef double det, diff, nv
    cdef Py_ssize_t i, j, it
    for i in range(3):
        for j in range(3):
            X[i][j] = R[i, j]
    for it in range(30):
        _inv3(X, Xi, &det)
        if det <= 0.0:
            return _svd_polar(np.asarray(R))
        diff = 0.0
        for i in range(3):
            for j in range(3):
                nv = 0.5 * (X[i][j] + Xi[j][i])
                diff += fabs(nv - X[i][j])
                X[i][j] = nv
        if diff < 1e-15:
            break
    out = np.empty((3, 3))
    cdef double[:, ::1] o = out
    for i in range(3):
        for j in range(3):
            o[i, j] = X[i][j]
    return out


def _svd_polar(R):
    U, _, Vt = np.linalg.svd(R)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:
        U[:, -1] = -U[:, -1]
        Q = U @ Vt
    return Q


def small_solve(double[:, ::1] A, double[::1] b):
    """Gaussian elimination with partial pivoting."""
    cdef Py_ssize_t n = A.shape[0], i, j, k, piv
    M = np.array(A, dtype=np.float64, copy=True)
    x = np.array(b, dtype=np.float64, copy=True)
    cdef double[:, ::1] m = M
    cdef double[::1] y = x
    cdef double best, f, t
    for k in range(n):
        piv = k
        best = fabs(m[k, k])
        for i in range(k + 1, n):
            if fabs(m[i, k]) > best:
                best = fabs(m[i, k])
                piv = i
        if best == 0.0:
            raise np.linalg.LinAlgError("Singular matrix")
        if piv != k:
            for j in range(n):
                t = m[k, j]; m[k, j] = m[piv, j]; m[piv, j] = t
            t = y[k]; y[k] = y[piv]; y[piv] = t
        for i in range(k + 1, n):
            f = m[i, k] / m[k, k]
            for j in range(k, n):
                m[i, j] -= f * m[k, j]
            y[i] -= f * y[k]
    for i in range(n - 1, -1, -1):
        t = y[i]
        for j in range(i + 1, n):
            t -= m[i, j] * y[j]
        y[i] = t / m[i, i]
    return x


def rk4_combine(double[::1] y, double[::1] k1, double[::1] k2, double[::1] k3,
                double[::1] k4, double dt):
    cdef Py_ssize_t n = y.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double h = dt / 6.0
    for i in range(n):
        o[i] = y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return out
