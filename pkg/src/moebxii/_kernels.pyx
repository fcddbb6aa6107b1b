# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in :mod:`moebxii._kernels_py`.

Same signatures and return types; one pass over the data per call with
no temporaries.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, sqrt, fabs

cnp.import_array()

BACKEND = "cython"


cdef inline double _softplus(double v) nogil:
    # log(1 + e^v)
    if v > 0:
        return v + log1p(exp(-v))
    return log1p(exp(v))


cdef inline double _expit(double v) nogil:
    cdef double e
    if v >= 0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


cdef inline void _score(double alpha, double c, double k, double lx,
                        double* out) nogil:
    cdef double cl = c * lx
    cdef double L = _softplus(cl)
    cdef double t = exp(-k * L)
    cdef double abar = 1.0 - alpha
    cdef double h = 1.0 - abar * t
    cdef double e = _expit(cl)
    out[0] = 1.0 / alpha - 2.0 * t / h
    out[1] = 1.0 / c + lx - (k + 1.0) * e * lx - 2.0 * k * abar * e * t * lx / h
    out[2] = 1.0 / k - L - 2.0 * abar * t * L / h


cdef inline double _weight(double[:, ::1] A, double* d, double cb) nogil:
    cdef double norm2 = 0.0, v, norm
    cdef int i
    for i in range(3):
        v = A[i, 0] * d[0] + A[i, 1] * d[1] + A[i, 2] * d[2]
        norm2 += v * v
    norm = sqrt(norm2)
    if norm > cb:
        return cb / norm
    return 1.0


def loglik(double alpha, double c, double k, const double[::1] lx):
    """Sum of log densities."""
    cdef Py_ssize_t i, n = lx.shape[0]
    cdef double acc = 0.0, L, t, sl = 0.0
    with nogil:
        for i in range(n):
            L = _softplus(c * lx[i])
            t = exp(-k * L)
            acc += (c - 1.0) * lx[i] - (k + 1.0) * L - 2.0 * log(1.0 - (1.0 - alpha) * t)
    return n * log(alpha * c * k) + acc


def scores(double alpha, double c, double k, const double[::1] lx):
    """Score rows, shape ``(n, 3)``."""
    cdef Py_ssize_t i, n = lx.shape[0]
    out = np.empty((n, 3))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            _score(alpha, c, k, lx[i], &o[i, 0])
    return out


def log_survival_residuals(double alpha, double c, double k, const double[::1] lx,
                           const double[::1] y):
    """``y - u`` with ``u = k*L - log(alpha) + log(h)``."""
    cdef Py_ssize_t i, n = lx.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double L, la = log(alpha)
    with nogil:
        for i in range(n):
            L = _softplus(c * lx[i])
            o[i] = y[i] - (k * L - la + log(1.0 - (1.0 - alpha) * exp(-k * L)))
    return out


def ls_objective(double alpha, double c, double k, const double[::1] lx, const double[::1] y):
    cdef Py_ssize_t i, n = lx.shape[0]
    cdef double L, r, acc = 0.0, la = log(alpha)
    with nogil:
        for i in range(n):
            L = _softplus(c * lx[i])
            r = y[i] - (k * L - la + log(1.0 - (1.0 - alpha) * exp(-k * L)))
            acc += r * r
    return acc


def obre_norms(double alpha, double c, double k, const double[::1] lx, A, a):
    """``||A (s(x) - a)||`` per observation."""
    cdef double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t i, n = lx.shape[0]
    cdef int r
    cdef double s[3]
    cdef double v, acc
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            _score(alpha, c, k, lx[i], s)
            s[0] -= am[0]
            s[1] -= am[1]
            s[2] -= am[2]
            acc = 0.0
            for r in range(3):
                v = Am[r, 0] * s[0] + Am[r, 1] * s[1] + Am[r, 2] * s[2]
                acc += v * v
            o[i] = sqrt(acc)
    return out


def obre_moments(double alpha, double c, double k, const double[::1] lx,
                 const double[::1] w, A, a, double cb):
    """Raw moments ``(q1, m1, S1, q2, m2, S2)`` weighted by ``w W^j``."""
    cdef double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t i, n = lx.shape[0]
    cdef int r, q
    cdef double s[3]
    cdef double d[3]
    cdef double W, w1, w2, q1 = 0.0, q2 = 0.0
    m1 = np.zeros(3)
    m2 = np.zeros(3)
    S1 = np.zeros((3, 3))
    S2 = np.zeros((3, 3))
    cdef double[::1] m1v = m1, m2v = m2
    cdef double[:, ::1] S1v = S1, S2v = S2
    with nogil:
        for i in range(n):
            _score(alpha, c, k, lx[i], s)
            for r in range(3):
                d[r] = s[r] - am[r]
            W = _weight(Am, d, cb)
            w1 = w[i] * W
            w2 = w1 * W
            q1 += w1
            q2 += w2
            for r in range(3):
                m1v[r] += w1 * s[r]
                m2v[r] += w2 * s[r]
                for q in range(r, 3):
                    S1v[r, q] += w1 * s[r] * s[q]
                    S2v[r, q] += w2 * s[r] * s[q]
        for r in range(3):
            for q in range(r):
                S1v[r, q] = S1v[q, r]
                S2v[r, q] = S2v[q, r]
    return q1, m1, S1, q2, m2, S2


def obre_psi(double alpha, double c, double k, const double[::1] lx, A, a, double cb):
    """Weights ``W`` and the sum of ``W (s - a)`` over the observations."""
    cdef double[:, ::1] Am = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] am = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t i, n = lx.shape[0]
    cdef int r
    cdef double d[3]
    Wa = np.empty(n)
    total = np.zeros(3)
    cdef double[::1] Wv = Wa, tv = total
    with nogil:
        for i in range(n):
            _score(alpha, c, k, lx[i], d)
            for r in range(3):
                d[r] -= am[r]
            Wv[i] = _weight(Am, d, cb)
            for r in range(3):
                tv[r] += Wv[i] * d[r]
    return Wa, total
