# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_fallback.py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, isfinite
from scipy.linalg.cython_blas cimport dgemm, dgemv

cnp.import_array()


def lse_dual2(const double[:, ::1] stats, const double[::1] log_base,
              const double[::1] signs, const double[::1] theta, Py_ssize_t q):
    cdef Py_ssize_t n = stats.shape[0], p = stats.shape[1], m = theta.shape[0]
    cdef Py_ssize_t j, a, b
    cdef double shift = -INFINITY, t, e, S = 0.0
    cdef double[::1] terms = np.empty(n)
    grad_arr = np.zeros(p)
    hess_arr = np.zeros((q, q))
    scaled_arr = np.empty((n, q))
    cdef double[::1] G = grad_arr
    cdef double[:, ::1] H = hess_arr
    cdef double[:, ::1] X = scaled_arr
    cdef int ip = <int>p, iq = <int>q, inn = <int>n, one = 1
    cdef double d_one = 1.0, d_zero = 0.0

    for j in range(n):
        t = log_base[j]
        for a in range(m):
            t += stats[j, a] * theta[a]
        terms[j] = t
        if t > shift:
            shift = t
    if not isfinite(shift):
        return shift, np.full(p, np.nan), np.full((q, q), np.nan)

    for j in range(n):
        e = signs[j] * exp(terms[j] - shift)
        terms[j] = e
        S += e
        for a in range(q):
            X[j, a] = e * stats[j, a]
    if not S > 0.0 or n == 0:
        return np.nan, np.full(p, np.nan), np.full((q, q), np.nan)

    # Row-major (n, p) stats is the column-major (p, n) matrix with ld p.
    # G = stats^T e and H = stats_q^T diag(e) stats_q.
    dgemv(b"N", &ip, &inn, &d_one, <double*>&stats[0, 0], &ip, &terms[0], &one, &d_zero, &G[0], &one)
    if q > 0:
        dgemm(b"N", b"T", &iq, &iq, &inn, &d_one, &X[0, 0], &iq, <double*>&stats[0, 0], &ip,
              &d_zero, &H[0, 0], &iq)
    for a in range(p):
        G[a] /= S
    for a in range(q):
        for b in range(a, q):
            H[a, b] = 0.5 * (H[a, b] + H[b, a]) / S - G[a] * G[b]
            H[b, a] = H[a, b]
    return shift + log(S), grad_arr, hess_arr


def systematic_resample(const double[::1] weights, double u):
    cdef Py_ssize_t n = weights.shape[0], i, k = 0
    cdef double total = 0.0, cum, point
    for i in range(n):
        total += weights[i]
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = out
    # same rounding as numpy: cumulative sum first, then divide by the total
    cum = weights[0]
    for i in range(n):
        point = (u + i) / n
        while cum / total <= point and k < n - 1:
            k += 1
            cum += weights[k]
        idx[i] = k
    return out


def fp_step_1d(const double[::1] p, const double[::1] drift, const double[::1] alpha,
               double dx, double dt, bint reflecting):
    cdef Py_ssize_t n = p.shape[0], i
    cdef double r = dt / dx, jl, jr
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    # face flux J_{i+1/2} computed on the fly
    jl = 0.5 * (drift[0] * p[0] + drift[1] * p[1]) - 0.5 * (alpha[1] * p[1] - alpha[0] * p[0]) / dx
    if reflecting:
        out[0] = p[0] - 2.0 * r * jl
    else:
        out[0] = 0.0
    for i in range(1, n - 1):
        jr = 0.5 * (drift[i] * p[i] + drift[i + 1] * p[i + 1]) - 0.5 * (alpha[i + 1] * p[i + 1] - alpha[i] * p[i]) / dx
        out[i] = p[i] - r * (jr - jl)
        jl = jr
    if reflecting:
        out[n - 1] = p[n - 1] + 2.0 * r * jl
    else:
        out[n - 1] = 0.0
    return out_arr
