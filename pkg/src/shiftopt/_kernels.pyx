# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot inner loops.

Mirrors shiftopt._kernels_py; see that module for the reference semantics.
"""

from libc.math cimport exp, log, log1p, INFINITY, isnan

import numpy as np

BACKEND_NAME = "cython"


cdef inline double _logaddexp(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a >= b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef double _lse_sum(double[::1] a, double[::1] b) except? -2e308:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double m = -INFINITY
    cdef double x, s
    for i in range(n):
        x = a[i] + b[i]
        if isnan(x):
            return x
        if x > m:
            m = x
    if m == -INFINITY:
        return m
    s = 0.0
    for i in range(n):
        s += exp(a[i] + b[i] - m)
    return m + log(s)


def logsumexp(x):
    cdef double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] z = np.zeros(v.shape[0])
    return _lse_sum(v, z)


def logsumexp_weighted(log_values, log_widths):
    cdef double[::1] v = np.ascontiguousarray(log_values, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(log_widths, dtype=np.float64)
    return _lse_sum(v, w)


def share_step(log_values, lam_u, log_widths, double alpha, log_mix=None):
    cdef double[::1] lv = log_values
    cdef double[::1] lu = np.ascontiguousarray(lam_u, dtype=np.float64)
    cdef double[::1] lw = np.ascontiguousarray(log_widths, dtype=np.float64)
    cdef double[::1] lm
    cdef Py_ssize_t i, n = lv.shape[0]
    cdef double m = -INFINITY
    cdef double x, s, norm, la, l1a
    cdef bint has_mix = log_mix is not None

    for i in range(n):
        x = lv[i] + lu[i] + lw[i]
        if x > m:
            m = x
    if m == -INFINITY:
        norm = m
    else:
        s = 0.0
        for i in range(n):
            s += exp(lv[i] + lu[i] + lw[i] - m)
        norm = m + log(s)

    if has_mix:
        lm = np.ascontiguousarray(log_mix, dtype=np.float64)

    if alpha <= 0.0:
        for i in range(n):
            lv[i] = lv[i] + lu[i]
    elif alpha >= 1.0:
        if has_mix:
            for i in range(n):
                lv[i] = norm + lm[i]
        else:
            for i in range(n):
                lv[i] = norm
    else:
        la = log(alpha)
        l1a = log1p(-alpha)
        if has_mix:
            for i in range(n):
                lv[i] = _logaddexp(l1a + lv[i] + lu[i], la + norm + lm[i])
        else:
            for i in range(n):
                lv[i] = _logaddexp(l1a + lv[i] + lu[i], la + norm)
    return norm


def dp_max_layer(prev, cum):
    cdef double[::1] pv = np.ascontiguousarray(prev, dtype=np.float64)
    cdef double[:, ::1] cm = np.ascontiguousarray(cum, dtype=np.float64)
    cdef Py_ssize_t n_rounds = cm.shape[0] - 1
    cdef Py_ssize_t n_pieces = cm.shape[1]
    out_arr = np.empty(n_rounds + 1)
    run_arr = np.full(n_pieces, -np.inf)
    cdef double[::1] out = out_arr
    cdef double[::1] run = run_arr
    cdef Py_ssize_t q, p
    cdef double best, v, pq

    out[0] = -INFINITY
    for q in range(1, n_rounds + 1):
        pq = pv[q - 1]
        best = -INFINITY
        for p in range(n_pieces):
            v = pq - cm[q - 1, p]
            if v > run[p]:
                run[p] = v
            v = run[p] + cm[q, p]
            if v > best:
                best = v
        out[q] = best
    return out_arr
