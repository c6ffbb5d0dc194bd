# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: symmetric COO products and displaced-Fock overlaps."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, lgamma, log, sqrt

cnp.import_array()


def symv_lower(const cnp.int64_t[::1] rows, const cnp.int64_t[::1] cols,
               const double[::1] vals, const double[:, ::1] x, double[:, ::1] out):
    """out = A @ x for A stored as its lower triangle (diagonal included)."""
    cdef Py_ssize_t nnz = vals.shape[0]
    cdef Py_ssize_t nb = x.shape[1]
    cdef Py_ssize_t e, b, r, c
    cdef double v
    out[:, :] = 0.0
    with nogil:
        for e in range(nnz):
            r = rows[e]
            c = cols[e]
            v = vals[e]
            if r == c:
                for b in range(nb):
                    out[r, b] += v * x[c, b]
            else:
                for b in range(nb):
                    out[r, b] += v * x[c, b]
                    out[c, b] += v * x[r, b]


def displacement_overlaps(double g, Py_ssize_t n_max):
    """Matrix <l|exp(g (a^+ - a))|k> for 0 <= l, k <= n_max.

    Each diagonal ``l = k + d`` follows the normalised generalised-Laguerre
    recurrence in ``k``.
    """
    cdef Py_ssize_t n = n_max + 1
    cdef cnp.ndarray[double, ndim=2] arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] o = arr
    cdef double[::1] cur = np.empty(n)
    cdef double[::1] prev = np.zeros(n)
    cdef Py_ssize_t k, d
    cdef double x = g * g, lg, dd, nxt
    if g == 0.0:
        for k in range(n):
            o[k, k] = 1.0
        return arr
    lg = log(fabs(g))
    for d in range(n):
        dd = <double>d
        cur[d] = exp(dd * lg - 0.5 * x - 0.5 * lgamma(dd + 1.0))
        if g < 0 and d % 2 == 1:
            cur[d] = -cur[d]
    with nogil:
        for k in range(n):
            for d in range(n - k):
                o[k + d, k] = cur[d]
                if d > 0:
                    o[k, k + d] = -cur[d] if d % 2 == 1 else cur[d]
            for d in range(n):
                dd = <double>d
                nxt = ((2 * k + 1 + dd - x) * cur[d] - sqrt(k * (k + dd)) * prev[d]) / sqrt((k + 1) * (k + 1 + dd))
                prev[d] = cur[d]
                cur[d] = nxt
    return arr
