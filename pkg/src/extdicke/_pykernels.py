"""Numpy fallbacks with the same signatures as the compiled kernels."""

import math

import numpy as np


def symv_lower(rows, cols, vals, x, out):
    """out = A @ x for A stored as its lower triangle (diagonal included)."""
    n = out.shape[0]
    off = rows != cols
    r_off, c_off, v_off = rows[off], cols[off], vals[off]
    for b in range(x.shape[1]):
        xb = x[:, b]
        out[:, b] = np.bincount(rows, weights=vals * xb[cols], minlength=n)
        out[:, b] += np.bincount(c_off, weights=v_off * xb[r_off], minlength=n)


def displacement_overlaps(g, n_max):
    """Matrix <l|exp(g (a^+ - a))|k> for 0 <= l, k <= n_max.

    Each diagonal ``l = k + d`` follows the normalised generalised-Laguerre
    recurrence in ``k``, which stays accurate for large ``|g|`` where the
    naive ladder recursion loses digits.
    """
    n = n_max + 1
    if g == 0.0:
        return np.eye(n)
    x = g * g
    d = np.arange(n, dtype=float)
    log_g = math.log(abs(g))
    cur = np.array([math.exp(v * log_g - 0.5 * x - 0.5 * math.lgamma(v + 1.0)) for v in d])
    if g < 0:
        cur[1::2] = -cur[1::2]
    prev = np.zeros(n)
    low = np.zeros((n, n))
    for k in range(n):
        m = n - k
        low[np.arange(k, n), k] = cur[:m]
        nxt = ((2 * k + 1 + d - x) * cur - np.sqrt(k * (k + d)) * prev) / np.sqrt((k + 1) * (k + 1 + d))
        prev, cur = cur, nxt
    sign = np.where(np.add.outer(d, d) % 2 == 0, 1.0, -1.0)
    return low + np.triu(low.T * sign, 1)
