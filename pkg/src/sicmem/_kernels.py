"""Compiled inner loops for the memory census."""

import math

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _evol(wz, wx, t):
    w = math.hypot(wz, wx)
    h = 0.5 * w * t
    if w == 0.0:
        return 1.0, 0.0, 0.0, 0.0
    s = math.sin(h) / w
    return math.cos(h), s * wx, 0.0, s * wz


@numba.njit(cache=True, inline="always")
def _mul(a0, a1, a2, a3, b0, b1, b2, b3):
    return (a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + b0 * a1 + a2 * b3 - a3 * b2,
            a0 * b2 + b0 * a2 + a3 * b1 - a1 * b3,
            a0 * b3 + b0 * a3 + a1 * b2 - a2 * b1)


@numba.njit(cache=True, inline="always")
def _period(wz_a, wx_a, wz_b, wx_b, tau):
    a = _evol(wz_a, wx_a, tau)
    bb = _evol(wz_b, wx_b, 2.0 * tau)
    p = _mul(a[0], a[1], a[2], a[3], bb[0], bb[1], bb[2], bb[3])
    return _mul(p[0], p[1], p[2], p[3], a[0], a[1], a[2], a[3])


@numba.njit(cache=True, inline="always")
def _axis(q):
    n = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n <= 1e-15:
        return 0.0, 0.0, 1.0
    return q[1] / n, q[2] / n, q[3] / n


@numba.njit(cache=True)
def one_minus_m(w_l, a_par, a_perp, m_s, N, tau):
    """1 - M for every (candidate, class) pair: shape (len(N), len(w_l))."""
    out = np.empty((N.shape[0], w_l.shape[0]))
    for c in range(N.shape[0]):
        t = tau[c]
        half_n = 0.5 * N[c]
        for j in range(w_l.shape[0]):
            wz1 = w_l[j] + m_s * a_par[j]
            wx1 = m_s * a_perp[j]
            v0 = _period(w_l[j], 0.0, wz1, wx1, t)
            v1 = _period(wz1, wx1, w_l[j], 0.0, t)
            n0 = _axis(v0)
            n1 = _axis(v1)
            d = n0[0] * n1[0] + n0[1] * n1[1] + n0[2] * n1[2]
            phi = math.acos(min(1.0, max(-1.0, v0[0])))
            s = math.sin(half_n * phi)
            out[c, j] = (1.0 - d) * s * s
    return out
