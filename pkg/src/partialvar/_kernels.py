"""Compiled inner loops for the conditional-expectation integrals."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def free_integrals(y, sd, zl, zu, cut_upper, cut_lower, has_flat,
                   xs, ws, theta, log_p, T, log_scale, inv_gamma):
    """Gauss-Legendre integrals over the free z-pieces for every ``y``.

    The free payoff is ``exp(log_scale + inv_gamma * log F(T, u))`` at
    ``u = y + sd * z``.  Returns ``(value, derivative)`` integrals against
    the standard normal density; the derivative integrand carries the extra
    factor ``theta_hat(T, u) * inv_gamma``.
    """
    n = y.shape[0]
    m = theta.shape[0]
    k = xs.shape[0]
    val = np.zeros(n)
    der = np.zeros(n)
    a_k = np.empty(m)
    c_k = np.empty(m)
    for j in range(m):
        c_k[j] = log_p[j] - 0.5 * theta[j] * theta[j] * T
    norm = 1.0 / math.sqrt(2.0 * math.pi)
    for i in range(n):
        if has_flat:
            b = min(max((cut_upper - y[i]) / sd, zl), zu)
            a = min(max((cut_lower - y[i]) / sd, zl), zu)
            n_pieces = 2
        else:
            b = zu
            a = zu
            n_pieces = 1
        v_sum = 0.0
        d_sum = 0.0
        for piece in range(n_pieces):
            if piece == 0:
                lo, hi = zl, b
            else:
                lo, hi = a, zu
            half = 0.5 * (hi - lo)
            if half <= 0.0:
                continue
            mid = 0.5 * (hi + lo)
            pv = 0.0
            pd = 0.0
            for q in range(k):
                z = half * xs[q] + mid
                u = y[i] + sd * z
                mx = -np.inf
                for j in range(m):
                    a_k[j] = c_k[j] + theta[j] * u
                    if a_k[j] > mx:
                        mx = a_k[j]
                s0 = 0.0
                s1 = 0.0
                for j in range(m):
                    e = math.exp(a_k[j] - mx)
                    s0 += e
                    s1 += theta[j] * e
                log_f = mx + math.log(s0)
                g = math.exp(log_scale + inv_gamma * log_f - 0.5 * z * z) * norm
                pv += ws[q] * g
                pd += ws[q] * g * (s1 / s0) * inv_gamma
            v_sum += half * pv
            d_sum += half * pd
        val[i] = v_sum
        der[i] = d_sum
    return val, der
