"""Compiled single-pass loops; results match the numpy versions exactly."""

import numpy as np
from numba import njit


@njit(cache=True)
def pattern_counts(gen, ctype, has0, has1, n_gen):
    out = np.zeros((n_gen, 2, 4), dtype=np.int64)
    for r in range(gen.size):
        if has0[r]:
            p = 0 if has1[r] else 1
        else:
            p = 2 if has1[r] else 3
        out[gen[r], ctype[r], p] += 1
    return out


@njit(cache=True)
def family_moments(gen, x, has0, has1, x0, x1, n_gen):
    mom = np.zeros((n_gen, 2, 5))
    pairs = np.zeros((n_gen, 3))
    for r in range(gen.size):
        g = gen[r]
        xr = x[r]
        xx = xr * xr
        if has0[r]:
            mom[g, 0, 0] += 1.0
            mom[g, 0, 1] += xr
            mom[g, 0, 2] += xx
            mom[g, 0, 3] += x0[r]
            mom[g, 0, 4] += xr * x0[r]
        if has1[r]:
            mom[g, 1, 0] += 1.0
            mom[g, 1, 1] += xr
            mom[g, 1, 2] += xx
            mom[g, 1, 3] += x1[r]
            mom[g, 1, 4] += xr * x1[r]
        if has0[r] and has1[r]:
            pairs[g, 0] += 1.0
            pairs[g, 1] += xr
            pairs[g, 2] += xx
    return mom, pairs


@njit(cache=True)
def residuals(gen, x, has0, has1, x0, x1, coef, ok):
    n = gen.size
    e0 = np.zeros(n)
    e1 = np.zeros(n)
    for r in range(n):
        g = gen[r]
        if has0[r] and ok[g, 0]:
            e0[r] = x0[r] - coef[g, 0] - coef[g, 1] * x[r]
        if has1[r] and ok[g, 1]:
            e1[r] = x1[r] - coef[g, 2] - coef[g, 3] * x[r]
    return e0, e1


@njit(cache=True)
def residual_sums(gen, e0, e1, has0, has1, n_gen):
    out = np.zeros((n_gen, 6))
    for r in range(gen.size):
        g = gen[r]
        s0 = e0[r] * e0[r]
        s1 = e1[r] * e1[r]
        if has0[r]:
            out[g, 0] += s0
            out[g, 1] += s0 * s0
        if has1[r]:
            out[g, 2] += s1
            out[g, 3] += s1 * s1
        if has0[r] and has1[r]:
            out[g, 4] += e0[r] * e1[r]
            out[g, 5] += s0 * s1
    return out


@njit(cache=True)
def draw_patterns(ctype, u, cum):
    n = u.size
    has0 = np.zeros(n, dtype=np.bool_)
    has1 = np.zeros(n, dtype=np.bool_)
    n_active = 0
    for r in range(n):
        t = ctype[r]
        ur = u[r]
        if ur < cum[t, 0]:
            has0[r] = True
            has1[r] = True
        elif ur < cum[t, 1]:
            has0[r] = True
        elif ur < cum[t, 2]:
            has1[r] = True
        if has0[r] or has1[r]:
            n_active += 1
    return has0, has1, n_active


@njit(cache=True)
def spawn(nodes, values, has0, has1, eps, coef):
    total = 0
    for r in range(nodes.size):
        total += has0[r] + has1[r]
    kids = np.empty(total, dtype=np.int64)
    vals = np.empty(total)
    w = 0
    a = 0
    for r in range(nodes.size):
        if not (has0[r] or has1[r]):
            continue
        k = nodes[r]
        x = values[r]
        if has0[r]:
            kids[w] = 2 * k
            vals[w] = coef[0] + coef[1] * x + eps[a, 0]
            w += 1
        if has1[r]:
            kids[w] = 2 * k + 1
            vals[w] = coef[2] + coef[3] * x + eps[a, 1]
            w += 1
        a += 1
    return kids, vals
