"""Vectorized numpy versions of the hot loops."""

import numpy as np


def pattern_counts(gen, ctype, has0, has1, n_gen):
    pat = np.where(has0, np.where(has1, 0, 1), np.where(has1, 2, 3))
    idx = (gen * 2 + ctype) * 4 + pat
    return np.bincount(idx, minlength=n_gen * 8).reshape(n_gen, 2, 4).astype(np.int64)


def family_moments(gen, x, has0, has1, x0, x1, n_gen):
    """Per mother generation: for each daughter type [n, Sx, Sxx, Sy, Sxy], and
    for complete pairs [n, Sx, Sxx]."""
    mom = np.zeros((n_gen, 2, 5))
    xx = x * x
    for i, (h, y) in enumerate(((has0, x0), (has1, x1))):
        g = gen[h]
        mom[:, i, 0] = np.bincount(g, minlength=n_gen)
        mom[:, i, 1] = np.bincount(g, weights=x[h], minlength=n_gen)
        mom[:, i, 2] = np.bincount(g, weights=xx[h], minlength=n_gen)
        mom[:, i, 3] = np.bincount(g, weights=y[h], minlength=n_gen)
        mom[:, i, 4] = np.bincount(g, weights=(x * y)[h], minlength=n_gen)
    both = has0 & has1
    g = gen[both]
    pairs = np.zeros((n_gen, 3))
    pairs[:, 0] = np.bincount(g, minlength=n_gen)
    pairs[:, 1] = np.bincount(g, weights=x[both], minlength=n_gen)
    pairs[:, 2] = np.bincount(g, weights=xx[both], minlength=n_gen)
    return mom, pairs


def residuals(gen, x, has0, has1, x0, x1, coef, ok):
    c = coef[gen]
    use0 = has0 & ok[gen, 0]
    use1 = has1 & ok[gen, 1]
    with np.errstate(invalid="ignore"):
        e0 = np.where(use0, x0 - c[:, 0] - c[:, 1] * x, 0.0)
        e1 = np.where(use1, x1 - c[:, 2] - c[:, 3] * x, 0.0)
    return e0, e1


def residual_sums(gen, e0, e1, has0, has1, n_gen):
    """Per mother generation: [S e0^2, S e0^4, S e1^2, S e1^4, S e0 e1, S e0^2 e1^2]."""
    out = np.zeros((n_gen, 6))
    s0 = e0 * e0
    s1 = e1 * e1
    out[:, 0] = np.bincount(gen[has0], weights=s0[has0], minlength=n_gen)
    out[:, 1] = np.bincount(gen[has0], weights=(s0 * s0)[has0], minlength=n_gen)
    out[:, 2] = np.bincount(gen[has1], weights=s1[has1], minlength=n_gen)
    out[:, 3] = np.bincount(gen[has1], weights=(s1 * s1)[has1], minlength=n_gen)
    both = has0 & has1
    out[:, 4] = np.bincount(gen[both], weights=(e0 * e1)[both], minlength=n_gen)
    out[:, 5] = np.bincount(gen[both], weights=(s0 * s1)[both], minlength=n_gen)
    return out


def draw_patterns(ctype, u, cum):
    """Map uniforms to daughter patterns using per-type cumulative thresholds
    ``cum[i] = (p11, p11 + p10, p11 + p10 + p01)``."""
    c = cum[ctype]
    has0 = u < c[:, 1]
    has1 = (u < c[:, 0]) | ((u >= c[:, 1]) & (u < c[:, 2]))
    n_active = int(np.count_nonzero(has0 | has1))
    return has0, has1, n_active


def spawn(nodes, values, has0, has1, eps, coef):
    """Children of the active mothers in heap order, with values
    ``a_i + b_i * x + eps_i``; ``eps`` has one row per active mother."""
    active = has0 | has1
    k = nodes[active]
    x = values[active]
    v0 = coef[0] + coef[1] * x + eps[:, 0]
    v1 = coef[2] + coef[3] * x + eps[:, 1]
    kids = np.stack((2 * k, 2 * k + 1), axis=1).ravel()
    vals = np.stack((v0, v1), axis=1).ravel()
    mask = np.stack((has0[active], has1[active]), axis=1).ravel()
    return kids[mask], vals[mask]
