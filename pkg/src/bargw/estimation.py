"""Point estimators for the reproduction law, the BAR coefficients and the noise.

Index conventions (``n`` is the last observed generation used):

* reproduction law: mothers are the observed cells of generations 1..n-1,
  i.e. the cells ``2k+i`` with ``k`` in generations 0..n-2;
* coefficients: mothers in generations 0..n-1, daughters up to generation n;
* noise moments: residuals of the daughters of mothers in generations
  0..n-1, each computed with the coefficients estimated from the mothers'
  own past (generations 0..l-1 for a mother in generation l).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    ForestError,
    ForestExtinctError,
    InsufficientDataError,
    OutOfRangeError,
    RankDeficientError,
)
from .tree import ObservedForest

COND_LIMIT = 1e12


@dataclass(frozen=True)
class GwEstimate:
    n: int
    p_hat: np.ndarray
    denom0: int
    denom1: int
    pi_hat: float
    t_hat: float
    d_hat: float
    m0_hat: float
    m1_hat: float
    t_star_prev: int  # observed cells in generations 0..n-1

    @property
    def p0(self) -> np.ndarray:
        return self.p_hat[:4]

    @property
    def p1(self) -> np.ndarray:
        return self.p_hat[4:]


def gw_summary(p8) -> tuple[float, float, float, float, float]:
    """(pi, trace, det, m0, m1) of the descendants matrix built from an 8-vector."""
    p = [float(v) for v in p8]
    p00, p01 = p[1] + p[0], p[2] + p[0]
    p10, p11 = p[5] + p[4], p[6] + p[4]
    t = p00 + p11
    d = p00 * p11 - p01 * p10
    disc = (p00 - p11) ** 2 + 4.0 * p01 * p10
    pi = 0.5 * (t + math.sqrt(max(disc, 0.0)))
    return pi, t, d, p[1] + p[2] + 2.0 * p[0], p[5] + p[6] + 2.0 * p[4]


def _check_n(forest: ObservedForest, n: int, lo: int) -> int:
    n = int(n)
    if n < lo:
        raise OutOfRangeError(f"need n >= {lo}, got {n}")
    if n > forest.depth:
        raise OutOfRangeError(f"n={n} exceeds the forest depth {forest.depth}")
    return n


def estimate_gw(forest: ObservedForest, n: int) -> GwEstimate:
    n = _check_n(forest, n, 2)
    counts = forest.pattern_table[1:n].sum(axis=0)  # (type, pattern)
    denom = counts.sum(axis=1)
    if denom.sum() == 0:
        raise ForestExtinctError(f"no observed mother cell in generations 1..{n - 1}")
    p_hat = np.zeros(8)
    for i in range(2):
        if denom[i] > 0:
            p_hat[4 * i:4 * i + 4] = counts[i] / denom[i]
    pi, t, d, m0, m1 = gw_summary(p_hat)
    return GwEstimate(n, p_hat, int(denom[0]), int(denom[1]), pi, t, d, m0, m1,
                      forest.counts(n - 1).t_star)


# -- least squares ---------------------------------------------------------------


def _require_values(forest: ObservedForest):
    if not forest.has_values:
        raise ForestError("forest holds no measurements")


def _canonical(forest: ObservedForest):
    """Family columns sorted by content, so that sums do not depend on tree order."""

    def build():
        f = forest.family
        order = np.lexsort((f.x1, f.x0, f.x, f.has1, f.has0, f.gen))
        return tuple(np.ascontiguousarray(a[order]) for a in (f.gen, f.x, f.has0, f.has1, f.x0, f.x1))

    return forest.memo("canonical", build)


def moment_table(forest: ObservedForest) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative moment sums over mother generations 0..l (row l).

    Returns ``(mom, pairs)`` with ``mom[l, i] = [N, Sx, Sxx, Sy, Sxy]`` over
    type-i daughters and ``pairs[l] = [N, Sx, Sxx]`` over complete pairs.
    """
    _require_values(forest)

    def build():
        mom, pairs = kernels.family_moments(*_canonical(forest), forest.depth + 1)
        mom = np.cumsum(mom, axis=0)
        pairs = np.cumsum(pairs, axis=0)
        mom.setflags(write=False)
        pairs.setflags(write=False)
        return mom, pairs

    return forest.memo("moments", build)


def _solve_blocks(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve [[N, Sx], [Sx, Sxx]] (a, b) = (Sy, Sxy) row-wise with a condition check."""
    a, b, c, r0, r1 = (s[..., k] for k in range(5))
    det = a * c - b * b
    lmax = 0.5 * (a + c + np.sqrt((a - c) ** 2 + 4.0 * b * b))
    with np.errstate(divide="ignore", invalid="ignore"):
        lmin = np.where(lmax > 0, det / lmax, 0.0)
        ok = (lmax > 0) & (lmin > 0) & (lmax <= COND_LIMIT * lmin)
        coef = np.stack(((c * r0 - b * r1) / det, (a * r1 - b * r0) / det), axis=-1)
    coef[~ok] = np.nan
    return coef, ok


def theta_table(forest: ObservedForest) -> tuple[np.ndarray, np.ndarray]:
    """Row l holds the coefficients fitted on mothers of generations 0..l-1.

    Row 0 is undefined (NaN) as are blocks failing the condition check;
    ``ok[l, i]`` tells whether block i of row l is usable.
    """

    def build():
        mom, _ = moment_table(forest)
        g = forest.depth + 1
        table = np.full((g, 4), np.nan)
        ok = np.zeros((g, 2), dtype=bool)
        for i in range(2):
            coef, good = _solve_blocks(mom[:-1, i, :])
            table[1:, 2 * i:2 * i + 2] = coef
            ok[1:, i] = good
        table.setflags(write=False)
        ok.setflags(write=False)
        return table, ok

    _require_values(forest)
    return forest.memo("theta_table", build)


def _block(s) -> np.ndarray:
    return np.array([[s[0], s[1]], [s[1], s[2]]])


def sigma_matrix(forest: ObservedForest, level: int) -> np.ndarray:
    """Block-diagonal 4x4 normal matrix summed over mothers in generations 0..level."""
    mom, _ = moment_table(forest)
    out = np.zeros((4, 4))
    if level >= 0:
        out[:2, :2] = _block(mom[level, 0])
        out[2:, 2:] = _block(mom[level, 1])
    return out


def pair_matrix(forest: ObservedForest, level: int) -> np.ndarray:
    _, pairs = moment_table(forest)
    if level < 0:
        return np.zeros((2, 2))
    return _block(pairs[level])


@dataclass(frozen=True)
class ThetaEstimate:
    n: int
    theta: np.ndarray  # (a0, b0, a1, b1)
    sigma_n: np.ndarray  # normal matrix over mothers in generations 0..n-1
    per_generation: np.ndarray  # row l = estimate from generations 0..l-1, NaN if undefined

    @property
    def fixed_points(self) -> tuple[float, float]:
        a0, b0, a1, b1 = self.theta
        return a0 / (1.0 - b0), a1 / (1.0 - b1)


def estimate_theta(forest: ObservedForest, n: int) -> ThetaEstimate:
    """Pooled least squares over all trees (not an average of per-tree fits)."""
    _require_values(forest)
    n = _check_n(forest, n, 1)
    table, ok = theta_table(forest)
    for i in range(2):
        if not ok[n, i]:
            raise RankDeficientError(
                f"type-{i} normal matrix over generations 0..{n - 1} is singular or ill-conditioned",
                block=i,
            )
    return ThetaEstimate(n, table[n].copy(), sigma_matrix(forest, n - 1), table[: n + 1].copy())


# -- residuals and noise ----------------------------------------------------------


@dataclass(frozen=True)
class ResidualForest:
    """Residuals attached to observed daughters, aligned with ``forest.nodes(j)``.

    Cells without a computed residual (roots, deeper generations) hold NaN.
    """

    forest: ObservedForest
    n: int
    flat: np.ndarray

    def values(self, j: int) -> np.ndarray:
        sizes = [self.forest.nodes(t).size for t in range(self.forest.m)]
        start = sum(sizes[:j])
        return self.flat[start:start + sizes[j]]


def _residual_columns(forest: ObservedForest, coef: np.ndarray, ok: np.ndarray):
    f = forest.family
    return kernels.residuals(f.gen, f.x, f.has0, f.has1, f.x0, f.x1, coef, ok)


def residuals(forest: ObservedForest, per_generation, n: int | None = None) -> ResidualForest:
    """Residuals of the daughters of mothers in generations 0..n-1.

    ``per_generation[l]`` is the coefficient vector used for mothers in
    generation l; NaN entries (start-up generations) yield zero residuals.
    ``n`` defaults to the number of rows, capped at the forest depth.
    """
    _require_values(forest)
    rows = np.asarray(per_generation, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 4:
        raise ValueError("per_generation must have shape (L, 4)")
    if n is None:
        n = min(rows.shape[0], forest.depth)
    n = _check_n(forest, n, 1)
    if rows.shape[0] < n:
        raise OutOfRangeError(f"coefficients for mother generations 0..{n - 1} are required")
    g = forest.depth + 1
    coef = np.zeros((g, 4))
    ok = np.zeros((g, 2), dtype=bool)
    coef[:n] = np.nan_to_num(rows[:n])
    ok[:n, 0] = np.isfinite(rows[:n, :2]).all(axis=1)
    ok[:n, 1] = np.isfinite(rows[:n, 2:]).all(axis=1)
    e0, e1 = _residual_columns(forest, coef, ok)
    f = forest.family
    flat = np.full(len(f), np.nan)
    keep = f.gen < n
    for has, idx, e in ((f.has0, f.idx0, e0), (f.has1, f.idx1, e1)):
        sel = has & keep
        flat[idx[sel]] = e[sel]
    return ResidualForest(forest, n, flat)


def residual_table(forest: ObservedForest) -> np.ndarray:
    """Cumulative residual power sums over mother generations (row l = 0..l)."""

    def build():
        table, ok = theta_table(forest)
        coef = np.nan_to_num(table)
        gen, x, has0, has1, x0, x1 = _canonical(forest)
        e0, e1 = kernels.residuals(gen, x, has0, has1, x0, x1, coef, ok)
        sums = kernels.residual_sums(gen, e0, e1, has0, has1, forest.depth + 1)
        out = np.cumsum(sums, axis=0)
        out.setflags(write=False)
        return out

    _require_values(forest)
    return forest.memo("residual_table", build)


@dataclass(frozen=True)
class NoiseEstimate:
    n: int
    sigma2_0_hat: float
    sigma2_1_hat: float
    rho_hat: float
    tau4_0_hat: float
    tau4_1_hat: float
    nu2_hat: float
    denom0: int
    denom1: int
    denom01: int


def estimate_noise(forest: ObservedForest, n: int) -> NoiseEstimate:
    n = _check_n(forest, n, 1)
    c = forest.counts(n - 1)
    for i, d in enumerate((c.t_star_0, c.t_star_1)):
        if d == 0:
            raise InsufficientDataError(f"no observed type-{i} daughter of generations 0..{n - 1}")
    if c.t_star_01 == 0:
        raise InsufficientDataError(f"no complete sister pair among mothers of generations 0..{n - 1}")
    s = residual_table(forest)[n - 1]
    return NoiseEstimate(
        n,
        s[0] / c.t_star_0,
        s[2] / c.t_star_1,
        s[4] / c.t_star_01,
        s[1] / c.t_star_0,
        s[3] / c.t_star_1,
        s[5] / c.t_star_01,
        c.t_star_0,
        c.t_star_1,
        c.t_star_01,
    )
