"""Plug-in covariance estimators and the theoretical limits they converge to.

Scale convention: ``GwCovariance.v_hat`` and ``BarCovariance.omega_hat`` are
covariance matrices of the estimators themselves (their entries shrink like
one over the number of observed cells).  Their normalized versions, e.g.
``t_star_prev * v_hat``, converge to ``TheoreticalLimits.v`` and
``TheoreticalLimits.gamma_theta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateStatisticError,
    InstabilityError,
    InsufficientDataError,
    RankDeficientError,
    SubcriticalError,
)
from .estimation import (
    COND_LIMIT,
    GwEstimate,
    NoiseEstimate,
    ThetaEstimate,
    estimate_gw,
    pair_matrix,
    sigma_matrix,
)
from .linalg import symmetric_sqrt
from .processes import BarCoeffs, GwLaw, NoiseMoments, descendants_matrix, dominant_eigen
from .tree import ObservedForest

TRACE_GRADIENT = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0])


def multinomial_cov(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return np.diag(p) - np.outer(p, p)


def h_vector(p8) -> np.ndarray:
    """Gradient of tr^2 - 4 det of the descendants matrix, halved."""
    q0 = p8[:4]
    q1 = p8[4:]
    return np.array([
        q0[0] + q0[1] + q1[0] + 2 * q1[1] - q1[2],
        q0[0] + q0[1] - q1[0] - q1[2],
        2 * q1[0] + 2 * q1[1],
        0.0,
        q0[0] - q0[1] + 2 * q0[2] + q1[0] + q1[2],
        2 * q0[0] + 2 * q0[2],
        -q0[0] - q0[1] + q1[0] + q1[2],
        0.0,
    ])


@dataclass(frozen=True)
class GwCovariance:
    v_hat: np.ndarray  # 8x8 covariance of p_hat
    v_blocks: tuple[np.ndarray, np.ndarray]  # per-type multinomial covariances
    g_hat: float  # delta-method variance of pi_hat
    f_hat: np.ndarray
    h_vec: np.ndarray
    t_star_prev: int


def gw_covariance(est: GwEstimate) -> GwCovariance:
    if est.denom0 == 0 or est.denom1 == 0:
        raise InsufficientDataError("both mother types must be observed to estimate the covariance")
    v0 = multinomial_cov(est.p0)
    v1 = multinomial_cov(est.p1)
    v = np.zeros((8, 8))
    v[:4, :4] = v0 / est.denom0
    v[4:, 4:] = v1 / est.denom1
    p = est.p_hat
    p00, p01 = p[1] + p[0], p[2] + p[0]
    p10, p11 = p[5] + p[4], p[6] + p[4]
    disc = (p00 - p11) ** 2 + 4.0 * p01 * p10
    if not disc > 0.0:
        raise DegenerateStatisticError("tr^2 - 4 det vanishes; the eigenvalue is not differentiable")
    h = h_vector(p)
    f = 0.5 * TRACE_GRADIENT + 0.5 * h / math.sqrt(disc)
    g = float(f @ v @ f)
    return GwCovariance(v, (v0, v1), max(g, 0.0), f, h, est.t_star_prev)


def _inv2(block: np.ndarray, which: int) -> np.ndarray:
    a, b, c = block[0, 0], block[0, 1], block[1, 1]
    det = a * c - b * b
    lmax = 0.5 * (a + c + math.sqrt((a - c) ** 2 + 4 * b * b))
    lmin = det / lmax if lmax > 0 else 0.0
    if not (lmax > 0 and lmin > 0 and lmax <= COND_LIMIT * lmin):
        raise RankDeficientError(f"type-{which} normal matrix is singular", block=which)
    return np.array([[c, -b], [-b, a]]) / det


@dataclass(frozen=True)
class BarCovariance:
    gamma_hat: np.ndarray  # normalized noise-weighted moment matrix
    omega_hat: np.ndarray  # covariance of theta_hat
    gamma_sigma_hat: np.ndarray  # normalized covariance of (sigma2_0, sigma2_1)
    cov_sigma: np.ndarray  # covariance of (sigma2_0_hat, sigma2_1_hat)
    gamma_rho_hat: float
    h01_0_hat: float
    t_star_prev: int
    t_star: int


def bar_covariance(
    theta: ThetaEstimate,
    noise: NoiseEstimate,
    forest: ObservedForest,
    n: int | None = None,
    gw: GwEstimate | None = None,
) -> BarCovariance:
    """Covariances of the coefficient and noise estimators at generation ``n``.

    The coefficient covariance is ``Sigma^-1 G Sigma^-1`` where ``Sigma`` and
    ``G`` sum over the mothers used by the fit (generations 0..n-1), ``G``
    weighting the normal blocks by the estimated noise (co)variances.
    """
    n = theta.n if n is None else int(n)
    if n < 2:
        raise InsufficientDataError("covariance estimation needs n >= 2")
    level = n - 1
    S = sigma_matrix(forest, level)
    S01 = pair_matrix(forest, level)
    c_prev = forest.counts(level)
    c_now = forest.counts(n)
    G = np.zeros((4, 4))
    G[:2, :2] = noise.sigma2_0_hat * S[:2, :2]
    G[2:, 2:] = noise.sigma2_1_hat * S[2:, 2:]
    G[:2, 2:] = noise.rho_hat * S01
    G[2:, :2] = noise.rho_hat * S01
    Sinv = np.zeros((4, 4))
    Sinv[:2, :2] = _inv2(S[:2, :2], 0)
    Sinv[2:, 2:] = _inv2(S[2:, 2:], 1)
    omega = Sinv @ G @ Sinv
    omega = 0.5 * (omega + omega.T)

    if gw is None:
        gw = estimate_gw(forest, n)
    n0, n1, t = c_prev.t_star_0, c_prev.t_star_1, c_now.t_star
    h01 = (gw.p0[0] * n0 + gw.p1[0] * n1) / t
    off = ((noise.nu2_hat - noise.sigma2_0_hat * noise.sigma2_1_hat) * h01 / gw.pi_hat
           * t * t / (n0 * n1)) if gw.pi_hat > 0 else 0.0
    gs = np.array([
        [(noise.tau4_0_hat - noise.sigma2_0_hat**2) * t / n0, off],
        [off, (noise.tau4_1_hat - noise.sigma2_1_hat**2) * t / n1],
    ])
    return BarCovariance(
        G / c_prev.t_star, omega, gs, gs / t,
        noise.nu2_hat - noise.rho_hat**2, float(h01), c_prev.t_star, t,
    )


@dataclass(frozen=True)
class TheoreticalLimits:
    pi: float
    z: np.ndarray
    P: np.ndarray
    h: np.ndarray  # h[q] = (h^0(q), h^1(q)), q = 0..4
    h_tilde: np.ndarray  # rows q = 1..4 stored at index q; row 0 unused
    h01: np.ndarray  # q = 0..4
    L0: np.ndarray
    L1: np.ndarray
    L01: np.ndarray
    sigma_mat: np.ndarray
    gamma: np.ndarray
    gamma_theta: np.ndarray
    gamma_sigma: np.ndarray
    gamma_rho: float
    v: np.ndarray


def theoretical_limits(gw: GwLaw, bar: BarCoeffs, noise: NoiseMoments) -> TheoreticalLimits:
    if not bar.is_stable:
        raise InstabilityError("need |b0| < 1 and |b1| < 1")
    D = descendants_matrix(gw)
    pi, z = dominant_eigen(D)
    if not pi > 1.0:
        raise SubcriticalError(f"dominant eigenvalue {pi} is not above 1")
    P = D.array
    a = np.array([bar.a0, bar.a1])
    b = np.array([bar.b0, bar.b1])
    s2 = np.array([noise.sigma2_0, noise.sigma2_1])
    lam = np.array([noise.lambda_0, noise.lambda_1])
    tau = np.array([noise.tau4_0, noise.tau4_1])

    h = np.zeros((5, 2))
    ht = np.zeros((5, 2))
    h[0] = z * pi
    for q in range(1, 5):
        if q == 1:
            ht[1] = a * z
        elif q == 2:
            ht[2] = (a**2 + s2) * z + 2 * a * b * h[1] / pi
        elif q == 3:
            ht[3] = ((a**3 + 3 * a * s2 + lam) * z + 3 * b * (a**2 + s2) * h[1] / pi
                     + 3 * a * b**2 * h[2] / pi)
        else:
            ht[4] = ((a**4 + 6 * a**2 * s2 + 4 * a * lam + tau) * z
                     + 4 * b * (a**3 + 3 * a * s2 + lam) * h[1] / pi
                     + 6 * b**2 * (a**2 + s2) * h[2] / pi + 4 * a * b**3 * h[3] / pi)
        Pq = P.T @ np.diag(b**q) / pi
        h[q] = np.linalg.solve(np.eye(2) - Pq, P.T @ ht[q])

    p11 = np.array([gw.p0[0], gw.p1[0]])
    h01 = np.zeros(5)
    h01[0] = float(p11 @ z)
    for q in range(1, 5):
        h01[q] = float(p11 @ (ht[q] + b**q * h[q] / pi))

    def L(col):
        return np.array([[col[0], col[1]], [col[1], col[2]]])

    L0, L1, L01 = L(h[:, 0]), L(h[:, 1]), L(h01)
    sig = np.zeros((4, 4))
    sig[:2, :2], sig[2:, 2:] = L0, L1
    gam = np.zeros((4, 4))
    gam[:2, :2] = noise.sigma2_0 * L0
    gam[2:, 2:] = noise.sigma2_1 * L1
    gam[:2, 2:] = gam[2:, :2] = noise.rho * L01
    sinv = np.linalg.inv(sig)
    gt = sinv @ gam @ sinv
    gt = 0.5 * (gt + gt.T)
    off = (noise.nu2 - noise.sigma2_0 * noise.sigma2_1) * h01[0] / (pi * z[0] * z[1])
    gsig = np.array([
        [(noise.tau4_0 - noise.sigma2_0**2) / z[0], off],
        [off, (noise.tau4_1 - noise.sigma2_1**2) / z[1]],
    ])
    v = np.zeros((8, 8))
    v[:4, :4] = multinomial_cov(gw.p0) / z[0]
    v[4:, 4:] = multinomial_cov(gw.p1) / z[1]
    return TheoreticalLimits(pi, z, P, h, ht, h01, L0, L1, L01, sig, gam, gt, gsig,
                             noise.nu2 - noise.rho**2, v)


def omega_sqrt_diagonal(cov: BarCovariance) -> np.ndarray:
    """Diagonal of the principal square root of the coefficient covariance."""
    return np.diag(symmetric_sqrt(cov.omega_hat))
