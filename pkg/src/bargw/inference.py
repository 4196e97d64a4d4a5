"""Asymptotic confidence intervals and Wald symmetry tests.

Every test statistic is ``d' C^-1 d`` where ``d`` is the plug-in difference
between the even and odd parameters and ``C`` its delta-method covariance.
P-values come from the chi-square survival function; a test rejects when
``p_value <= level``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import BarCovariance, GwCovariance
from .errors import DegenerateStatisticError
from .estimation import GwEstimate, NoiseEstimate, ThetaEstimate
from .linalg import pinv_psd, symmetric_sqrt
from .statnum import chi2_survival, normal_quantile

TEST_NAMES = ("gw-mean", "gw-vector", "bar-coeffs", "fixed-point", "variance")
GW_LABELS = tuple(f"p{i}({a},{b})" for i in (0, 1) for a, b in ((1, 1), (1, 0), (0, 1), (0, 0))) + ("pi",)
BAR_LABELS = ("a0", "b0", "a1", "b1", "sigma2_0", "sigma2_1", "rho")

DG_MEAN = np.array([2.0, 1.0, 1.0, 0.0, -2.0, -1.0, -1.0, 0.0])
DG_VECTOR = np.vstack([np.eye(4), -np.eye(4)])
DG_COEFFS = np.array([[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]).T
DG_VARIANCE = np.array([1.0, -1.0])
FIXED_POINT_EPS = 1e-9


@dataclass(frozen=True)
class ConfidenceInterval:
    parameter: str
    estimate: float
    lo: float
    hi: float
    level: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _quantile(eps: float) -> float:
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    return normal_quantile(1.0 - eps / 2.0)


def _half_widths(cov: np.ndarray, method: str) -> np.ndarray:
    if method == "marginal":
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if method == "matrix-sqrt":
        return np.diag(symmetric_sqrt(cov))
    raise ValueError(f"unknown interval method {method!r}")


def _intervals(labels, estimates, half, q, eps):
    return [
        ConfidenceInterval(lab, float(e), float(e - q * h), float(e + q * h), 1.0 - eps)
        for lab, e, h in zip(labels, estimates, half)
    ]


def ci_gw(cov: GwCovariance, est: GwEstimate, eps: float = 0.05, method: str = "marginal"):
    """Intervals for the eight reproduction probabilities and the growth rate.

    ``method="marginal"`` uses the square roots of the variances;
    ``"matrix-sqrt"`` reads the diagonal of the covariance's matrix square root.
    """
    q = _quantile(eps)
    half = np.append(_half_widths(cov.v_hat, method), math.sqrt(cov.g_hat))
    return _intervals(GW_LABELS, np.append(est.p_hat, est.pi_hat), half, q, eps)


def ci_bar(cov: BarCovariance, theta: ThetaEstimate, noise: NoiseEstimate, eps: float = 0.05,
           method: str = "marginal"):
    """Intervals for a0, b0, a1, b1, sigma2_0, sigma2_1 and rho."""
    q = _quantile(eps)
    g_rho = cov.gamma_rho_hat
    scale = max(noise.nu2_hat, noise.rho_hat**2, 1e-300)
    if g_rho < -1e-10 * scale:
        raise DegenerateStatisticError("estimated nu2 - rho^2 is negative")
    half = np.concatenate([
        _half_widths(cov.omega_hat, method),
        _half_widths(cov.cov_sigma, method),
        [math.sqrt(max(g_rho, 0.0) / noise.denom01)],
    ])
    est = np.concatenate([theta.theta, [noise.sigma2_0_hat, noise.sigma2_1_hat, noise.rho_hat]])
    return _intervals(BAR_LABELS, est, half, q, eps)


@dataclass(frozen=True)
class WaldTestResult:
    which: str
    statistic: float
    df: int
    p_value: float
    nominal_df: int
    difference: np.ndarray = field(repr=False)

    @property
    def rank_reduced(self) -> bool:
        return self.df < self.nominal_df

    def reject(self, level: float = 0.05) -> bool:
        return self.p_value <= level

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "statistic": self.statistic,
            "df": self.df,
            "nominal_df": self.nominal_df,
            "p_value": self.p_value,
        }


def _wald(which: str, d, cov, nominal_df: int, pseudo: bool = False) -> WaldTestResult:
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if not np.all(np.isfinite(d)) or not np.all(np.isfinite(cov)):
        raise DegenerateStatisticError(f"{which}: non-finite plug-in quantities")
    if not np.any(d):
        return WaldTestResult(which, 0.0, nominal_df, 1.0, nominal_df, d)
    if pseudo:
        inv, rank = pinv_psd(cov)
        if rank == 0:
            raise DegenerateStatisticError(f"{which}: covariance of the difference vanishes")
        stat = float(d @ inv @ d)
        df = rank
    else:
        w = np.linalg.eigvalsh(cov)
        if not w[0] > 1e-12 * max(w[-1], 0.0) or not w[-1] > 0:
            raise DegenerateStatisticError(f"{which}: covariance of the difference is singular")
        stat = float(d @ np.linalg.solve(cov, d))
        df = nominal_df
    stat = max(stat, 0.0)
    return WaldTestResult(which, stat, df, chi2_survival(stat, df), nominal_df, d)


def wald_gw_mean(est: GwEstimate, cov: GwCovariance) -> WaldTestResult:
    """Equality of the mean offspring numbers of the two mother types."""
    return _wald("gw-mean", est.m0_hat - est.m1_hat, DG_MEAN @ cov.v_hat @ DG_MEAN, 1)


def wald_gw_vector(est: GwEstimate, cov: GwCovariance) -> WaldTestResult:
    """Equality of the two reproduction laws.

    Each law's covariance has rank at most 3 (probabilities sum to one), so a
    pseudo-inverse is used and ``df`` is the detected rank.
    """
    return _wald("gw-vector", est.p0 - est.p1, DG_VECTOR.T @ cov.v_hat @ DG_VECTOR, 4, pseudo=True)


def wald_bar_coeffs(theta: ThetaEstimate, cov: BarCovariance) -> WaldTestResult:
    """Equality of (a0, b0) and (a1, b1)."""
    t = theta.theta
    return _wald("bar-coeffs", DG_COEFFS.T @ t, DG_COEFFS.T @ cov.omega_hat @ DG_COEFFS, 2)


def wald_fixed_point(theta: ThetaEstimate, cov: BarCovariance) -> WaldTestResult:
    """Equality of the fixed points a0/(1-b0) and a1/(1-b1)."""
    a0, b0, a1, b1 = theta.theta
    if abs(1.0 - b0) < FIXED_POINT_EPS or abs(1.0 - b1) < FIXED_POINT_EPS:
        raise DegenerateStatisticError("fixed point undefined: an estimated slope equals 1")
    g = np.array([1 / (1 - b0), a0 / (1 - b0) ** 2, -1 / (1 - b1), -a1 / (1 - b1) ** 2])
    return _wald("fixed-point", a0 / (1 - b0) - a1 / (1 - b1), g @ cov.omega_hat @ g, 1)


def wald_variance(noise: NoiseEstimate, cov: BarCovariance) -> WaldTestResult:
    """Equality of the even and odd noise variances."""
    return _wald("variance", noise.sigma2_0_hat - noise.sigma2_1_hat,
                 DG_VARIANCE @ cov.cov_sigma @ DG_VARIANCE, 1)


# names used in the documentation of the statistical method
test_gw_mean = wald_gw_mean
test_gw_vector = wald_gw_vector
test_bar_coeffs = wald_bar_coeffs
test_fixed_point = wald_fixed_point
test_variance = wald_variance
for _f in (wald_gw_mean, wald_gw_vector, wald_bar_coeffs, wald_fixed_point, wald_variance):
    _f.__test__ = False  # keep pytest from collecting the aliases
del _f
