"""Distribution functions, a small OLS fit and deterministic random streams.

The normal quantile and the chi-square survival function are delegated to
``scipy.special`` (``ndtri`` and the regularized incomplete gamma
``gammaincc``), which are accurate to a few ulps over the whole range used
here.  Random streams use numpy's Philox counter-based generator keyed by
``(seed, stream_id)`` so that any stream can be built directly without
advancing another one.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import DegenerateStatisticError, InvalidNoiseError

_U64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal quantile needs 0 < p < 1, got {p}")
    return float(special.ndtri(p))


def chi2_survival(x: float, df: int) -> float:
    """P(chi2(df) > x)."""
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df}")
    x = float(x)
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"chi-square argument must be >= 0, got {x}")
    if x == 0.0:
        return 1.0
    return float(special.gammaincc(0.5 * df, 0.5 * x))


def ols_slope(points: Iterable[Sequence[float]]) -> tuple[float, float]:
    """Least-squares line through ``(x, y)`` points; returns (slope, intercept)."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise DegenerateStatisticError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx == 0.0:
        raise DegenerateStatisticError("all x values are equal")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    return slope, float(ym - slope * xm)


def derive_seed(*parts: int) -> int:
    """Mix integers into one 64-bit seed (order sensitive)."""
    if not parts:
        raise ValueError("derive_seed needs at least one part")
    words = [int(p) & _U64 for p in parts]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


class RngStream:
    """Counter-based stream identified by ``(seed, stream_id)``.

    Uniforms are ``((raw >> 11) + 0.5) * 2**-53`` so they lie strictly inside
    (0, 1); normals are the inverse normal CDF of those uniforms.
    """

    __slots__ = ("seed", "stream_id", "_bg")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _U64
        self.stream_id = int(stream_id) & _U64
        self._bg = np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))

    def raw(self, n: int) -> np.ndarray:
        return self._bg.random_raw(n)

    def uniform(self, n: int | None = None):
        if n is None:
            return float(self.uniform(1)[0])
        r = self._bg.random_raw(n)
        return ((r >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53

    def normal(self, n: int | None = None):
        if n is None:
            return float(self.normal(1)[0])
        return special.ndtri(self.uniform(n))

    def split(self, stream_id: int) -> "RngStream":
        """Fresh stream sharing the seed but with another id."""
        return RngStream(self.seed, stream_id)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def cholesky2(sigma2_0: float, sigma2_1: float, rho: float) -> tuple[float, float, float]:
    """Lower factor (l00, l10, l11) of [[s0, rho], [rho, s1]]; PSD required."""
    if not (sigma2_0 >= 0.0 and sigma2_1 >= 0.0) or not math.isfinite(rho):
        raise InvalidNoiseError("noise variances must be non-negative")
    if rho * rho > sigma2_0 * sigma2_1 * (1.0 + 1e-12):
        raise InvalidNoiseError("noise covariance is not positive semi-definite")
    if sigma2_0 == 0.0:
        if rho != 0.0:
            raise InvalidNoiseError("zero variance requires zero covariance")
        return 0.0, 0.0, math.sqrt(sigma2_1)
    l00 = math.sqrt(sigma2_0)
    l10 = rho / l00
    return l00, l10, math.sqrt(max(sigma2_1 - l10 * l10, 0.0))


def gaussian_pair(stream: RngStream, sigma2_0: float, sigma2_1: float, rho: float, size: int | None = None):
    """Correlated centred Gaussian pair(s) via the lower Cholesky factor."""
    l00, l10, l11 = cholesky2(sigma2_0, sigma2_1, rho)
    n = 1 if size is None else int(size)
    z = stream.normal(2 * n).reshape(n, 2)
    e0 = l00 * z[:, 0]
    e1 = l10 * z[:, 0] + l11 * z[:, 1]
    if size is None:
        return float(e0[0]), float(e1[0])
    return e0, e1
