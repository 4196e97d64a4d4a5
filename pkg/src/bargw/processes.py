"""Model parameters and seeded simulation of observed BAR forests.

Reproduction laws list the probabilities of the daughter observation
patterns in the order (1,1), (1,0), (0,1), (0,0), where the first entry
refers to the even daughter ``2k`` and the second to the odd one ``2k+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateEigenvectorError, InvalidLawError, InvalidNoiseError
from .statnum import RngStream, cholesky2
from .tree import MAX_DEPTH, ObservedForest

PATTERNS = ((1, 1), (1, 0), (0, 1), (0, 0))

# A sampler returns an (n, 2) array of noise pairs drawn from the given stream.
NoiseSampler = Callable[[RngStream, int], np.ndarray]


def _prob_vector(p, name: str) -> tuple[float, float, float, float]:
    v = tuple(float(x) for x in p)
    if len(v) != 4:
        raise InvalidLawError(f"{name} must have 4 entries")
    if any(not math.isfinite(x) or x < 0.0 for x in v):
        raise InvalidLawError(f"{name} has a negative or non-finite entry")
    if abs(math.fsum(v) - 1.0) > 1e-12:
        raise InvalidLawError(f"{name} sums to {math.fsum(v)!r}, not 1")
    return v


@dataclass(frozen=True)
class GwLaw:
    p0: tuple[float, float, float, float]
    p1: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "p0", _prob_vector(self.p0, "p0"))
        object.__setattr__(self, "p1", _prob_vector(self.p1, "p1"))

    @classmethod
    def symmetric(cls, p) -> "GwLaw":
        return cls(tuple(p), tuple(p))

    @classmethod
    def from_vector(cls, p8) -> "GwLaw":
        p8 = list(p8)
        if len(p8) != 8:
            raise InvalidLawError("expected 8 probabilities")
        return cls(tuple(p8[:4]), tuple(p8[4:]))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.p0 + self.p1)

    def mean_offspring(self) -> tuple[float, float]:
        return tuple(p[1] + p[2] + 2.0 * p[0] for p in (self.p0, self.p1))

    def cumulative(self) -> np.ndarray:
        """Per-type thresholds (p11, p11+p10, p11+p10+p01) used by the sampler."""
        return np.array([[p[0], p[0] + p[1], p[0] + p[1] + p[2]] for p in (self.p0, self.p1)])


@dataclass(frozen=True)
class DescendantsMatrix:
    """Expected number of observed daughters: ``pij`` = type-j daughters of a type-i mother."""

    p00: float
    p01: float
    p10: float
    p11: float

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.p00, self.p01], [self.p10, self.p11]])

    @property
    def trace(self) -> float:
        return self.p00 + self.p11

    @property
    def det(self) -> float:
        return self.p00 * self.p11 - self.p01 * self.p10

    @property
    def discriminant(self) -> float:
        # (p00 - p11)^2 + 4 p01 p10 is tr^2 - 4 det without cancellation
        return (self.p00 - self.p11) ** 2 + 4.0 * self.p01 * self.p10


def _descendants(p0, p1) -> DescendantsMatrix:
    return DescendantsMatrix(p0[1] + p0[0], p0[2] + p0[0], p1[1] + p1[0], p1[2] + p1[0])


def descendants_matrix(law: GwLaw) -> DescendantsMatrix:
    return _descendants(law.p0, law.p1)


def dominant_eigen(P: DescendantsMatrix) -> tuple[float, np.ndarray]:
    """Perron root and left eigenvector normalized to sum one."""
    pi = 0.5 * (P.trace + math.sqrt(P.discriminant))
    # two closed-form candidates from the rows of z (P - pi I) = 0
    c1 = (P.p10, pi - P.p00)
    c2 = (pi - P.p11, P.p01)
    s1, s2 = c1[0] + c1[1], c2[0] + c2[1]
    z, s = (c1, s1) if s1 >= s2 else (c2, s2)
    if not s > 1e-14 * max(1.0, pi):
        raise DegenerateEigenvectorError("left eigenvector undefined (diagonal matrix with equal entries)")
    return pi, np.array([z[0] / s, z[1] / s])


@dataclass(frozen=True)
class BarCoeffs:
    a0: float
    b0: float
    a1: float
    b1: float

    @classmethod
    def from_vector(cls, theta) -> "BarCoeffs":
        a0, b0, a1, b1 = (float(t) for t in theta)
        return cls(a0, b0, a1, b1)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.a0, self.b0, self.a1, self.b1])

    @property
    def is_stable(self) -> bool:
        return max(abs(self.b0), abs(self.b1)) < 1.0

    def fixed_points(self) -> tuple[float, float]:
        return self.a0 / (1.0 - self.b0), self.a1 / (1.0 - self.b1)


@dataclass(frozen=True)
class NoiseMoments:
    sigma2_0: float
    sigma2_1: float
    rho: float
    lambda_0: float = 0.0
    lambda_1: float = 0.0
    tau4_0: float = 0.0
    tau4_1: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    nu2: float = 0.0

    def __post_init__(self):
        vals = (self.sigma2_0, self.sigma2_1, self.rho, self.lambda_0, self.lambda_1,
                self.tau4_0, self.tau4_1, self.alpha, self.beta, self.nu2)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidNoiseError("noise moments must be finite")
        if self.sigma2_0 <= 0.0 or self.sigma2_1 <= 0.0:
            raise InvalidNoiseError("noise variances must be positive")
        if self.rho * self.rho >= self.sigma2_0 * self.sigma2_1:
            raise InvalidNoiseError("need |rho| < sqrt(sigma2_0 * sigma2_1)")
        tol = 1e-12
        if self.tau4_0 < self.sigma2_0**2 * (1 - tol) or self.tau4_1 < self.sigma2_1**2 * (1 - tol):
            raise InvalidNoiseError("fourth moments must be at least the squared variances")
        if self.nu2 < self.rho**2 * (1 - tol):
            raise InvalidNoiseError("nu2 must be at least rho^2")

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.sigma2_0, self.rho], [self.rho, self.sigma2_1]])


def gaussian_moments(sigma2_0: float, sigma2_1: float, rho: float) -> NoiseMoments:
    """Moments of a centred bivariate Gaussian (Isserlis)."""
    cholesky2(sigma2_0, sigma2_1, rho)
    return NoiseMoments(
        sigma2_0, sigma2_1, rho,
        tau4_0=3.0 * sigma2_0**2, tau4_1=3.0 * sigma2_1**2,
        nu2=sigma2_0 * sigma2_1 + 2.0 * rho**2,
    )


@dataclass(frozen=True)
class RootLaw:
    mode: str = "fixed"
    value: float = 0.0
    mean: float = 0.0
    sd: float = 0.0

    def __post_init__(self):
        if self.mode not in ("fixed", "gaussian"):
            raise ValueError(f"unknown root law {self.mode!r}")
        if not self.sd >= 0.0:
            raise ValueError("root sd must be >= 0")

    @classmethod
    def fixed(cls, value: float) -> "RootLaw":
        return cls("fixed", value=float(value))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "RootLaw":
        return cls("gaussian", mean=float(mean), sd=float(sd))

    @classmethod
    def stationary(cls, bar: BarCoeffs, noise: NoiseMoments | None) -> "RootLaw":
        """Gaussian with the type-0 lineage's stationary mean and spread."""
        mean = bar.a0 / (1.0 - bar.b0)
        if noise is None:
            return cls.fixed(mean)
        return cls.gaussian(mean, math.sqrt(noise.sigma2_0 / (1.0 - bar.b0**2)))

    def draw(self, stream: RngStream) -> float:
        # one normal is consumed in both modes so streams stay aligned
        z = stream.normal()
        if self.mode == "fixed":
            return self.value
        return self.mean + self.sd * z

    def to_dict(self) -> dict:
        if self.mode == "fixed":
            return {"mode": "fixed", "value": self.value}
        return {"mode": "gaussian", "mean": self.mean, "sd": self.sd}


def _simulate_tree(stream, cum, coef, chol, root, depth, sampler, kern):
    nodes = np.ones(1, dtype=np.int64)
    vals = np.array([root.draw(stream)])
    parts_n, parts_v = [nodes], [vals]
    l00, l10, l11 = chol
    for _ in range(depth):
        u = stream.uniform(nodes.size)
        has0, has1, n_active = kern.draw_patterns(nodes & 1, u, cum)
        if n_active == 0:
            break
        if sampler is None:
            z = stream.normal(2 * n_active).reshape(n_active, 2)
            eps = np.empty_like(z)
            eps[:, 0] = l00 * z[:, 0]
            eps[:, 1] = l10 * z[:, 0] + l11 * z[:, 1]
        else:
            eps = np.ascontiguousarray(sampler(stream, n_active), dtype=np.float64).reshape(n_active, 2)
        nodes, vals = kern.spawn(nodes, vals, has0, has1, eps, coef)
        parts_n.append(nodes)
        parts_v.append(vals)
    return np.concatenate(parts_n), np.concatenate(parts_v)


def simulate_forest(
    law: GwLaw,
    bar: BarCoeffs,
    noise: NoiseMoments | None,
    root: RootLaw | None,
    m: int,
    depth: int,
    seed: int,
    noise_sampler: NoiseSampler | None = None,
    backend: str | None = None,
) -> ObservedForest:
    """Simulate ``m`` independent observed trees down to generation ``depth``.

    Tree ``j`` draws from ``RngStream(seed, j)``: the root value first, then
    per generation one uniform per cell for the daughter pattern and two
    normals per cell with at least one observed daughter.  ``noise=None``
    gives a noiseless recursion; ``root=None`` uses :meth:`RootLaw.stationary`.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if depth < 1 or depth > MAX_DEPTH:
        raise ValueError(f"depth must be in 1..{MAX_DEPTH}")
    if noise is None:
        chol = (0.0, 0.0, 0.0)
    else:
        chol = cholesky2(noise.sigma2_0, noise.sigma2_1, noise.rho)
        if chol[0] == 0.0 or chol[2] == 0.0:
            raise InvalidNoiseError("noise covariance is not positive definite")
    if root is None:
        root = RootLaw.stationary(bar, noise)
    kern = kernels.get_backend(backend)
    cum = law.cumulative()
    coef = bar.vector
    nodes, values = [], []
    for j in range(m):
        n, v = _simulate_tree(RngStream(seed, j), cum, coef, chol, root, depth, noise_sampler, kern)
        nodes.append(n)
        values.append(v)
    return ObservedForest._trusted(nodes, values, depth)
