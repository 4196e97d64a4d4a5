"""One-call analysis of an observed forest."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import __version__
from .asymptotics import BarCovariance, GwCovariance, bar_covariance, gw_covariance
from .errors import DegenerateError
from .estimation import GwEstimate, NoiseEstimate, ThetaEstimate, estimate_gw, estimate_noise, estimate_theta
from .inference import (
    TEST_NAMES,
    ConfidenceInterval,
    WaldTestResult,
    ci_bar,
    ci_gw,
    wald_bar_coeffs,
    wald_fixed_point,
    wald_gw_mean,
    wald_gw_vector,
    wald_variance,
)
from .tree import ForestCounts, ObservedForest

_GW_TESTS = {"gw-mean": wald_gw_mean, "gw-vector": wald_gw_vector}
_BAR_TESTS = {"bar-coeffs": wald_bar_coeffs, "fixed-point": wald_fixed_point}


def check_tests(which: Iterable[str] | str | None) -> tuple[str, ...]:
    if which is None or which == "all":
        return TEST_NAMES
    if isinstance(which, str):
        which = [which]
    which = tuple(which)
    for w in which:
        if w not in TEST_NAMES:
            raise ValueError(f"unknown test {w!r}; choose from {', '.join(TEST_NAMES)}")
    return which


def run_tests(forest: ObservedForest, n: int, which=None) -> dict[str, WaldTestResult | str]:
    """Run the selected symmetry tests at generation ``n``.

    Each entry is a :class:`WaldTestResult`, or the error message when the
    statistic could not be formed.
    """
    which = check_tests(which)
    out: dict[str, WaldTestResult | str] = {}
    gw = gwc = None
    gw_err = None
    needs_gw = any(w in _GW_TESTS or w == "variance" for w in which) or any(w in _BAR_TESTS for w in which)
    if needs_gw:
        try:
            gw = estimate_gw(forest, n)
        except DegenerateError as exc:
            gw_err = str(exc)
    if any(w in _GW_TESTS for w in which) and gw is not None:
        try:
            gwc = gw_covariance(gw)
        except DegenerateError as exc:
            gw_err = str(exc)
    theta = noise = cov = None
    bar_err = None
    if any(w in _BAR_TESTS or w == "variance" for w in which):
        try:
            if gw is None:
                raise DegenerateError(gw_err or "growth-rate estimate unavailable")
            theta = estimate_theta(forest, n)
            noise = estimate_noise(forest, n)
            cov = bar_covariance(theta, noise, forest, n, gw)
        except DegenerateError as exc:
            bar_err = str(exc)
    for w in which:
        try:
            if w in _GW_TESTS:
                if gwc is None:
                    raise DegenerateError(gw_err or "covariance unavailable")
                out[w] = _GW_TESTS[w](gw, gwc)
            elif w in _BAR_TESTS:
                if cov is None:
                    raise DegenerateError(bar_err or "covariance unavailable")
                out[w] = _BAR_TESTS[w](theta, cov)
            else:
                if cov is None:
                    raise DegenerateError(bar_err or "covariance unavailable")
                out[w] = wald_variance(noise, cov)
        except DegenerateError as exc:
            out[w] = str(exc)
    return out


@dataclass
class EstimationReport:
    n: int
    m: int
    level: float
    counts: ForestCounts
    counts_prev: ForestCounts
    gw: GwEstimate | None = None
    gw_cov: GwCovariance | None = None
    theta: ThetaEstimate | None = None
    noise: NoiseEstimate | None = None
    bar_cov: BarCovariance | None = None
    intervals: list[ConfidenceInterval] = field(default_factory=list)
    tests: dict[str, WaldTestResult | str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        est: dict = {}
        if self.gw is not None:
            est.update(
                p_hat=self.gw.p_hat.tolist(), pi_hat=self.gw.pi_hat,
                m0_hat=self.gw.m0_hat, m1_hat=self.gw.m1_hat,
                t_hat=self.gw.t_hat, d_hat=self.gw.d_hat,
            )
        if self.theta is not None:
            est["theta"] = self.theta.theta.tolist()
            est["fixed_points"] = list(self.theta.fixed_points)
        if self.noise is not None:
            nz = self.noise
            est.update(
                sigma2_0=nz.sigma2_0_hat, sigma2_1=nz.sigma2_1_hat, rho=nz.rho_hat,
                tau4_0=nz.tau4_0_hat, tau4_1=nz.tau4_1_hat, nu2=nz.nu2_hat,
            )
        tests = {
            k: (v.to_dict() if isinstance(v, WaldTestResult) else {"which": k, "error": v})
            for k, v in self.tests.items()
        }
        return {
            "estimates": est,
            "counts": {"n": self.counts._asdict(), "n_minus_1": self.counts_prev._asdict()},
            "intervals": [
                {"parameter": c.parameter, "estimate": c.estimate, "lo": c.lo, "hi": c.hi, "level": c.level}
                for c in self.intervals
            ],
            "tests": tests,
            "errors": dict(self.errors),
            "metadata": {"n": self.n, "m": self.m, "level": self.level, "version": __version__,
                         **self.metadata},
        }


def analyze(forest: ObservedForest, n: int, level: float = 0.95, which=None,
            method: str = "marginal") -> EstimationReport:
    """Point estimates, intervals at confidence ``level`` and symmetry tests.

    Parts that cannot be computed are recorded in ``errors`` rather than
    aborting the whole report; data errors (bad ``n``) still raise.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    eps = 1.0 - level
    rep = EstimationReport(n, forest.m, level, forest.counts(n), forest.counts(max(n - 1, 0)))
    try:
        rep.gw = estimate_gw(forest, n)
        rep.gw_cov = gw_covariance(rep.gw)
        rep.intervals.extend(ci_gw(rep.gw_cov, rep.gw, eps, method))
    except DegenerateError as exc:
        rep.errors["gw"] = str(exc)
    if forest.has_values:
        try:
            rep.theta = estimate_theta(forest, n)
            rep.noise = estimate_noise(forest, n)
            if rep.gw is None:
                raise DegenerateError(rep.errors.get("gw", "growth-rate estimate unavailable"))
            rep.bar_cov = bar_covariance(rep.theta, rep.noise, forest, n, rep.gw)
            rep.intervals.extend(ci_bar(rep.bar_cov, rep.theta, rep.noise, eps, method))
        except DegenerateError as exc:
            rep.errors["bar"] = str(exc)
        rep.tests = run_tests(forest, n, which)
    else:
        rep.tests = run_tests(forest, n, [w for w in check_tests(which) if w.startswith("gw-")])
    return rep
