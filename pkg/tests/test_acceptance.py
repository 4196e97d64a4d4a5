"""Acceptance criteria, each checked at its stated tolerance.

Every check reports through ``conftest.record``; the terminal summary then
prints one PASS/FAIL line per criterion.
"""

import math
import os
import time
from functools import lru_cache

import numpy as np
import pytest

from bargw.asymptotics import bar_covariance, gw_covariance, theoretical_limits
from bargw.errors import DegenerateError, RankDeficientError
from bargw.estimation import estimate_gw, estimate_noise, estimate_theta, gw_summary
from bargw.inference import ci_bar, ci_gw
from bargw.montecarlo import StudyConfig, run_power_study, run_rate_study
from bargw.processes import descendants_matrix, dominant_eigen, simulate_forest
from bargw.registry import REGISTRY, get_set
from bargw.statnum import derive_seed
from conftest import random_forest, record
from oracles import brute_patterns, brute_theta

# published growth rates of the 19 parameter sets
PAPER_PI = {1: 2.0, 2: 1.88, 3: 1.78, 4: 1.68, 5: 1.58, 6: 1.48, 7: 1.38, 8: 1.28, 9: 1.18, 10: 1.08,
            11: 1.9, 12: 1.8, 13: 1.7, 14: 1.6, 15: 1.5, 16: 1.4, 17: 1.3, 18: 1.2, 19: 1.1}
# published E. coli estimates
ECOLI_P = np.array([0.56060, 0.03621, 0.04740, 0.35579, 0.55928, 0.04707, 0.03755, 0.35611])
ECOLI_THETA = (0.0203, 0.4615, 0.0195, 0.4782)
# published rejection rates of the (a0, b0) = (a1, b1) test at n = 15, m = 100, 1000 replications
PAPER_BAR_COEFFS_N15 = {1: 0.049, 2: 0.041, 3: 0.039, 4: 0.043, 5: 0.044, 6: 0.051, 7: 0.047, 8: 0.050,
                        9: 0.045, 10: 0.037, 11: 1.0, 12: 1.0, 13: 1.0, 14: 1.0, 15: 1.0, 16: 1.0,
                        17: 0.989, 18: 0.819, 19: 0.452}

TESTS = ("gw-mean", "gw-vector", "bar-coeffs", "fixed-point", "variance")
LEVEL_SETS = (1, 4, 7, 10)
SEED = 20240601  # fixed before any of these studies were run


def binomial_se(p, r):
    return math.sqrt(p * (1 - p) / r)


# -- 1. eigenvalue table ---------------------------------------------------------------


def test_criterion_1_eigenvalue_table():
    laws = [REGISTRY[s].law for s in sorted(PAPER_PI)]
    pis = [dominant_eigen(descendants_matrix(law))[0] for law in laws]
    timings = []
    for _ in range(5):
        t0 = time.perf_counter()
        for law in laws:
            dominant_eigen(descendants_matrix(law))
        timings.append(time.perf_counter() - t0)
    elapsed = min(timings)
    worst = max(abs(p - PAPER_PI[s]) for s, p in zip(sorted(PAPER_PI), pis))
    ok = worst <= 0.005 and elapsed < 1e-3
    record(1, ok, f"max |pi - table| = {worst:.2e} (tol 5e-3), {1e3 * elapsed:.3f} ms for 19 sets")
    assert ok


# -- 2. published vectors --------------------------------------------------------------


def test_criterion_2_published_vectors():
    pi, _, _, m0, m1 = gw_summary(ECOLI_P)
    a0, b0, a1, b1 = ECOLI_THETA
    fp0, fp1 = a0 / (1 - b0), a1 / (1 - b1)
    checks = [abs(pi - 1.204) <= 1e-3, abs(m0 - 1.2048) <= 5e-5, abs(m1 - 1.2032) <= 5e-5,
              abs(fp0 - 0.0377) <= 2e-4, abs(fp1 - 0.0373) <= 2e-4]
    ok = all(checks)
    record(2, ok, f"pi={pi:.5f} m0={m0:.5f} m1={m1:.5f} fixed points {fp0:.5f}/{fp1:.5f}")
    assert ok


# -- 3. oracle equivalence ---------------------------------------------------------------


def test_criterion_3_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    theta_err, pattern_exact, used = 0.0, True, 0
    while used < 24:
        f = random_forest(rng, m=int(rng.integers(1, 5)), depth=4, keep=float(rng.uniform(0.6, 1.0)))
        try:
            th = estimate_theta(f, 4).theta
        except RankDeficientError:
            continue
        used += 1
        theta_err = max(theta_err, float(np.max(np.abs(th - brute_theta(f, 4)))))
        for n in range(2, 5):
            try:
                gw = estimate_gw(f, n)
            except DegenerateError:
                continue
            p, mothers = brute_patterns(f, n)
            pattern_exact &= bool(np.array_equal(gw.p_hat, p))
            pattern_exact &= (gw.denom0, gw.denom1) == tuple(int(v) for v in mothers)
    elapsed = time.perf_counter() - t0
    ok = theta_err <= 1e-8 and pattern_exact and elapsed < 10
    record(3, ok, f"{used} forests, max |theta - brute force| = {theta_err:.1e} (tol 1e-8), "
                  f"patterns exact: {pattern_exact}, {elapsed:.1f} s")
    assert ok


# -- 4. level suite ---------------------------------------------------------------------


@lru_cache(maxsize=None)
def level_study(set_id):
    cfg = StudyConfig(set_ids=(set_id,), m=20, depth=8, replications=500, seed=SEED)
    return run_power_study(cfg)  # the result carries its own wall time


@pytest.mark.slow
@pytest.mark.parametrize("test", TESTS)
@pytest.mark.parametrize("set_id", LEVEL_SETS)
def test_criterion_4_level(set_id, test):
    res = level_study(set_id)
    rate = res.proportion(set_id, 8, test)
    ok = 0.03 <= rate <= 0.08
    record(4, ok, f"set {set_id} {test}: {rate:.3f} of {res.cell(set_id, 8).valid[test]} in [0.03, 0.08]")
    assert ok, (
        f"rejection rate {rate:.3f} outside [0.03, 0.08]"
        + (" (complete trees: both laws are (1,0,0,0), the GW statistics are identically zero)"
           if set_id == 1 and test.startswith("gw-") else "")
    )


def test_criterion_4_runtime():
    elapsed = sum(level_study(s).elapsed for s in LEVEL_SETS)
    record(4, elapsed < 300, f"runtime {elapsed:.1f} s (target < 300 s)")
    assert elapsed < 300


# -- 5. power ordering --------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_5_power_ordering():
    t0 = time.perf_counter()
    R = 200
    cfg = StudyConfig(set_ids=(11, 15, 19), m=20, depth=8, replications=R, seed=SEED, tests=("fixed-point",))
    res = run_power_study(cfg)
    p11, p15, p19 = (res.proportion(s, 8, "fixed-point") for s in (11, 15, 19))
    cfg14 = StudyConfig(set_ids=(14,), m=20, depth=10, replications=R, seed=SEED, tests=("fixed-point",),
                        generations=tuple(range(5, 11)))
    res14 = run_power_study(cfg14)
    curve = [res14.proportion(14, n, "fixed-point") for n in range(5, 11)]
    # each step may drop by at most one binomial standard error of the earlier proportion
    monotone = all(b >= a - binomial_se(a, R) for a, b in zip(curve, curve[1:]))
    elapsed = time.perf_counter() - t0
    ok = p11 > p15 > p19 and monotone and elapsed < 300
    record(5, ok, f"sets 11/15/19: {p11:.3f} > {p15:.3f} > {p19:.3f}; set 14, n=5..10: "
                  + " ".join(f"{p:.3f}" for p in curve) + f"; {elapsed:.1f} s")
    assert ok


# -- 6. convergence-rate slopes -----------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_rate_slopes():
    t0 = time.perf_counter()
    cfg = StudyConfig(set_ids=(11, 15), m=20, depth=13, replications=200, seed=SEED, window=(8, 13))
    res = run_rate_study(cfg)
    elapsed = time.perf_counter() - t0
    parts = []
    ok = elapsed < 600
    for s in (11, 15):
        fit = res.slopes[s]
        good = not fit.degenerate and abs(fit.slope - fit.reference) <= 0.06
        ok &= good
        parts.append(f"set {s}: slope {fit.slope:.4f} vs {fit.reference:.4f}")
    record(6, ok, "; ".join(parts) + f" (tol 0.06), {elapsed:.1f} s")
    assert ok


# -- 7. coverage -----------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_7_coverage():
    t0 = time.perf_counter()
    ps = get_set(14)
    n, R = 9, 400
    truth = {"a0": ps.bar.a0, "b0": ps.bar.b0, "pi": ps.pi_exact()}
    hits = dict.fromkeys(truth, 0)
    for r in range(R):
        for attempt in range(100):
            f = simulate_forest(ps.law, ps.bar, ps.noise, None, 20, n, derive_seed(SEED, 14, r, attempt))
            if f.counts(n).g_star > 0:
                break
        gw = estimate_gw(f, n)
        th, nz = estimate_theta(f, n), estimate_noise(f, n)
        cis = {c.parameter: c for c in ci_gw(gw_covariance(gw), gw) + ci_bar(bar_covariance(th, nz, f, n, gw), th, nz)}
        for k, v in truth.items():
            hits[k] += cis[k].covers(v)
    cover = {k: h / R for k, h in hits.items()}
    elapsed = time.perf_counter() - t0
    ok = all(0.91 <= c <= 0.98 for c in cover.values()) and elapsed < 300
    record(7, ok, ", ".join(f"{k} {c:.4f}" for k, c in cover.items()) + f" in [0.91, 0.98], {elapsed:.1f} s")
    assert ok


# -- 8. theoretical-empirical bridge ------------------------------------------------------------


@pytest.mark.slow
def test_criterion_8_bridge():
    ps = get_set(18)
    V = theoretical_limits(ps.law, ps.bar, ps.noise).v
    errs = []
    for r in range(50):
        f = simulate_forest(ps.law, ps.bar, ps.noise, None, 100, 13, derive_seed(SEED, 18, r))
        est = estimate_gw(f, 13)
        # V-hat is built from mothers up to generation n-1, so it scales with |T*_{n-1}|
        M = est.t_star_prev * gw_covariance(est).v_hat
        errs.append(float(np.linalg.norm(M - V) / np.linalg.norm(V)))
    psd = []
    for s, p in sorted(REGISTRY.items()):
        G = theoretical_limits(p.law, p.bar, p.noise).gamma_theta
        psd.append(bool(np.linalg.eigvalsh(G).min() >= -1e-12 * np.abs(G).max()))
    ok = max(errs) <= 0.15 and all(psd)
    record(8, ok, f"relative Frobenius error mean {np.mean(errs):.3f}, max {max(errs):.3f} (tol 0.15); "
                  f"Gamma_theta PSD for {sum(psd)}/19 sets")
    assert ok


# -- 9. full-scale tables (opt-in) ------------------------------------------------------------

LONG = os.environ.get("BARGW_LONG", "") == "1"


def long_config(replications, m, depth):
    return StudyConfig(set_ids=tuple(sorted(PAPER_BAR_COEFFS_N15)), m=m, depth=depth,
                       replications=replications, seed=SEED, tests=("bar-coeffs",))


def test_criterion_9_long_mode_harness():
    # the long-mode study at toy scale: one replication per set, same code path
    cfg = long_config(1, 2, 5)
    res = run_power_study(cfg, workers=1)
    ok = len(res.rows()) == 19 and all(r["bar-coeffs_rate"] in (0.0, 1.0) or math.isnan(r["bar-coeffs_rate"])
                                       for r in res.rows())
    record(9, ok, "long-mode harness runs at toy scale; full tables need BARGW_LONG=1"
                  + ("" if LONG else " (not requested)"))
    assert ok


@pytest.mark.slow
@pytest.mark.skipif(not LONG, reason="full-scale reproduction is opt-in: set BARGW_LONG=1 (hours of CPU)")
def test_criterion_9_full_tables():
    R = 1000
    res = run_power_study(long_config(R, 100, 15))
    bad = []
    for s, ref in PAPER_BAR_COEFFS_N15.items():
        rate = res.proportion(s, 15, "bar-coeffs")
        if abs(rate - ref) > 3 * binomial_se(ref, R) + 0.01:
            bad.append(f"set {s}: {rate:.3f} vs {ref:.3f}")
    ok = not bad
    record(9, ok, "full tables: " + ("all 19 sets agree" if ok else ", ".join(bad)))
    assert ok
