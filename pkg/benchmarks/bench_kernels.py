"""Compare the numba and numpy kernel backends on one simulated forest.

Usage: python benchmarks/bench_kernels.py [--m 100] [--depth 15] [--repeat 5]
"""

import argparse
import time

import numpy as np

from bargw.kernels import get_backend
from bargw.processes import simulate_forest
from bargw.registry import get_set


def best_of(fn, repeat):
    fn()  # warm-up (triggers JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--set", type=int, default=14)
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--depth", type=int, default=15)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ps = get_set(args.set)
    forest = simulate_forest(ps.law, ps.bar, ps.noise, None, args.m, args.depth, seed=1)
    f = forest.family
    g = forest.depth + 1
    coef = np.tile(ps.bar.vector, (g, 1))
    ok = np.ones((g, 2), dtype=np.bool_)
    rng = np.random.default_rng(0)
    cum = ps.law.cumulative()
    ctype = f.ctype
    u = rng.random(len(f))
    print(f"set {args.set}, m={args.m}, depth={args.depth}: {forest.n_observed} cells, {len(f)} mothers")

    cases = {
        "pattern_counts": lambda k: k.pattern_counts(f.gen, f.ctype, f.has0, f.has1, g),
        "family_moments": lambda k: k.family_moments(f.gen, f.x, f.has0, f.has1, f.x0, f.x1, g),
        "residuals": lambda k: k.residuals(f.gen, f.x, f.has0, f.has1, f.x0, f.x1, coef, ok),
        "draw_patterns": lambda k: k.draw_patterns(ctype, u, cum),
    }
    e0, e1 = get_backend("numpy").residuals(f.gen, f.x, f.has0, f.has1, f.x0, f.x1, coef, ok)
    cases["residual_sums"] = lambda k: k.residual_sums(f.gen, e0, e1, f.has0, f.has1, g)
    sim = lambda k: simulate_forest(ps.law, ps.bar, ps.noise, None, args.m, args.depth, seed=2, backend=k)

    print(f"{'kernel':<16} {'numpy ms':>10} {'numba ms':>10} {'speed-up':>9}")
    backends = {name: get_backend(name) for name in ("numpy", "numba")}
    for name, fn in cases.items():
        t = {b: best_of(lambda: fn(k), args.repeat) for b, k in backends.items()}
        print(f"{name:<16} {1e3 * t['numpy']:>10.3f} {1e3 * t['numba']:>10.3f} {t['numpy'] / t['numba']:>8.1f}x")
    t = {b: best_of(lambda: sim(b), args.repeat) for b in backends}
    print(f"{'simulate_forest':<16} {1e3 * t['numpy']:>10.3f} {1e3 * t['numba']:>10.3f} {t['numpy'] / t['numba']:>8.1f}x")


if __name__ == "__main__":
    main()
