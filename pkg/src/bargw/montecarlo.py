"""Replication harness for level, power and convergence-rate studies.

Replication ``r`` of parameter set ``s`` simulates from the seed
``derive_seed(master, s, r, attempt)``.  ``attempt`` starts at 0 and is
bumped when the forest has no observed cell in the first generation under
study; such resamples are counted in the result.  Tallies are reduced in
replication order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateError
from .estimation import estimate_theta
from .inference import TEST_NAMES, WaldTestResult
from .processes import simulate_forest
from .registry import get_set
from .report import check_tests, run_tests
from .statnum import derive_seed, ols_slope

SCHEMA_VERSION = 1
DEFAULT_WINDOW_START = 8


@dataclass(frozen=True)
class StudyConfig:
    set_ids: tuple[int, ...]
    m: int = 20
    depth: int = 8
    replications: int = 100
    level: float = 0.05
    seed: int = 0
    tests: tuple[str, ...] = TEST_NAMES
    generations: tuple[int, ...] | None = None
    window: tuple[int, int] | None = None
    max_resamples: int = 100

    def __post_init__(self):
        object.__setattr__(self, "set_ids", tuple(int(s) for s in self.set_ids))
        object.__setattr__(self, "tests", check_tests(self.tests))
        if self.generations is not None:
            object.__setattr__(self, "generations", tuple(sorted({int(g) for g in self.generations})))
        if self.window is not None:
            object.__setattr__(self, "window", tuple(int(w) for w in self.window))
        self.validate()

    def validate(self) -> None:
        if not self.set_ids:
            raise ConfigError("set_ids must not be empty")
        for s in self.set_ids:
            try:
                get_set(s)
            except KeyError as exc:
                raise ConfigError(str(exc)) from None
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        if self.depth < 2:
            raise ConfigError("depth must be >= 2")
        if self.generations is not None:
            if not self.generations or self.generations[0] < 2 or self.generations[-1] > self.depth:
                raise ConfigError(f"generations must lie in 2..{self.depth}")
        if self.window is not None:
            lo, hi = self.window
            if lo < 2 or hi > self.depth or hi - lo < 1:
                raise ConfigError(f"slope window must hold at least two generations within 2..{self.depth}")

    @property
    def power_generations(self) -> tuple[int, ...]:
        return self.generations or (self.depth,)

    @property
    def rate_window(self) -> tuple[int, int]:
        if self.window is not None:
            return self.window
        lo = max(2, min(DEFAULT_WINDOW_START, self.depth - 1))
        return lo, self.depth

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        for k in ("set_ids", "tests", "generations", "window"):
            if d[k] is not None:
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        version = d.pop("schema_version", None)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


@dataclass
class CellResult:
    set_id: int
    n: int
    rejections: dict[str, int] = field(default_factory=dict)
    valid: dict[str, int] = field(default_factory=dict)
    error_sum: float = 0.0
    rel_error_sum: float = 0.0
    error_count: int = 0

    def proportion(self, test: str) -> float:
        v = self.valid.get(test, 0)
        return self.rejections.get(test, 0) / v if v else float("nan")

    @property
    def mean_error(self) -> float:
        return self.error_sum / self.error_count if self.error_count else float("nan")

    @property
    def mean_rel_error(self) -> float:
        return self.rel_error_sum / self.error_count if self.error_count else float("nan")


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    reference: float
    degenerate: bool


@dataclass
class StudyResult:
    config: StudyConfig
    kind: str
    cells: dict[tuple[int, int], CellResult]
    resamples: dict[int, int]
    slopes: dict[int, SlopeFit] = field(default_factory=dict)
    elapsed: float = 0.0

    def cell(self, set_id: int, n: int) -> CellResult:
        return self.cells[(set_id, n)]

    def proportion(self, set_id: int, n: int, test: str) -> float:
        return self.cells[(set_id, n)].proportion(test)

    def rows(self) -> list[dict]:
        rows = []
        for (s, n), c in sorted(self.cells.items()):
            row = {"set": s, "n": n, "replications": self.config.replications}
            if self.kind == "power":
                for t in self.config.tests:
                    row[f"{t}_rate"] = c.proportion(t)
                    row[f"{t}_valid"] = c.valid.get(t, 0)
            else:
                row["mean_error"] = c.mean_error
                row["mean_rel_error"] = c.mean_rel_error
                row["valid"] = c.error_count
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        rows = self.rows()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "resamples": {str(k): v for k, v in sorted(self.resamples.items())},
            "slopes": {
                str(k): {"slope": v.slope, "intercept": v.intercept, "reference": v.reference,
                         "degenerate": v.degenerate}
                for k, v in sorted(self.slopes.items())
            },
            "rows": self.rows(),
        }


def _simulate_replication(cfg: StudyConfig, set_id: int, r: int, first_n: int):
    ps = get_set(set_id)
    for attempt in range(cfg.max_resamples + 1):
        seed = derive_seed(cfg.seed, set_id, r, attempt)
        forest = simulate_forest(ps.law, ps.bar, ps.noise, None, cfg.m, cfg.depth, seed)
        if forest.counts(first_n).g_star > 0:
            return forest, attempt
    raise DegenerateError(f"set {set_id}, replication {r}: every resample went extinct")


def _power_task(args):
    cfg, set_id, r = args
    gens = cfg.power_generations
    forest, resampled = _simulate_replication(cfg, set_id, r, gens[0])
    out = {}
    for n in gens:
        res = run_tests(forest, n, cfg.tests)
        out[n] = {t: (v.reject(cfg.level) if isinstance(v, WaldTestResult) else None) for t, v in res.items()}
    return set_id, r, resampled, out


def _rate_task(args):
    cfg, set_id, r = args
    lo, hi = cfg.rate_window
    forest, resampled = _simulate_replication(cfg, set_id, r, lo)
    truth = get_set(set_id).bar.vector
    out = {}
    for n in range(lo, hi + 1):
        try:
            err = float(np.linalg.norm(estimate_theta(forest, n).theta - truth))
        except DegenerateError:
            err = None
        out[n] = err
    return set_id, r, resampled, out


def _execute(task, cfg: StudyConfig, workers: int | None):
    jobs = [(cfg, s, r) for s in cfg.set_ids for r in range(cfg.replications)]
    workers = (os.cpu_count() or 1) if workers is None else int(workers)
    if workers <= 1 or len(jobs) == 1:
        results = [task(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, jobs, chunksize=chunk))
    results.sort(key=lambda t: (t[0], t[1]))
    return results


def run_power_study(cfg: StudyConfig, workers: int | None = None) -> StudyResult:
    """Rejection proportions of the selected tests for each set and generation."""
    t0 = time.perf_counter()
    results = _execute(_power_task, cfg, workers)
    cells = {(s, n): CellResult(s, n, {t: 0 for t in cfg.tests}, {t: 0 for t in cfg.tests})
             for s in cfg.set_ids for n in cfg.power_generations}
    resamples = {s: 0 for s in cfg.set_ids}
    for s, _, extra, out in results:
        resamples[s] += extra
        for n, tallies in out.items():
            c = cells[(s, n)]
            for t, rej in tallies.items():
                if rej is not None:
                    c.valid[t] += 1
                    c.rejections[t] += int(rej)
    return StudyResult(cfg, "power", cells, resamples, elapsed=time.perf_counter() - t0)


def fit_rate(errors: dict[int, float], pi: float) -> SlopeFit:
    """Least-squares slope of log(mean error) against n, with -log(pi)/2 as reference."""
    ref = -math.log(pi) / 2.0
    pts = [(n, e) for n, e in sorted(errors.items())]
    if len(pts) < 2 or any(not (math.isfinite(e) and e > 1e-13) for _, e in pts):
        return SlopeFit(float("nan"), float("nan"), ref, True)
    slope, icpt = ols_slope([(n, math.log(e)) for n, e in pts])
    return SlopeFit(slope, icpt, ref, False)


def run_rate_study(cfg: StudyConfig, workers: int | None = None) -> StudyResult:
    """Mean estimation error per generation and its fitted log-linear decay."""
    t0 = time.perf_counter()
    lo, hi = cfg.rate_window
    results = _execute(_rate_task, cfg, workers)
    cells = {(s, n): CellResult(s, n) for s in cfg.set_ids for n in range(lo, hi + 1)}
    resamples = {s: 0 for s in cfg.set_ids}
    for s, _, extra, out in results:
        resamples[s] += extra
        ps = get_set(s)
        norm = float(np.linalg.norm(ps.bar.vector))
        for n, err in out.items():
            if err is None:
                continue
            c = cells[(s, n)]
            c.error_sum += err
            c.rel_error_sum += err / norm
            c.error_count += 1
    slopes = {
        s: fit_rate({n: cells[(s, n)].mean_error for n in range(lo, hi + 1)}, get_set(s).pi)
        for s in cfg.set_ids
    }
    return StudyResult(cfg, "rate", cells, resamples, slopes, time.perf_counter() - t0)
