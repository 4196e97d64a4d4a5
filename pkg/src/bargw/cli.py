"""Command-line interface.

Exit codes: 0 success, 2 data/format/config errors, 3 degenerate statistics.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from pathlib import Path

from . import __version__
from .errors import DataError, DegenerateError
from .inference import TEST_NAMES, WaldTestResult
from .io import atomic_write_text, dumps, read_json, read_lineage, read_params, write_json, write_lineage
from .montecarlo import StudyConfig, run_power_study, run_rate_study
from .processes import simulate_forest
from .report import analyze, run_tests

EXIT_OK = 0
EXIT_DATA = 2
EXIT_DEGENERATE = 3


def _metadata(args, **extra) -> dict:
    meta = {"seed": getattr(args, "seed", None), **extra}
    if not args.deterministic:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def cmd_simulate(args) -> int:
    law, bar, noise, root = read_params(args.params)
    forest = simulate_forest(law, bar, noise, root, args.m, args.depth, args.seed)
    write_lineage(forest, args.out)
    print(f"wrote {forest.n_observed} cells in {forest.m} trees to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    forest = read_lineage(args.data)
    rep = analyze(forest, args.gens, level=args.level, method=args.method)
    rep.metadata.update(_metadata(args, data=str(args.data)))
    _emit(dumps(rep.to_dict()), args.out)
    return EXIT_DEGENERATE if rep.errors else EXIT_OK


def cmd_test(args) -> int:
    forest = read_lineage(args.data)
    which = TEST_NAMES if args.which == "all" else (args.which,)
    if not forest.has_values:
        if args.which != "all" and not args.which.startswith("gw-"):
            raise DataError("the lineage file carries no values; BAR tests need measurements")
        which = tuple(w for w in which if w.startswith("gw-"))
    res = run_tests(forest, args.gens, which)
    failed = False
    if args.json:
        doc = {k: (v.to_dict() if isinstance(v, WaldTestResult) else {"which": k, "error": v})
               for k, v in res.items()}
        sys.stdout.write(dumps(doc))
        failed = any(not isinstance(v, WaldTestResult) for v in res.values())
    else:
        print(f"{'test':<12} {'statistic':>14} {'df':>3} {'p-value':>12}")
        for k, v in res.items():
            if isinstance(v, WaldTestResult):
                print(f"{k:<12} {v.statistic:>14.6g} {v.df:>3d} {v.p_value:>12.6g}")
            else:
                failed = True
                print(f"{k:<12} error: {v}")
    return EXIT_DEGENERATE if failed else EXIT_OK


def _study(args, runner) -> int:
    raw = read_json(args.config)
    if not isinstance(raw, dict):
        raise DataError("config must be a JSON object")
    cfg = StudyConfig.from_dict(raw)
    result = runner(cfg, workers=args.workers)
    atomic_write_text(args.out, result.to_csv())
    if args.summary:
        summary = result.summary()
        summary["version"] = __version__
        if not args.deterministic:
            summary["elapsed_seconds"] = result.elapsed
        write_json(summary, args.summary)
    return EXIT_OK


def cmd_power(args) -> int:
    return _study(args, run_power_study)


def cmd_rate(args) -> int:
    return _study(args, run_rate_study)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bargw", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--deterministic", action="store_true",
                        help="omit timestamps and timings so outputs are byte-reproducible")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a forest and write a lineage CSV", parents=[common])
    s.add_argument("--params", type=Path, required=True, help="JSON parameter file")
    s.add_argument("--m", type=int, required=True, help="number of trees")
    s.add_argument("--depth", type=int, required=True, help="last simulated generation")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate parameters, intervals and tests", parents=[common])
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--gens", type=int, required=True, help="generation n to estimate at")
    e.add_argument("--level", type=float, default=0.95, help="confidence level (default 0.95)")
    e.add_argument("--method", choices=("marginal", "matrix-sqrt"), default="marginal")
    e.add_argument("--out", default="-", help="report path (default stdout)")
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("test", help="run symmetry tests", parents=[common])
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--gens", type=int, required=True)
    t.add_argument("--which", choices=("all",) + TEST_NAMES, default="all")
    t.add_argument("--json", action="store_true", help="print JSON instead of a table")
    t.set_defaults(func=cmd_test)

    for name, func, help_ in (("power", cmd_power, "level/power study"),
                              ("rate", cmd_rate, "convergence-rate study")):
        q = sub.add_parser(name, help=help_, parents=[common])
        q.add_argument("--config", type=Path, required=True, help="JSON study config")
        q.add_argument("--out", type=Path, required=True, help="CSV output")
        q.add_argument("--summary", type=Path, help="optional JSON summary output")
        q.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: available CPUs)")
        q.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"bargw: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateError as exc:
        print(f"bargw: degenerate: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"bargw: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
