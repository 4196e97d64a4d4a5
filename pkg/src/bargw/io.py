"""Lineage CSV files, JSON documents and simulation parameter files.

Lineage format: UTF-8, LF line endings, header ``tree,node,value`` and one
row per observed cell.  Tree ids are 1-based; the value column may be left
empty in every row of a skeleton-only file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, DataError, LineageFormatError
from .processes import BarCoeffs, GwLaw, NoiseMoments, RootLaw, gaussian_moments
from .tree import MAX_DEPTH, ObservedForest, generation

HEADER = ("tree", "node", "value")
SCHEMA_VERSION = 1


# -- atomic writes -------------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    """Write ``text`` next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


# -- lineage CSV ---------------------------------------------------------------

def format_float(x: float) -> str:
    return repr(float(x))


def lineage_text(forest: ObservedForest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for j in range(forest.m):
        nodes = forest.nodes(j)
        if forest.has_values:
            vals = forest.values(j)
            for k, v in zip(nodes.tolist(), vals.tolist()):
                w.writerow((j + 1, k, format_float(v)))
        else:
            for k in nodes.tolist():
                w.writerow((j + 1, k, ""))
    return buf.getvalue()


def write_lineage(forest: ObservedForest, path) -> None:
    atomic_write_text(path, lineage_text(forest))


def _parse_int(text: str, what: str, row: int) -> int:
    try:
        v = int(text.strip())
    except ValueError:
        raise LineageFormatError(f"{what} {text!r} is not an integer", row) from None
    return v


def parse_lineage(text: str, depth: int | None = None) -> ObservedForest:
    """Parse lineage CSV text.  Row numbers in errors count the header as row 1."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LineageFormatError("empty file", 1) from None
    if tuple(h.strip() for h in header) != HEADER:
        raise LineageFormatError(f"expected header {','.join(HEADER)}", 1)
    trees: dict[int, dict[int, tuple[float | None, int]]] = {}
    with_value = without_value = 0
    for row_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise LineageFormatError(f"expected 3 fields, found {len(row)}", row_no)
        tree = _parse_int(row[0], "tree id", row_no)
        node = _parse_int(row[1], "node", row_no)
        if tree < 1:
            raise LineageFormatError("tree ids start at 1", row_no)
        if node < 1:
            raise LineageFormatError("node indices start at 1", row_no)
        if generation(node) > MAX_DEPTH:
            raise LineageFormatError(f"node {node} lies below generation {MAX_DEPTH}", row_no)
        raw = row[2].strip()
        if raw:
            try:
                value = float(raw)
            except ValueError:
                raise LineageFormatError(f"value {raw!r} is not a number", row_no) from None
            if not math.isfinite(value):
                raise LineageFormatError("values must be finite", row_no)
            with_value += 1
        else:
            value = None
            without_value += 1
        cells = trees.setdefault(tree, {})
        if node in cells:
            raise LineageFormatError(
                f"tree {tree}: node {node} duplicates row {cells[node][1]}", row_no)
        cells[node] = (value, row_no)
    if not trees:
        raise LineageFormatError("no data rows", None)
    if with_value and without_value:
        raise LineageFormatError("either every row or no row may carry a value", None)
    m = max(trees)
    for tree in range(1, m + 1):
        cells = trees.get(tree)
        if cells is None or 1 not in cells:
            first = min((r for _, r in cells.values()), default=None) if cells else None
            raise LineageFormatError(f"tree {tree}: root row (node 1) is missing", first)
        for node, (_, row_no) in sorted(cells.items(), key=lambda kv: kv[1][1]):
            if node > 1 and node // 2 not in cells:
                raise LineageFormatError(
                    f"tree {tree}: node {node} is an orphan (mother {node // 2} missing)", row_no)
    node_lists, value_lists = [], []
    for tree in range(1, m + 1):
        items = sorted(trees[tree].items())
        node_lists.append(np.array([k for k, _ in items], dtype=np.int64))
        value_lists.append(np.array([v for _, (v, _) in items], dtype=np.float64) if with_value else None)
    return ObservedForest(node_lists, value_lists if with_value else None, depth=depth)


def read_lineage(path, depth: int | None = None) -> ObservedForest:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise LineageFormatError(f"not UTF-8: {exc}") from None
    return parse_lineage(text, depth)


# -- JSON ------------------------------------------------------------------------

def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        text = "%.17g" % x
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every real written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj: Any, path) -> None:
    atomic_write_text(path, dumps(obj))


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


# -- simulation parameters -------------------------------------------------------

def _check_version(d: dict) -> None:
    v = d.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")


def params_from_dict(d: dict) -> tuple[GwLaw, BarCoeffs, NoiseMoments | None, RootLaw | None]:
    """Model parameters from a JSON object.

    ``{"set": id}`` selects a reference set; the keys ``p0``, ``p1``, ``bar``
    (a0, b0, a1, b1), ``noise`` (sigma2_0, sigma2_1, rho; Gaussian, or null
    for a noiseless process) and ``root`` (``{"mode": "fixed", "value": x}``
    or ``{"mode": "gaussian", "mean": .., "sd": ..}``) fill in or override.
    Without ``root`` the stationary law of the type-0 lineage is used.
    """
    if not isinstance(d, dict):
        raise ConfigError("parameters must be a JSON object")
    _check_version(d)
    known = {"schema_version", "set", "p0", "p1", "bar", "noise", "root"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown parameter keys: {', '.join(sorted(extra))}")
    law = bar = noise = None
    has_noise = False
    if "set" in d:
        from .registry import get_set

        try:
            ps = get_set(d["set"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc).strip("'\"")) from None
        law, bar, noise, has_noise = ps.law, ps.bar, ps.noise, True
    try:
        if "p0" in d or "p1" in d:
            p0 = d.get("p0", law.p0 if law else None)
            p1 = d.get("p1", law.p1 if law else None)
            if p0 is None or p1 is None:
                raise ConfigError("both p0 and p1 are needed")
            law = GwLaw(tuple(map(float, p0)), tuple(map(float, p1)))
        if "bar" in d:
            b = d["bar"]
            bar = BarCoeffs(float(b["a0"]), float(b["b0"]), float(b["a1"]), float(b["b1"]))
        if "noise" in d:
            has_noise = True
            nz = d["noise"]
            noise = None if nz is None else gaussian_moments(
                float(nz["sigma2_0"]), float(nz["sigma2_1"]), float(nz["rho"]))
        root = None
        if d.get("root") is not None:
            r = dict(d["root"])
            mode = r.pop("mode", "fixed")
            root = RootLaw(mode, **{k: float(v) for k, v in r.items()})
    except ConfigError:
        raise
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed parameters: {exc}") from None
    if law is None or bar is None:
        raise ConfigError("parameters need a reproduction law and BAR coefficients (or a set id)")
    if not has_noise:
        raise ConfigError("parameters need a noise entry (null for a noiseless process)")
    return law, bar, noise, root


def read_params(path):
    return params_from_dict(read_json(path))
