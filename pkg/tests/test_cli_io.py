import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bargw.cli import EXIT_DATA, EXIT_DEGENERATE, EXIT_OK, main
from bargw.errors import ConfigError, LineageFormatError
from bargw.io import (
    dumps,
    lineage_text,
    params_from_dict,
    parse_lineage,
    read_json,
    read_lineage,
    write_json,
    write_lineage,
)
from bargw.processes import simulate_forest
from bargw.registry import get_set
from bargw.report import analyze
from conftest import forests


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def params_file(tmp_path, sid, **extra):
    return write(tmp_path / f"params{sid}.json", json.dumps({"schema_version": 1, "set": sid, **extra}))


def simulate_file(tmp_path, sid, m, depth, seed, name="data.csv"):
    out = tmp_path / name
    assert main(["simulate", "--params", str(params_file(tmp_path, sid)), "--m", str(m),
                 "--depth", str(depth), "--seed", str(seed), "--out", str(out)]) == EXIT_OK
    return out


def rows_of(text):
    rows = list(csv.reader(text.splitlines()))
    return rows[0], {(int(t), int(k)): (float(v) if v else None) for t, k, v in rows[1:]}


# -- lineage files -------------------------------------------------------------------


def test_three_row_file(tmp_path):
    f = read_lineage(write(tmp_path / "a.csv", "tree,node,value\n1,1,0.5\n1,2,0.25\n1,3,0.75\n"))
    assert f.m == 1 and f.depth == 1
    assert f.nodes(0).tolist() == [1, 2, 3]
    assert f.values(0).tolist() == [0.5, 0.25, 0.75]


def test_orphan_names_row():
    with pytest.raises(LineageFormatError, match="row 4") as exc:
        parse_lineage("tree,node,value\n1,1,1.0\n1,3,2.0\n1,5,3.0\n")
    assert exc.value.row == 4 and "orphan" in str(exc.value)


def test_duplicate_names_rows():
    with pytest.raises(LineageFormatError, match="duplicates row 3") as exc:
        parse_lineage("tree,node,value\n1,1,1.0\n1,2,2.0\n1,2,3.0\n")
    assert exc.value.row == 4


@pytest.mark.parametrize(
    "text,row",
    [
        ("", 1),
        ("tree,node\n1,1\n", 1),
        ("tree,node,value\n1,1\n", 2),
        ("tree,node,value\n1,x,1.0\n", 2),
        ("tree,node,value\n0,1,1.0\n", 2),
        ("tree,node,value\n1,0,1.0\n", 2),
        ("tree,node,value\n1,1,abc\n", 2),
        ("tree,node,value\n1,1,nan\n", 2),
        ("tree,node,value\n1,1,1.0\n2,2,1.0\n", 3),
        ("tree,node,value\n1,1,1.0\n3,1,1.0\n", None),
        ("tree,node,value\n1,1,1.0\n1,2,\n", None),
        (f"tree,node,value\n1,{2**51},1.0\n", 2),
    ],
)
def test_malformed_lineage(text, row):
    with pytest.raises(LineageFormatError) as exc:
        parse_lineage(text)
    assert exc.value.row == row


def test_non_utf8(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(b"tree,node,value\n1,1,\xff\n")
    with pytest.raises(LineageFormatError):
        read_lineage(p)


def test_skeleton_file():
    f = parse_lineage("tree,node,value\n1,1,\n1,3,\n2,1,\n")
    assert not f.has_values and f.m == 2
    assert lineage_text(f) == "tree,node,value\n1,1,\n1,3,\n2,1,\n"


@settings(max_examples=40, deadline=None)
@given(forests(max_m=4, max_depth=6, values=True))
def test_lineage_round_trip(f):
    text = lineage_text(f)
    g = parse_lineage(text, depth=f.depth)
    assert g.equals(f)
    assert lineage_text(g) == text
    # rows may come in any order
    lines = text.splitlines()
    shuffled = "\n".join([lines[0]] + lines[1:][::-1]) + "\n"
    assert rows_of(lineage_text(parse_lineage(shuffled, depth=f.depth))) == rows_of(text)


def test_written_bytes(tmp_path):
    ps = get_set(18)
    f = simulate_forest(ps.law, ps.bar, ps.noise, None, 2, 3, seed=1)
    p = tmp_path / "x.csv"
    write_lineage(f, p)
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.startswith(b"tree,node,value\n1,1,")


# -- JSON ----------------------------------------------------------------------------


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_json_float_round_trip(x):
    assert json.loads(dumps({"x": x}))["x"] == x


def test_json_special_values(tmp_path):
    doc = {"a": np.float64(0.1), "b": np.int64(3), "c": np.array([1.0, 2.5]), "d": float("nan"),
           "e": None, "f": [True, "s"], "g": 1.0}
    p = tmp_path / "d.json"
    write_json(doc, p)
    back = read_json(p)
    assert back["a"] == 0.1 and back["b"] == 3 and back["c"] == [1.0, 2.5]
    assert math.isnan(back["d"]) and back["e"] is None and back["f"] == [True, "s"]
    assert '"g": 1.0' in p.read_text()
    assert "0.10000000000000001" in p.read_text()
    write(p, "{bad")
    with pytest.raises(ConfigError):
        read_json(p)


def test_params_parsing():
    law, bar, noise, root = params_from_dict({"schema_version": 1, "set": 14})
    assert law == get_set(14).law and bar == get_set(14).bar and root is None
    law, bar, noise, root = params_from_dict({
        "schema_version": 1, "p0": [1, 0, 0, 0], "p1": [0.5, 0.2, 0.2, 0.1],
        "bar": {"a0": 0.1, "b0": 0.2, "a1": 0.3, "b1": 0.4}, "noise": None,
        "root": {"mode": "fixed", "value": 1.5},
    })
    assert noise is None and bar.b1 == 0.4 and root.mode == "fixed"
    for bad in ({"set": 1}, {"schema_version": 2, "set": 1}, {"schema_version": 1, "set": 99},
                {"schema_version": 1, "set": 1, "oops": 1},
                {"schema_version": 1, "bar": {"a0": 0, "b0": 0, "a1": 0, "b1": 0}, "noise": None},
                {"schema_version": 1, "set": 1, "p0": [0.5, 0.5, 0.5, 0.5]},
                {"schema_version": 1, "set": 1, "bar": {"a0": 1}}):
        with pytest.raises(ConfigError):
            params_from_dict(bad)


# -- command line --------------------------------------------------------------------


def test_estimate_matches_in_process(tmp_path, capsys):
    data = simulate_file(tmp_path, 18, 20, 9, seed=4)
    out = tmp_path / "rep.json"
    rc = main(["estimate", "--data", str(data), "--gens", "9", "--out", str(out), "--deterministic"])
    assert rc == EXIT_OK
    rep = analyze(read_lineage(data), 9)
    rep.metadata.update(seed=None, data=str(data))
    assert out.read_text() == dumps(rep.to_dict())
    doc = read_json(out)
    assert set(doc) == {"estimates", "counts", "intervals", "tests", "errors", "metadata"}
    assert doc["metadata"]["n"] == 9 and "timestamp" not in doc["metadata"]


def test_cli_byte_reproducible(tmp_path):
    a = simulate_file(tmp_path, 14, 5, 7, seed=11, name="a.csv")
    b = simulate_file(tmp_path, 14, 5, 7, seed=11, name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    reps = []
    for name in ("r1.json", "r2.json"):
        main(["estimate", "--data", str(a), "--gens", "7", "--out", str(tmp_path / name), "--deterministic"])
        reps.append((tmp_path / name).read_bytes())
    assert reps[0] == reps[1]
    main(["estimate", "--data", str(a), "--gens", "7", "--out", str(tmp_path / "r3.json")])
    assert "timestamp" in read_json(tmp_path / "r3.json")["metadata"]


def test_exit_codes(tmp_path, capsys):
    data = simulate_file(tmp_path, 14, 5, 6, seed=2)
    assert main(["test", "--data", str(data), "--gens", "6"]) == EXIT_OK
    assert "fixed-point" in capsys.readouterr().out
    # generation beyond the data
    assert main(["test", "--data", str(data), "--gens", "9"]) == EXIT_DATA
    # malformed file
    bad = write(tmp_path / "bad.csv", "tree,node,value\n1,1,1.0\n1,5,1.0\n")
    assert main(["estimate", "--data", str(bad), "--gens", "2"]) == EXIT_DATA
    assert "row 3" in capsys.readouterr().err
    assert main(["test", "--data", str(tmp_path / "missing.csv"), "--gens", "2"]) == EXIT_DATA
    # unknown test name is rejected by the argument parser
    with pytest.raises(SystemExit) as exc:
        main(["test", "--data", str(data), "--gens", "6", "--which", "nope"])
    assert exc.value.code == 2
    # constant values make every BAR statistic degenerate
    const = write(tmp_path / "const.csv", "tree,node,value\n" + "".join(f"1,{k},1.0\n" for k in range(1, 16)))
    assert main(["test", "--data", str(const), "--gens", "3", "--which", "bar-coeffs"]) == EXIT_DEGENERATE
    assert main(["estimate", "--data", str(const), "--gens", "3", "--out", str(tmp_path / "c.json")]) \
        == EXIT_DEGENERATE
    assert "bar" in read_json(tmp_path / "c.json")["errors"]


def test_test_command_json_and_skeleton(tmp_path, capsys):
    ps = get_set(14)
    skel = tmp_path / "s.csv"
    write_lineage(simulate_forest(ps.law, ps.bar, ps.noise, None, 10, 6, seed=3).skeleton(), skel)
    assert main(["test", "--data", str(skel), "--gens", "6", "--json"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"gw-mean", "gw-vector"}
    assert main(["test", "--data", str(skel), "--gens", "6", "--which", "variance"]) == EXIT_DATA


def test_no_partial_output(tmp_path):
    out = tmp_path / "rep.json"
    write(out, "previous")
    bad = write(tmp_path / "bad.csv", "tree,node,value\n1,1,1.0\n1,2,oops\n")
    assert main(["estimate", "--data", str(bad), "--gens", "1", "--out", str(out)]) == EXIT_DATA
    assert out.read_text() == "previous"
    sim = tmp_path / "sim.csv"
    assert main(["simulate", "--params", str(write(tmp_path / "p.json", '{"schema_version": 1}')),
                 "--m", "2", "--depth", "3", "--seed", "1", "--out", str(sim)]) == EXIT_DATA
    assert not sim.exists()
    assert [p.name for p in tmp_path.iterdir() if p.name.endswith(".tmp")] == []


def test_power_command(tmp_path):
    cfg = write(tmp_path / "cfg.json", json.dumps({"schema_version": 1, "set_ids": [2], "m": 10, "depth": 8,
                                                    "replications": 100, "seed": 1}))
    out, summ = tmp_path / "power.csv", tmp_path / "summary.json"
    assert main(["power", "--config", str(cfg), "--out", str(out), "--summary", str(summ),
                 "--workers", "2", "--deterministic"]) == EXIT_OK
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 1 and rows[0]["set"] == "2"
    rates = [float(v) for k, v in rows[0].items() if k.endswith("_rate")]
    assert len(rates) == 5
    assert all(0.0 <= r <= 1.0 for r in rates if not math.isnan(r))
    s = read_json(summ)
    assert "elapsed_seconds" not in s and s["kind"] == "power"
    bad = write(tmp_path / "bad.json", json.dumps({"schema_version": 3, "set_ids": [2]}))
    assert main(["power", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_DATA
    assert not (tmp_path / "x.csv").exists()


def test_rate_command(tmp_path):
    cfg = write(tmp_path / "cfg.json", json.dumps({"schema_version": 1, "set_ids": [11], "m": 5, "depth": 8,
                                                    "replications": 4, "seed": 1, "window": [6, 8]}))
    out = tmp_path / "rate.csv"
    assert main(["rate", "--config", str(cfg), "--out", str(out), "--workers", "1"]) == EXIT_OK
    assert out.read_text().splitlines()[0] == "set,n,replications,mean_error,mean_rel_error,valid"


def test_fixed_point_level_across_files(tmp_path, capsys):
    # set 4 has equal BAR coefficients for both types
    rejected = 0
    for seed in range(100):
        data = simulate_file(tmp_path, 4, 20, 8, seed=seed)
        assert main(["test", "--data", str(data), "--gens", "8", "--which", "fixed-point", "--json"]) == EXIT_OK
        p = json.loads(capsys.readouterr().out)["fixed-point"]["p_value"]
        rejected += p <= 0.05
    print(f"fixed-point rejections: {rejected}/100")
    assert 0.01 <= rejected / 100 <= 0.12


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "bargw", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("bargw ")
