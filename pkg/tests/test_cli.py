import json
import subprocess
import sys

import pytest

from urslab.cli import run
from urslab.io import graph_from_text


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def manifest(out):
    with open(out + ".manifest.json") as fh:
        return json.load(fh)


def test_construct_cycle_writes_graph_and_manifest(tmp_path):
    out = str(tmp_path / "c8.txt")
    assert run(["construct", "cycle", "--n", "8", "--out", out]) == 0
    g = graph_from_text(open(out).read())
    assert len(g) == 8
    m = manifest(out)
    assert m["subcommand"] == "construct cycle"
    assert m["exit_code"] == 0 and m["seed"] == 0
    assert out in m["outputs"]


def test_grid_genericity_certifies(tmp_path):
    g = str(tmp_path / "grid.txt")
    assert run(["construct", "grid", "--w", "12", "--h", "12", "--product-coloring", "--seed", "3",
                "--out", g]) == 0
    out = str(tmp_path / "cert.txt")
    assert run(["urs", "genericity", "--graph", g, "--R", "1", "--Smax", "6", "--out", out]) == 0
    assert "outcome" in open(out).read()


def test_cycle_genericity_fails_with_exit_one(tmp_path):
    g = str(tmp_path / "c8.txt")
    run(["construct", "cycle", "--n", "8", "--out", g])
    out = str(tmp_path / "cert.txt")
    assert run(["urs", "genericity", "--graph", g, "--R", "2", "--Smax", "3", "--out", out]) == 1
    assert manifest(out)["exit_code"] == 1


def test_verify_repetitive_coloring(tmp_path, capsys):
    g = str(tmp_path / "p4.txt")
    run(["construct", "involution", "--edges",
         write(tmp_path, "e.txt", "n 4\n0 1 a\n1 2 b\n2 3 a\n"), "--out", g])
    col = write(tmp_path, "c.txt",
                "coloring alphabet=[0,1] n=4 nonrepetitive_upto=- proper_distance=-\n"
                "color 0 0\ncolor 1 1\ncolor 2 0\ncolor 3 1\n")
    capsys.readouterr()
    assert run(["color", "verify", "--graph", g, "--coloring", col, "--nmax", "2"]) == 1
    assert "--- report ---" in capsys.readouterr().err


def test_nonrep_then_verify(tmp_path):
    g = str(tmp_path / "c.txt")
    run(["construct", "cycle", "--n", "20", "--involutions", "--out", g])
    col = str(tmp_path / "col.txt")
    assert run(["color", "nonrep", "--graph", g, "--alphabet", "8", "--nmax", "3",
                "--seed", "5", "--out", col]) == 0
    assert run(["color", "verify", "--graph", g, "--coloring", col, "--nmax", "3",
                "--out", str(tmp_path / "v.txt")]) == 0


def test_identity_trace(tmp_path, capsys):
    g = str(tmp_path / "c.txt")
    run(["construct", "cycle", "--n", "12", "--out", g])
    capsys.readouterr()
    assert run(["kernel", "trace", "--graph", g, "--kernel", "id",
                "--windows", "[[0,1,2],[3,4,5,6]]"]) == 0
    err = capsys.readouterr().err
    report = json.loads(err.split("--- report ---\n")[1].splitlines()[0])
    assert report["values"] == [1.0, 1.0]


def test_nonexact_manifest_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
    assert run(["construct", "nonexact", "--depth", "2", "--seed", "4", "--out", a]) == 0
    assert run(["construct", "nonexact", "--depth", "2", "--seed", "4", "--out", b]) == 0
    assert open(a).read() == open(b).read()
    assert manifest(a)["outputs"][a] == manifest(b)["outputs"][b]


def test_budget_exhaustion_exits_three(tmp_path):
    g = str(tmp_path / "grid.txt")
    code = run(["construct", "grid", "--w", "60", "--h", "60", "--product-coloring", "--budget-ms", "1",
                "--out", g])
    assert code == 3


@pytest.mark.parametrize("argv", [["bogus"], ["construct", "cycle"], ["urs", "genericity"]])
def test_usage_errors_exit_two(argv):
    assert run(argv) == 2


def test_malformed_graph_exits_two(tmp_path):
    bad = write(tmp_path, "bad.txt", "gens 1 pairing i:i involutions i\nv 0 i:7\n")
    assert run(["sofic", "bs", "--graph", bad, "--r", "1"]) == 2


def test_module_entry_point(tmp_path):
    out = str(tmp_path / "c.txt")
    proc = subprocess.run([sys.executable, "-m", "urslab", "construct", "cycle", "--n", "5",
                           "--out", out], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "construct cycle: ok" in proc.stdout
