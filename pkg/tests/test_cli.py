import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qgraph.cli import run

ROOT = Path(__file__).resolve().parents[1]
GRAPHS = ROOT / "graphs"


def call(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_tadpole_spectrum_contains_loop_states(capsys):
    code, out, err = call(capsys, "spectrum", GRAPHS / "tadpole.json", "--kmax", 20, "--threads", 1)
    assert code == 0 and err == ""
    rows = list(csv.DictReader(io.StringIO(out)))
    ks = np.array([float(r["k"]) for r in rows])
    for target in (2 * math.pi, 4 * math.pi):
        assert np.min(np.abs(ks - target)) <= 1e-9


def test_open_loop_scatter(capsys):
    code, out, _ = call(capsys, "scatter", GRAPHS / "open_loop.json", "--k", "1.0")
    assert code == 0
    data = json.loads(out)
    re, im = data["S"][0][0]
    z = np.exp(1j)
    ref = z * (3 - 1 / z) / (3 - z)
    assert abs(complex(re, im) - ref) <= 1e-12
    assert data["unitarity_error"] <= 1e-10


def test_malformed_graph_exit_1(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"vertices": [{"id": 0}, {"id": 1}],
                             "edges": [{"id": 0, "from": 0, "to": 1, "length": -2}]}))
    code, out, err = call(capsys, "spectrum", p, "--kmax", 5)
    assert code == 1 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1
    msg = json.loads(lines[0])
    assert msg["exit"] == 1 and msg["field"] == "edges[0].length"


def test_bad_arguments_exit_1(capsys):
    code, _, err = call(capsys, "spectrum", GRAPHS / "tadpole.json")
    assert code == 1 and json.loads(err)["type"] == "ArgumentError"
    code, _, _ = call(capsys, "orbits", GRAPHS / "tadpole.json", "--nmax", 0)
    assert code == 1
    code, _, _ = call(capsys, "spectrum", GRAPHS / "missing.json", "--kmax", 5)
    assert code == 1


def test_numerical_failure_exit_2(capsys):
    code, out, err = call(capsys, "eigfun", GRAPHS / "tadpole_ks.json", "--k", "1.0")
    assert code == 2 and out == ""
    assert json.loads(err)["type"] == "ResidualError"


def test_k_dependent_exit_1(capsys):
    code, _, err = call(capsys, "classical", GRAPHS / "delta_tadpole.json")
    assert code == 1 and json.loads(err)["type"] == "KDependentError"


def test_output_file(capsys, tmp_path):
    out_path = tmp_path / "o.csv"
    code, out, _ = call(capsys, "secular", GRAPHS / "tadpole.json", "--k", 1.0, "-o", out_path)
    assert code == 0 and out == ""
    assert out_path.read_text().startswith("k,xi_re,xi_im\n")


@pytest.mark.parametrize("argv", [
    ["formfactor", "tadpole_ks.json", "--n", "1-3", "--samples", "5000", "--seed", "11"],
    ["nodal", "figure_eight.json", "--n-states", "15", "--morse"],
    ["orbits", "tadpole_ks.json", "--nmax", "5"],
])
def test_byte_identical_runs(capsys, argv):
    argv = [argv[0], GRAPHS / argv[1]] + argv[2:]
    first = call(capsys, *argv, "--threads", 1)
    second = call(capsys, *argv, "--threads", 3)
    assert first[0] == 0 and first == second


def test_surgery_command(capsys, tmp_path):
    out_graph = tmp_path / "split.json"
    code, out, _ = call(capsys, "surgery", GRAPHS / "star3_generic.json", "--op", "split", "--vertex", 0,
                        "--partition", "0;1;2", "--check", "--nmax", 10, "--graph-out", out_graph)
    assert code == 0
    rep = json.loads(out)
    assert rep["violations"] == [] and rep["d"] == 2
    assert out_graph.exists()


def test_regression_fixtures(capsys):
    code, out, err = call(capsys, "regress", "--fixtures", ROOT / "tests" / "fixtures", "--root", ROOT)
    assert code == 0, out + err


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "qgraph.cli", "secular", str(GRAPHS / "tadpole.json"), "--k", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("k,xi_re,xi_im")
