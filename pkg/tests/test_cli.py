from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from diracbands.cli import parse_waypoint, run
from diracbands.lattice import hexagonal_lattice


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["potential", "build", "--kind", "cosine", "--out", "V.json"]) == 0
    assert run(["potential", "build", "--kind", "perturbation", "--out", "W.json"]) == 0
    return tmp_path


def error_doc(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_build_and_check(workdir, capsys):
    before = (workdir / "V.json").read_bytes()
    stat = os.stat(workdir / "V.json")
    assert run(["potential", "check", "V.json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["verdict"] == "super_honeycomb"
    assert report["c2"] == {"re": 0.5, "im": 0}
    assert (workdir / "V.json").read_bytes() == before
    assert os.stat(workdir / "V.json").st_mtime_ns == stat.st_mtime_ns


@pytest.mark.parametrize("kind, verdict", [("cosine_perturbed", "honeycomb"), ("dimer_disk", "super_honeycomb")])
def test_other_kinds(workdir, capsys, kind, verdict):
    extra = ["--delta", "0.3"] if kind == "cosine_perturbed" else ["--grid", "64"]
    assert run(["potential", "build", "--kind", kind, *extra, "--out", "X.json"]) == 0
    assert run(["potential", "check", "X.json", "--out", "rep.json"]) == 0
    assert json.loads((workdir / "rep.json").read_text())["verdict"] == verdict


def test_bands_compute(workdir):
    code = run(["bands", "compute", "--potential", "V.json", "--path", "-0.5k1:0.5k1",
                "--samples", "201", "--bands", "7", "--out", "bands.csv"])
    assert code == 0
    lines = (workdir / "bands.csv").read_text().splitlines()
    assert len(lines) == 202
    assert lines[0].split(",") == ["index", "kx", "ky", "arclen"] + [f"band{j}" for j in range(1, 8)]


def test_gap_scan(workdir):
    assert run(["gap", "scan", "--potential", "V.json", "--perturbation", "W.json",
                "--deltas", "-0.3,0,0.3", "--out", "gap.csv", "--report", "gap.json"]) == 0
    rows = [r.split(",") for r in (workdir / "gap.csv").read_text().splitlines()]
    assert rows[0] == ["delta", "gap"] and len(rows) == 4
    assert float(rows[2][1]) <= 1e-7
    assert json.loads((workdir / "gap.json").read_text())["status"] == "ok"


def test_cone_and_shallow(workdir):
    assert run(["cone", "analyze", "--potential", "V.json", "--out", "cone.json"]) == 0
    doc = json.loads((workdir / "cone.json").read_text())
    assert doc["relative_mismatch"] < 5e-3
    assert set(doc["diagnostics"]) == {"mu_D", "sector_gaps", "v_sharp", "v_F", "c_sharp", "sector_weights"}
    assert run(["shallow", "scan", "--potential", "V.json", "--epsilons", "-0.02,0.02", "--out", "s.csv"]) == 0
    assert (workdir / "s.csv").read_text().splitlines()[0] == "epsilon,quartet_shift,doublet_shift"


def test_outputs_are_deterministic(workdir, monkeypatch):
    args = ["bands", "compute", "--potential", "V.json", "--path", "0:0.5k1:0.5k1+0.5k2", "--samples", "9"]
    monkeypatch.setenv("DIRACBANDS_THREADS", "1")
    assert run([*args, "--out", "a.csv"]) == 0
    assert run(["gap", "scan", "--potential", "V.json", "--perturbation", "W.json", "--out", "g1.csv"]) == 0
    monkeypatch.setenv("DIRACBANDS_THREADS", "3")
    assert run([*args, "--out", "b.csv"]) == 0
    assert run(["gap", "scan", "--potential", "V.json", "--perturbation", "W.json", "--out", "g2.csv"]) == 0
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert (workdir / "g1.csv").read_bytes() == (workdir / "g2.csv").read_bytes()


def test_config_file(workdir, monkeypatch):
    exp = workdir / "exp"
    exp.mkdir()
    (exp / "V.json").write_bytes((workdir / "V.json").read_bytes())
    (exp / "run.json").write_text(json.dumps({
        "potential": {"file": "V.json"},
        "path": {"waypoints": ["-0.5k1", "0.5k1"], "samples": 5},
        "spectral": {"n_bands": 3, "ecut_factor": 20},
        "output": {"dir": "out"},
        "out": "b.csv",
    }))
    monkeypatch.chdir("/")
    assert run(["bands", "compute", "--config", str(exp / "run.json")]) == 0
    lines = (exp / "out" / "b.csv").read_text().splitlines()
    assert len(lines) == 6 and lines[0].endswith("band3")
    # flags win over the config
    assert run(["bands", "compute", "--config", str(exp / "run.json"), "--bands", "2", "--samples", "3"]) == 0
    lines = (exp / "out" / "b.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].endswith("band2")


def test_unknown_subcommand(capsys):
    assert run(["frobnicate", "now"]) == 64
    doc = error_doc(capsys)
    assert doc["error"] == "UnknownCommand" and set(doc) == {"error", "message", "context"}


def test_missing_file(workdir, capsys):
    assert run(["bands", "compute", "--potential", "nope.json"]) == 66
    assert error_doc(capsys)["context"]["exit_code"] == 66


def test_schema_mismatch(workdir, capsys):
    (workdir / "empty.csv").write_text("")
    assert run(["plot", "emit", "empty.csv"]) == 65
    (workdir / "bad.json").write_text('{"lattice": 3}')
    assert run(["potential", "check", "bad.json"]) == 65
    assert error_doc(capsys)["error"] == "SchemaMismatch"


@pytest.mark.parametrize("argv", [
    ["bands", "compute", "--potential", "V.json", "--bogus"],
    ["potential", "build", "--kind", "square", "--out", "x.json"],
    ["bands", "compute", "--potential", "V.json", "--path", "0.5q7:0"],
    ["gap", "scan", "--potential", "V.json", "--perturbation", "V.json", "--deltas", "a,b"],
    ["bands", "compute", "--potential", "V.json", "--ecut-factor", "-1"],
])
def test_config_errors(workdir, capsys, argv):
    assert run(argv) == 2
    assert error_doc(capsys)["context"]["exit_code"] == 2


def test_numerical_failure(workdir, capsys):
    # the free operator has a sextet, not a quartet, at Γ
    assert run(["potential", "build", "--kind", "cosine", "--epsilon", "0", "--out", "zero.json"]) == 0
    assert run(["cone", "analyze", "--potential", "zero.json"]) == 3
    assert error_doc(capsys)["error"] == "ClusterIdentificationError"


def test_plot_bands_script(workdir):
    assert run(["bands", "compute", "--potential", "V.json", "--samples", "11", "--out", "b.csv"]) == 0
    assert run(["plot", "emit", "b.csv", "--out", "plot.py"]) == 0
    script = (workdir / "plot.py").read_text()
    namespace = {}
    exec(script.split("fig, ax")[0].split("import matplotlib.pyplot as plt")[1], namespace)
    assert len(namespace["bands"]) == 7 and len(namespace["arclen"]) == 11
    subprocess.run([sys.executable, "plot.py"], check=True, cwd=workdir)
    assert (workdir / "plot.png").stat().st_size > 0


def test_plot_gap_reference_line(workdir):
    assert run(["gap", "scan", "--potential", "V.json", "--perturbation", "W.json", "--out", "g.csv"]) == 0
    assert run(["plot", "emit", "g.csv", "--c-sharp", "-0.4968"]) == 0
    script = (workdir / "g.plot.py").read_text()
    assert "c_sharp = -0.4968" in script and "2 * abs(c_sharp)" in script
    assert run(["plot", "emit", "g.csv", "--out", "plain.py"]) == 0
    assert "c_sharp" not in (workdir / "plain.py").read_text()


def test_module_entry_point(workdir):
    res = subprocess.run([sys.executable, "-m", "diracbands", "potential", "check", "V.json"],
                         capture_output=True, text=True, cwd=workdir)
    assert res.returncode == 0 and '"super_honeycomb"' in res.stdout


@pytest.mark.parametrize("text, expected", [
    ("0.5k1", (0.5, 0)), ("-0.25k1+0.5k2", (-0.25, 0.5)), ("G", (0, 0)), ("k2-k1", (-1, 1)), ("1e-1k1", (0.1, 0)),
])
def test_waypoints(text, expected):
    lat = hexagonal_lattice()
    np.testing.assert_allclose(parse_waypoint(text, lat), expected[0] * lat.k1 + expected[1] * lat.k2, atol=1e-14)
