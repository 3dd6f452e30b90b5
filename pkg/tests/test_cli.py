import csv
import io
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from bvflow.cli import main
from bvflow.gl11 import FIXTURE_DIR

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def quick(tmp_path):
    """A small rational scenario on the nilpotent fixture (exact arithmetic end to end)."""
    p = tmp_path / "quick.yaml"
    p.write_text("fixture: dim4-nilpotent\nscalar: rational\ngrid: ['0', '1/2', '1']\n"
                 "checks: [gl11, extended, reconstruct]\nsteps: 8\n")
    return p


def test_minimal_scenario_passes(capsys):
    code, out, _ = run(["check", SCENARIOS / "minimal.yaml"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and rep["exit_code"] == 0 and rep["reasons"] == []
    checks = rep["suites"]["identities"]["checks"]
    assert all(c["residual"] == 0 for c in checks)


def test_failing_scenario_exits_one(capsys):
    code, out, err = run(["check", SCENARIOS / "failing.yaml"], capsys)
    assert code == 1
    assert json.loads(out)["exit_code"] == 1
    assert "FAIL extended." in err


def test_corrupt_omega_exits_two(capsys):
    code, out, err = run(["check", SCENARIOS / "corrupt-omega.json"], capsys)
    assert code == 2
    assert out == ""
    assert "omega[0,0]" in err and "pairing" in err


def test_parse_errors_exit_two(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [1, 0, 2]\n")
    assert run(["check", bad], capsys)[0] == 2
    assert run(["check", tmp_path / "missing.yaml"], capsys)[0] == 2
    assert run(["check", "--fixture", "nosuch"], capsys)[0] == 2


def test_broken_axiom_fixture_exits_two(tmp_path, capsys):
    data = json.loads((FIXTURE_DIR / "gl11_dim2.json").read_text())
    data["H"] = [["2", "0"], ["0", "2"]]
    (tmp_path / "f.json").write_text(json.dumps(data))
    code, _, err = run(["check", "--fixture", tmp_path / "f.json", "--checks", "gl11"], capsys)
    assert code == 2
    assert "[Q,Qbar]=H" in err


def test_reports_are_byte_identical(quick, tmp_path, capsys, monkeypatch):
    code1, out1, _ = run(["check", quick], capsys)
    monkeypatch.setenv("BVFLOW_THREADS", "4")
    code2, out2, _ = run(["check", quick, "--report", tmp_path / "r.json"], capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    assert (tmp_path / "r.json").read_text() == out1


def test_replay_from_report(quick, tmp_path, capsys):
    code, out, _ = run(["check", quick, "--report", tmp_path / "r.json"], capsys)
    assert code == 0
    code, again, _ = run(["check", tmp_path / "r.json"], capsys)
    assert code == 0
    assert again == out


def test_timings_are_opt_in(capsys):
    _, out, _ = run(["check", SCENARIOS / "minimal.yaml"], capsys)
    assert "wall_time" not in out
    _, out, _ = run(["check", SCENARIOS / "minimal.yaml", "--timings"], capsys)
    assert "wall_time" in json.loads(out)["suites"]["identities"]


def test_overrides_and_csv(capsys, tmp_path):
    code, out, _ = run(["check", SCENARIOS / "minimal.yaml", "--output", "csv",
                        "--csv", tmp_path / "c.csv"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["suite", "check", "residual", "tolerance", "pass", "truncated"]
    assert {r[0] for r in rows[1:]} == {"identities"}
    assert (tmp_path / "c.csv").read_text() == out


def test_truncation_needs_allowance(capsys, tmp_path):
    p = tmp_path / "t.yaml"
    p.write_text("fixture: dim4-nilpotent\nmax_degree: 3\ngrid: ['0', '1/2', '1']\n"
                 "checks: [free-flow]\n")
    code, out, _ = run(["flow", p], capsys)
    rep = json.loads(out)
    assert code == 1
    flagged = [r for r in rep["reasons"] if "truncated at max_degree 3" in r]
    assert flagged
    _, out, _ = run(["flow", p, "--allow-truncation"], capsys)
    assert not any("truncated" in r for r in json.loads(out)["reasons"])
    # with room for every product the same scenario passes outright
    p.write_text(p.read_text().replace("max_degree: 3", "max_degree: 4"))
    assert run(["flow", p], capsys)[0] == 0


def test_evolve_writes_the_trajectory(capsys, tmp_path):
    p = tmp_path / "e.yaml"
    p.write_text("fixture: dim4-gauge\nscalar: f64\nhbar_order: 2\nsteps: 10\nflow_steps: 0\n"
                 "allow_truncation: true\n"
                 "interaction:\n  - {coeff: '1/2', exponents: [0, 1, 1, 1], hbar_power: 0}\n")
    code, out, _ = run(["evolve", p, "--output", "csv"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "hbar_order", "monomial", "coefficient"]
    assert ["0.0", "0", "x1*x2*x3", "0.5"] in rows
    assert float(rows[-1][0]) == pytest.approx(1.0)


def test_bad_interaction_literal(capsys, tmp_path):
    p = tmp_path / "e.yaml"
    p.write_text("fixture: dim4-nilpotent\nchecks: [perturbation]\n"
                 "interaction:\n  - {coeff: '1', exponents: [1, 1]}\n")
    assert run(["check", p], capsys)[0] == 2


def test_sample_verb(capsys, tmp_path):
    code, out, _ = run(["sample", "--dim", "2", "--seed", "0"], capsys)
    assert code == 0
    assert out == (FIXTURE_DIR / "gl11_dim2.json").read_text()
    code, _, _ = run(["sample", "--dim", "4", "--seed", "5", "--nilpotent",
                      "-o", tmp_path / "s.json"], capsys)
    assert code == 0
    code, _, _ = run(["check", "--fixture", tmp_path / "s.json", "--checks", "gl11"], capsys)
    assert code == 0
    code, _, err = run(["sample", "--dim", "3"], capsys)
    assert code == 2
    assert "odd" in err or "not supported" in err


@pytest.mark.skipif(shutil.which("bvflow") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["bvflow", "check", str(SCENARIOS / "minimal.yaml")],
                       capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run([sys.executable, "-m", "bvflow.cli", "--version"],
                       capture_output=True, text=True)
    assert r.stdout.startswith("bvflow ")
