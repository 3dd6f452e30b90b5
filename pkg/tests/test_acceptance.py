"""Acceptance criteria 1-8, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per criterion
(the lines are also written when output is captured).
"""
import json
import time
from fractions import Fraction
from pathlib import Path

import pytest

from bvflow.bv import CONVENTION, qme_residual
from bvflow.cli import main
from bvflow.flows import flow_suite
from bvflow.gl11 import free_action, free_family, free_laplacian, shipped_fixture, structure_from_dict
from bvflow.gl11 import FIXTURE_DIR, validate_gl11
from bvflow.linear import F64
from bvflow.perturbation import full_me_residual, interaction_me_residual, seeded_interaction
from bvflow.signs import search
from bvflow.suites import (conjugation_laplacian_residual, extended_suite, identity_suite,
                           perturbation_suite, reconstruct_suite)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
GRID = [Fraction(k, 4) for k in range(5)]
FGRID = [k / 4 for k in range(5)]


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail
    return report


def worst(res, keys=None):
    checks = res["checks"]
    keys = keys or [k for k, c in checks.items() if not c.get("advisory")]
    return max(checks[k]["residual"] for k in keys)


def failed(res):
    return sorted(k for k, c in res["checks"].items() if not c["pass"] and not c.get("advisory"))


def test_1_sign_pinning(verdict):
    accepted, tried, secs = search()
    ok = accepted == [CONVENTION] and secs < 10
    verdict(1, ok, f"{len(accepted)} of {tried} sign assignments accepted in {secs:.2f}s")


def test_2_bv_axioms(verdict):
    start = time.perf_counter()
    res = identity_suite(samples=200, max_poly_degree=5)
    secs = time.perf_counter() - start
    ok = res["pass"] and worst(res) == 0 and secs < 60 and max(res["dims"]) <= 6
    verdict(2, ok, f"{len(res['checks'])} identities x 200 samples, max residual "
                   f"{worst(res)}, {secs:.1f}s")


def test_3_gl11_fixtures(verdict):
    names = ["dim2", "dim4-nilpotent", "dim4", "dim4-gauge"]
    reps = [validate_gl11(shipped_fixture(n).structure) for n in names]
    exact = all(r["pass"] and all(c["residual"] == 0 for c in r["checks"].values())
                for r in reps)
    controls = []
    for name, edit, axiom in [
            ("dim2", lambda d: d.__setitem__("H", [["2", "0"], ["0", "2"]]), "[Q,Qbar]=H"),
            ("dim4-gauge", lambda d: d["Q"][1].__setitem__(2, "1"), "[Q,Q]=0"),
            ("dim4-nilpotent", lambda d: d["Q"][0].__setitem__(3, "1"), "Q~=Q")]:
        data = json.loads((FIXTURE_DIR / f"gl11_{name}.json").read_text())
        edit(data)
        controls.append(axiom in validate_gl11(structure_from_dict(data, validate=False))["failed"])
    verdict(3, exact and all(controls),
            f"{len(names)} fixtures x {len(reps[0]['checks'])} checks exact; "
            f"{sum(controls)}/3 negative controls name the broken axiom")


def test_4_free_basic_model(verdict):
    nil = shipped_fixture("dim4-nilpotent")
    mf = shipped_fixture("dim4", F64)
    qme_exact = max(qme_residual(free_action(nil, t), free_laplacian(nil, t)).norm()
                    for t in GRID)
    qme_float = max(qme_residual(free_action(mf, t), free_laplacian(mf, t)).norm()
                    for t in FGRID)
    flows = [flow_suite(free_family(nil, GRID)),
             flow_suite(free_family(mf, FGRID, 1e-4)),
             flow_suite(free_family(shipped_fixture("dim2", F64), FGRID, 1e-4))]
    flow_res = max(worst(f) for f in flows)
    conj = max(conjugation_laplacian_residual(nil, t, 4) for t in GRID)
    conj_f = max(conjugation_laplacian_residual(mf, t, 4) for t in FGRID)
    ok = (qme_exact == 0 and qme_float <= 1e-10 and flow_res <= 1e-7
          and all(f["pass"] for f in flows) and conj == 0 and conj_f <= 1e-10)
    verdict(4, ok, f"qme exact {qme_exact}, float {qme_float:.1e}; flow_suite max "
                   f"{flow_res:.1e}; conjugation Laplacian {conj} / {conj_f:.1e}")


def test_5_extended_model(verdict):
    exact = extended_suite(shipped_fixture("dim4-nilpotent"), GRID)
    fl = extended_suite(shipped_fixture("dim2", F64), FGRID, fd_step=1e-4)
    c = fl["checks"]
    me_exact = max(exact["checks"][k]["residual"] for k in ("me_body", "me_soul", "soul_from_flow"))
    me_float = max(c[k]["residual"] for k in ("me_body", "me_soul", "soul_from_flow"))
    order = c["polchinski_order"]
    ok = (exact["pass"] and fl["pass"] and me_exact == 0 and me_float <= 1e-10
          and exact["checks"]["polchinski_exact"]["residual"] == 0
          and c["polchinski_fd"]["residual"] <= 1e-7
          and order["status"] == "measured" and abs(order["ratio"] - 4) <= 1)
    verdict(5, ok, f"ME components exact {me_exact}, float {me_float:.1e}; Polchinski fd "
                   f"{c['polchinski_fd']['residual']:.1e} at h=1e-4, ratio h/(h/2) "
                   f"{order['ratio']:.2f}")


def test_6_reconstruction(verdict):
    res = reconstruct_suite(shipped_fixture("dim2", F64), 0.0, 1.0, steps=100)
    err = res["checks"]["free_generator"]["residual"]
    order = res["checks"]["rk4_order"]
    ok = (err <= 1e-8 and order["status"] == "measured"
          and abs(order["ratio"] - 16) <= 3 and res["pass"])
    verdict(6, ok, f"error {err:.1e} at 100 steps; ratio {order['ratio']:.2f} at steps "
                   f"{order['steps']}")


def test_7_perturbation(verdict):
    m = shipped_fixture("dim4-gauge", F64)
    I, start = seeded_interaction(m, seed=0, t=0.0, order=4, max_degree=6)
    assert not I.series[0].is_zero()
    res = perturbation_suite(m, I, s=0.0, t=1.0, steps=200, order=4, max_degree=6)
    c = res["checks"]
    diff = full_me_residual(I, m, max_degree=6) - interaction_me_residual(I, m, max_degree=6)
    cancel = diff.map(lambda p: p.drop_constant()).norm()
    partner = c["partner_residual"]["residual"]
    full = c["full_partner_equation"]
    ok = (start <= 1e-9 and c["me_start"]["residual"] <= 1e-9
          and c["me_trajectory"]["residual"] <= 1e-6 and cancel == 0
          and (not full["applicable"] or full["residual"] <= 1e-8) and not failed(res))
    verdict(7, ok, f"start {c['me_start']['residual']:.1e}, trajectory "
                   f"{c['me_trajectory']['residual']:.1e} over 200 steps; cancellation "
                   f"{cancel}; partner residual {partner:.1e}, full partner "
                   f"{full['residual']:.1e}")


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def test_8_cli_determinism(verdict, capsys, tmp_path, monkeypatch):
    quick = tmp_path / "quick.yaml"
    quick.write_text("fixture: dim4-nilpotent\nscalar: rational\ngrid: ['0', '1/2', '1']\n"
                     "checks: [gl11, extended, reconstruct]\nsteps: 8\n")
    outs = []
    for threads in ("1", "1", "4"):
        monkeypatch.setenv("BVFLOW_THREADS", threads)
        outs.append(run_cli(["check", quick], capsys))
    outs.append(run_cli(["check", SCENARIOS / "minimal.yaml"], capsys))
    outs.append(run_cli(["check", SCENARIOS / "minimal.yaml"], capsys))
    identical = outs[0] == outs[1] == outs[2] and outs[3] == outs[4]
    codes = {name: run_cli(["check", SCENARIOS / name], capsys)[0]
             for name in ("minimal.yaml", "failing.yaml", "corrupt-omega.json")}
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [1, 0]\nunknown_key: 3\n")
    codes["bad.yaml"] = run_cli(["check", bad], capsys)[0]
    expected = {"minimal.yaml": 0, "failing.yaml": 1, "corrupt-omega.json": 2, "bad.yaml": 2}
    ok = identical and outs[0][0] == 0 and codes == expected
    verdict(8, ok, f"byte-identical reports: {identical}; exit codes {codes}")
