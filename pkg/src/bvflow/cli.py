"""bvflow command line: run check suites from a scenario file and emit a report.

    bvflow check SCENARIO        run the scenario's suites (default: all)
    bvflow flow SCENARIO         free-flow and extended suites
    bvflow evolve SCENARIO       perturbation suite; --output csv prints the trajectory
    bvflow reconstruct SCENARIO  flow reconstruction suite
    bvflow sample --dim 4        write a seeded gl(1|1) fixture

Exit codes: 0 all checks pass, 1 a check failed (or a result was truncated without
allow_truncation), 2 the scenario or fixture could not be parsed or validated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction

from . import __version__
from .algebra import HbarSeries
from .gl11 import FixtureError, dump_fixture, sample_gl11
from .linear import RATIONAL, F64
from .parallel import ordered_map
from .scenario import ScenarioError, build_model, load_scenario, parse_scenario
from .suites import (SUITES, exp_model, identity_suite, gl11_suite, free_flow_suite,
                     extended_suite, reconstruct_suite, perturbation_suite)

VERB_SUITES = {
    "flow": ["free-flow", "extended"],
    "evolve": ["perturbation"],
    "reconstruct": ["reconstruct"],
}


# -- running -----------------------------------------------------------------------------------

def _suite_model(name, model):
    """(model to use, promotion note) for a suite."""
    if name in ("identities", "gl11"):
        return model, None
    if name == "perturbation" and model.basis.mode == RATIONAL:
        # RK4 on the nonlinear RGE has no exact fixed point; integrate in floats
        return model.with_mode(F64), "f64 (integrated trajectory)"
    m, promo = exp_model(model)
    return m, (f"{promo} (H not nilpotent)" if promo else None)


def run_suite(name, sc, model, trajectory=None):
    m, promo = _suite_model(name, model)
    mode = m.basis.mode
    tol = sc.tolerance_value()
    grid = sc.grid_values(mode)
    fd = Fraction(sc.fd_step) if mode == RATIONAL else float(Fraction(sc.fd_step))
    s, t = (sc.scalar_value(x, mode) for x in sc.span)
    if name == "identities":
        res = identity_suite(bases=[m.basis], seed=sc.seed, samples=sc.samples,
                             max_poly_degree=sc.identity_max_degree, tolerance=tol)
    elif name == "gl11":
        res = gl11_suite(m.structure, tol)
    elif name == "free-flow":
        res = free_flow_suite(m, grid, fd, sc.max_degree, tolerance=tol)
    elif name == "extended":
        res = extended_suite(m, grid, fd, tolerance=tol)
    elif name == "reconstruct":
        res = reconstruct_suite(m, s, t, sc.steps or 100, sc.max_degree, tolerance=tol)
    elif name == "perturbation":
        inter = None
        if sc.interaction is not None:
            try:
                inter = HbarSeries.from_literal(m.basis, sc.interaction, sc.hbar_order)
            except (ValueError, TypeError, KeyError) as exc:
                raise ScenarioError(f"bad interaction literal: {exc}") from None
        res = perturbation_suite(m, inter, sc.seed, s, t, sc.steps or 200, sc.hbar_order,
                                 sc.max_degree, flow_steps=sc.flow_steps, trajectory=trajectory,
                                 tolerance=tol, complete=sc.complete)
    else:  # pragma: no cover - guarded by the scenario parser
        raise ScenarioError(f"unknown suite {name!r}")
    res["mode"] = mode
    if promo:
        res["promoted"] = promo
    return res


def _records(checks):
    out = []
    for name in sorted(checks):
        rec = {"name": name}
        rec.update(checks[name])
        out.append(rec)
    return out


def build_report(sc, names, timings=False, trajectory=None):
    """Run the suites and assemble the report dict (order fixed by suite name)."""
    model = build_model(sc)
    names = sorted(set(names), key=SUITES.index)

    def job(name):
        start = time.perf_counter()
        res = run_suite(name, sc, model, trajectory if name == "perturbation" else None)
        res["wall_time"] = time.perf_counter() - start
        return res

    results = dict(zip(names, ordered_map(job, names)))
    suites = {}
    reasons = []
    for name in sorted(results):
        res = results[name]
        entry = {"pass": res["pass"], "mode": res["mode"], "checks": _records(res["checks"])}
        if "promoted" in res:
            entry["promoted"] = res["promoted"]
        info = {k: v for k, v in res.items()
                if k not in ("checks", "pass", "mode", "promoted", "wall_time")}
        if info:
            entry["info"] = info
        if timings:
            entry["wall_time"] = res["wall_time"]
        suites[name] = entry
        for rec in entry["checks"]:
            if not rec["pass"] and not rec.get("advisory"):
                reasons.append(f"{name}.{rec['name']}: residual {rec['residual']!r} > "
                               f"tolerance {rec['tolerance']!r}")
            elif rec["truncated"] and not rec.get("advisory") and not sc.allow_truncation:
                reasons.append(f"{name}.{rec['name']}: result truncated at max_degree "
                               f"{sc.max_degree} (set allow_truncation to accept)")
    report = {
        "tool": "bvflow",
        "version": __version__,
        "scenario": sc.to_dict(),
        "environment": {"mode": sc.scalar, "seed": sc.seed, "suites": names},
        "suites": suites,
        "pass": not reasons,
        "exit_code": 0 if not reasons else 1,
        "reasons": reasons,
    }
    return report


def dump_report(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def checks_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "check", "residual", "tolerance", "pass", "truncated"])
    for suite in sorted(report["suites"]):
        for rec in report["suites"][suite]["checks"]:
            w.writerow([suite, rec["name"], repr(rec["residual"]), repr(rec["tolerance"]),
                        rec["pass"], rec["truncated"]])
    return buf.getvalue()


def monomial_name(mono):
    parts = [f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(mono) if e]
    return "*".join(parts) if parts else "1"


def trajectory_csv(trajectory):
    """Rows (t, hbar_order, monomial, coefficient) for every trajectory point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "hbar_order", "monomial", "coefficient"])
    for tau, term in trajectory:
        for g, coeff in enumerate(term.series.coeffs):
            for mono, c in coeff.sorted_terms():
                w.writerow([repr(float(tau)), g, monomial_name(mono), repr(float(c))])
    return buf.getvalue()


# -- argument handling ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("scenario", nargs="?", help="scenario YAML/JSON (a previous report also works)")
    p.add_argument("--scalar", choices=["rational", "f64"])
    p.add_argument("--max-degree", type=int)
    p.add_argument("--hbar-order", type=int)
    p.add_argument("--grid", help="comma-separated scale points, e.g. 0,1/4,1/2")
    p.add_argument("--fd-step")
    p.add_argument("--steps", type=int)
    p.add_argument("--tolerance")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", choices=["json", "csv"])
    p.add_argument("--fixture", help="shipped fixture name or path to a fixture JSON")
    p.add_argument("--checks", help="comma-separated suites: " + ",".join(SUITES))
    p.add_argument("--allow-truncation", action="store_true", default=None)
    p.add_argument("--report", help="also write the JSON report to this file")
    p.add_argument("--csv", dest="csv_path", help="also write CSV (trajectory or checks) here")
    p.add_argument("--timings", action="store_true",
                   help="add per-suite wall_time (breaks byte-identical reports)")


def make_parser():
    ap = argparse.ArgumentParser(prog="bvflow", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"bvflow {__version__}")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, text in [("check", "run the scenario's suites"),
                       ("flow", "free-flow and extended suites"),
                       ("evolve", "perturbation suite with RGE trajectory"),
                       ("reconstruct", "flow reconstruction suite")]:
        _common(sub.add_parser(verb, help=text))
    sp = sub.add_parser("sample", help="write a seeded gl(1|1) fixture")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    nil = sp.add_mutually_exclusive_group()
    nil.add_argument("--nilpotent", dest="nilpotent", action="store_true", default=None)
    nil.add_argument("--non-nilpotent", dest="nilpotent", action="store_false")
    sp.add_argument("--degrees", help="comma-separated coordinate degrees")
    sp.add_argument("-o", "--out", help="output path (default: stdout)")
    return ap


def scenario_from_args(args):
    if args.scenario:
        sc = load_scenario(args.scenario)
        data = sc.to_dict()
        base = sc.base_dir
    else:
        data, base = {}, "."
    overrides = {
        "scalar": args.scalar, "max_degree": args.max_degree, "hbar_order": args.hbar_order,
        "fd_step": args.fd_step, "steps": args.steps, "tolerance": args.tolerance,
        "seed": args.seed, "output": args.output, "allow_truncation": args.allow_truncation,
    }
    if args.grid:
        overrides["grid"] = [g.strip() for g in args.grid.split(",") if g.strip()]
    if args.checks:
        overrides["checks"] = [c.strip() for c in args.checks.split(",") if c.strip()]
    if args.fixture:
        overrides["fixture"] = args.fixture
        data["sample"] = data["zero_structure"] = None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return parse_scenario(data, base)


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def cmd_sample(args):
    degrees = None
    if args.degrees:
        degrees = tuple(int(d) for d in args.degrees.split(","))
    try:
        s = sample_gl11(args.dim, args.seed, nilpotent=args.nilpotent, degrees=degrees)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = dump_fixture(s)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    args = make_parser().parse_args(argv)
    if args.verb == "sample":
        return cmd_sample(args)
    try:
        sc = scenario_from_args(args)
        names = VERB_SUITES.get(args.verb, sc.checks)
        trajectory = [] if "perturbation" in names else None
        report = build_report(sc, names, timings=args.timings, trajectory=trajectory)
    except (ScenarioError, FixtureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = dump_report(report)
    if args.report:
        _write(args.report, text)
    traj_text = trajectory_csv(trajectory) if trajectory else None
    csv_text = traj_text if traj_text is not None else checks_csv(report)
    if args.csv_path:
        _write(args.csv_path, csv_text)
    sys.stdout.write(csv_text if sc.output == "csv" else text)
    for reason in report["reasons"]:
        print(f"FAIL {reason}", file=sys.stderr)
    return report["exit_code"]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
