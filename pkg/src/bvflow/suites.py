"""Named check suites.  Each returns {"checks": {name: record}, "pass": bool, ...}.

Records come from ``flows.check_record``.  Tolerances default to exact zero in rational
mode; float defaults are 1e-10 for static identities, 1e-7 for finite differences and
1e-6 for integrated trajectories.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .algebra import GradedPoly, monomials, random_poly, DEFAULT_MAX_DEGREE, DEFAULT_HBAR_ORDER
from .bv import (laplacian, bracket, quadratic_form, pairing_derivation, mixed_bracket,
                 ad_type_residual, default_probes, qme_residual, DeformedLaplacian)
from .flows import check_record, suite_passes, flow_suite, reconstruct_flow
from .gl11 import (validate_gl11, free_action, free_laplacian, free_family, free_flow,
                   free_rge_residual, free_generator, extended_me_residuals, extended_family,
                   soul_from_flow, polchinski_residual, odd_deformer)
from .linear import (RATIONAL, F64, GradedBasis, Endomorphism, graded_trace, max_abs,
                     random_endomorphism, antisymmetric_part, symmetric_part, is_nilpotent)
from .parallel import ordered_map

IDENTITY_LAYOUTS = (
    (-1, 0),
    (-1, -1, 0, 0),
    (-2, -1, 0, 1),
    (-1, -1, -1, 0, 0, 0),
    (-2, -1, -1, 0, 0, 1),
)

STATIC_TOL = 1e-10
FD_TOL = 1e-7
TRAJECTORY_TOL = 1e-6
PARTNER_TOL = 1e-8

EXP_SUITES = ("free-flow", "extended", "perturbation", "reconstruct")


def _tol(mode, kind="static"):
    if mode == RATIONAL:
        return 0.0
    return {"static": STATIC_TOL, "fd": FD_TOL, "trajectory": TRAJECTORY_TOL,
            "partner": PARTNER_TOL}[kind]


def _sg(k):
    return -1 if k % 2 else 1


def _result(checks, **extra):
    out = {"checks": checks, "pass": suite_passes(checks)}
    out.update(extra)
    return out


def _prefixed(prefix, checks):
    return {f"{prefix}.{k}": v for k, v in checks.items()}


def exp_model(m):
    """The model on which exponential-dependent suites run, and the promotion note.

    Rational mode needs e^{tH} as a finite sum, so non-nilpotent H is promoted to f64.
    """
    if m.basis.mode == RATIONAL and not is_nilpotent(m.H):
        return m.with_mode(F64), F64
    return m, None


# -- BV identities -----------------------------------------------------------------------------

def _nonzero_anti(basis, degrees, rng, tries=20):
    for _ in range(tries):
        p = rng.choice(degrees)
        A = antisymmetric_part(random_endomorphism(basis, p, rng))
        if not A.is_zero():
            return A
    return antisymmetric_part(random_endomorphism(basis, 0, rng))


def _identity_sample(basis, rng, max_poly_degree, n_terms):
    """Residual norms of every identity on one random instance (A even)."""
    A = _nonzero_anti(basis, (-2, 0, 0, 2), rng)
    B = _nonzero_anti(basis, (-1, 0, 1), rng)
    pa, pb = A.degree, B.degree
    u, v, w = [random_poly(basis, rng, rng.randint(-2, 1), max_poly_degree, n_terms)
               for _ in range(3)]
    x = random_poly(basis, rng, -1, min(max_poly_degree, 3), 2)
    du, dv, dw = u.degree, v.degree, w.degree

    def L(f):
        return laplacian(f, A)

    def br(f, g):
        return bracket(f, g, A)

    a1 = pa + 1
    out = {}
    out["seven_term"] = (L(u * v * w) - (
        -(L(u) * v * w) - (u * L(v) * w).scale(_sg(a1 * du))
        - (u * v * L(w)).scale(_sg(a1 * (du + dv))) + L(u * v) * w
        + (v * L(u * w)).scale(_sg((du + pa + 1) * dv)) + (u * L(v * w)).scale(_sg(a1 * du)))).norm()
    out["unit"] = L(GradedPoly.one(basis)).norm()
    out["nilpotency"] = L(L(u)).norm()
    out["laplacians_commute"] = (L(laplacian(u, B))
                                 - laplacian(L(u), B).scale(_sg((pa + 1) * (pb + 1)))).norm()
    out["bracket_from_laplacian"] = (br(u, v) - (L(u * v) - L(u) * v
                                                 - (u * L(v)).scale(_sg(a1 * du))
                                                 ).scale(_sg(a1 * du))).norm()
    out["antisymmetry"] = (br(u, v) + br(v, u).scale(_sg(pa * (du + dv) + (du + 1) * (dv + 1)))).norm()
    out["leibniz"] = (br(u, v * w) - br(u, v) * w
                      - (v * br(u, w)).scale(_sg((du + pa + 1) * dv))).norm()
    out["jacobi"] = (br(u, br(v, w)).scale(_sg((dw + 1) * (du + 1)))
                     + br(v, br(w, u)).scale(_sg((du + 1) * (dv + 1)))
                     + br(w, br(u, v)).scale(_sg((dv + 1) * (dw + 1)))).norm()
    out["mixed_bracket"] = (L(bracket(u, v, B)) - bracket(L(u), v, B)
                            - bracket(u, L(v), B).scale(_sg((pa + 1) * (pb + du + 1)))
                            - mixed_bracket(u, v, A, B)).norm()
    AB = A @ B + B @ A

    def D(f):
        return pairing_derivation(B, f)

    out["derivation_commutator"] = (D(L(u)) - L(D(u)).scale(_sg(pb * (pa + 1)))
                                    - laplacian(u, AB).scale(_sg(1 + pb))).norm()
    s = _sg(pb * (du + 1))
    out["derivation_bracket"] = (D(br(u, v)) - br(D(u), v) - br(u, D(v)).scale(s)
                                 + bracket(u, v, AB).scale(s)).norm()
    out["ad_type"] = ad_type_residual(x, A, [u, v, w]) if x else 0.0
    return out


def _quadratic_sample(basis, rng):
    """Quadratic-form identities for antisymmetric A and symmetric B, C."""
    A = _nonzero_anti(basis, (-1, 0, 1), rng)
    B, C = [symmetric_part(random_endomorphism(basis, rng.choice((-1, 0, 1)), rng))
            for _ in range(2)]
    one = GradedPoly.one(basis)
    qB, qC = quadratic_form(B), quadratic_form(C)
    ABs = A @ B - B @ A if (A.degree * B.degree) % 2 else A @ B + B @ A
    return {
        "quadratic_laplacian": (laplacian(qB, A) - one.scale(graded_trace(A @ B))).norm(),
        "quadratic_bracket": (bracket(qB, qC, A) - quadratic_form(B @ A @ C).scale(4)).norm(),
        "quadratic_derivation": (pairing_derivation(A, qB) - quadratic_form(ABs)).norm(),
    }


def identity_suite(layouts=IDENTITY_LAYOUTS, seed=0, samples=200, max_poly_degree=5,
                   mode=RATIONAL, n_terms=3, tolerance=None, bases=None):
    """BV-algebra identities on ``samples`` random instances cycling through the layouts
    (or explicit bases).  Every identity is evaluated on every sample."""
    bases = list(bases) if bases is not None else [GradedBasis.standard(d, mode) for d in layouts]
    tol = _tol(bases[0].mode) if tolerance is None else tolerance
    rngs = [random.Random(f"{seed}:{k}") for k in range(samples)]

    def one(k):
        b = bases[k % len(bases)]
        res = _identity_sample(b, rngs[k], max_poly_degree, n_terms)
        res.update(_quadratic_sample(b, rngs[k]))
        return res

    worst = {}
    for res in ordered_map(one, range(samples)):
        for name, r in res.items():
            worst[name] = max(worst.get(name, 0.0), float(r))
    checks = {name: check_record(r, tol, samples=samples) for name, r in sorted(worst.items())}
    return _result(checks, samples=samples, dims=sorted({b.dim for b in bases}))


# -- gl(1|1) ---------------------------------------------------------------------------------

def gl11_suite(structure, tolerance=None):
    rep = validate_gl11(structure, tol=tolerance)
    checks = {name: check_record(c["residual"], c["tolerance"])
              for name, c in rep["checks"].items()}
    return _result(checks)


# -- free model ------------------------------------------------------------------------------

def conjugation_laplacian_residual(m, t, max_poly_degree=4, origin=0):
    """chi_{t,o} Delta_E chi_{o,t} f - Delta_{e^{-tH}} f over all monomials of degree <= 4."""
    b = m.basis
    fwd = free_flow(m, origin, t)
    back = free_flow(m, t, origin)
    E = DeformedLaplacian.canonical(b)
    Lt = free_laplacian(m, t)
    worst = 0.0
    for mono in monomials(b, max_poly_degree):
        f = GradedPoly(b, {mono: b.scalar(1)})
        worst = max(worst, (fwd.apply(E(back.apply(f))) - Lt(f)).norm())
    return worst


def power_law_residual(m, s, n_max=4):
    """(<x,H ad x>)^n <x, Q e^{sH} x> - <x, (2H)^n Q e^{sH} x>, n <= n_max."""
    b = m.basis
    M = m.Q @ m.exp_H(b.scalar(s))
    f = quadratic_form(M)
    twoH = m.H * b.scalar(2)
    worst = (f - quadratic_form(M)).norm()
    for _ in range(n_max):
        f = pairing_derivation(m.H, f)
        M = twoH @ M
        worst = max(worst, (f - quadratic_form(M)).norm())
    return worst


def free_flow_suite(m, grid, fd_step=1e-4, max_degree=DEFAULT_MAX_DEGREE, probes=None,
                    tolerance=None):
    mode = m.basis.mode
    tol = _tol(mode) if tolerance is None else tolerance
    fd_tol = _tol(mode, "fd") if tolerance is None else max(tolerance, _tol(mode, "fd"))
    checks = {}
    checks["qme"] = check_record(max(qme_residual(free_action(m, t), free_laplacian(m, t)).norm()
                                     for t in grid), tol, points=len(grid))
    checks["rge_exact"] = check_record(max(free_rge_residual(m, t) for t in grid), tol)
    if mode != RATIONAL:
        checks["rge_fd"] = check_record(max(free_rge_residual(m, t, fd_step) for t in grid), fd_tol)
    checks["conjugation_laplacian"] = check_record(
        max(conjugation_laplacian_residual(m, t) for t in grid), tol)
    checks["power_law"] = check_record(max(power_law_residual(m, s) for s in grid), tol)
    s = m.structure
    checks["anticommutator_identity"] = check_record(
        max_abs((s.anticommutator() + (s.Q @ s.Qbar) * m.basis.scalar(2) - s.H).entries), tol)
    fam = free_family(m, grid, fd_step, max_degree)
    flow = flow_suite(fam, probes, tolerance=tolerance)
    checks.update(_prefixed("flow", flow["checks"]))
    return _result(checks)


# -- extended model --------------------------------------------------------------------------

def theta_evolution_residual(m, t, probes):
    """Delta_{Qbar e^{-tH}} - 1/2 (D_Qbar Delta_t + Delta_t D_Qbar) on the probes: the odd
    scale component of the flow's evolution equation."""
    b = m.basis
    soul = DeformedLaplacian(odd_deformer(m, t))
    Lt = free_laplacian(m, t)
    half = b.scalar(Fraction(1, 2))
    worst = 0.0
    for f in probes:
        rhs = (pairing_derivation(m.Qbar, Lt(f)) + Lt(pairing_derivation(m.Qbar, f))).scale(half)
        worst = max(worst, (soul(f) - rhs).norm())
    return worst


def extended_suite(m, grid, fd_step=1e-4, probes=None, tolerance=None):
    mode = m.basis.mode
    tol = _tol(mode) if tolerance is None else tolerance
    probes = probes if probes is not None else default_probes(m.basis, 3)
    checks = {}
    me = [extended_me_residuals(m, t) for t in grid]
    checks["me_body"] = check_record(max(r[0] for r in me), tol)
    checks["me_soul"] = check_record(max(r[1] for r in me), tol)
    checks["soul_from_flow"] = check_record(
        max((soul_from_flow(m, s) - extended_family(m, s)[2].soul).norm() for s in grid), tol)
    checks["theta_evolution"] = check_record(
        max(theta_evolution_residual(m, t, probes) for t in grid), tol)
    checks["polchinski_exact"] = check_record(max(polchinski_residual(m, t) for t in grid), tol)
    h = Fraction(fd_step).limit_denominator(10 ** 9) if mode == RATIONAL else float(fd_step)
    r1 = max(polchinski_residual(m, t, h) for t in grid)
    r2 = max(polchinski_residual(m, t, h / 2) for t in grid)
    checks["polchinski_fd"] = check_record(r1, FD_TOL, step=float(h))
    checks["polchinski_fd_half"] = check_record(r2, FD_TOL, step=float(h) / 2)
    checks["polchinski_order"] = _order_record(r1, r2, 4.0, 1.0,
                                               _roundoff_floor(m, grid, h))
    return _result(checks)


def _roundoff_floor(m, grid, h):
    """Size below which a central difference of S^0 is dominated by rounding."""
    if m.basis.mode == RATIONAL:
        return 0.0
    scale = max(free_action(m, t).norm() for t in grid)
    return 50 * 2.2e-16 * max(scale, 1.0) / float(h)


def _order_record(coarse, fine, expected, spread, floor=0.0, **extra):
    """Convergence-ratio check coarse/fine ~ expected +- spread.

    Exact agreement (both zero) passes; a coarse error already under the rounding floor
    makes the ratio meaningless and the record advisory.
    """
    coarse, fine = float(coarse), float(fine)
    ratio = coarse / fine if fine > 0 else None
    rec = {"ratio": ratio, "tolerance": float(spread), "truncated": False}
    rec.update(extra)
    if coarse == 0 and fine == 0:
        rec.update(residual=0.0, status="exact", **{"pass": True})
    elif coarse <= floor:
        rec.update(residual=0.0, status="roundoff-limited", advisory=True, **{"pass": True})
    else:
        dev = abs(ratio - expected) if ratio is not None else float("inf")
        rec.update(residual=dev, status="measured", **{"pass": dev <= spread})
    return rec


# -- reconstruction --------------------------------------------------------------------------

def free_reconstruction_error(m, s, t, steps, max_degree=DEFAULT_MAX_DEGREE):
    """Max distance between reconstructed and closed-form chi^0_{t,s} coordinate images."""
    flow = reconstruct_flow(free_generator(m), lambda tau: free_laplacian(m, tau), s, t, steps,
                            max_degree)
    exact = free_flow(m, s, t, max_degree)
    img = max((a - b).norm() for a, b in zip(flow.images, exact.images))
    return max(img, flow.log_jacobian.norm())


ORDER_FLOOR = 1e-11


def reconstruct_suite(m, s=0, t=1, steps=100, max_degree=DEFAULT_MAX_DEGREE, tolerance=None):
    """Free generator vs closed form at ``steps``; the RK4 order is read off the finest
    halving pair (n, 2n) with n a power of two, 2n <= steps, whose errors stay above
    rounding."""
    mode = m.basis.mode
    tol = (1e-8 if mode != RATIONAL else 0.0) if tolerance is None else tolerance
    b = m.basis
    s, t = b.scalar(s), b.scalar(t)
    ladder = [2 ** k for k in range(1, 12) if 2 ** k <= steps] + [steps]
    errs = dict(zip(ladder, ordered_map(
        lambda n: free_reconstruction_error(m, s, t, n, max_degree), ladder)))
    checks = {"free_generator": check_record(errs[steps], tol, steps=steps)}
    pairs = [(n, 2 * n) for n in ladder if 2 * n in errs]
    usable = [p for p in pairs if errs[p[1]] > ORDER_FLOOR]
    n, n2 = usable[-1] if usable else pairs[-1]
    floor = ORDER_FLOOR if mode != RATIONAL else 0.0
    checks["rk4_order"] = _order_record(errs[n], errs[n2], 16.0, 3.0,
                                        floor if not usable else 0.0, steps=[n, n2])
    return _result(checks, errors={str(k): float(v) for k, v in errs.items()})


# -- perturbation ----------------------------------------------------------------------------

def perturbation_suite(m, interaction=None, seed=0, s=0, t=1, steps=200,
                       order=DEFAULT_HBAR_ORDER, max_degree=DEFAULT_MAX_DEGREE,
                       flow_span=0.5, flow_steps=20, trajectory=None, tolerance=None,
                       complete=True):
    """Interaction master equation along the RGE trajectory, partner equations, generator
    hypotheses and transport of S^0 + I by the reconstructed flow.

    ``interaction`` is an hbar-series (or InteractionTerm) at scale s; by default a seeded
    cubic is completed by ``seeded_interaction``.  With ``complete`` an interaction given
    only at hbar^0 gets its higher orders from ``complete_interaction``.  ``trajectory``
    (a list) receives the (t, InteractionTerm) points of the evolution.
    """
    from . import perturbation as P

    b = m.basis
    mode = b.mode
    tol = _tol(mode) if tolerance is None else tolerance
    traj_tol = _tol(mode, "trajectory") if tolerance is None else tolerance
    partner_tol = _tol(mode, "partner") if tolerance is None else tolerance
    if interaction is None:
        I, _ = P.seeded_interaction(m, seed, s, order, max_degree)
    elif isinstance(interaction, P.InteractionTerm):
        I = interaction
    else:
        I = P.InteractionTerm(interaction, b.scalar(s))
    if complete and interaction is not None and not any(I.series.coeffs[1:]):
        I, _ = P.complete_interaction(I.series[0], m, I.scale, I.order, max_degree)
    D = max_degree
    checks = {}
    checks["me_start"] = check_record(P.interaction_me_residual(I, m, max_degree=D).norm(), tol,
                                      truncated=True)
    diff = P.full_me_residual(I, m, max_degree=D) - P.interaction_me_residual(I, m, max_degree=D)
    checks["full_vs_interaction"] = check_record(diff.map(lambda c: c.drop_constant()).norm(),
                                                 tol, truncated=True)
    checks["h_op_routes"] = check_record(
        (P.h_op(m, I.series) - P.h_op_via_anticommutator(m, I.series)).norm(), tol)
    L0 = free_laplacian(m, I.scale)
    checks["free_bracket_is_q"] = check_record(
        (L0.bracket(free_action(m, I.scale), I.series) + P.q_op(m, I.series)).norm(), tol)
    dec = P.rge_structure_report(I, m, D)
    checks["order_decoupling"] = check_record(dec, tol)

    traj = [] if trajectory is None else trajectory
    It = P.rge_evolve(I, m, b.scalar(t), steps, D, trajectory=traj)
    worst = max(P.interaction_me_residual(J, m, max_degree=D).norm() for _, J in traj)
    checks["me_trajectory"] = check_record(worst, traj_tol, truncated=True, steps=steps)

    def partner_checks(J):
        Pt = P.partner_solve(J, m, D)
        full = P.full_partner_residual(Pt, J, m, D).norm()
        return Pt, full

    (P0, full0), (P1, full1) = ordered_map(partner_checks, [I, It])
    checks["partner_residual"] = check_record(max(P0.residual, P1.residual), partner_tol,
                                              advisory=True, truncated=True)
    solved = max(P0.residual, P1.residual) <= partner_tol
    checks["full_partner_equation"] = check_record(max(full0, full1) if solved else 0.0,
                                                   partner_tol, truncated=True,
                                                   applicable=bool(solved))
    checks["transport_infinitesimal"] = check_record(
        max(P.transport_residual(I, P0, m, max_degree=D).norm(),
            P.transport_residual(It, P1, m, max_degree=D).norm()), partner_tol, truncated=True)
    checks["polchinski_split"] = check_record(
        max(P.polchinski_split_residual(I, m, max_degree=D).norm(),
            P.polchinski_split_residual(It, m, max_degree=D).norm()), partner_tol, truncated=True)
    probes = default_probes(b, 2, (-1, 1))
    hyp = P.generator_hypothesis_residuals(P0, m, probes)
    checks["generator_bracket_law"] = check_record(hyp["bracket_law"], tol)
    checks["generator_evolution"] = check_record(hyp["evolution"], _tol(mode, "fd"))

    if flow_steps:
        try:
            flow, Iu, _ = P.interacting_flow(I, m, I.scale + b.scalar(flow_span), flow_steps, D)
        except ValueError as exc:
            # an hbar-dependent partner has no single coordinate flow to reconstruct
            checks["flow_transport"] = check_record(0.0, traj_tol, advisory=True,
                                                    skipped=str(exc))
        else:
            res = P.flow_transport_residual(flow, I, Iu, m, D).norm()
            checks["flow_transport"] = check_record(res, traj_tol, truncated=True,
                                                    steps=flow_steps, span=float(flow_span))
    return _result(checks, interaction=I.series.to_literal(), final_scale=float(It.scale))


def interaction_from_literal(basis, items, order=DEFAULT_HBAR_ORDER):
    from .algebra import HbarSeries
    return HbarSeries.from_literal(basis, items, order)


SUITES = ("identities", "gl11", "free-flow", "extended", "perturbation", "reconstruct")
