"""Perturbative interacting theory over a free gl(1|1) model.

Series are truncated at polynomial degree D.  Since brackets lower the polynomial
degree by two and Delta carries one power of hbar, the hbar^g coefficient of a
truncated evolution is exact only up to degree D - 2g; residuals of the master and
partner equations are therefore compared inside that window (``reliable_part``),
and the reports say so via their ``truncated`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import GradedPoly, HbarSeries, monomials, DEFAULT_MAX_DEGREE, DEFAULT_HBAR_ORDER
from .bv import (DeformedLaplacian, pairing_derivation, qme_residual, laplacian, bracket,
                 coordinate_action)
from .flows import Generator, linear_derivation, scale_derivative
from .gl11 import free_action, free_action_rate, free_laplacian, odd_deformer, extended_family
from .linear import RATIONAL, Endomorphism, graded_trace


def q_op(m, u):
    """Qu = <x, Q (x, u)_E>_E, degree 1."""
    return pairing_derivation(m.Q, u)


def h_op(m, u):
    """Hu = <x, H (x, u)_E>_E, degree 0."""
    return pairing_derivation(m.H, u)


def h_op_via_anticommutator(m, u):
    """Hu computed through H = {Qbar,Q} + 2 Q Qbar."""
    A = m.structure.anticommutator()
    two = m.basis.scalar(2)
    return pairing_derivation(A, u) + pairing_derivation(m.Q @ m.Qbar, u).scale(two)


# -- terms -------------------------------------------------------------------------------

def _as_series(x, order):
    return x if isinstance(x, HbarSeries) else HbarSeries.from_poly(x, order)


@dataclass(frozen=True)
class InteractionTerm:
    """I_t: degree-0 hbar-series, at least cubic at hbar^0."""

    series: HbarSeries
    scale: object = 0
    strict: bool = True

    def __post_init__(self):
        for g, c in enumerate(self.series.coeffs):
            if c and c.degrees() != {0}:
                raise ValueError(f"interaction coefficient hbar^{g} must have degree 0")
        c0 = self.series[0]
        if self.strict and c0 and c0.min_poly_degree() < 3:
            raise ValueError("interaction must be at least cubic in x at hbar^0")

    @property
    def basis(self):
        return self.series.basis

    @property
    def order(self):
        return self.series.order

    @property
    def truncated(self):
        return self.series.truncated

    @classmethod
    def zero(cls, basis, order=DEFAULT_HBAR_ORDER, scale=0):
        return cls(HbarSeries.zero(basis, order), scale)


@dataclass(frozen=True)
class PartnerTerm:
    """I*_t: degree -1 hbar-series with the residual achieved by the solver."""

    series: HbarSeries
    residual: float = 0.0
    scale: object = 0

    def __post_init__(self):
        for g, c in enumerate(self.series.coeffs):
            if c and c.degrees() != {-1}:
                raise ValueError(f"partner coefficient hbar^{g} must have degree -1")


def reliable_part(x, max_degree):
    """Keep the hbar^g coefficients up to polynomial degree max_degree - 2g."""
    x = _as_series(x, DEFAULT_HBAR_ORDER)
    out = []
    for g, c in enumerate(x.coeffs):
        cap = max_degree - 2 * g
        out.append(GradedPoly(x.basis, {k: v for k, v in c.terms.items() if sum(k) <= cap}))
    return HbarSeries(x.basis, out, x.order)


# -- master equation ------------------------------------------------------------------------

def _half(basis):
    return basis.scalar(Fraction(1, 2))


def interaction_me_residual(I, m, t=None, max_degree=None):
    """hbar Delta_{e^{-tH}} I - Q I + 1/2 (I, I)_{e^{-tH}} (hbar-series).

    With ``max_degree`` the result is restricted to the reliable window.
    """
    t = I.scale if t is None else t
    L = free_laplacian(m, t)
    S = I.series
    res = L(S).shift(1) - q_op(m, S) + L.bracket(S, S).scale(_half(m.basis))
    return reliable_part(res, max_degree) if max_degree is not None else res


def full_me_residual(I, m, t=None, max_degree=None):
    """hbar-weighted master equation residual of S^0_t + I_t."""
    t = I.scale if t is None else t
    S = I.series + free_action(m, t)
    res = qme_residual(S, free_laplacian(m, t), hbar_weighted=True)
    return reliable_part(res, max_degree) if max_degree is not None else res


# -- RG evolution ---------------------------------------------------------------------------

def rge_rhs(S, m, t, max_degree=DEFAULT_MAX_DEGREE):
    """hbar Delta_{Qbar e^{-tH}} I + 1/2 (I, I)_{Qbar e^{-tH}}, truncated at max_degree."""
    A = odd_deformer(m, t)
    out = laplacian(S, A, check=False).shift(1) + \
        bracket(S, S, A, check=False, max_degree=max_degree).scale(_half(m.basis))
    return out.truncate(max_degree)


def rge_evolve(I, m, t, steps, max_degree=DEFAULT_MAX_DEGREE, trajectory=None):
    """Classical RK4 for dI/dt = hbar Delta_{Qbar e^{-tH}} I + 1/2 (I,I)_{Qbar e^{-tH}} from
    I.scale to t.  ``trajectory`` (a list) receives (t, InteractionTerm) at every step."""
    if steps < 2:
        raise ValueError("rge_evolve needs at least 2 steps")
    b = m.basis
    sc = b.scalar
    s = sc(I.scale)
    t = sc(t)
    dt = (t - s) / steps
    two, six = sc(2), sc(6)
    y = I.series.truncate(max_degree)
    tau = s
    if trajectory is not None:
        trajectory.append((tau, InteractionTerm(y, tau, I.strict)))
    for _ in range(steps):
        k1 = rge_rhs(y, m, tau, max_degree)
        k2 = rge_rhs(y + k1.scale(dt / two), m, tau + dt / two, max_degree)
        k3 = rge_rhs(y + k2.scale(dt / two), m, tau + dt / two, max_degree)
        k4 = rge_rhs(y + k3.scale(dt), m, tau + dt, max_degree)
        y = y + (k1 + k2.scale(two) + k3.scale(two) + k4).scale(dt / six)
        tau = tau + dt
        if trajectory is not None:
            trajectory.append((tau, InteractionTerm(y, tau, I.strict)))
    return InteractionTerm(y, t, I.strict)


# -- linear solves ----------------------------------------------------------------------------

# Relative singular-value cutoff for float solves.  Systems assembled along a numerically
# integrated trajectory carry O(1e-9) perturbations of structural zeros; without a cutoff
# those directions are inverted and the solution blows up.
LSTSQ_RCOND = 1e-8


def _solve(columns, rhs, mode):
    """Least-squares coefficients c with sum c_k columns[k] ~ rhs (dict-vectors).

    Rational mode solves the normal equations exactly; float mode uses numpy lstsq with
    the LSTSQ_RCOND cutoff.
    Returns (coefficients, residual max-norm).
    """
    keys = sorted({k for col in columns for k in col} | set(rhs))
    idx = {k: i for i, k in enumerate(keys)}
    n, p = len(keys), len(columns)
    if p == 0:
        return [], max((abs(float(v)) for v in rhs.values()), default=0.0)
    if mode == RATIONAL:
        A = [[Fraction(0)] * p for _ in range(n)]
        for j, col in enumerate(columns):
            for k, v in col.items():
                A[idx[k]][j] = Fraction(v)
        b = [Fraction(0)] * n
        for k, v in rhs.items():
            b[idx[k]] = Fraction(v)
        x = _rational_lstsq(A, b)
        res = max((abs(sum(A[i][j] * x[j] for j in range(p)) - b[i]) for i in range(n)),
                  default=Fraction(0))
        return x, res
    A = np.zeros((n, p))
    for j, col in enumerate(columns):
        for k, v in col.items():
            A[idx[k], j] = float(v)
    b = np.zeros(n)
    for k, v in rhs.items():
        b[idx[k]] = float(v)
    x, *_ = np.linalg.lstsq(A, b, rcond=LSTSQ_RCOND)
    res = float(np.max(np.abs(A @ x - b))) if n else 0.0
    return list(x), res


def _rational_lstsq(A, b):
    """A particular solution of A^T A x = A^T b by exact Gauss-Jordan (free variables = 0)."""
    n = len(A)
    p = len(A[0]) if n else 0
    M = [[sum(A[k][i] * A[k][j] for k in range(n)) for j in range(p)] +
         [sum(A[k][i] * b[k] for k in range(n))] for i in range(p)]
    row = 0
    pivots = []
    for col in range(p):
        piv = next((r for r in range(row, p) if M[r][col] != 0), None)
        if piv is None:
            continue
        M[row], M[piv] = M[piv], M[row]
        pv = M[row][col]
        M[row] = [v / pv for v in M[row]]
        for r in range(p):
            if r != row and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[row])]
        pivots.append(col)
        row += 1
    x = [Fraction(0)] * p
    for r, col in enumerate(pivots):
        x[col] = M[r][p]
    return x


def _unknowns(basis, degree, max_degree, min_degree):
    return [m for m in monomials(basis, max_degree, min_degree, degree=degree)]


def _series_system(basis, order, max_degree, degree, min_degrees, operator, rhs):
    """Solve operator(X) = rhs in the reliable window for a series X of the given degree.

    ``min_degrees[g]`` is the lowest polynomial degree allowed at hbar^g.
    """
    cols, labels = [], []
    for g in range(order + 1):
        cap = max_degree - 2 * g
        for mono in _unknowns(basis, degree, cap, min_degrees[g]):
            unit = GradedPoly(basis, {mono: basis.scalar(1)})
            img = reliable_part(operator(HbarSeries.from_poly(unit, order, g)), max_degree)
            col = {(h, k): v for h, c in enumerate(img.coeffs) for k, v in c.terms.items()}
            cols.append(col)
            labels.append((g, mono))
    target = reliable_part(rhs, max_degree)
    tvec = {(h, k): v for h, c in enumerate(target.coeffs) for k, v in c.terms.items()}
    x, res = _solve(cols, tvec, basis.mode)
    coeffs = [dict() for _ in range(order + 1)]
    for (g, mono), c in zip(labels, x):
        if c != 0:
            coeffs[g][mono] = basis.scalar(c) if basis.mode == RATIONAL else float(c)
    series = HbarSeries(basis, [GradedPoly(basis, c) for c in coeffs], order)
    return series, float(res)


# -- master equation completion ----------------------------------------------------------

def complete_interaction(I0, m, t=0, order=DEFAULT_HBAR_ORDER, max_degree=DEFAULT_MAX_DEGREE):
    """Extend an hbar^0 interaction I0 (which must solve the hbar^0 master equation)
    to an hbar-series solving the interaction master equation in the reliable window.

    Order g is the linear problem -Q I_g + (I_0, I_g) = -(Delta I_{g-1} + 1/2 sum (I_a, I_b)).
    Returns (InteractionTerm, residual series norm).
    """
    b = m.basis
    L = free_laplacian(m, t)
    coeffs = [I0.truncate(max_degree)]
    half = _half(b)
    for g in range(1, order + 1):
        known = L(coeffs[g - 1])
        for a in range(1, g):
            known = known + L.bracket(coeffs[a], coeffs[g - a]).scale(half)
        rhs = HbarSeries.from_poly(-known, 0)

        def op(X):
            P = X[0]
            return HbarSeries.from_poly(-q_op(m, P) + L.bracket(coeffs[0], P), 0)

        cap = max_degree - 2 * g
        sol, _ = _series_system_window(b, cap, 0, op, rhs, min_degree=1)
        coeffs.append(sol)
    I = InteractionTerm(HbarSeries(b, coeffs, order), t)
    return I, interaction_me_residual(I, m, max_degree=max_degree).norm()


def seeded_interaction(m, seed=0, t=0, order=DEFAULT_HBAR_ORDER, max_degree=DEFAULT_MAX_DEGREE,
                       n_terms=4):
    """A seeded cubic interaction completed to a master-equation solution.

    A random combination of ker Q on degree-0 cubics is drawn; the hbar^0 equation is then solved
    degree by degree (Q I_k = 1/2 sum_{a+c=k+2} (I_a, I_c)) up to max_degree, and
    complete_interaction supplies the higher hbar orders.  Returns (InteractionTerm,
    residual); the cubic may vanish when ker Q has no degree-0 cubics.
    """
    import random
    b = m.basis
    rng = random.Random(seed)
    pool = monomials(b, 3, 3, degree=0)
    kernel = []
    for mono in pool:
        e = GradedPoly(b, {mono: b.scalar(1)})
        k = _clean(e - _fit(m, pool, q_op(m, e)))
        if k:
            kernel.append(k)
    cubic = GradedPoly.zero(b)
    for k in rng.sample(kernel, min(n_terms, len(kernel))):
        cubic = cubic + k.scale(b.scalar(rng.choice((-3, -2, -1, 1, 2, 3))))
    parts = {3: _clean(cubic)}
    L = free_laplacian(m, t)
    half = _half(b)
    for k in range(4, max_degree + 1):
        known = GradedPoly.zero(b)
        for a in range(3, k):
            c = k + 2 - a
            if a <= c and c in parts:
                term = L.bracket(parts[a], parts[c])
                known = known + (term if a < c else term.scale(half))
        parts[k] = _fit(m, monomials(b, k, k, degree=0), known)
    I0 = GradedPoly.zero(b)
    for k in sorted(parts):
        I0 = I0 + parts[k]
    return complete_interaction(_clean(I0), m, t, order, max_degree)


def _clean(p, eps=1e-12):
    if p.basis.mode == RATIONAL:
        return p
    return GradedPoly(p.basis, {k: v for k, v in p.terms.items() if abs(v) > eps})


def _fit(m, mons, target):
    """Least-squares X in span(mons) with Q X = target."""
    b = m.basis
    cols = [q_op(m, GradedPoly(b, {mono: b.scalar(1)})).terms for mono in mons]
    x, _ = _solve(cols, target.terms, b.mode)
    return GradedPoly(b, {mono: b.scalar(c) for mono, c in zip(mons, x) if c != 0})


def _series_system_window(basis, cap, degree, operator, rhs, min_degree):
    cols, labels = [], []
    for mono in _unknowns(basis, degree, cap, min_degree):
        unit = GradedPoly(basis, {mono: basis.scalar(1)})
        img = operator(HbarSeries.from_poly(unit, 0))[0]
        cols.append({k: v for k, v in img.terms.items() if sum(k) <= cap})
        labels.append(mono)
    target = {k: v for k, v in rhs[0].terms.items() if sum(k) <= cap}
    x, res = _solve(cols, target, basis.mode)
    terms = {}
    for mono, c in zip(labels, x):
        if c != 0:
            terms[mono] = basis.scalar(c) if basis.mode == RATIONAL else float(c)
    return GradedPoly(basis, terms), res


# -- partner --------------------------------------------------------------------------------

def partner_rhs(I, m, t=None):
    """hbar Delta_{Qbar e^{-tH}} I - 1/2 H I + 1/2 (I, I)_{Qbar e^{-tH}}."""
    t = I.scale if t is None else t
    A = odd_deformer(m, t)
    S = I.series
    half = _half(m.basis)
    return laplacian(S, A, check=False).shift(1) - h_op(m, S).scale(half) + \
        bracket(S, S, A, check=False).scale(half)


def partner_lhs(Istar, I, m, t=None, max_degree=None):
    """hbar Delta_{e^{-tH}} I* - Q I* + (I, I*)_{e^{-tH}}; bracket products above
    ``max_degree`` are skipped."""
    t = I.scale if t is None else t
    L = free_laplacian(m, t)
    X = _as_series(Istar, I.order)
    return L(X).shift(1) - q_op(m, X) + L.bracket(I.series, X, max_degree)


def free_partner_image(I, m):
    """chi^{0*} I = 1/2 <x, Qbar ad x> I, the image of I under the soul of the free flow."""
    half = _half(m.basis)
    return I.series.map(lambda c: pairing_derivation(m.Qbar, c).scale(half))


def partner_solve(I, m, max_degree=DEFAULT_MAX_DEGREE, rhs=None, min_degree=3, reference="free"):
    """Least-squares I* for the interaction partner equation over the reliable window.

    The solution set is an affine space; the solver returns the point closest (in the
    least-squares sense) to ``reference``: "free" uses chi^{0*} I, which keeps the choice
    smooth along RG trajectories; None gives the minimum-norm solution; an HbarSeries is
    used as given.  The residual is always reported: existence of a partner is a
    hypothesis.  ``rhs`` overrides the right-hand side (negative controls);
    ``min_degree`` is the lowest polynomial degree admitted at hbar^0.
    """
    b = m.basis
    order = I.order
    target = partner_rhs(I, m) if rhs is None else rhs
    if isinstance(reference, str):
        if reference != "free":
            raise ValueError(f"unknown partner reference {reference!r}")
        reference = free_partner_image(I, m)
    if reference is None:
        reference = HbarSeries.zero(b, order)
    reference = reliable_part(reference, max_degree)
    reference = HbarSeries(b, [GradedPoly(b, {k: v for k, v in c.terms.items()
                                              if sum(k) >= (min_degree if g == 0 else 1)})
                               for g, c in enumerate(reference.coeffs)], order)
    mins = [min_degree] + [1] * order
    D = max_degree
    shifted = target - partner_lhs(reference, I, m, max_degree=D)
    corr, _ = _series_system(b, order, D, -1, mins,
                             lambda X: partner_lhs(X, I, m, max_degree=D), shifted)
    series = reference + corr
    res = (reliable_part(partner_lhs(series, I, m, max_degree=D) - target, D)).norm()
    return PartnerTerm(series, float(res), I.scale)


def partner_equation_residual(Istar, I, m, max_degree=None):
    res = partner_lhs(Istar.series, I, m) - partner_rhs(I, m)
    return reliable_part(res, max_degree) if max_degree is not None else res


def full_partner_residual(Istar, I, m, max_degree=None):
    """hbar Delta S* + (S, S*) - hbar Delta_{Qbar e} S - 1/2 (S, S)_{Qbar e} with
    S = S^0 + I and S* = S^{0*} + I*, all at the interaction's scale."""
    t = I.scale
    body, soul, S0 = extended_family(m, t)
    order = I.order
    S = I.series + S0.body
    Sstar = Istar.series + S0.soul
    A = soul.deformer
    half = _half(m.basis)
    lhs = body(Sstar).shift(1) + body.bracket(S, Sstar)
    rhs = laplacian(S, A, check=False).shift(1) + bracket(S, S, A, check=False).scale(half)
    res = lhs - rhs
    return reliable_part(res, max_degree) if max_degree is not None else res


# -- generator --------------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesGenerator:
    """chi. = 1/2 <x, H ad x> - ad_{e^{-tH}} I*  with  r. = Delta_{e^{-tH}} I*."""

    linear: object
    partner: HbarSeries
    jacobian_rate: HbarSeries
    scale: object

    def act(self, S, m):
        L = free_laplacian(m, self.scale)
        S = _as_series(S, self.partner.order)
        out = S.map(lambda c: linear_derivation(self.linear, c))
        return out - L.bracket(self.partner, S)

    def is_classical(self):
        return all(c.is_zero() for c in self.partner.coeffs[1:])

    def classical(self):
        """The hbar^0 generator as a flows.Generator (partner must be hbar-independent)."""
        if not self.is_classical():
            raise ValueError("partner has hbar corrections; the flow is hbar-dependent")
        return Generator(linear=self.linear, hamiltonian=-self.partner[0],
                         jacobian_rate=self.jacobian_rate[0])


def full_generator(Istar, m, t=None):
    """(chi._t, r._t) assembled from a partner term."""
    t = Istar.scale if t is None else t
    b = m.basis
    N = Endomorphism(b, 0, coordinate_action(m.H)).entries * b.scalar(Fraction(1, 2))
    series = Istar.series
    for g, c in enumerate(series.coeffs):
        if c and c.degrees() != {-1}:
            raise ValueError("partner must have degree -1")
    L = free_laplacian(m, t)
    return SeriesGenerator(N, series, L(series), t)


def generator_family(Istar_at, m):
    """tau -> flows.Generator for an hbar-independent partner family (reconstruct_flow)."""
    return lambda tau: full_generator(Istar_at(tau), m, tau).classical()


def interacting_flow(I, m, t, steps, max_degree=DEFAULT_MAX_DEGREE, check=True):
    """Reconstruct the BV RG flow chi_{t,s} generated by (chi., r.) along the RGE trajectory.

    I is evolved with 2*steps RGE steps so that a partner is available at every RK4 node;
    each partner must be hbar-independent.  Returns (FlowMap, I_t, worst partner residual).
    """
    from .flows import reconstruct_flow
    # fail before the expensive trajectory when the very first partner is hbar-dependent
    full_generator(partner_solve(I, m, max_degree), m, I.scale).classical()
    traj = []
    It = rge_evolve(I, m, t, 2 * steps, max_degree, trajectory=traj)
    partners = {}
    worst = 0.0
    for tau, J in traj:
        P = partner_solve(J, m, max_degree)
        worst = max(worst, P.residual)
        partners[tau] = P
    b = m.basis
    nodes = sorted(partners)

    def lookup(tau):
        # RK4 nodes coincide with trajectory points up to rounding
        key = min(nodes, key=lambda k: abs(k - tau))
        return partners[key]

    gen = lambda tau: full_generator(lookup(tau), m, tau).classical()  # noqa: E731
    flow = reconstruct_flow(gen, lambda tau: free_laplacian(m, tau), I.scale, t, steps,
                            max_degree, check=check)
    return flow, It, worst


def flow_transport_residual(flow, I_s, I_t, m, max_degree=DEFAULT_MAX_DEGREE):
    """S_t - (chi_{t,s} S_s + hbar r_{chi t,s}) with S = S^0 + I, modulo constants, in the
    reliable window."""
    S_s = I_s.series + free_action(m, I_s.scale)
    S_t = I_t.series + free_action(m, I_t.scale)
    moved = flow.apply(S_s) + HbarSeries.from_poly(flow.log_jacobian, I_s.order, 1)
    res = reliable_part(S_t - moved, max_degree)
    return res.map(lambda c: c.drop_constant())


def transport_residual(I, Istar, m, dIdt=None, max_degree=DEFAULT_MAX_DEGREE):
    """dS/dt - (chi. S + hbar r.) with S = S^0 + I; dI/dt from the RGE unless given."""
    t = I.scale
    gen = full_generator(Istar, m, t)
    S = I.series + free_action(m, t)
    rate = (rge_rhs(I.series, m, t, max_degree) if dIdt is None else dIdt) + free_action_rate(m, t)
    res = rate - gen.act(S, m) - gen.jacobian_rate.shift(1)
    return reliable_part(res, max_degree)


def generator_hypothesis_residuals(Istar, m, probes, h=1e-4):
    """Residuals of the two generator hypotheses at the partner's scale t:
    bracket law  chi.(u,v)_t - (chi.u, v)_t - (u, chi.v)_t + (u, v)_{H e^{-tH}}  and
    evolution    d/dt Delta_t u - [chi., Delta_t] u + (r., u)_t."""
    t = Istar.scale
    gen = full_generator(Istar, m, t)
    b = m.basis
    L = free_laplacian(m, t)
    LH = DeformedLaplacian(m.H @ m.exp_H(-b.scalar(t)))
    order = Istar.series.order
    brk = 0.0
    for i, u in enumerate(probes):
        for v in probes[i:]:
            lhs = gen.act(L.bracket(u, v), m)
            rhs = L.bracket(gen.act(u, m), _as_series(v, order)) + \
                L.bracket(_as_series(u, order), gen.act(v, m)) - \
                _as_series(LH.bracket(u, v), order)
            brk = max(brk, (lhs - rhs).norm())
    evo = 0.0
    for u in probes:
        dL = _as_series(scale_derivative(lambda tau: free_laplacian(m, tau)(u), t,
                                         h if b.mode != RATIONAL else 1, b.mode), order)
        comm = gen.act(L(u), m) - L(gen.act(u, m))
        res = dL - comm + L.bracket(gen.jacobian_rate, _as_series(u, order))
        evo = max(evo, res.norm())
    return {"bracket_law": brk, "evolution": evo}


def polchinski_split_residual(I, m, dIdt=None, max_degree=DEFAULT_MAX_DEGREE):
    """dS/dt - [hbar Delta_{Qbar e} S + 1/2 (S,S)_{Qbar e} + chibar. S + hbar rbar.] with
    chibar. = -ad_{Qbar e^{-tH}} S^0 and rbar. = -2 Delta_{Qbar e^{-tH}} S^0 - 1/2 grtr(Qbar Q)."""
    t = I.scale
    b = m.basis
    A = odd_deformer(m, t)
    S0 = free_action(m, t)
    S = I.series + S0
    half = _half(b)
    rbar = -laplacian(S0, A, check=False).scale(b.scalar(2)) - \
        GradedPoly.constant(b, graded_trace(m.Qbar @ m.Q) * half)
    rhs = laplacian(S, A, check=False).shift(1) + bracket(S, S, A, check=False).scale(half) \
        - bracket(S0, S, A, check=False) + HbarSeries.from_poly(rbar, I.order, 1)
    rate = (rge_rhs(I.series, m, t, max_degree) if dIdt is None else dIdt) + free_action_rate(m, t)
    return reliable_part(rate - rhs, max_degree)


def rge_structure_report(I, m, max_degree=DEFAULT_MAX_DEGREE):
    """Order-g decoupling: perturbing I_h for h > g must leave the hbar^g RHS unchanged."""
    base = rge_rhs(I.series, m, I.scale, max_degree)
    worst = 0.0
    b = m.basis
    for h in range(1, I.order + 1):
        bump = [GradedPoly.zero(b)] * (I.order + 1)
        bump[h] = GradedPoly(b, {mono: b.scalar(1) for mono in
                                 monomials(b, 3, 1, degree=0)})
        moved = rge_rhs(I.series + HbarSeries(b, bump, I.order), m, I.scale, max_degree)
        for g in range(h):
            worst = max(worst, (moved[g] - base[g]).norm())
    return worst


__all__ = [
    "seeded_interaction",
    "q_op", "h_op", "h_op_via_anticommutator", "InteractionTerm", "PartnerTerm", "reliable_part",
    "interaction_me_residual", "full_me_residual", "rge_rhs", "rge_evolve",
    "complete_interaction", "free_partner_image", "partner_rhs", "partner_lhs", "partner_solve",
    "partner_equation_residual", "full_partner_residual", "SeriesGenerator", "full_generator",
    "generator_family", "interacting_flow", "flow_transport_residual", "transport_residual", "generator_hypothesis_residuals",
    "polchinski_split_residual", "rge_structure_report",
]
