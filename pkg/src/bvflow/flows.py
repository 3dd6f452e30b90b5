"""BV flows: families of canonical maps over a scale grid, their checker, conjugation
and reconstruction from infinitesimal data.

Scale derivatives (the D-probes) are taken by central finite differences.  In float
mode the default stencil is the 3-point one with step ``fd_step``; in rational mode a
wider stencil with exact weights is used, which differentiates any family polynomial
in t of degree <= 2 * half_width exactly (nilpotent H makes the free families polynomial).
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .algebra import GradedPoly, FlowMap, DEFAULT_MAX_DEGREE
from .bv import (DeformedLaplacian, CanonicalMapWitness, canonical_residual, as_laplacian,
                 default_probes)
from .linear import RATIONAL, Endomorphism
from .parallel import ordered_map


def check_record(residual, tolerance, truncated=False, advisory=False, **extra):
    rec = {"residual": float(residual), "tolerance": float(tolerance),
           "pass": bool(float(residual) <= float(tolerance)), "truncated": bool(truncated)}
    if advisory:
        rec["advisory"] = True
    rec.update(extra)
    return rec


def suite_passes(checks):
    return all(c["pass"] for c in checks.values() if not c.get("advisory"))


# -- scale derivatives ---------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _central_weights(half_width):
    """Exact weights w_k (k = -m..m) with sum w_k f(t + k h) / h = f'(t) + O(h^{2m})."""
    m = half_width
    nodes = list(range(-m, m + 1))
    n = len(nodes)
    # solve sum_k w_k k^p = delta_{p,1}, p = 0..n-1
    A = [[Fraction(k) ** p for k in nodes] + [Fraction(1 if p == 1 else 0)] for p in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        pv = A[col][col]
        A[col] = [v / pv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return dict(zip(nodes, (row[-1] for row in A)))


def scale_derivative(fn, t, h, mode, half_width=None):
    """d/dt fn at t by a central stencil; fn returns GradedPoly-like values."""
    if half_width is None:
        half_width = 6 if mode == RATIONAL else 1
    w = _central_weights(half_width)
    if mode != RATIONAL:
        w = {k: float(v) for k, v in w.items()}
        h = float(h)
        t = float(t)
        inv = 1.0 / h
    else:
        h = Fraction(h)
        t = Fraction(t)
        inv = 1 / h
    acc = None
    for k, wk in w.items():
        if wk == 0:
            continue
        term = fn(t + k * h).scale(wk * inv)
        acc = term if acc is None else acc + term
    return acc


# -- flow families ---------------------------------------------------------------------

@dataclass
class FlowFamily:
    """chi_{t,s} (with its log-Jacobian) relative to the Laplacian family Delta_t."""

    map_at: Callable
    laplacian_at: Callable
    grid: list
    fd_step: object = 1e-4
    basis: object = None
    stencil: int = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.basis is None:
            self.basis = as_laplacian(self.laplacian_at(self.grid[0])).basis
        if self.basis.mode == RATIONAL:
            self.grid = [Fraction(g) for g in self.grid]
            if isinstance(self.fd_step, float):
                self.fd_step = Fraction(1)
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")

    def chi(self, t, s):
        key = (t, s)
        if key not in self._cache:
            self._cache[key] = self.map_at(t, s)
        return self._cache[key]

    def lap(self, t):
        key = ("lap", t)
        if key not in self._cache:
            self._cache[key] = as_laplacian(self.laplacian_at(t))
        return self._cache[key]

    def witness(self, t, s):
        return CanonicalMapWitness(self.chi(t, s), self.lap(s), self.lap(t))


def constant_family(basis, grid, max_degree=DEFAULT_MAX_DEGREE, fd_step=1e-4):
    L = DeformedLaplacian.canonical(basis)
    return FlowFamily(lambda t, s: FlowMap.identity(basis, max_degree), lambda t: L, grid,
                      fd_step, basis)


def _default_tol(basis, fd=False):
    if basis.mode == RATIONAL:
        return 0.0
    return 1e-7 if fd else 1e-10


def flow_suite(F, probes=None, tolerance=None, fd_tolerance=None):
    """Groupoid laws, Jacobian cocycle, canonicality and the D-evolution / D-Jacobian
    equations of a flow family on its grid.

    Returns {"checks": {name: record}, "pass": bool}.  Jacobians are compared modulo
    constants; the constant part is reported separately as the advisory
    ``jacobian_normalization`` check, since central shifts are a stated ambiguity.
    """
    grid = list(F.grid)
    if len(grid) < 3:
        raise ValueError("flow_suite needs a grid of at least 3 points")
    basis = F.basis
    probes = probes if probes is not None else default_probes(basis, 3)
    tol = _default_tol(basis) if tolerance is None else tolerance
    fd_tol = _default_tol(basis, fd=True) if fd_tolerance is None else fd_tolerance
    checks = {}

    ident = FlowMap.identity(basis)
    res, norm_res, trunc = 0.0, 0.0, False
    for t in grid:
        chi = F.chi(t, t)
        res = max(res, chi.distance(ident))
        norm_res = max(norm_res, abs(float(chi.log_jacobian.constant_term())))
        trunc = trunc or chi.truncated
    checks["identity"] = check_record(res, tol, trunc)

    triples = [(s, t, u) for s, t, u in itertools.combinations(grid, 3)]

    def groupoid(stu):
        s, t, u = stu
        lhs = F.chi(u, t).compose(F.chi(t, s))
        rhs = F.chi(u, s)
        d_img = max((a - b).norm() for a, b in zip(lhs.images, rhs.images))
        d_r = (lhs.log_jacobian - rhs.log_jacobian).drop_constant().norm()
        return d_img, d_r, lhs.truncated or rhs.truncated

    out = ordered_map(groupoid, triples)
    checks["groupoid"] = check_record(max((o[0] for o in out), default=0.0), tol,
                                      any(o[2] for o in out))
    checks["jacobian_cocycle"] = check_record(max((o[1] for o in out), default=0.0), tol,
                                              any(o[2] for o in out))

    pairs = [(s, t) for s in grid for t in grid if s != t]
    for s, t in pairs:
        norm_res = max(norm_res, abs(float(F.chi(t, s).log_jacobian.constant_term())))
    checks["jacobian_normalization"] = check_record(norm_res, tol, advisory=True)

    canon = ordered_map(lambda st: canonical_residual(F.witness(st[1], st[0]), probes), pairs)
    checks["canonicality"] = check_record(max((c["max"] for c in canon), default=0.0), tol,
                                          any(c["truncated"] for c in canon))
    checks["bracket_preservation"] = check_record(
        max((c["bracket_preservation"] for c in canon), default=0.0), tol,
        any(c["truncated"] for c in canon))

    evo = ordered_map(lambda t: d_probe_residuals(F, t, probes), grid)
    checks["evolution_equation"] = check_record(max(e[0] for e in evo), fd_tol,
                                                any(e[2] for e in evo))
    checks["jacobian_equation"] = check_record(max(e[1] for e in evo), fd_tol,
                                               any(e[2] for e in evo))
    return {"checks": checks, "pass": suite_passes(checks)}


def d_probe_residuals(F, t, probes):
    """(evolution, jacobian) residuals at t:
    Delta^D_t - [chi^D_t, Delta_t] + ad_t r^D_t  and  Delta_t r^D_t."""
    mode = F.basis.mode
    h = F.fd_step
    L = F.lap(t)
    rD = scale_derivative(lambda tau: F.chi(tau, t).log_jacobian, t, h, mode, F.stencil)
    worst = 0.0
    trunc = False
    for f in probes:
        lap_D = scale_derivative(lambda tau: F.lap(tau)(f), t, h, mode, F.stencil)
        chi_f = scale_derivative(lambda tau: F.chi(tau, t).apply(f), t, h, mode, F.stencil)
        chi_lap_f = scale_derivative(lambda tau: F.chi(tau, t).apply(L(f)), t, h, mode, F.stencil)
        res = lap_D - (chi_lap_f - L(chi_f)) + L.bracket(rD, f)
        worst = max(worst, res.norm())
        trunc = trunc or res.truncated
    return worst, L(rD).norm(), trunc


# -- conjugation -------------------------------------------------------------------------

def conjugate_flow(F, gamma):
    """gamma-conjugate flow gamma_t chi_{t,s} gamma_s^{-1} relative to the targets of gamma_t.

    ``gamma`` maps t to a CanonicalMapWitness whose source is F's Laplacian at t.  The
    Jacobian comes out of composition as gamma_t r_chi + r_gamma_t - (conj chi) r_gamma_s.
    """
    inverses = {}

    def inv(s):
        if s not in inverses:
            inverses[s] = gamma(s).map.inverse()
        return inverses[s]

    def map_at(t, s):
        return gamma(t).map.compose(F.map_at(t, s)).compose(inv(s))

    return FlowFamily(map_at, lambda t: gamma(t).target, list(F.grid), F.fd_step, F.basis,
                      F.stencil)


def conjugate_jacobian_formula(F, gamma, t, s):
    """gamma_t r_chi + r_gamma_t - (conj chi)_{t,s} r_gamma_s, evaluated independently."""
    conj = conjugate_flow(F, gamma).map_at(t, s)
    gt, gs = gamma(t).map, gamma(s).map
    return gt.apply(F.map_at(t, s).log_jacobian) + gt.log_jacobian - conj.apply(gs.log_jacobian)


# -- reconstruction ------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """Degree-0 derivation chi. f = D_N f + (h, f)_t plus the Jacobian rate r..

    ``linear`` is the coordinate matrix N of D_N (D_N x^i = sum_j N[i,j] x^j);
    ``hamiltonian`` a degree -1 polynomial h whose bracket is taken with the Laplacian
    of the family at the same scale; ``jacobian_rate`` a degree-0 polynomial.
    """

    linear: object = None
    hamiltonian: GradedPoly = None
    jacobian_rate: GradedPoly = None

    def __post_init__(self):
        if self.hamiltonian is not None and self.hamiltonian and \
                self.hamiltonian.degrees() != {-1}:
            raise ValueError("hamiltonian part must be homogeneous of degree -1")
        if self.jacobian_rate is not None and self.jacobian_rate and \
                self.jacobian_rate.degrees() != {0}:
            raise ValueError("Jacobian rate must be homogeneous of degree 0")
        if self.linear is not None:
            N = self.linear.entries if isinstance(self.linear, Endomorphism) else self.linear
            object.__setattr__(self, "linear", N)

    def act(self, f, L=None):
        basis = f.basis
        out = GradedPoly.zero(basis)
        if self.linear is not None:
            out = out + linear_derivation(self.linear, f)
        if self.hamiltonian is not None and self.hamiltonian:
            if L is None:
                raise ValueError("a Hamiltonian generator needs the family's Laplacian")
            out = out + as_laplacian(L).bracket(self.hamiltonian, f)
        return out

    def rate(self, basis):
        return self.jacobian_rate if self.jacobian_rate is not None else GradedPoly.zero(basis)


def linear_derivation(N, f):
    """D_N f for the degree-0 derivation with D_N x^i = sum_j N[i,j] x^j."""
    from .algebra import partial
    basis = f.basis
    out = GradedPoly.zero(basis)
    n = basis.dim
    for i in range(n):
        di = None
        for j in range(n):
            c = N[i, j]
            if c == 0:
                continue
            if di is None:
                di = partial(i, f)
                if not di:
                    break
            # D x^i = N_ij x^j, contributed as (N_ij x^j) * d_i f (degree-0 coefficient)
            out = out + (GradedPoly.coordinate(basis, j) * di).scale(c)
    return out


def generator_hypotheses(gen, L_family, t, probes, h, mode, stencil=None):
    """Residuals of the two infinitesimal hypotheses at t:
    evolution  d/dt Delta_t - [chi._t, Delta_t] + ad_t r._t   (on probes),
    jacobian   Delta_t r._t  (mod constants)."""
    g = gen(t)
    L = as_laplacian(L_family(t))
    basis = L.basis
    r = g.rate(basis)
    worst = 0.0
    for f in probes:
        dL = scale_derivative(lambda tau: as_laplacian(L_family(tau))(f), t, h, mode, stencil)
        res = dL - (g.act(L(f), L) - L(g.act(f, L))) + L.bracket(r, f)
        worst = max(worst, res.norm())
    return {"evolution": worst, "jacobian": L(r).drop_constant().norm()}


def reconstruct_flow(gen, L_family, s, t, steps, max_degree=DEFAULT_MAX_DEGREE, probes=None,
                     check=True, fd_step=1e-4, tolerance=None, basis=None):
    """Integrate d/dt chi_{t,s} = chi._t chi_{t,s} from s to t by classical RK4.

    The state is the coordinate images y^i and the log-Jacobian r, with
    dy^i/dt = chi._t y^i and dr/dt = r._t + chi._t r.  With ``check`` the evolution
    hypothesis is evaluated at s, the midpoint and t, and a violation raises ValueError.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    if L_family is not None:
        basis = as_laplacian(L_family(s)).basis
    elif basis is None:
        raise ValueError("pass the basis when no Laplacian family is given")
    mode = basis.mode
    sc = basis.scalar
    s, t = sc(s), sc(t)
    dt = (t - s) / steps
    if check and L_family is not None:
        probes = probes if probes is not None else default_probes(basis, 2)
        tol = tolerance if tolerance is not None else (0 if mode == RATIONAL else 1e-6)
        h = fd_step if mode != RATIONAL else Fraction(1)
        for tau in (s, (s + t) / 2, t):
            hyp = generator_hypotheses(gen, L_family, tau, probes, h, mode)
            worst = max(hyp.values())
            if worst > tol:
                raise ValueError(f"generator violates the evolution hypothesis at t={tau}: "
                                 f"residual {worst:.3g}")

    n = basis.dim
    ys = [GradedPoly.coordinate(basis, i) for i in range(n)]
    r = GradedPoly.zero(basis)
    D = max_degree

    def field_at(tau, ys, r):
        g = gen(tau)
        L = as_laplacian(L_family(tau)) if L_family is not None else None
        dys = [g.act(y, L).truncate(D) for y in ys]
        dr = (g.rate(basis) + g.act(r, L)).truncate(D)
        return dys, dr

    def axpy(ys, r, k, c):
        return ([y + dy.scale(c) for y, dy in zip(ys, k[0])], r + k[1].scale(c))

    two = sc(2)
    six = sc(6)
    tau = s
    for _ in range(steps):
        k1 = field_at(tau, ys, r)
        k2 = field_at(tau + dt / two, *axpy(ys, r, k1, dt / two))
        k3 = field_at(tau + dt / two, *axpy(ys, r, k2, dt / two))
        k4 = field_at(tau + dt, *axpy(ys, r, k3, dt))
        ys = [y + (a + b.scale(two) + c.scale(two) + d).scale(dt / six)
              for y, a, b, c, d in zip(ys, k1[0], k2[0], k3[0], k4[0])]
        r = r + (k1[1] + k2[1].scale(two) + k3[1].scale(two) + k4[1]).scale(dt / six)
        tau = tau + dt
    truncated = any(y.truncated for y in ys) or r.truncated
    return FlowMap(basis, ys, max_degree, r, truncated)


def constant_linear_generator(N):
    return lambda tau: Generator(linear=N)


__all__ = [
    "FlowFamily", "constant_family", "flow_suite", "d_probe_residuals", "conjugate_flow",
    "conjugate_jacobian_formula", "Generator", "linear_derivation", "generator_hypotheses",
    "reconstruct_flow", "scale_derivative", "check_record", "suite_passes",
    "constant_linear_generator",
]
