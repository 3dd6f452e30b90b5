"""Canonical and A-deformed BV Laplacians and brackets on Fun(E_0), the quadratic forms
<x, Bx> and the derivations <x, B ad x>, master-equation residuals and the
canonical-map checker.

Sign conventions that the coordinate formulas leave open are collected in
``SignConvention``; ``CONVENTION`` is the unique choice selected by
``bvflow.signs.search`` and is frozen here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import GradedPoly, HbarSeries, FlowMap, multiply, partial, right_partial, monomials
from .linear import Endomorphism, RATIONAL, transpose, max_abs, graded_trace, zeros


@dataclass(frozen=True)
class SignConvention:
    """quad[p][e]: sign of the row-e block of <x, Bx> for |B| = p (mod 2);
    deriv[p][e]: same for the derivation <x, B ad x>;
    lap[p]: overall sign of Delta_A for |A| = p; brk[p]: overall sign of (.,.)_A."""

    quad: tuple = ((1, 1), (1, 1))
    deriv: tuple = ((1, 1), (1, 1))
    lap: tuple = (1, 1)
    brk: tuple = (1, 1)

    def bits(self):
        return (self.quad[0] + self.quad[1] + self.deriv[0] + self.deriv[1]
                + self.lap + self.brk[1:])


# Frozen result of bvflow.signs.search(); see tests/test_signs.py.
CONVENTION = SignConvention()


def _tol(basis):
    return 0 if basis.mode == RATIONAL else 1e-12


def is_antisymmetric(A, tol=None):
    tol = _tol(A.basis) if tol is None else tol
    d = max_abs(transpose(A).entries + A.entries)
    return d == 0 if tol == 0 else d <= tol * max(1.0, A.norm())


def require_antisymmetric(A):
    if not is_antisymmetric(A):
        raise ValueError("deformer must satisfy transpose(A) = -A")


# -- canonical bracket -------------------------------------------------------

def _omega_inv_pairs(basis):
    return [(a, b, basis.omega_inv[a, b]) for a in range(basis.dim) for b in range(basis.dim)
            if basis.omega_inv[a, b] != 0]


def bracket_E(u, v):
    """(u, v)_E = sum (u <-d_a) w^{ab} (d_b v): the degree 1 biderivation with (x^a, x^b)_E = w^{ab}."""
    if isinstance(u, HbarSeries) or isinstance(v, HbarSeries):
        return _series_bilinear(u, v, bracket_E)
    u._check(v)
    out = GradedPoly.zero(u.basis)
    for a, b, w in _omega_inv_pairs(u.basis):
        ua = right_partial(a, u)
        if not ua:
            continue
        vb = partial(b, v)
        if vb:
            out = out + multiply(ua, vb).scale(w)
    return out


def _coordinates(basis):
    return [GradedPoly.coordinate(basis, i) for i in range(basis.dim)]


def _dual_coordinates(basis):
    return [GradedPoly.dual_coordinate(basis, i) for i in range(basis.dim)]


def _series_bilinear(u, v, op):
    if not isinstance(u, HbarSeries):
        u = HbarSeries.from_poly(u, v.order)
    if not isinstance(v, HbarSeries):
        v = HbarSeries.from_poly(v, u.order)
    return u.cauchy(v, op)


# -- deformed bracket and Laplacian -------------------------------------------

def bracket(u, v, A=None, signs=None, check=True, max_degree=None):
    """(u, v)_A = (u, x_i)_E A^i_j (x^j, v)_E; A = None means A = 1_E.

    ``max_degree`` drops product terms above that polynomial degree (flagged as truncated).
    """
    if isinstance(u, HbarSeries) or isinstance(v, HbarSeries):
        return _series_bilinear(u, v, lambda a, b: bracket(a, b, A, signs, check, max_degree))
    if A is None:
        out = bracket_E(u, v)
        return out.truncate(max_degree) if max_degree is not None else out
    if check:
        require_antisymmetric(A)
    signs = signs or CONVENTION
    basis = u.basis
    u._check(v)
    xd = _dual_coordinates(basis)
    xs = _coordinates(basis)
    left = {}
    right = {}
    out = GradedPoly.zero(basis)
    for i, j, a in A.nonzero():
        if i not in left:
            left[i] = bracket_E(u, xd[i])
        if not left[i]:
            continue
        if j not in right:
            right[j] = bracket_E(xs[j], v)
        if right[j]:
            out = out + multiply(left[i], right[j], max_degree).scale(a)
    if signs.brk[A.degree % 2] < 0:
        out = -out
    return out


def laplacian(u, A=None, signs=None, check=True):
    """Delta_A u = 1/2 (-1)^(1+(|A|+1) eps^i) A^i_j (x^j, (x_i, u)_E)_E, evaluated literally."""
    if isinstance(u, HbarSeries):
        return u.map(lambda a: laplacian(a, A, signs, check))
    basis = u.basis
    if A is None:
        A = Endomorphism.identity(basis)
    elif check:
        require_antisymmetric(A)
    signs = signs or CONVENTION
    p = A.degree
    xd = _dual_coordinates(basis)
    xs = _coordinates(basis)
    inner = {}
    out = GradedPoly.zero(basis)
    for i, j, a in A.nonzero():
        if i not in inner:
            inner[i] = bracket_E(xd[i], u)
        if not inner[i]:
            continue
        term = bracket_E(xs[j], inner[i])
        sign = -1 if (1 + (p + 1) * basis.degrees[i]) % 2 else 1
        out = out + term.scale(a * sign)
    half = Fraction(1, 2) if basis.mode == RATIONAL else 0.5
    return out.scale(half * signs.lap[p % 2])


class DeformedLaplacian:
    """Delta_A for an antisymmetric deformer A (checked at construction)."""

    __slots__ = ("deformer", "basis", "signs")

    def __init__(self, A, signs=None):
        require_antisymmetric(A)
        self.deformer = A
        self.basis = A.basis
        self.signs = signs

    @classmethod
    def canonical(cls, basis):
        return cls(Endomorphism.identity(basis))

    @property
    def degree(self):
        return self.deformer.degree + 1

    def __call__(self, u):
        return laplacian(u, self.deformer, self.signs, check=False)

    def bracket(self, u, v, max_degree=None):
        return bracket(u, v, self.deformer, self.signs, check=False, max_degree=max_degree)

    def ad(self, r):
        return lambda f: self.bracket(r, f)

    def __repr__(self):
        return f"DeformedLaplacian(degree={self.degree}, A={self.deformer.entries.tolist()})"


def as_laplacian(L):
    if isinstance(L, DeformedLaplacian):
        return L
    if isinstance(L, Endomorphism):
        return DeformedLaplacian(L)
    raise TypeError(f"expected a DeformedLaplacian or Endomorphism, got {type(L).__name__}")


# -- quadratic forms and the derivations <x, B ad x> ----------------------------

def quadratic_form(B, signs=None):
    """<x, Bx> = sum w_ij B^j_k x^i x^k (with the pinned row signs)."""
    signs = signs or CONVENTION
    basis = B.basis
    xs = _coordinates(basis)
    wB = basis.omega @ B.entries
    row = signs.quad[B.degree % 2]
    out = GradedPoly.zero(basis)
    n = basis.dim
    for i in range(n):
        s = row[basis.degrees[i] % 2]
        for k in range(n):
            c = wB[i, k]
            if c != 0:
                out = out + multiply(xs[i], xs[k]).scale(c * s)
    return out


def pairing_derivation(B, u, signs=None):
    """<x, B ad x> u = <x, B (x, u)_E>: first-order operator of degree |B|."""
    if isinstance(u, HbarSeries):
        return u.map(lambda a: pairing_derivation(B, a, signs))
    signs = signs or CONVENTION
    basis = B.basis
    xs = _coordinates(basis)
    wB = basis.omega @ B.entries
    row = signs.deriv[B.degree % 2]
    out = GradedPoly.zero(basis)
    cache = {}
    n = basis.dim
    for i in range(n):
        s = row[basis.degrees[i] % 2]
        for k in range(n):
            c = wB[i, k]
            if c == 0:
                continue
            if k not in cache:
                cache[k] = bracket_E(xs[k], u)
            if cache[k]:
                out = out + multiply(xs[i], cache[k]).scale(c * s)
    return out


def coordinate_action(B, signs=None):
    """Matrix N with <x, B ad x> x^i = sum_j N[i, j] x^j (degree-0 linear derivations)."""
    basis = B.basis
    n = basis.dim
    N = zeros(n, basis.mode)
    for i in range(n):
        img = pairing_derivation(B, GradedPoly.coordinate(basis, i), signs)
        for m, c in img.terms.items():
            if sum(m) != 1:
                raise ValueError("derivation is not linear on coordinates")
            N[i, m.index(1)] = c
    return N


# -- mixed bracket ---------------------------------------------------------------

def mixed_bracket(u, v, A, B, check=True):
    """[u, v]_{A,B} = (-1)^((|A|+|B|+|u|+|v|+1) eps^i) A^i_j (x^j,(u,x_k)_E)_E B^k_l (x^l,(v,x_i)_E)_E."""
    if check:
        require_antisymmetric(A)
        require_antisymmetric(B)
    basis = u.basis
    u._check(v)
    if not u or not v:
        return GradedPoly.zero(basis)
    xd = _dual_coordinates(basis)
    xs = _coordinates(basis)
    pu = u.degree
    pv = v.degree
    U = {}
    V = {}
    W = {}
    Z = {}

    def wjk(j, k):
        if (j, k) not in W:
            if k not in U:
                U[k] = bracket_E(u, xd[k])
            W[(j, k)] = bracket_E(xs[j], U[k]) if U[k] else U[k]
        return W[(j, k)]

    def zli(l, i):
        if (l, i) not in Z:
            if i not in V:
                V[i] = bracket_E(v, xd[i])
            Z[(l, i)] = bracket_E(xs[l], V[i]) if V[i] else V[i]
        return Z[(l, i)]

    out = GradedPoly.zero(basis)
    total = A.degree + B.degree + pu + pv + 1
    for i, j, a in A.nonzero():
        sign = -1 if (total * basis.degrees[i]) % 2 else 1
        for k, l, b in B.nonzero():
            left = wjk(j, k)
            if not left:
                continue
            right = zli(l, i)
            if right:
                out = out + multiply(left, right).scale(a * b * sign)
    return out


# -- master equation ----------------------------------------------------------------

def qme_residual(S, L=None, hbar_weighted=False):
    """Delta S + 1/2 (S, S)  (or hbar Delta S + 1/2 (S, S) for weighted series)."""
    if L is None:
        basis = S.basis
        L = DeformedLaplacian.canonical(basis)
    L = as_laplacian(L)
    if isinstance(S, HbarSeries):
        for g, c in enumerate(S.coeffs):
            if c and c.degrees() != {0}:
                raise ValueError(f"master action must have degree 0 (hbar^{g} has {sorted(c.degrees())})")
    elif S and S.degrees() != {0}:
        raise ValueError(f"master action must have degree 0, has {sorted(S.degrees())}")
    half = Fraction(1, 2) if L.basis.mode == RATIONAL else 0.5
    lap = L(S)
    if hbar_weighted:
        if not isinstance(S, HbarSeries):
            raise ValueError("hbar-weighted residual needs an HbarSeries")
        lap = lap.shift(1)
    return lap + L.bracket(S, S).scale(half)


# -- canonical maps --------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalMapWitness:
    """An algebra morphism alpha from (Fun, Delta_source) to (Fun, Delta_target) with log-Jacobian."""

    map: FlowMap
    source: DeformedLaplacian
    target: DeformedLaplacian

    @property
    def log_jacobian(self):
        return self.map.log_jacobian


def canonical_residual(w, probes):
    """Residuals of Delta_Y alpha - alpha Delta_X + (r, alpha(.))_Y on the probes, of the
    Jacobian ME Delta_Y r + 1/2 (r, r)_Y (mod constants), and of bracket preservation.

    Canonicality and bracket preservation are reported separately and never inferred
    from each other.
    """
    alpha = w.map
    X, Y = as_laplacian(w.source), as_laplacian(w.target)
    r = alpha.log_jacobian
    inter = 0.0
    brk = 0.0
    truncated = alpha.truncated
    images = [alpha.apply(f) for f in probes]
    for f, af in zip(probes, images):
        res = Y(af) - alpha.apply(X(f)) + Y.bracket(r, af)
        inter = max(inter, res.norm())
        truncated = truncated or res.truncated
    # shifted antisymmetry makes the (g, f) pair redundant
    for a, (f, af) in enumerate(zip(probes, images)):
        for g, ag in zip(probes[a:], images[a:]):
            res = alpha.apply(X.bracket(f, g)) - Y.bracket(af, ag)
            brk = max(brk, res.norm())
            truncated = truncated or res.truncated
    half = Fraction(1, 2) if Y.basis.mode == RATIONAL else 0.5
    jme = (Y(r) + Y.bracket(r, r).scale(half)).drop_constant().norm()
    return {
        "intertwining": inter,
        "jacobian_me": jme,
        "bracket_preservation": brk,
        "max": max(inter, jme),
        "truncated": truncated,
    }


def default_probes(basis, max_poly_degree=3, degree_window=(-2, 2)):
    """All monomials of total exponent <= max_poly_degree with grading in the window."""
    out = []
    for m in monomials(basis, max_poly_degree):
        d = sum(e * g for e, g in zip(m, basis.degrees))
        if degree_window[0] <= d <= degree_window[1]:
            out.append(GradedPoly(basis, {m: basis.scalar(1)}))
    return out


def ad_type_residual(x, L, probes):
    """Delta xi - xi Delta + ad(e_xi) with xi = (x, .) and e_xi = -Delta x, for |x| = -1."""
    L = as_laplacian(L)
    if x.degrees() - {-1}:
        raise ValueError("ad-type maps need a degree -1 generator")
    e = -L(x)
    worst = 0.0
    for f in probes:
        res = L(L.bracket(x, f)) - L.bracket(x, L(f)) + L.bracket(e, f)
        worst = max(worst, res.norm())
    return worst


# -- cohomology -----------------------------------------------------------------------

def _rank(rows, mode):
    """Rank of a list of dict-rows (column -> value) by Gaussian elimination."""
    rows = [dict(r) for r in rows if r]
    rank = 0
    tol = 0 if mode == RATIONAL else 1e-9
    pivots = []
    while rows:
        r = rows.pop()
        for col, prow in pivots:
            c = r.get(col, 0)
            if c != 0:
                for k, v in prow.items():
                    nv = r.get(k, 0) - c * v
                    if (abs(nv) <= tol) if tol else nv == 0:
                        r.pop(k, None)
                    else:
                        r[k] = nv
        if not r:
            continue
        col = max(r, key=lambda k: abs(r[k])) if tol else min(r)
        piv = r[col]
        if tol and abs(piv) <= tol:
            continue
        prow = {k: v / piv for k, v in r.items()}
        pivots.append((col, prow))
        rank += 1
    return rank


def laplacian_cohomology_dims(L, degree_window, max_degree):
    """dim ker - dim im of Delta on polynomials of total exponent <= max_degree, per grading.

    Returns a list of (grading, dimension) for gradings in degree_window (inclusive).
    """
    L = as_laplacian(L)
    if L.deformer.degree % 2:
        raise ValueError("cohomology needs a nilpotent Laplacian (even deformer)")
    basis = L.basis
    step = L.degree
    monos = monomials(basis, max_degree)
    by_deg = {}
    for m in monos:
        by_deg.setdefault(sum(e * g for e, g in zip(m, basis.degrees)), []).append(m)
    images = {}
    for d, ms in by_deg.items():
        imgs = []
        for m in ms:
            img = L(GradedPoly(basis, {m: basis.scalar(1)}))
            if img and not L(img).is_zero() and L(img).norm() > _tol(basis):
                raise ValueError("Laplacian is not nilpotent on the truncated space")
            imgs.append(img.terms)
        images[d] = imgs
    out = []
    for d in range(degree_window[0], degree_window[1] + 1):
        dim = len(by_deg.get(d, []))
        rank_out = _rank(images.get(d, []), basis.mode)
        rank_in = _rank(images.get(d - step, []), basis.mode)
        out.append((d, dim - rank_out - rank_in))
    return out


__all__ = [
    "SignConvention", "CONVENTION", "bracket_E", "bracket", "laplacian", "DeformedLaplacian",
    "quadratic_form", "pairing_derivation", "coordinate_action", "mixed_bracket", "qme_residual",
    "CanonicalMapWitness", "canonical_residual", "ad_type_residual", "default_probes",
    "laplacian_cohomology_dims", "is_antisymmetric", "graded_trace",
]
