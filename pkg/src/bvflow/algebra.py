"""Graded-commutative polynomials in the coordinates x^i, truncated hbar-series and
algebra morphisms given by coordinate substitution.

Monomials are exponent tuples in the basis' coordinate order; odd coordinates carry
exponent 0 or 1.  Coefficients are Fractions (rational mode) or floats (f64 mode).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement
from operator import add as _add

import numpy as np

from .linear import RATIONAL, to_scalar, scalar_to_literal, _inverse

DEFAULT_MAX_DEGREE = 6
DEFAULT_HBAR_ORDER = 4


def mono_mul_sign(a, b, odd):
    """Koszul sign of x^a x^b -> canonical order, or 0 if an odd coordinate repeats."""
    flips = 0
    for j in odd:
        if b[j]:
            if a[j]:
                return 0
            for i in odd:
                if i > j and a[i]:
                    flips += 1
    return -1 if flips & 1 else 1


class GradedPoly:
    """Sparse polynomial: dict exponent-tuple -> nonzero coefficient.

    ``truncated`` records that some operation producing this value dropped terms above
    a polynomial-degree bound; it propagates through arithmetic.
    """

    __slots__ = ("basis", "terms", "truncated")

    def __init__(self, basis, terms=None, truncated=False):
        self.basis = basis
        self.terms = {} if terms is None else {m: c for m, c in terms.items() if c != 0}
        self.truncated = truncated

    @classmethod
    def _raw(cls, basis, terms, truncated=False):
        p = cls.__new__(cls)
        p.basis = basis
        p.terms = terms
        p.truncated = truncated
        return p

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, basis):
        return cls._raw(basis, {})

    @classmethod
    def constant(cls, basis, c):
        c = to_scalar(c, basis.mode)
        return cls._raw(basis, {(0,) * basis.dim: c} if c != 0 else {})

    @classmethod
    def one(cls, basis):
        return cls.constant(basis, 1)

    @classmethod
    def coordinate(cls, basis, i):
        m = [0] * basis.dim
        m[i] = 1
        return cls._raw(basis, {tuple(m): to_scalar(1, basis.mode)})

    @classmethod
    def from_factors(cls, basis, coeff, factors):
        """coeff * x^{f_1} x^{f_2} ... for an arbitrary (unsorted) list of coordinate indices."""
        coeff = to_scalar(coeff, basis.mode)
        out = cls.constant(basis, coeff)
        for i in factors:
            out = out * cls.coordinate(basis, i)
        return out

    @classmethod
    def dual_coordinate(cls, basis, i):
        """x_i = -omega_ij x^j."""
        terms = {}
        for j in range(basis.dim):
            w = basis.omega[i, j]
            if w != 0:
                m = [0] * basis.dim
                m[j] = 1
                terms[tuple(m)] = -w
        return cls._raw(basis, terms)

    # -- queries -----------------------------------------------------------

    def mono_degree(self, m):
        return sum(e * d for e, d in zip(m, self.basis.degrees))

    def degrees(self):
        """Set of gradings present."""
        return {self.mono_degree(m) for m in self.terms}

    @property
    def degree(self):
        """Grading of a homogeneous polynomial (0 for the zero polynomial)."""
        ds = self.degrees()
        if len(ds) > 1:
            raise ValueError(f"polynomial is not homogeneous; degrees present: {sorted(ds)}")
        return ds.pop() if ds else 0

    def is_homogeneous(self):
        return len(self.degrees()) <= 1

    def poly_degree(self):
        """Largest total exponent (-1 for zero)."""
        return max((sum(m) for m in self.terms), default=-1)

    def min_poly_degree(self):
        return min((sum(m) for m in self.terms), default=-1)

    def constant_term(self):
        return self.terms.get((0,) * self.basis.dim, to_scalar(0, self.basis.mode))

    def is_zero(self):
        return not self.terms

    def norm(self):
        """Max absolute coefficient."""
        return max((abs(float(c)) for c in self.terms.values()), default=0.0)

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other):
        if other.basis != self.basis:
            raise ValueError("polynomials live on different bases")

    def _coerce(self, other):
        if isinstance(other, GradedPoly):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction, float, np.floating, np.integer)):
            return GradedPoly.constant(self.basis, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        terms = dict(self.terms)
        for m, c in other.terms.items():
            v = terms.get(m, 0) + c
            if v != 0:
                terms[m] = v
            else:
                terms.pop(m, None)
        return GradedPoly._raw(self.basis, terms, self.truncated or other.truncated)

    __radd__ = __add__

    def __neg__(self):
        return GradedPoly._raw(self.basis, {m: -c for m, c in self.terms.items()}, self.truncated)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        if self.basis.mode == RATIONAL:
            c = c if isinstance(c, Fraction) else to_scalar(c, RATIONAL)
        else:
            c = float(c)
        if c == 0:
            return GradedPoly._raw(self.basis, {}, self.truncated)
        return GradedPoly._raw(self.basis, {m: c * v for m, v in self.terms.items()}, self.truncated)

    def __mul__(self, other):
        if isinstance(other, GradedPoly):
            return multiply(self, other)
        if isinstance(other, (int, Fraction, float, np.floating, np.integer)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, float, np.floating, np.integer)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, n):
        out = GradedPoly.one(self.basis)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, float)):
            other = GradedPoly.constant(self.basis, other)
        if not isinstance(other, GradedPoly) or other.basis != self.basis:
            return False
        return self.terms == other.terms

    __hash__ = None

    def distance(self, other):
        return (self - other).norm()

    def truncate(self, max_degree):
        """Drop monomials with total exponent above max_degree; flag if anything was dropped."""
        if max_degree is None:
            return self
        kept = {m: c for m, c in self.terms.items() if sum(m) <= max_degree}
        return GradedPoly._raw(self.basis, kept, self.truncated or len(kept) != len(self.terms))

    def drop_constant(self):
        terms = dict(self.terms)
        terms.pop((0,) * self.basis.dim, None)
        return GradedPoly._raw(self.basis, terms, self.truncated)

    def homogeneous_part(self, degree):
        return GradedPoly._raw(self.basis, {m: c for m, c in self.terms.items()
                                            if self.mono_degree(m) == degree}, self.truncated)

    def map_coeffs(self, f):
        return GradedPoly(self.basis, {m: f(c) for m, c in self.terms.items()}, self.truncated)

    def sorted_terms(self):
        """Terms in graded-lex order (total exponent, then exponent tuple)."""
        return sorted(self.terms.items(), key=lambda mc: (sum(mc[0]), mc[0]))

    def to_literal(self, hbar_power=None):
        out = []
        for m, c in self.sorted_terms():
            item = {"coeff": scalar_to_literal(c, self.basis.mode), "exponents": list(m)}
            if hbar_power is not None:
                item["hbar_power"] = hbar_power
            out.append(item)
        return out

    @classmethod
    def from_literal(cls, basis, items):
        out = cls.zero(basis)
        for item in items:
            exps = tuple(int(e) for e in item["exponents"])
            if len(exps) != basis.dim or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {list(exps)} for dimension {basis.dim}")
            if any(exps[i] > 1 for i in basis.odd):
                term = cls.zero(basis)
            else:
                term = cls._raw(basis, {exps: to_scalar(item["coeff"], basis.mode)})
            out = out + term
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            mono = "*".join(f"x{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def _odd_mask(m, odd):
    mask = 0
    for j in odd:
        if m[j]:
            mask |= 1 << j
    return mask


def _mask_sign(ma, mb):
    """Koszul sign from odd-occupation bit masks (coordinate index = bit position)."""
    if ma & mb:
        return 0
    flips = 0
    while mb:
        low = mb & -mb
        flips += bin(ma & ~((low << 1) - 1)).count("1")
        mb ^= low
    return -1 if flips & 1 else 1


def multiply(u, v, max_degree=None):
    """Graded-commutative product with Koszul signs, optionally truncated."""
    u._check(v)
    odd = u.basis.odd
    terms = {}
    dropped = False
    right = [(b, cb, sum(b), _odd_mask(b, odd) if odd else 0) for b, cb in v.terms.items()]
    for a, ca in u.terms.items():
        da = sum(a)
        ma = _odd_mask(a, odd) if odd else 0
        for b, cb, db, mb in right:
            if max_degree is not None and da + db > max_degree:
                dropped = True
                continue
            s = _mask_sign(ma, mb) if mb else 1
            if s == 0:
                continue
            m = tuple(map(_add, a, b))
            c = ca * cb if s > 0 else -(ca * cb)
            terms[m] = terms.get(m, 0) + c
    terms = {m: c for m, c in terms.items() if c != 0}
    return GradedPoly._raw(u.basis, terms, u.truncated or v.truncated or dropped)


def partial(i, u):
    """Left derivative: d_i(x^j m) = delta^j_i m + (-1)^(eps^i eps^j) x^j d_i m."""
    basis = u.basis
    odd_i = basis.degrees[i] % 2
    terms = {}
    for m, c in u.terms.items():
        e = m[i]
        if not e:
            continue
        if odd_i:
            flips = sum(1 for j in basis.odd if j < i and m[j])
            c = -c if flips & 1 else c
        else:
            c = c * e
        n = m[:i] + (e - 1,) + m[i + 1:]
        terms[n] = terms.get(n, 0) + c
    return GradedPoly(basis, terms, u.truncated)


def right_partial(i, u):
    """Right derivative u <-d_i (moves x^i to the right end before removing it)."""
    basis = u.basis
    odd_i = basis.degrees[i] % 2
    terms = {}
    for m, c in u.terms.items():
        e = m[i]
        if not e:
            continue
        if odd_i:
            flips = sum(1 for j in basis.odd if j > i and m[j])
            c = -c if flips & 1 else c
        else:
            c = c * e
        n = m[:i] + (e - 1,) + m[i + 1:]
        terms[n] = terms.get(n, 0) + c
    return GradedPoly(basis, terms, u.truncated)


def monomials(basis, max_poly_degree, min_poly_degree=0, degree=None):
    """All canonical monomials with total exponent in the given range (and grading, if given)."""
    n = basis.dim
    odd = set(basis.odd)
    out = []
    for total in range(min_poly_degree, max_poly_degree + 1):
        for combo in combinations_with_replacement(range(n), total):
            m = [0] * n
            for i in combo:
                m[i] += 1
            if any(m[i] > 1 for i in odd):
                continue
            m = tuple(m)
            if degree is not None and sum(e * d for e, d in zip(m, basis.degrees)) != degree:
                continue
            out.append(m)
    return out


def random_poly(basis, rng, degree, max_poly_degree=3, n_terms=3, low=-3, high=3, min_poly_degree=0):
    """Random homogeneous polynomial of the given grading with small integer coefficients."""
    pool = monomials(basis, max_poly_degree, min_poly_degree, degree)
    if not pool:
        return GradedPoly.zero(basis)
    terms = {}
    for _ in range(n_terms):
        m = pool[rng.randrange(len(pool))]
        c = rng.randint(low, high)
        terms[m] = terms.get(m, 0) + to_scalar(c, basis.mode)
    return GradedPoly(basis, terms)


def linear_form(basis, coeffs):
    """sum_i coeffs[i] x^i."""
    out = GradedPoly.zero(basis)
    for i, c in enumerate(coeffs):
        if c != 0:
            out = out + GradedPoly.coordinate(basis, i).scale(c)
    return out


class HbarSeries:
    """Truncated series sum_g hbar^g c_g, g = 0..K."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis, coeffs, order=None):
        coeffs = list(coeffs)
        if order is None:
            order = max(len(coeffs) - 1, 0)
        if len(coeffs) > order + 1:
            coeffs = coeffs[:order + 1]
        coeffs += [GradedPoly.zero(basis)] * (order + 1 - len(coeffs))
        for c in coeffs:
            if c.basis != basis:
                raise ValueError("series coefficients live on a different basis")
        self.basis = basis
        self.coeffs = tuple(coeffs)

    @classmethod
    def zero(cls, basis, order=DEFAULT_HBAR_ORDER):
        return cls(basis, [], order)

    @classmethod
    def from_poly(cls, poly, order=DEFAULT_HBAR_ORDER, power=0):
        coeffs = [GradedPoly.zero(poly.basis)] * (order + 1)
        if power <= order:
            coeffs[power] = poly
        return cls(poly.basis, coeffs, order)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def truncated(self):
        return any(c.truncated for c in self.coeffs)

    def __getitem__(self, g):
        return self.coeffs[g]

    def _check(self, other):
        if other.basis != self.basis or other.order != self.order:
            raise ValueError("hbar series with different bases or truncation orders")

    def __add__(self, other):
        if isinstance(other, GradedPoly):
            other = HbarSeries.from_poly(other, self.order)
        self._check(other)
        return HbarSeries(self.basis, [a + b for a, b in zip(self.coeffs, other.coeffs)], self.order)

    __radd__ = __add__

    def __neg__(self):
        return HbarSeries(self.basis, [-a for a in self.coeffs], self.order)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return HbarSeries(self.basis, [a.scale(c) for a in self.coeffs], self.order)

    def __mul__(self, other):
        if isinstance(other, HbarSeries):
            return self.cauchy(other, multiply)
        if isinstance(other, GradedPoly):
            return self.map(lambda a: multiply(a, other))
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, GradedPoly):
            return self.map(lambda a: multiply(other, a))
        return self.scale(other)

    def cauchy(self, other, op):
        """sum_{g+h=k} op(self_g, other_h), truncated at the common order."""
        self._check(other)
        K = self.order
        out = [GradedPoly.zero(self.basis) for _ in range(K + 1)]
        for g, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for h in range(K + 1 - g):
                b = other.coeffs[h]
                if not b.is_zero():
                    out[g + h] = out[g + h] + op(a, b)
        return HbarSeries(self.basis, out, K)

    def map(self, f):
        return HbarSeries(self.basis, [f(a) for a in self.coeffs], self.order)

    def shift(self, k=1):
        """Multiply by hbar^k."""
        z = [GradedPoly.zero(self.basis)] * k
        return HbarSeries(self.basis, z + list(self.coeffs[:self.order + 1 - k]), self.order)

    def truncate(self, max_degree):
        return self.map(lambda a: a.truncate(max_degree))

    def norm(self):
        return max(a.norm() for a in self.coeffs)

    def is_zero(self):
        return all(a.is_zero() for a in self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, HbarSeries):
            return False
        return self.basis == other.basis and self.coeffs == other.coeffs

    __hash__ = None

    def to_literal(self):
        out = []
        for g, a in enumerate(self.coeffs):
            out.extend(a.to_literal(hbar_power=g))
        return out

    @classmethod
    def from_literal(cls, basis, items, order=DEFAULT_HBAR_ORDER):
        buckets = [[] for _ in range(order + 1)]
        for item in items:
            g = int(item.get("hbar_power", 0))
            if g < 0:
                raise ValueError("negative hbar power")
            if g <= order:
                buckets[g].append(item)
        return cls(basis, [GradedPoly.from_literal(basis, b) for b in buckets], order)

    def __repr__(self):
        return " + ".join(f"hbar^{g}[{a!r}]" for g, a in enumerate(self.coeffs) if a)


class FlowMap:
    """Algebra morphism x^i -> images[i], truncated at polynomial degree max_degree,
    with a logarithmic Jacobian (a degree-0 polynomial)."""

    __slots__ = ("basis", "images", "max_degree", "log_jacobian", "truncated")

    def __init__(self, basis, images, max_degree=DEFAULT_MAX_DEGREE, log_jacobian=None,
                 truncated=False):
        images = tuple(images)
        if len(images) != basis.dim:
            raise ValueError("need one image per coordinate")
        for i, im in enumerate(images):
            if im.basis != basis:
                raise ValueError("image on a different basis")
            if im and im.degrees() != {basis.degrees[i]}:
                raise ValueError(f"image of x^{i} is not homogeneous of degree {basis.degrees[i]}")
        if log_jacobian is None:
            log_jacobian = GradedPoly.zero(basis)
        if log_jacobian and log_jacobian.degrees() != {0}:
            raise ValueError("logarithmic Jacobian must have degree 0")
        self.basis = basis
        self.images = images
        self.max_degree = max_degree
        self.log_jacobian = log_jacobian
        self.truncated = truncated or any(im.truncated for im in images)

    @classmethod
    def identity(cls, basis, max_degree=DEFAULT_MAX_DEGREE):
        return cls(basis, [GradedPoly.coordinate(basis, i) for i in range(basis.dim)], max_degree)

    @classmethod
    def linear(cls, basis, M, max_degree=DEFAULT_MAX_DEGREE, log_jacobian=None):
        """x^i -> sum_j M[i, j] x^j (M must commute with the grading)."""
        M = np.asarray(M.entries if hasattr(M, "entries") else M)
        images = [linear_form(basis, M[i]) for i in range(basis.dim)]
        return cls(basis, images, max_degree, log_jacobian)

    def linear_part(self):
        n = self.basis.dim
        M = np.empty((n, n), dtype=object if self.basis.mode == RATIONAL else float)
        zero = to_scalar(0, self.basis.mode)
        for i, im in enumerate(self.images):
            for j in range(n):
                e = [0] * n
                e[j] = 1
                M[i, j] = im.terms.get(tuple(e), zero)
        return M

    def is_linear(self):
        return all(all(sum(m) == 1 for m in im.terms) for im in self.images)

    def with_jacobian(self, r):
        return FlowMap(self.basis, self.images, self.max_degree, r, self.truncated)

    def apply(self, u):
        """Substitute the coordinate images into u (GradedPoly or HbarSeries)."""
        if isinstance(u, HbarSeries):
            return u.map(self.apply)
        if u.basis != self.basis:
            raise ValueError("flow map and polynomial live on different bases")
        D = self.max_degree
        powers = [[GradedPoly.one(self.basis)] for _ in range(self.basis.dim)]

        def power(i, e):
            ps = powers[i]
            while len(ps) <= e:
                ps.append(multiply(ps[-1], self.images[i], D))
            return ps[e]

        acc_terms = {}
        dropped = self.truncated or u.truncated
        for m, c in u.terms.items():
            term = GradedPoly.constant(self.basis, c)
            for i, e in enumerate(m):
                if e:
                    term = multiply(term, power(i, e), D)
                    if not term:
                        break
            dropped = dropped or term.truncated
            for k, v in term.terms.items():
                acc_terms[k] = acc_terms.get(k, 0) + v
        return GradedPoly(self.basis, acc_terms, dropped)

    __call__ = apply

    def compose(self, other):
        """self o other: x^i -> self(other.images[i]);  r = r_self + self(r_other)."""
        if other.basis != self.basis:
            raise ValueError("flow maps live on different bases")
        D = min(self.max_degree, other.max_degree)
        images = [self.apply(im).truncate(D) for im in other.images]
        r = self.log_jacobian + self.apply(other.log_jacobian)
        return FlowMap(self.basis, images, D, r, self.truncated or other.truncated)

    def inverse(self):
        """Inverse morphism (to degree max_degree) with Jacobian r_inv = -inv(r)."""
        n = self.basis.dim
        L = self.linear_part()
        for im in self.images:
            if im.constant_term() != 0:
                raise ValueError("flow map with constant image terms is not invertible here")
        try:
            Linv = _inverse(L, self.basis.mode)
        except (ValueError, np.linalg.LinAlgError):
            raise ValueError("flow map has a non-invertible linear part") from None
        lin = FlowMap.linear(self.basis, Linv, self.max_degree)
        # nonlinear remainder N = phi - L; psi = L^-1 (x - N(psi))
        nonlin = [GradedPoly(self.basis, {m: c for m, c in im.terms.items() if sum(m) > 1})
                  for im in self.images]
        psi = lin
        if any(nonlin):
            for _ in range(self.max_degree):
                corr = [psi.apply(p) for p in nonlin]
                target = [GradedPoly.coordinate(self.basis, i) - corr[i] for i in range(n)]
                images = []
                for i in range(n):
                    acc = GradedPoly.zero(self.basis)
                    for j in range(n):
                        if Linv[i, j] != 0:
                            acc = acc + target[j].scale(Linv[i, j])
                    images.append(acc.truncate(self.max_degree))
                psi = FlowMap(self.basis, images, self.max_degree)
        r = -psi.apply(self.log_jacobian)
        return FlowMap(self.basis, psi.images, self.max_degree, r, self.truncated or psi.truncated)

    def distance(self, other, modulo_constants=True):
        """Max coefficient difference of images, and of Jacobians (mod constants by default)."""
        d = max((a - b).norm() for a, b in zip(self.images, other.images))
        dr = self.log_jacobian - other.log_jacobian
        if modulo_constants:
            dr = dr.drop_constant()
        return max(d, dr.norm())

    def __repr__(self):
        return f"FlowMap(images={list(self.images)}, r={self.log_jacobian!r})"


def apply_flow(phi, u):
    return phi.apply(u)


def compose_flows(phi, psi):
    return phi.compose(psi)


__all__ = [
    "GradedPoly", "HbarSeries", "FlowMap", "multiply", "partial", "right_partial", "apply_flow",
    "compose_flows", "monomials", "random_poly", "linear_form", "mono_mul_sign",
    "DEFAULT_MAX_DEGREE", "DEFAULT_HBAR_ORDER",
]
