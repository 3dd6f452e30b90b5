"""gl(1|1) structures and the free RG models they drive.

Axioms are checked in the form consistent with the entry-degree convention of
``Endomorphism``: for a homogeneous A, [F, A] = -|A| A, so the Euler relations read
[F, Q] = -Q and [F, Qbar] = Qbar (see the decisions ledger).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .algebra import GradedPoly, FlowMap, DEFAULT_MAX_DEGREE
from .bv import (DeformedLaplacian, quadratic_form, pairing_derivation, coordinate_action,
                 qme_residual, laplacian, bracket)
from .linear import (GradedBasis, Endomorphism, RATIONAL, F64, commutator, transpose, euler,
                     symmetric_part, antisymmetric_part,
                     graded_trace, matrix_exp, is_nilpotent, scalar_to_literal, to_scalar,
                     random_endomorphism, max_abs)

DEFAULT_LAYOUTS = {
    2: (-1, 0),
    4: (-1, -1, 0, 0),
    6: (-1, -1, -1, 0, 0, 0),
}

AXIOMS = (
    "[Q,Q]=0", "[Qbar,Qbar]=0", "[Q,Qbar]=H", "[Q,H]=0", "[Qbar,H]=0",
    "[F,Q]=-Q", "[F,Qbar]=Qbar", "[F,H]=0",
    "Q~=Q", "Qbar~=-Qbar", "H~=-H", "F~=F+1",
)
TRACES = ("grtr Q=0", "grtr Qbar=0", "grtr H=0")


class FixtureError(ValueError):
    """Invalid gl(1|1) fixture; the message names the violated invariant."""


@dataclass(frozen=True)
class Gl11Structure:
    Q: Endomorphism
    Qbar: Endomorphism
    H: Endomorphism
    F: Endomorphism

    def __post_init__(self):
        for name, op, deg in (("Q", self.Q, 1), ("Qbar", self.Qbar, -1), ("H", self.H, 0),
                              ("F", self.F, 0)):
            if op.degree != deg and not op.is_zero():
                raise FixtureError(f"{name} must have degree {deg}, got {op.degree}")
        if len({self.Q.basis, self.Qbar.basis, self.H.basis, self.F.basis}) != 1:
            raise FixtureError("Q, Qbar, H, F must share one basis")

    @property
    def basis(self):
        return self.Q.basis

    @classmethod
    def zero(cls, basis):
        return cls(Endomorphism.zero(basis, 1), Endomorphism.zero(basis, -1),
                   Endomorphism.zero(basis, 0), euler(basis))

    @classmethod
    def from_pair(cls, Q, Qbar):
        return cls(Q, Qbar, commutator(Q, Qbar), euler(Q.basis))

    def anticommutator(self):
        """{Qbar, Q} := Qbar Q - Q Qbar, taken literally."""
        return self.Qbar @ self.Q - self.Q @ self.Qbar

    def with_mode(self, mode):
        b = self.basis.with_mode(mode)

        def conv(A):
            return Endomorphism(b, A.degree, [[to_scalar(v if mode == F64 else Fraction(v), mode)
                                               for v in row] for row in A.entries])
        return Gl11Structure(conv(self.Q), conv(self.Qbar), conv(self.H), euler(b))


def _axiom_residuals(s):
    one = Endomorphism.identity(s.basis)
    Q, Qb, H, F = s.Q, s.Qbar, s.H, s.F
    pairs = {
        "[Q,Q]=0": (commutator(Q, Q), None),
        "[Qbar,Qbar]=0": (commutator(Qb, Qb), None),
        "[Q,Qbar]=H": (commutator(Q, Qb), H),
        "[Q,H]=0": (commutator(Q, H), None),
        "[Qbar,H]=0": (commutator(Qb, H), None),
        "[F,Q]=-Q": (commutator(F, Q), -Q),
        "[F,Qbar]=Qbar": (commutator(F, Qb), Qb),
        "[F,H]=0": (commutator(F, H), None),
        "Q~=Q": (transpose(Q), Q),
        "Qbar~=-Qbar": (transpose(Qb), -Qb),
        "H~=-H": (transpose(H), -H),
        "F~=F+1": (transpose(F), F + one),
    }
    out = {}
    for name, (lhs, rhs) in pairs.items():
        out[name] = lhs.norm() if rhs is None else max_abs(lhs.entries - rhs.entries)
    out["grtr Q=0"] = abs(float(graded_trace(Q)))
    out["grtr Qbar=0"] = abs(float(graded_trace(Qb)))
    out["grtr H=0"] = abs(float(graded_trace(H)))
    return out


def validate_gl11(s, axioms=None, tol=None):
    """Per-axiom residuals; pass iff all are 0 (rational) or <= 1e-12 (float).

    ``axioms`` restricts the check to a subset of names from AXIOMS + TRACES.
    Returns {"checks": {name: {"residual", "tolerance", "pass"}}, "pass": bool, "failed": [...]}.
    """
    if tol is None:
        tol = 0.0 if s.basis.mode == RATIONAL else 1e-12
    res = _axiom_residuals(s)
    names = list(AXIOMS + TRACES) if axioms is None else list(axioms)
    unknown = [n for n in names if n not in res]
    if unknown:
        raise ValueError(f"unknown axioms {unknown}")
    checks = {}
    for n in names:
        checks[n] = {"residual": res[n], "tolerance": tol, "pass": res[n] <= tol}
    failed = [n for n in names if not checks[n]["pass"]]
    return {"checks": checks, "pass": not failed, "failed": failed}


@dataclass(frozen=True)
class FreeModel:
    structure: Gl11Structure

    def __post_init__(self):
        if self.structure.F != euler(self.structure.basis):
            raise FixtureError("F must equal the Euler endomorphism of the basis")

    @property
    def basis(self):
        return self.structure.basis

    @property
    def Q(self):
        return self.structure.Q

    @property
    def Qbar(self):
        return self.structure.Qbar

    @property
    def H(self):
        return self.structure.H

    def with_mode(self, mode):
        return FreeModel(self.structure.with_mode(mode))

    def exp_H(self, tau):
        """e^(tau H)."""
        return matrix_exp(self.H, tau)


# -- fixtures ------------------------------------------------------------------------

def _matrix_literal(A):
    return [[scalar_to_literal(v, A.basis.mode) for v in row] for row in A.entries]


def fixture_dict(s):
    b = s.basis
    return {
        "degrees": list(b.degrees),
        "omega": [[scalar_to_literal(v, b.mode) for v in row] for row in b.omega],
        "Q": _matrix_literal(s.Q),
        "Qbar": _matrix_literal(s.Qbar),
        "H": _matrix_literal(s.H),
    }


def dump_fixture(s):
    """Canonical JSON text of a structure (byte-stable in rational mode), one matrix row
    per line."""
    data = fixture_dict(s)
    lines = []
    for key in sorted(data):
        val = data[key]
        if val and isinstance(val[0], list):
            rows = ",\n".join("    " + json.dumps(r) for r in val)
            lines.append(f"  {json.dumps(key)}: [\n{rows}\n  ]")
        else:
            lines.append(f"  {json.dumps(key)}: {json.dumps(val)}")
    return "{\n" + ",\n".join(lines) + "\n}\n"


def structure_from_dict(data, mode=RATIONAL, validate=True):
    for key in ("degrees", "omega", "Q", "Qbar", "H"):
        if key not in data:
            raise FixtureError(f"fixture is missing field {key!r}")
    try:
        b = GradedBasis(data["degrees"], data["omega"], mode)
    except (ValueError, TypeError) as exc:
        raise FixtureError(f"invalid basis: {exc}") from None
    try:
        Q = Endomorphism(b, 1, data["Q"])
        Qb = Endomorphism(b, -1, data["Qbar"])
        H = Endomorphism(b, 0, data["H"])
    except (ValueError, TypeError) as exc:
        raise FixtureError(f"invalid endomorphism: {exc}") from None
    s = Gl11Structure(Q, Qb, H, euler(b))
    if validate:
        rep = validate_gl11(s)
        if not rep["pass"]:
            raise FixtureError(f"gl(1|1) axioms violated: {', '.join(rep['failed'])}")
    return s


def load_fixture(path, mode=RATIONAL, validate=True):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from None
    return FreeModel(structure_from_dict(data, mode, validate))


FIXTURE_DIR = Path(__file__).with_name("fixtures")


def shipped_fixture(name, mode=RATIONAL):
    """Load one of the packaged fixtures: 'dim2', 'dim4-nilpotent', 'dim4', ..."""
    return load_fixture(FIXTURE_DIR / f"gl11_{name}.json", mode)


# -- sampler --------------------------------------------------------------------------

def sample_gl11(dim, seed=0, mode=RATIONAL, nilpotent=None, degrees=None, budget=20000):
    """Randomized search for a valid gl(1|1) structure with nonzero Q, Qbar, H.

    Candidates are Q = (R + R~)/2 and Qbar = (R' - R'~)/2 for random small-integer R, R' of
    degrees 1 and -1, so the transposition axioms hold by construction; H = [Q, Qbar]
    and every axiom is then checked.  ``nilpotent`` = True/False demands a
    nilpotent/non-nilpotent H; None accepts either.  Deterministic per seed.
    """
    if degrees is None:
        if dim not in DEFAULT_LAYOUTS:
            raise ValueError(f"dimension {dim} not supported (choose from {sorted(DEFAULT_LAYOUTS)}"
                             "; odd dimensions cannot carry a degree -1 pairing)")
        degrees = DEFAULT_LAYOUTS[dim]
    if len(degrees) != dim:
        raise ValueError("degree layout does not match dimension")
    if dim % 2:
        raise ValueError(f"dimension {dim} is odd: coordinates cannot be paired")
    basis = GradedBasis.standard(degrees, RATIONAL)
    rng = random.Random(seed)
    for _ in range(budget):
        R = random_endomorphism(basis, 1, rng, -1, 1, density=0.6)
        Rb = random_endomorphism(basis, -1, rng, -1, 1, density=0.6)
        Q = symmetric_part(R)
        Qb = antisymmetric_part(Rb)
        if Q.is_zero() or Qb.is_zero():
            continue
        s = Gl11Structure.from_pair(Q, Qb)
        if s.H.is_zero():
            continue
        nil = is_nilpotent(s.H)
        if nilpotent is not None and nil != nilpotent:
            continue
        if not validate_gl11(s)["pass"]:
            continue
        return s.with_mode(mode) if mode != RATIONAL else s
    raise RuntimeError(f"gl(1|1) search exhausted its budget of {budget} candidates")


# -- free basic model ----------------------------------------------------------------------

def free_laplacian(m, t):
    """Delta^0_t = Delta_{e^{-tH}}."""
    return DeformedLaplacian(m.exp_H(-m.basis.scalar(t)))


def free_flow_matrix(m, s, t):
    """Coordinate substitution matrix of chi^0_{t,s} = exp((t-s)/2 <x, H ad x>)."""
    b = m.basis
    N = Endomorphism(b, 0, coordinate_action(m.H))
    return matrix_exp(N, (b.scalar(t) - b.scalar(s)) * b.scalar(Fraction(1, 2)))


def free_flow(m, s, t, max_degree=DEFAULT_MAX_DEGREE):
    """chi^0_{t,s} as a linear FlowMap with zero Jacobian."""
    return FlowMap.linear(m.basis, free_flow_matrix(m, s, t), max_degree)


def free_action(m, t):
    """S^0_t = -1/2 <x, Q e^{tH} x>."""
    b = m.basis
    return quadratic_form(m.Q @ m.exp_H(b.scalar(t))).scale(b.scalar(Fraction(-1, 2)))


def free_action_rate(m, t):
    """Exact dS^0_t/dt = -1/2 <x, Q H e^{tH} x>."""
    b = m.basis
    return quadratic_form(m.Q @ m.H @ m.exp_H(b.scalar(t))).scale(b.scalar(Fraction(-1, 2)))


def free_rge_residual(m, t, h=None):
    """dS^0/dt - 1/2 <x, H (x, S^0)_E>; exact derivative unless a finite-difference step h is given."""
    b = m.basis
    S = free_action(m, t)
    rhs = pairing_derivation(m.H, S).scale(b.scalar(Fraction(1, 2)))
    return (_rate(lambda tau: free_action(m, tau), t, h, lambda: free_action_rate(m, t), b) - rhs).norm()


def _rate(fn, t, h, exact, basis):
    if h is None:
        return exact()
    h = basis.scalar(h)
    t = basis.scalar(t)
    return (fn(t + h) - fn(t - h)).scale(1 / (2 * h) if basis.mode != RATIONAL else Fraction(1) / (2 * h))


def free_family(m, grid, fd_step=1e-4, max_degree=DEFAULT_MAX_DEGREE):
    """The free BV flow (chi^0_{t,s}, Delta^0_t) as a FlowFamily on the grid."""
    from .flows import FlowFamily
    return FlowFamily(lambda t, s: free_flow(m, s, t, max_degree), lambda t: free_laplacian(m, t),
                      list(grid), fd_step, m.basis)


def free_generator(m):
    """chi^0._t = 1/2 <x, H ad x> with r. = 0, as a reconstruct_flow generator."""
    from .flows import Generator
    N = Endomorphism(m.basis, 0, coordinate_action(m.H)).entries * m.basis.scalar(Fraction(1, 2))
    return lambda tau: Generator(linear=N)


# -- extended model ------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtendedElement:
    """theta-component pair  body + theta * soul."""

    body: object
    soul: object


def odd_deformer(m, t):
    """Qbar e^{-tH}."""
    return m.Qbar @ m.exp_H(-m.basis.scalar(t))


def extended_family(m, t):
    """(Delta^0_t, Delta^{0*}_t, S^0_{t theta}) with Delta^{0*}_t = Delta_{Qbar e^{-tH}} and
    S^{0*}_t = -1/4 <x, {Qbar,Q} e^{tH} x>."""
    b = m.basis
    body = free_laplacian(m, t)
    soul = DeformedLaplacian(odd_deformer(m, t))
    S = free_action(m, t)
    Sstar = quadratic_form(m.structure.anticommutator() @ m.exp_H(b.scalar(t))).scale(
        b.scalar(Fraction(-1, 4)))
    return body, soul, ExtendedElement(S, Sstar)


def extended_bracket(u, v, m, t):
    """(u, v)^0_{t theta} componentwise: body (u,v)_{e^{-tH}}, soul (-1)^{|u|} (u,v)_{Qbar e^{-tH}}."""
    body, soul, _ = extended_family(m, t)
    s = soul.bracket(u, v)
    return ExtendedElement(body.bracket(u, v), -s if u.degree % 2 else s)


def extended_me_residuals(m, t):
    """Norms of the two component equations of the extended master equation:
    (i)  Delta^0 S^0 + 1/2 (S^0, S^0)^0
    (ii) Delta^{0*} S^0 - Delta^0 S^{0*} + 1/2 (S^0, S^0)^{0*} - (S^0, S^{0*})^0."""
    body, soul, S = extended_family(m, t)
    half = m.basis.scalar(Fraction(1, 2))
    r1 = qme_residual(S.body, body)
    r2 = soul(S.body) - body(S.soul) + soul.bracket(S.body, S.body).scale(half) \
        - body.bracket(S.body, S.soul)
    return r1.norm(), r2.norm()


def soul_from_flow(m, s):
    """chi^{0*} S^0_s with chi^{0*} = 1/2 <x, Qbar ad x>."""
    b = m.basis
    return pairing_derivation(m.Qbar, free_action(m, s)).scale(b.scalar(Fraction(1, 2)))


def polchinski_rhs(m, t):
    """-Delta_{Qbar e^{-tH}} S^0 - 1/2 (S^0,S^0)_{Qbar e^{-tH}} - 1/2 grtr(Qbar Q)."""
    b = m.basis
    A = odd_deformer(m, t)
    S = free_action(m, t)
    half = b.scalar(Fraction(1, 2))
    c = graded_trace(m.Qbar @ m.Q) * half
    return -laplacian(S, A) - bracket(S, S, A).scale(half) - GradedPoly.constant(b, c)


def polchinski_residual(m, t, h=None):
    """|dS^0/dt - polchinski_rhs|; finite difference with step h, exact when h is None."""
    b = m.basis
    rate = _rate(lambda tau: free_action(m, tau), t, h, lambda: free_action_rate(m, t), b)
    return (rate - polchinski_rhs(m, t)).norm()


__all__ = [
    "Gl11Structure", "FreeModel", "FixtureError", "AXIOMS", "TRACES", "validate_gl11",
    "fixture_dict", "dump_fixture", "structure_from_dict", "load_fixture", "shipped_fixture",
    "sample_gl11", "free_laplacian", "free_flow", "free_flow_matrix", "free_action",
    "free_action_rate", "free_family", "free_generator", "free_rge_residual", "ExtendedElement", "odd_deformer",
    "extended_family", "extended_bracket", "extended_me_residuals", "soul_from_flow",
    "polchinski_rhs", "polchinski_residual", "DEFAULT_LAYOUTS",
]
