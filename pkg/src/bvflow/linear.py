"""Graded vector spaces with a degree -1 symplectic pairing and their endomorphisms.

Everything here is generic over the scalar mode: ``"rational"`` stores
``fractions.Fraction`` entries in object arrays, ``"f64"`` stores float64.
"""

from __future__ import annotations

from fractions import Fraction
from math import ceil, log2

import numpy as np

RATIONAL = "rational"
F64 = "f64"
MODES = (RATIONAL, F64)


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown scalar mode {mode!r}; expected one of {MODES}")
    return mode


def to_scalar(value, mode):
    """Coerce a literal (int, Fraction, 'p/q' string, float) into the mode's scalar type."""
    if mode == RATIONAL:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, (bool, np.bool_)):
            raise TypeError("boolean is not a scalar")
        if isinstance(value, (int, np.integer)):
            return Fraction(int(value))
        if isinstance(value, str):
            return Fraction(value.strip())
        if isinstance(value, (float, np.floating)):
            f = float(value)
            if f.is_integer():
                return Fraction(int(f))
            raise ValueError(f"float {value!r} in rational mode; write it as a 'p/q' string")
        raise TypeError(f"cannot read {value!r} as a rational")
    check_mode(mode)
    if isinstance(value, str):
        return float(Fraction(value.strip()))
    return float(value)


def scalar_to_literal(value, mode):
    """Inverse of to_scalar for serialization: 'p/q' strings or plain floats."""
    if mode == RATIONAL:
        value = Fraction(value)
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return float(value)


def as_matrix(rows, mode, n=None):
    """Build an n x n matrix of mode scalars from nested lists or an array."""
    arr = np.asarray(rows, dtype=object)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"matrix has dimension {arr.shape[0]}, basis has {n}")
    if mode == RATIONAL:
        out = np.empty(arr.shape, dtype=object)
        for idx, v in np.ndenumerate(arr):
            out[idx] = to_scalar(v, mode)
        return out
    return np.array([[to_scalar(v, mode) for v in row] for row in arr], dtype=float)


def zeros(n, mode):
    if mode == RATIONAL:
        out = np.empty((n, n), dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros((n, n))


def eye(n, mode):
    out = zeros(n, mode)
    one = Fraction(1) if mode == RATIONAL else 1.0
    for i in range(n):
        out[i, i] = one
    return out


def max_abs(arr):
    if arr.size == 0:
        return 0.0
    return max(abs(float(v)) for v in arr.flat)


def _inverse(m, mode):
    n = m.shape[0]
    if mode == F64:
        return np.linalg.inv(m)
    a = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise ValueError("matrix is singular")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = a[i][n + j]
    return out


class GradedBasis:
    """Coordinates x^i of degree eps^i together with the pairing matrix omega_ij."""

    __slots__ = ("degrees", "omega", "omega_inv", "mode", "odd", "_key")

    def __init__(self, degrees, omega, mode=RATIONAL):
        check_mode(mode)
        degrees = tuple(int(d) for d in degrees)
        n = len(degrees)
        if n == 0:
            raise ValueError("basis must have at least one coordinate")
        omega = as_matrix(omega, mode, n)
        for i in range(n):
            for j in range(n):
                if omega[i, j] != 0 and degrees[i] + degrees[j] + 1 != 0:
                    raise ValueError(
                        f"omega[{i},{j}] is nonzero but eps^{i} + eps^{j} + 1 = "
                        f"{degrees[i] + degrees[j] + 1} (degree -1 pairing violated)")
                if omega[i, j] != -omega[j, i]:
                    raise ValueError(f"omega is not antisymmetric at ({i},{j})")
        for d in set(degrees):
            if degrees.count(d) != degrees.count(-1 - d):
                raise ValueError(f"degree {d} occurs {degrees.count(d)} times but degree "
                                 f"{-1 - d} occurs {degrees.count(-1 - d)} times")
        try:
            inv = _inverse(omega, mode)
        except (ValueError, np.linalg.LinAlgError):
            raise ValueError("omega is singular") from None
        err = max_abs(omega @ inv - eye(n, mode))
        if (mode == RATIONAL and err != 0) or err > 1e-13:
            raise ValueError(f"omega * omega_inv deviates from identity by {err}")
        omega.flags.writeable = False
        inv.flags.writeable = False
        self.degrees = degrees
        self.omega = omega
        self.omega_inv = inv
        self.mode = mode
        self.odd = tuple(i for i, d in enumerate(degrees) if d % 2)
        self._key = (degrees, mode, tuple(map(str, omega.flat)))

    @classmethod
    def standard(cls, degrees, mode=RATIONAL):
        """Pair the k-th coordinate of degree e with the k-th one of degree -1-e (omega = +1)."""
        degrees = tuple(int(d) for d in degrees)
        n = len(degrees)
        omega = zeros(n, mode)
        one = to_scalar(1, mode)
        for d in sorted(set(degrees)):
            if d > -1 - d:
                continue
            left = [i for i, e in enumerate(degrees) if e == d]
            right = [i for i, e in enumerate(degrees) if e == -1 - d]
            if len(left) != len(right):
                raise ValueError(f"cannot pair degree {d} with degree {-1 - d}")
            for i, j in zip(left, right):
                omega[i, j] = one
                omega[j, i] = -one
        return cls(degrees, omega, mode)

    @property
    def dim(self):
        return len(self.degrees)

    def parity(self, i):
        return self.degrees[i] % 2

    def dual_degree(self, i):
        """eps_i = -eps^i - 1, the degree of x_i."""
        return -self.degrees[i] - 1

    def with_mode(self, mode):
        if mode == self.mode:
            return self
        return GradedBasis(self.degrees, [[to_scalar(v if mode == F64 else Fraction(v), mode)
                                           for v in row] for row in self.omega], mode)

    def scalar(self, value):
        return to_scalar(value, self.mode)

    def __eq__(self, other):
        return isinstance(other, GradedBasis) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"GradedBasis(degrees={self.degrees}, mode={self.mode!r})"


class Endomorphism:
    """Homogeneous endomorphism of degree p: entries A[i, j] vanish unless eps^j = eps^i + p."""

    __slots__ = ("basis", "degree", "entries")

    def __init__(self, basis, degree, entries):
        degree = int(degree)
        entries = as_matrix(entries, basis.mode, basis.dim) if not _is_mode_array(entries, basis) \
            else entries.copy()
        eps = basis.degrees
        for (i, j), v in np.ndenumerate(entries):
            if v != 0 and eps[j] != eps[i] + degree:
                raise ValueError(f"entry ({i},{j}) is nonzero but eps^{j} - eps^{i} = "
                                 f"{eps[j] - eps[i]} != degree {degree}")
        entries.flags.writeable = False
        self.basis = basis
        self.degree = degree
        self.entries = entries

    @classmethod
    def identity(cls, basis):
        return cls(basis, 0, eye(basis.dim, basis.mode))

    @classmethod
    def zero(cls, basis, degree=0):
        return cls(basis, degree, zeros(basis.dim, basis.mode))

    @property
    def parity(self):
        return self.degree % 2

    def _check(self, other):
        if not isinstance(other, Endomorphism):
            return NotImplemented
        if other.basis != self.basis:
            raise ValueError("endomorphisms live on different bases")
        return True

    def _same_degree(self, other):
        if other.degree != self.degree and not (self.is_zero() or other.is_zero()):
            raise ValueError(f"cannot add endomorphisms of degrees {self.degree} and {other.degree}")
        return self.degree if not self.is_zero() else other.degree

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Endomorphism(self.basis, self._same_degree(other), self.entries + other.entries)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Endomorphism(self.basis, self._same_degree(other), self.entries - other.entries)

    def __neg__(self):
        return Endomorphism(self.basis, self.degree, -self.entries)

    def __mul__(self, c):
        if isinstance(c, Endomorphism):
            return NotImplemented
        return Endomorphism(self.basis, self.degree, self.entries * self.basis.scalar(c))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Endomorphism(self.basis, self.degree + other.degree, self.entries @ other.entries)

    def __eq__(self, other):
        if not isinstance(other, Endomorphism) or other.basis != self.basis:
            return False
        if self.is_zero() and other.is_zero():
            return True
        return self.degree == other.degree and bool(np.all(self.entries == other.entries))

    __hash__ = None

    def is_zero(self):
        return not np.any(self.entries != 0)

    def norm(self):
        return max_abs(self.entries)

    def distance(self, other):
        return max_abs(self.entries - other.entries)

    def nonzero(self):
        """List of (i, j, value) for the nonzero entries, row-major."""
        return [(i, j, v) for (i, j), v in np.ndenumerate(self.entries) if v != 0]

    def __repr__(self):
        return f"Endomorphism(degree={self.degree}, entries={self.entries.tolist()})"


def _is_mode_array(entries, basis):
    if not isinstance(entries, np.ndarray) or entries.shape != (basis.dim, basis.dim):
        return False
    if basis.mode == F64:
        return entries.dtype == float
    return entries.dtype == object and all(isinstance(v, Fraction) for v in entries.flat)


def _same_basis(A, B):
    if A.basis != B.basis:
        raise ValueError("dimension/basis mismatch between endomorphisms")


def graded_trace(A):
    """grtr A = sum_i (-1)^((p+1) eps^i) A^i_i."""
    total = A.basis.scalar(0)
    for i, e in enumerate(A.basis.degrees):
        a = A.entries[i, i]
        if a != 0:
            total += -a if ((A.degree + 1) * e) % 2 else a
    return total


def _transpose_signs(basis, p):
    # sign (-1)^(p(eps^i + eps_j) + eps^i eps_j) of the dual-basis component formula
    eps = basis.degrees
    n = basis.dim
    s = np.empty((n, n), dtype=object if basis.mode == RATIONAL else float)
    for i in range(n):
        for j in range(n):
            ej = -eps[j] - 1
            s[i, j] = -1 if (p * (eps[i] + ej) + eps[i] * ej) % 2 else 1
    return s


def transpose(A):
    """Symplectic transpose A~.

    In the symplectic dual bases a^i = a_k w^{ki}, a*_j = -w_jl a*^l the transpose has
    components (-1)^(p(eps^i + eps_j) + eps^i eps_j) A^j_i; converting back to the
    coordinate basis gives  A~ = -w^{-1} (S o A^T) w.
    """
    b = A.basis
    s = _transpose_signs(b, A.degree)
    inner = s * A.entries.T
    return Endomorphism(b, A.degree, -(b.omega_inv @ inner @ b.omega))


def pairing_defects(A):
    """Residuals of the defining pairing property on all pairs of basis vectors.

    A basis vector a_i lives in E_{-eps^i} with unit component; <a_i, a_j> = w_ij,
    A a_j = a_k A^k_j and (-1)^{|f|F} a_j = (-1)^{eps^j} a_j.  The property
    <e, A f> = (-1)^{(|A|+1)(|e|+|f|) + |e||f|} <(-1)^{|f|F} f, A~ (-1)^{|e|F} e>
    then reads  (w A)_ij = (-1)^{p(eps^i+eps^j) + eps^i eps^j} (w A~)_ji.
    Returns the array of differences (all zero when the transpose is right).
    """
    b = A.basis
    eps = b.degrees
    p = A.degree
    At = transpose(A)
    lhs = b.omega @ A.entries
    rhs = (b.omega @ At.entries).T
    out = lhs.copy()
    for i in range(b.dim):
        for j in range(b.dim):
            sign = -1 if (p * (eps[i] + eps[j]) + eps[i] * eps[j]) % 2 else 1
            out[i, j] = lhs[i, j] - sign * rhs[i, j]
    return out


def euler(basis):
    """F = diag(eps^i)."""
    m = zeros(basis.dim, basis.mode)
    for i, e in enumerate(basis.degrees):
        m[i, i] = basis.scalar(e)
    return Endomorphism(basis, 0, m)


def parity_operator(basis, p):
    """(-1)^(pF) = diag((-1)^(p eps^i))."""
    m = zeros(basis.dim, basis.mode)
    for i, e in enumerate(basis.degrees):
        m[i, i] = basis.scalar(-1 if (p * e) % 2 else 1)
    return Endomorphism(basis, 0, m)


def commutator(A, B):
    """Graded commutator AB - (-1)^(|A||B|) BA."""
    _same_basis(A, B)
    ab = A @ B
    ba = B @ A
    return ab + ba if (A.degree * B.degree) % 2 else ab - ba


def symmetric_part(A):
    half = A.basis.scalar(Fraction(1, 2))
    return (A + transpose(A)) * half


def antisymmetric_part(A):
    half = A.basis.scalar(Fraction(1, 2))
    return (A - transpose(A)) * half


def is_nilpotent(A):
    n = A.basis.dim
    power = A.entries
    for _ in range(n):
        power = power @ A.entries
    return max_abs(power) == 0 if A.basis.mode == RATIONAL else max_abs(power) < 1e-300


def matrix_exp(A, tau=1):
    """e^(tau A) for a degree-0 endomorphism.

    Rational mode: exact finite sum, only for nilpotent A.  Float mode: scaling and
    squaring of a truncated Taylor series.
    """
    if A.degree != 0 and not A.is_zero():
        raise ValueError(f"matrix_exp needs a degree 0 endomorphism, got degree {A.degree}")
    b = A.basis
    n = b.dim
    tau = b.scalar(tau)
    if b.mode == RATIONAL:
        X = A.entries * tau
        out = eye(n, b.mode)
        term = eye(n, b.mode)
        for k in range(1, n + 1):
            term = (term @ X) * Fraction(1, k)
            if max_abs(term) == 0:
                return Endomorphism(b, 0, out)
            out = out + term
        raise ValueError("rational matrix_exp requires a nilpotent matrix; use f64 mode")
    X = np.asarray(A.entries, dtype=float) * tau
    norm = np.abs(X).sum(axis=1).max() if n else 0.0
    s = max(0, int(ceil(log2(norm))) + 1) if norm > 0.5 else 0
    X = X / (2 ** s)
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, 20):
        term = term @ X / k
        out = out + term
    for _ in range(s):
        out = out @ out
    # clean structural zeros so the degree invariant survives round-off
    mask = np.array([[b.degrees[i] == b.degrees[j] for j in range(n)] for i in range(n)])
    return Endomorphism(b, 0, np.where(mask, out, 0.0))


def random_endomorphism(basis, degree, rng, low=-3, high=3, density=1.0):
    """Random integer-valued endomorphism of the given degree (testing/sampling helper)."""
    m = zeros(basis.dim, basis.mode)
    eps = basis.degrees
    for i in range(basis.dim):
        for j in range(basis.dim):
            if eps[j] == eps[i] + degree and rng.random() < density:
                m[i, j] = basis.scalar(rng.randint(low, high))
    return Endomorphism(basis, degree, m)


__all__ = [
    "RATIONAL", "F64", "MODES", "GradedBasis", "Endomorphism", "to_scalar", "scalar_to_literal",
    "graded_trace", "transpose", "pairing_defects", "euler", "parity_operator", "commutator",
    "symmetric_part", "antisymmetric_part", "matrix_exp", "is_nilpotent", "random_endomorphism",
]
