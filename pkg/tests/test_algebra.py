import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bvflow.algebra import (FlowMap, GradedPoly, HbarSeries, mono_mul_sign, multiply, partial,
                            random_poly, right_partial)
from bvflow.linear import GradedBasis

B4 = GradedBasis.standard((-1, -1, 0, 0))
B6 = GradedBasis.standard((-2, -1, -1, 0, 0, 1))
seeds = st.integers(0, 10**6)
bases = st.sampled_from([B4, B6])


def xs(b):
    return [GradedPoly.coordinate(b, i) for i in range(b.dim)]


def sample(b, seed, degree=None, max_poly_degree=3):
    rng = random.Random(seed)
    if degree is None:
        degree = rng.choice([-2, -1, 0, 1])
    return random_poly(b, rng, degree, max_poly_degree=max_poly_degree)


def test_odd_coordinates_square_to_zero():
    x = xs(B4)
    assert multiply(x[0], x[0]).is_zero()
    assert not multiply(x[2], x[2]).is_zero()


def test_koszul_sign_examples():
    assert mono_mul_sign((1, 0, 0, 0), (0, 1, 0, 0), B4.odd) == 1
    assert mono_mul_sign((0, 1, 0, 0), (1, 0, 0, 0), B4.odd) == -1
    x = xs(B4)
    assert multiply(x[1], x[0]) == -multiply(x[0], x[1])


def test_left_derivative_example():
    x = xs(B4)
    # d/dx0 (x1 x0) = -x1 for odd x0, x1
    assert partial(0, multiply(x[1], x[0])) == -x[1]
    assert right_partial(0, multiply(x[1], x[0])) == x[1]
    assert partial(2, multiply(x[2], x[2])) == x[2] * 2


@given(bases, seeds)
def test_associativity(b, seed):
    u, v, w = (sample(b, seed + k) for k in range(3))
    assert multiply(multiply(u, v), w) == multiply(u, multiply(v, w))


@given(bases, seeds)
def test_graded_commutativity(b, seed):
    u, v = sample(b, seed), sample(b, seed + 1)
    sign = -1 if (u.degree * v.degree) % 2 else 1
    assert multiply(u, v) == multiply(v, u) * sign


@given(bases, seeds, st.data())
def test_derivative_is_a_graded_derivation(b, seed, data):
    i = data.draw(st.integers(0, b.dim - 1))
    u, v = sample(b, seed), sample(b, seed + 1)
    sign = -1 if (b.degrees[i] * u.degree) % 2 else 1
    lhs = partial(i, multiply(u, v))
    assert lhs == multiply(partial(i, u), v) + multiply(u, partial(i, v)) * sign


@given(bases, seeds)
def test_literal_round_trip(b, seed):
    u = sample(b, seed)
    assert GradedPoly.from_literal(b, u.to_literal()) == u


def test_hbar_literal_round_trip():
    s = HbarSeries.from_literal(B4, [{"coeff": "1/2", "exponents": [0, 0, 1, 1],
                                      "hbar_power": 1}], 3)
    assert s.order == 3
    assert s.coeffs[1].terms == {(0, 0, 1, 1): Fraction(1, 2)}
    assert HbarSeries.from_literal(B4, s.to_literal(), 3).coeffs == s.coeffs


def nonlinear_map(b):
    x = xs(b)
    imgs = list(x)
    imgs[2] = x[2] + multiply(x[2], x[3])
    imgs[1] = x[1] + multiply(x[0], x[3]) * Fraction(1, 2)
    return FlowMap(b, imgs, max_degree=5)


def test_inverse_round_trip():
    phi = nonlinear_map(B4)
    ident = FlowMap.identity(B4, 5)
    assert phi.compose(phi.inverse()).distance(ident) == 0
    assert phi.inverse().compose(phi).distance(ident) == 0


@given(seeds)
def test_flow_map_is_an_algebra_morphism(seed):
    phi = nonlinear_map(B4)
    u, v = sample(B4, seed, max_poly_degree=2), sample(B4, seed + 1, max_poly_degree=2)
    lhs = phi.apply(multiply(u, v)).truncate(5)
    rhs = multiply(phi.apply(u), phi.apply(v)).truncate(5)
    assert lhs == rhs

