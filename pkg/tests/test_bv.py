import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bvflow.algebra import FlowMap, GradedPoly, monomials, random_poly
from bvflow.bv import (CanonicalMapWitness, DeformedLaplacian, SignConvention, ad_type_residual,
                       bracket, canonical_residual, default_probes, laplacian,
                       laplacian_cohomology_dims, quadratic_form, qme_residual)
from bvflow.linear import (Endomorphism, GradedBasis, antisymmetric_part, euler, graded_trace,
                           random_endomorphism, symmetric_part)
from bvflow.suites import IDENTITY_LAYOUTS, identity_suite

seeds = st.integers(0, 10**6)
layouts = st.sampled_from(IDENTITY_LAYOUTS)


def sg(k):
    return -1 if k % 2 else 1


def anti(basis, degrees, rng):
    for _ in range(30):
        A = antisymmetric_part(random_endomorphism(basis, rng.choice(degrees), rng))
        if not A.is_zero():
            return A
    pytest.skip("no nonzero antisymmetric endomorphism in these degrees")


def polys(basis, rng, n=3, max_poly_degree=4):
    return [random_poly(basis, rng, rng.randint(-2, 1), max_poly_degree, 3) for _ in range(n)]


# -- examples -------------------------------------------------------------------------------

def test_laplacian_kills_coordinates_and_unit():
    b = GradedBasis.standard((-1, -1, 0, 0))
    A = anti(b, (0,), random.Random(3))
    assert laplacian(GradedPoly.one(b), A).is_zero()
    for i in range(b.dim):
        assert laplacian(GradedPoly.coordinate(b, i), A).is_zero()


def test_non_antisymmetric_deformer_rejected():
    b = GradedBasis.standard((-1, 0))
    with pytest.raises(ValueError, match="transpose"):
        laplacian(GradedPoly.coordinate(b, 0), euler(b))


@given(seeds)
def test_qme_of_a_quadratic_form(seed):
    # Delta_A <x,Bx> + 1/2 (<x,Bx>, <x,Bx>)_A = grtr(AB) + 2 <x,BABx>
    b = GradedBasis.standard((-2, -1, 0, 1))
    rng = random.Random(seed)
    A = antisymmetric_part(random_endomorphism(b, 0, rng))
    B = symmetric_part(random_endomorphism(b, 1, rng))
    expected = quadratic_form(B @ A @ B).scale(2) + GradedPoly.one(b).scale(graded_trace(A @ B))
    assert qme_residual(quadratic_form(B), DeformedLaplacian(A)) == expected


def test_qme_example_is_not_vacuous():
    b = GradedBasis.standard((-2, -1, 0, 1))
    hits = 0
    for seed in range(20):
        rng = random.Random(seed)
        A = antisymmetric_part(random_endomorphism(b, 0, rng))
        B = symmetric_part(random_endomorphism(b, 1, rng))
        hits += not quadratic_form(B @ A @ B).is_zero()
    assert hits > 5


def test_zero_action_solves_qme():
    b = GradedBasis.standard((-1, -1, 0, 0))
    assert qme_residual(GradedPoly.zero(b)).is_zero()


def test_identity_map_is_canonical():
    b = GradedBasis.standard((-1, -1, 0, 0))
    E = DeformedLaplacian.canonical(b)
    res = canonical_residual(CanonicalMapWitness(FlowMap.identity(b), E, E), default_probes(b, 3))
    assert res["max"] == 0 and res["bracket_preservation"] == 0


def test_scaling_is_not_canonical():
    b = GradedBasis.standard((-1, -1, 0, 0))
    E = DeformedLaplacian.canonical(b)
    doubled = FlowMap(b, [GradedPoly.coordinate(b, i).scale(2) for i in range(b.dim)])
    res = canonical_residual(CanonicalMapWitness(doubled, E, E), default_probes(b, 2))
    assert res["intertwining"] > 0
    assert res["bracket_preservation"] > 0


def test_cohomology_of_one_pair():
    # hand count on {1, y, y^2 | xi, y xi}: Delta_E sends y xi to a unit and kills the rest
    b = GradedBasis.standard((0, -1))
    dims = dict(laplacian_cohomology_dims(DeformedLaplacian.canonical(b), (-2, 1), 2))
    assert dims == {-2: 0, -1: 1, 0: 2, 1: 0}


def test_cohomology_of_zero_deformer_is_everything():
    b = GradedBasis.standard((-1, -1, 0, 0))
    L = DeformedLaplacian(Endomorphism.zero(b, 0))
    counts = {}
    for m in monomials(b, 3):
        d = sum(e * g for e, g in zip(m, b.degrees))
        counts[d] = counts.get(d, 0) + 1
    assert dict(laplacian_cohomology_dims(L, (-3, 3), 3)) == {d: counts.get(d, 0)
                                                              for d in range(-3, 4)}


def test_cohomology_needs_even_deformer():
    b = GradedBasis.standard((-1, -1, 0, 0))
    A = anti(b, (-1, 1), random.Random(0))
    with pytest.raises(ValueError):
        laplacian_cohomology_dims(DeformedLaplacian(A), (-1, 1), 2)


# -- properties -------------------------------------------------------------------------------

@given(layouts, seeds, st.sampled_from([(-2, 0, 2), (-1, 1)]))
def test_second_order_identities(layout, seed, parities):
    """Seven-term relation, bracket from the Laplacian, antisymmetry and Leibniz for even
    and odd deformers."""
    b = GradedBasis.standard(layout)
    rng = random.Random(seed)
    A = anti(b, parities, rng)
    pa, a1 = A.degree, A.degree + 1
    u, v, w = polys(b, rng)
    du, dv = u.degree, v.degree

    def L(f):
        return laplacian(f, A)

    def br(f, g):
        return bracket(f, g, A)

    seven = (-(L(u) * v * w) - (u * L(v) * w).scale(sg(a1 * du))
             - (u * v * L(w)).scale(sg(a1 * (du + dv))) + L(u * v) * w
             + (v * L(u * w)).scale(sg((du + pa + 1) * dv)) + (u * L(v * w)).scale(sg(a1 * du)))
    assert L(u * v * w) == seven
    assert br(u, v) == (L(u * v) - L(u) * v - (u * L(v)).scale(sg(a1 * du))).scale(sg(a1 * du))
    assert br(u, v) == -br(v, u).scale(sg(pa * (du + dv) + (du + 1) * (dv + 1)))
    assert br(u, v * w) == br(u, v) * w + (v * br(u, w)).scale(sg((du + pa + 1) * dv))


@given(layouts, seeds)
def test_even_laplacian_is_nilpotent_and_jacobi_holds(layout, seed):
    b = GradedBasis.standard(layout)
    rng = random.Random(seed)
    A = anti(b, (-2, 0, 2), rng)
    u, v, w = polys(b, rng, max_poly_degree=3)
    du, dv, dw = u.degree, v.degree, w.degree
    assert laplacian(laplacian(u, A), A).is_zero()

    def br(f, g):
        return bracket(f, g, A)

    jac = (br(u, br(v, w)).scale(sg((dw + 1) * (du + 1)))
           + br(v, br(w, u)).scale(sg((du + 1) * (dv + 1)))
           + br(w, br(u, v)).scale(sg((dv + 1) * (dw + 1))))
    assert jac.is_zero()


@given(layouts, seeds)
def test_laplacians_commute(layout, seed):
    b = GradedBasis.standard(layout)
    rng = random.Random(seed)
    A, B = anti(b, (-1, 0, 1), rng), anti(b, (-1, 0, 1), rng)
    (u,) = polys(b, rng, 1)
    lhs = laplacian(laplacian(u, B), A)
    assert lhs == laplacian(laplacian(u, A), B).scale(sg((A.degree + 1) * (B.degree + 1)))


@given(layouts, seeds)
def test_ad_type_maps(layout, seed):
    b = GradedBasis.standard(layout)
    rng = random.Random(seed)
    A = anti(b, (0,), rng)
    x = random_poly(b, rng, -1, 3, 2)
    assert ad_type_residual(x, A, polys(b, rng)) == 0


def test_identity_suite_small_run():
    res = identity_suite(samples=25, max_poly_degree=4)
    assert res["pass"], {k: c for k, c in res["checks"].items() if not c["pass"]}
    assert len(res["checks"]) == 15


def test_flipped_bracket_sign_is_caught():
    """Negative control: the wrong overall sign on (.,.)_A for odd A breaks the
    bracket-from-Laplacian relation."""
    flipped = SignConvention(brk=(1, -1))
    failures = 0
    for seed in range(10):
        b = GradedBasis.standard((-2, -1, 0, 1))
        rng = random.Random(seed)
        A = anti(b, (-1, 1), rng)
        u, v = polys(b, rng, 2)
        a1, du = A.degree + 1, u.degree
        rhs = (laplacian(u * v, A) - laplacian(u, A) * v
               - (u * laplacian(v, A)).scale(sg(a1 * du))).scale(sg(a1 * du))
        assert bracket(u, v, A) == rhs
        failures += bracket(u, v, A, signs=flipped) != rhs
    assert failures > 0


def test_rational_arithmetic_is_exact():
    b = GradedBasis.standard((-1, 0))
    A = Endomorphism.identity(b) * Fraction(1, 3)
    y = GradedPoly.coordinate(b, 1)
    xi = GradedPoly.coordinate(b, 0)
    out = laplacian(xi * y, A)
    assert all(isinstance(c, Fraction) for c in out.terms.values())
