import json
import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ZS, const_matrices, gauss, nonzero_polys, polys, ratfns, scalars, sym_equal, sym_matrix_equal, to_sym
from ltinet.exactalg import (
    GaussRat,
    Poly,
    RatFn,
    RatMatrix,
    Singular,
    SingularD,
    Z,
    char_poly_scalar,
    eval_matrix,
    format_scalar,
    mat_det,
    mat_inverse,
    mat_rank,
    mat_solve,
    matrix_from_json,
    matrix_to_json,
    parse_scalar,
    poly_from_json,
    poly_gcd,
    poly_to_json,
    ratfn_from_json,
    ratfn_to_json,
    roots_in_field,
    roots_in_unit_disk,
    schur_rank,
)


# scalars -------------------------------------------------------------------


@given(gauss, gauss)
def test_gaussian_field_ops_match_sympy(a, b):
    assert sym_equal(to_sym(a * b), to_sym(a) * to_sym(b))
    assert sym_equal(to_sym(a - b), to_sym(a) - to_sym(b))
    if a:
        assert sym_equal(to_sym(b / a), to_sym(b) / to_sym(a))


@given(st.one_of(scalars, gauss))
def test_scalar_string_round_trip(x):
    assert parse_scalar(format_scalar(x)) == x


@pytest.mark.parametrize("s,val", [("3/4", Fraction(3, 4)), ("-2", -2), ("1+2i", GaussRat(1, 2)), ("-i", GaussRat(0, -1)), ("1/2-3/5i", GaussRat(Fraction(1, 2), Fraction(-3, 5)))])
def test_parse_scalar_forms(s, val):
    assert parse_scalar(s) == val


def test_parse_scalar_rejects_junk():
    for bad in ["", "abc", "1/0", True]:
        with pytest.raises(ValueError):
            parse_scalar(bad)


# polynomials and rational functions ---------------------------------------


@given(polys(), polys())
def test_poly_ring_ops_match_sympy(p, q):
    assert sym_equal(to_sym(p * q), to_sym(p) * to_sym(q))
    assert sym_equal(to_sym(p + q), to_sym(p) + to_sym(q))


@given(polys(4), nonzero_polys(3))
def test_poly_division_identity(p, q):
    d, r = divmod(p, q)
    assert d * q + r == p
    assert r.is_zero() or r.deg < q.deg


@settings(max_examples=60)
@given(nonzero_polys(3), nonzero_polys(3), nonzero_polys(2))
def test_gcd_matches_sympy(p, q, common):
    g = poly_gcd(p * common, q * common)
    ref = sp.Poly(sp.gcd(to_sym(p * common), to_sym(q * common)), ZS)
    assert g.deg == ref.degree()
    assert (p * common) % g == Poly() and (q * common) % g == Poly()


@given(ratfns(), ratfns())
def test_ratfn_field_ops_match_sympy(a, b):
    assert sp.cancel(to_sym(a * b) - to_sym(a) * to_sym(b)) == 0
    assert sp.cancel(to_sym(a - b) - (to_sym(a) - to_sym(b))) == 0
    if b:
        assert sp.cancel(to_sym(a / b) - to_sym(a) / to_sym(b)) == 0


@given(ratfns())
def test_ratfn_is_reduced_with_monic_denominator(r):
    assert r.den.lead == 1
    assert poly_gcd(r.num, r.den).deg <= 0 or r.num.is_zero()


def test_causality():
    assert RatFn(Poly([1]), Poly([0, 1])).is_causal()
    assert not Z.is_causal()
    assert (Z / (Z + 1)).is_causal()


# matrices -------------------------------------------------------------------


@st.composite
def rat_matrices(draw, max_n=3, square=False):
    n = draw(st.integers(1, max_n))
    m = n if square else draw(st.integers(1, max_n))
    # low-rank products show up often enough to exercise rank deficiency
    if draw(st.booleans()):
        k = draw(st.integers(1, min(n, m)))
        L = RatMatrix([[draw(ratfns(1)) for _ in range(k)] for _ in range(n)])
        R = RatMatrix([[draw(ratfns(1)) for _ in range(m)] for _ in range(k)])
        return L @ R
    return RatMatrix([[draw(ratfns(1)) for _ in range(m)] for _ in range(n)])


@settings(max_examples=60, deadline=None)
@given(rat_matrices())
def test_rank_matches_sympy(M):
    assert mat_rank(M) == to_sym(M).rank(simplify=True)


@settings(max_examples=40, deadline=None)
@given(rat_matrices(square=True))
def test_det_matches_sympy(M):
    assert sp.cancel(to_sym(mat_det(M)) - sp.cancel(to_sym(M).det(method="berkowitz"))) == 0


@settings(max_examples=40, deadline=None)
@given(rat_matrices(square=True))
def test_inverse_is_inverse(M):
    if not mat_det(M):
        with pytest.raises(Singular):
            mat_inverse(M)
        return
    assert (M @ mat_inverse(M)) == RatMatrix.identity(M.rows)


def test_solve_against_sympy():
    A = RatMatrix([[Z, 1], [1, Z - 1]])
    B = RatMatrix([[1], [Z]])
    X = mat_solve(A, B)
    assert sym_matrix_equal(to_sym(X), to_sym(A).LUsolve(to_sym(B)))


@settings(max_examples=40, deadline=None)
@given(rat_matrices(2, square=True), st.integers(1, 2), st.integers(1, 2), st.data())
def test_schur_rank_equals_block_rank(D, p, q, data):
    # rank [A B; C D] = rank D + rank(A - B D^-1 C) for invertible D
    k = D.rows
    A = RatMatrix([[data.draw(ratfns(1)) for _ in range(q)] for _ in range(p)])
    B = RatMatrix([[data.draw(ratfns(1)) for _ in range(k)] for _ in range(p)])
    C = RatMatrix([[data.draw(ratfns(1)) for _ in range(q)] for _ in range(k)])
    if not mat_det(D):
        with pytest.raises(SingularD):
            schur_rank(A, B, C, D)
        return
    big = sp.Matrix(sp.BlockMatrix([[to_sym(A), to_sym(B)], [to_sym(C), to_sym(D)]]))
    assert schur_rank(A, B, C, D) == big.rank(simplify=True)


def test_eval_matrix_and_empty_shapes():
    M = RatMatrix([[Z, 1 / (Z - 1)]])
    assert eval_matrix(M, 2) == RatMatrix([[2, 1]])
    E = RatMatrix.zeros(0, 3)
    assert mat_rank(E) == 0 and E.shape == (0, 3)


@settings(max_examples=50, deadline=None)
@given(const_matrices(max_n=5))
def test_char_poly_matches_sympy(A):
    ref = sp.Matrix(A).applyfunc(sp.nsimplify).charpoly(ZS).as_expr()
    assert sym_equal(to_sym(char_poly_scalar(A)), ref)


# roots ---------------------------------------------------------------------


def _count_by_sympy(p: Poly):
    roots = sp.Poly(to_sym(p), ZS).all_roots() if not p.has_gauss() else sp.Poly(to_sym(p), ZS).nroots(n=50)
    inside = outside = on = 0
    for r in roots:
        a = sp.Abs(r)
        if sp.simplify(a - 1) == 0:
            on += 1
        elif a < 1:
            inside += 1
        else:
            outside += 1
    return inside, outside, on


root_pool = [0, 1, -1, 2, -2, Fraction(1, 2), Fraction(-1, 3), Fraction(3, 2), GaussRat(0, 1), GaussRat(0, -1), GaussRat(1, 1), GaussRat(Fraction(1, 2), Fraction(1, 2))]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from(root_pool), min_size=1, max_size=6), st.sampled_from([1, 2, Fraction(-3, 7)]))
def test_unit_disk_counts_from_known_roots(roots, lead):
    p = Poly([lead])
    for r in roots:
        p = p * Poly([-r, 1])
    inside = sum(1 for r in roots if (abs(r) < 1 if not isinstance(r, GaussRat) else r.re**2 + r.im**2 < 1))
    on = sum(1 for r in roots if (abs(r) == 1 if not isinstance(r, GaussRat) else r.re**2 + r.im**2 == 1))
    got = roots_in_unit_disk(p)
    assert (got.inside, got.boundary, got.outside) == (inside, on, len(roots) - inside - on)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=6).filter(lambda c: c[-1] != 0))
def test_unit_disk_counts_match_sympy(c):
    p = Poly(c)
    got = roots_in_unit_disk(p)
    assert (got.inside, got.outside, got.boundary) == _count_by_sympy(p)


def test_boundary_and_just_outside():
    assert roots_in_unit_disk(Poly([-1, 1])).on_boundary
    assert roots_in_unit_disk(Poly([Fraction(-101, 100), 1])).outside == 1
    assert roots_in_unit_disk(Poly([0, 0, 1])).strictly_stable


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(root_pool), min_size=1, max_size=5))
def test_roots_in_field_recovers_roots(roots):
    p = Poly([1])
    for r in roots:
        p = p * Poly([-r, 1])
    found, rest = roots_in_field(p)
    assert sorted(map(format_scalar, found)) == sorted(map(format_scalar, roots))
    assert rest == Poly([1])


def test_roots_in_field_leaves_irrational_part():
    found, rest = roots_in_field(Poly([-2, 0, 1]) * Poly([-3, 1]))
    assert found == [3]
    assert rest == Poly([-2, 0, 1])


# JSON ----------------------------------------------------------------------


@given(polys(elements=st.one_of(scalars, gauss)))
def test_poly_json_round_trip(p):
    assert poly_from_json(json.loads(json.dumps(poly_to_json(p)))) == p


@given(ratfns())
def test_ratfn_json_round_trip(r):
    assert ratfn_from_json(json.loads(json.dumps(ratfn_to_json(r)))) == r


def test_matrix_json_round_trip():
    rng = random.Random(0)
    M = RatMatrix([[RatFn(Poly([rng.randint(-3, 3), 1]), Poly([Fraction(1, 2), 1])) for _ in range(3)] for _ in range(2)])
    assert matrix_from_json(json.loads(json.dumps(matrix_to_json(M)))) == M
