"""Shared helpers: sympy conversions used as independent oracles, and hypothesis strategies."""

from fractions import Fraction

import sympy as sp
from hypothesis import strategies as st

from ltinet.exactalg import GaussRat, Poly, RatFn, RatMatrix

ZS = sp.Symbol("z")


def to_sym(x):
    """Exact scalar, Poly, RatFn or RatMatrix to a sympy object."""
    if isinstance(x, sp.Basic):
        return x
    if isinstance(x, GaussRat):
        return sp.Rational(x.re.numerator, x.re.denominator) + sp.I * sp.Rational(x.im.numerator, x.im.denominator)
    if isinstance(x, Fraction):
        return sp.Rational(x.numerator, x.denominator)
    if isinstance(x, int):
        return sp.Integer(x)
    if isinstance(x, Poly):
        return sum((to_sym(c) * ZS**k for k, c in enumerate(x.c)), sp.Integer(0))
    if isinstance(x, RatFn):
        return to_sym(x.num) / to_sym(x.den)
    if isinstance(x, RatMatrix):
        return sp.Matrix(x.rows, x.cols, lambda i, j: to_sym(x[i, j]))
    raise TypeError(type(x))


def sym_equal(a, b) -> bool:
    return sp.simplify(sp.expand(a - b)) == 0


def sym_matrix_equal(A, B) -> bool:
    return A.shape == B.shape and all(sp.cancel(A[i, j] - B[i, j]) == 0 for i in range(A.rows) for j in range(A.cols))


def const_rows(M) -> list[list]:
    return [list(r) for r in M]


fractions = st.fractions(min_value=-5, max_value=5, max_denominator=6)
small_ints = st.integers(min_value=-4, max_value=4)
gauss = st.builds(GaussRat, fractions, fractions)
scalars = st.one_of(small_ints, fractions)


@st.composite
def polys(draw, max_deg=3, elements=scalars):
    return Poly(draw(st.lists(elements, min_size=0, max_size=max_deg + 1)))


@st.composite
def nonzero_polys(draw, max_deg=3, elements=scalars):
    p = draw(polys(max_deg, elements))
    return p if not p.is_zero() else Poly([1])


@st.composite
def ratfns(draw, max_deg=2):
    return RatFn(draw(polys(max_deg)), draw(nonzero_polys(max_deg)))


@st.composite
def const_matrices(draw, n=None, m=None, max_n=4, elements=scalars):
    n = draw(st.integers(1, max_n)) if n is None else n
    m = n if m is None else m
    return [[draw(elements) for _ in range(m)] for _ in range(n)]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
