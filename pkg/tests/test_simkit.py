import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import to_sym
from ltinet import catalog
from ltinet.conet import ClosedLoop, synthesize_ptop
from ltinet.exactalg import GaussRat
from ltinet.simkit import (
    DisturbanceSpec,
    boundedness_verdict,
    decimal_string,
    impulse_bound,
    max_norm,
    simulate,
)


def _loop(A, B):
    return ClosedLoop(A, B, [], [], len(B[0]), 0, 0, {})


@pytest.fixture(scope="module")
def scalar_design():
    return synthesize_ptop(catalog.scalar_ptop_problem())


@pytest.fixture(scope="module")
def random_design():
    return synthesize_ptop(catalog.random_ptop_problem(random.Random(3), max_m=2, max_relays=1))


def test_zero_disturbance_gives_zero_trace(random_design):
    tr = simulate(random_design, DisturbanceSpec("zero"), 30)
    assert tr.peak == 0 and all(not any(x) for x in tr.states)


@pytest.mark.parametrize("kind", ["constant", "alternating", "seeded-random-signs"])
def test_trace_matches_superposition(random_design, kind):
    dist = DisturbanceSpec(kind, Fraction(3, 2), seed=4)
    N = 25
    tr = simulate(random_design, dist, N)
    cl = random_design.closed_loop
    A = sp.Matrix(cl.A).applyfunc(to_sym)
    Bw = sp.Matrix([row[: cl.n_w] for row in cl.B]).applyfunc(to_sym)
    ws = dist.sequence(N, [b - a for a, b in random_design.plant_slices])
    x = sp.zeros(cl.n, 1)
    for k in range(N):
        x += A ** (N - 1 - k) * Bw * sp.Matrix(ws[k]).applyfunc(to_sym)
    assert [to_sym(v) for v in tr.states[N]] == list(x)


def test_scalar_deadbeat_settles(scalar_design):
    tr = simulate(scalar_design, DisturbanceSpec("constant"), 12)
    n = scalar_design.closed_loop.n
    # after the transient every state is constant
    assert all(tr.states[k] == tr.states[-1] for k in range(n + 1, 13))
    assert boundedness_verdict(tr, scalar_design)


def test_geometric_growth_matches_closed_form():
    cl = _loop([[Fraction(101, 100)]], [[1]])
    tr = simulate(cl, DisturbanceSpec("constant"), 50)
    for n in range(51):
        assert tr.states[n][0] == (Fraction(101, 100) ** n - 1) / Fraction(1, 100)
    assert not boundedness_verdict(tr, cl)


def test_marginal_pole_fails_despite_bounded_trace():
    cl = _loop([[1]], [[1]])
    tr = simulate(cl, DisturbanceSpec("alternating"), 40)
    assert tr.peak == 1
    assert not boundedness_verdict(tr, cl)


def test_stable_loop_verdict():
    cl = _loop([[Fraction(1, 2)]], [[1]])
    tr = simulate(cl, DisturbanceSpec("constant"), 40)
    assert boundedness_verdict(tr, cl)
    assert tr.states[-1][0] < 2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**4))
def test_impulse_bound_dominates(random_design, seed):
    tr = simulate(random_design, DisturbanceSpec("seeded-random-signs", 1, seed=seed), 60)
    assert all(nm <= impulse_bound(random_design, 1, k) for k, nm in enumerate(tr.norms) if k % 15 == 0)
    assert tr.peak <= impulse_bound(random_design, 1, 60)


def test_targets_and_determinism(random_design):
    a = simulate(random_design, DisturbanceSpec("seeded-random-signs", 1, seed=9), 20).to_csv(8)
    b = simulate(random_design, DisturbanceSpec("seeded-random-signs", 1, seed=9), 20).to_csv(8)
    c = simulate(random_design, DisturbanceSpec("seeded-random-signs", 1, seed=10), 20).to_csv(8)
    assert a == b and a != c
    with pytest.raises(ValueError):
        DisturbanceSpec("pulse")
    with pytest.raises(ValueError):
        DisturbanceSpec(target="plant3")
    with pytest.raises(ValueError):
        DisturbanceSpec(amplitude=Fraction(-1))
    seq = DisturbanceSpec("constant", 2, target="plant2").sequence(3, [1, 2])
    assert seq == [[0, 2, 2]] * 3


def test_csv_layout(scalar_design):
    text = simulate(scalar_design, DisturbanceSpec("constant"), 3).to_csv(4)
    lines = text.strip().split("\n")
    n = scalar_design.closed_loop.n
    assert lines[0].split(",") == ["step"] + [f"x{i}" for i in range(n)] + ["max_norm"]
    assert len(lines) == 5
    assert lines[1].split(",")[1] == "0.0000"


def test_decimal_and_norm():
    assert decimal_string(Fraction(1, 3), 5) == "0.33333"
    assert decimal_string(Fraction(-2, 3), 3) == "-0.667"
    assert decimal_string(Fraction(10**30 + 1, 10**12), 2) == "1000000000000000000.00"
    assert decimal_string(GaussRat(Fraction(1, 2), Fraction(-1, 4)), 2) == "0.50-0.25i"
    assert max_norm([Fraction(-3), 2]) == 3
    assert max_norm([GaussRat(Fraction(1), Fraction(-2))]) == 3
