import random

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sym_matrix_equal, to_sym
from ltinet import catalog
from ltinet.exactalg import RatMatrix, mat_rank
from ltinet.linearizer import (
    ModeShapeMismatch,
    check_thresholds,
    linearize_multi,
    linearize_ptop,
    linearize_with_aux_receiver,
    original_pair_rank,
    sample_linearized_gains,
    synthesize_gains,
    synthesize_multicast_gains,
    verify_offsets,
)
from ltinet.netmodel import GainAssignment, LoopSingular, RankConfig, mincut_rank, transfer_matrix


def _block_oracle(net, gains, d_ax):
    """Linearized transfer assembled block by block from the node equations.

    Rows: auxiliary arc, receiver observation, relay observations.
    Cols: auxiliary arc, receiver signal, relay signals.
    """
    relays = net.relays
    K = {g: m if isinstance(m, sp.MatrixBase) else to_sym(m) for g, m in gains.items()}
    H = lambda a, b: to_sym(net.H(a, b))
    d_rx = net.node("rx").d_out
    top = [sp.zeros(d_ax, d_ax), -K["rx"]] + [sp.zeros(d_ax, net.node(r).d_out) for r in relays]
    mid = [-H("tx", "rx") * K["tx"], sp.eye(d_rx)] + [-H(r, "rx") * K[r] for r in relays]
    rows = [top, mid]
    for j in relays:
        dj = net.node(j).d_out
        row = [-H("tx", j) * K["tx"], sp.zeros(dj, d_rx)]
        row += [(sp.eye(dj) if i == j else sp.zeros(dj, net.node(i).d_out)) - H(i, j) * K[i] for i in relays]
        rows.append(row)
    return sp.Matrix(sp.BlockMatrix(rows))


def _net(seed):
    return catalog.random_network(random.Random(seed), max_relays=2, max_ports=2, max_degree=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_linearized_transfer_matches_block_oracle(seed):
    net = _net(seed)
    d_ax = max(net.node("tx").d_in, net.node("rx").d_out)
    lin = linearize_ptop(net, d_ax)
    gains = sample_linearized_gains(lin, random.Random(seed), 4)
    assert sym_matrix_equal(to_sym(lin.transfer(gains)), _block_oracle(net, gains, d_ax))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_rank_offset_against_sympy(seed):
    net = _net(seed)
    d_ax = max(net.node("tx").d_in, net.node("rx").d_out)
    lin = linearize_ptop(net, d_ax)
    gains = sample_linearized_gains(lin, random.Random(seed + 3), 4)
    try:
        G = transfer_matrix(net, GainAssignment({r: gains[r] for r in net.relays}))
    except LoopSingular:
        return
    lhs = (to_sym(gains["rx"]) * to_sym(G) * to_sym(gains["tx"])).rank(simplify=True) + lin.offset_d
    assert lhs == _block_oracle(net, gains, d_ax).rank(simplify=True)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_offset_identities_random(seed):
    net = _net(seed)
    d_ax = max(net.node("tx").d_in, net.node("rx").d_out)
    lin = linearize_ptop(net, d_ax)
    rep = verify_offsets(net, lin, RankConfig(seed=seed), strict=False)
    assert rep.maxflow_ok and rep.mincut_ok
    assert rep.offset_d == net.node("rx").d_out + sum(net.node(r).d_out for r in net.relays)


def test_offset_requires_wide_arc():
    net = catalog.direct_identity(2)
    with pytest.raises(ValueError):
        verify_offsets(net, linearize_ptop(net, 1))
    with pytest.raises(ValueError):
        linearize_ptop(net, 0)


def test_two_hop_linearization():
    net = catalog.two_hop()
    lin = linearize_ptop(net, 1)
    assert lin.offset_d == 3
    one = RatMatrix([[1]])
    G = transfer_matrix(net, GainAssignment({"r1": RatMatrix([[3]]), "r2": RatMatrix([[7]])}))
    assert G == RatMatrix([[21]])
    gains = {"tx": one, "rx": one, "r1": RatMatrix([[3]]), "r2": RatMatrix([[7]])}
    assert mat_rank(lin.transfer(gains)) == 1 + lin.offset_d
    # indeterminate relay gains under unit pre/post processors
    k1, k2 = sp.symbols("k1 k2")
    M = _block_oracle(net, {"tx": sp.Matrix([[1]]), "rx": sp.Matrix([[1]]), "r1": sp.Matrix([[k1]]), "r2": sp.Matrix([[k2]])}, 1)
    assert M.rank() == 1 + lin.offset_d
    assert sp.expand(M.det()) in (k1 * k2, -k1 * k2)


def test_unfolding_example_unit_gains_reach_three():
    net = catalog.relay_triangle()
    assert mincut_rank(net)[0] == 1
    lin = linearize_ptop(net, 1)
    one = RatMatrix([[1]])
    gains = {"S": one, "R": one, "D": one}
    assert mat_rank(lin.transfer(gains)) == 3
    aux = linearize_with_aux_receiver(net, 1)
    assert all(ok for _, ok in check_thresholds(aux, gains).values())


def test_acyclic_aux_receiver_always_full():
    rng = random.Random(5)
    for net in (catalog.two_hop(), catalog.relay_chain(3), catalog.relay_triangle()):
        lin = linearize_with_aux_receiver(net, 1)
        aux = [r for r in lin.receivers if r.endswith("''")][0]
        for _ in range(5):
            g = sample_linearized_gains(lin, rng, 50)
            assert mat_rank(lin.transfer(g, aux)) == lin.dim


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_synthesized_gains_reach_mincut(seed):
    net = _net(seed)
    mc, _ = mincut_rank(net)
    g = synthesize_gains(net, RankConfig(seed=seed))
    G = transfer_matrix(net, g)
    if mc:
        assert mat_rank(g.rx @ G @ g.tx) == mc
    assert mat_rank(G) == mc


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["multicast", "broadcast", "unicast"]))
def test_multi_pair_offsets(seed, mode):
    rng = random.Random(seed)
    net = catalog.random_multi_network(rng, n_tx=2 if mode == "unicast" else 1, max_relays=2)
    ml = linearize_multi(net, mode, 2)
    gains = sample_linearized_gains(ml, rng, 50)
    for rcv in ml.receivers:
        try:
            left = original_pair_rank(ml, gains, rcv)
        except LoopSingular:
            return
        assert left + ml.offset_d == mat_rank(ml.transfer(gains, rcv))


def test_mode_shape_mismatch():
    with pytest.raises(ModeShapeMismatch):
        linearize_multi(catalog.two_hop(), "multicast", 1)
    with pytest.raises(ModeShapeMismatch):
        linearize_multi(catalog.butterfly(), "unicast", 1)
    with pytest.raises(ModeShapeMismatch):
        linearize_multi(catalog.butterfly(), "anycast", 1)


def test_butterfly_multicast_code():
    net = catalog.butterfly()
    g, ranks = synthesize_multicast_gains(net)
    assert ranks == {"t1": 2, "t2": 2}
    for t in ("t1", "t2"):
        assert mat_rank(transfer_matrix(net, g, "s", t)) == 2
    ml = linearize_multi(net, "multicast", 2)
    assert [t.value for t in ml.thresholds] == [ml.offset_d + 2] * 2
