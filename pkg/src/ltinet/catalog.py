"""Reference networks and systems, plus seeded random generators for property checks."""

from __future__ import annotations

import random
from fractions import Fraction

from . import qmat
from .exactalg import Poly, RatFn, RatMatrix, Z
from .netmodel import RECEIVER, RELAY, TRANSMITTER, LtiNetwork, NodeSpec


def _m(rows):
    return RatMatrix(rows)


def direct_identity(m: int) -> LtiNetwork:
    nodes = [NodeSpec("tx", TRANSMITTER, m, 0), NodeSpec("rx", RECEIVER, 0, m)]
    return LtiNetwork(nodes, {("tx", "rx"): RatMatrix.identity(m)})


def two_hop() -> LtiNetwork:
    """tx -> r1 -> r2 -> rx with unit scalar links; end-to-end transfer k2*k1."""
    nodes = [
        NodeSpec("tx", TRANSMITTER, 1, 0),
        NodeSpec("r1", RELAY, 1, 1),
        NodeSpec("r2", RELAY, 1, 1),
        NodeSpec("rx", RECEIVER, 0, 1),
    ]
    one = _m([[1]])
    return LtiNetwork(nodes, {("tx", "r1"): one, ("r1", "r2"): one, ("r2", "rx"): one})


def relay_chain(hops: int = 1) -> LtiNetwork:
    nodes = [NodeSpec("tx", TRANSMITTER, 1, 0)]
    nodes += [NodeSpec(f"r{k}", RELAY, 1, 1) for k in range(1, hops + 1)]
    nodes.append(NodeSpec("rx", RECEIVER, 0, 1))
    ids = [n.id for n in nodes]
    one = _m([[1]])
    return LtiNetwork(nodes, {(a, b): one for a, b in zip(ids, ids[1:])})


def butterfly() -> LtiNetwork:
    """Two-source-symbol multicast butterfly; the bottleneck relay c mixes a and b."""
    nodes = [
        NodeSpec("s", TRANSMITTER, 2, 0),
        NodeSpec("a", RELAY, 1, 1),
        NodeSpec("b", RELAY, 1, 1),
        NodeSpec("c", RELAY, 1, 2),
        NodeSpec("t1", RECEIVER, 0, 2),
        NodeSpec("t2", RECEIVER, 0, 2),
    ]
    ch = {
        ("s", "a"): _m([[1, 0]]),
        ("s", "b"): _m([[0, 1]]),
        ("a", "c"): _m([[1], [0]]),
        ("b", "c"): _m([[0], [1]]),
        ("a", "t1"): _m([[1], [0]]),
        ("c", "t1"): _m([[0], [1]]),
        ("b", "t2"): _m([[1], [0]]),
        ("c", "t2"): _m([[0], [1]]),
    }
    return LtiNetwork(nodes, ch)


def relay_triangle() -> LtiNetwork:
    """Source S, relay R, destination D with unit-delay links S->R, R->D, S->D."""
    nodes = [NodeSpec("S", TRANSMITTER, 1, 0), NodeSpec("R", RELAY, 1, 1), NodeSpec("D", RECEIVER, 0, 1)]
    delay = _m([[RatFn(Poly([1]), Poly([0, 1]))]])
    return LtiNetwork(nodes, {("S", "R"): delay, ("R", "D"): delay, ("S", "D"): delay})


def self_loop_relay(gain_pole=1) -> LtiNetwork:
    """tx -> r -> rx with a unit self-loop at r, so K_r = 1 makes I - H_rr K_r singular."""
    nodes = [NodeSpec("tx", TRANSMITTER, 1, 0), NodeSpec("r", RELAY, 1, 1), NodeSpec("rx", RECEIVER, 0, 1)]
    one = _m([[1]])
    return LtiNetwork(nodes, {("tx", "r"): one, ("r", "rx"): one, ("r", "r"): _m([[gain_pole]])})


# ---------------------------------------------------------------------------
# random generators


def random_poly(rng: random.Random, max_degree: int, coeff: int = 3) -> Poly:
    return Poly([rng.randint(-coeff, coeff) for _ in range(rng.randint(0, max_degree) + 1)])


def random_network(
    rng: random.Random,
    max_relays: int = 4,
    max_ports: int = 3,
    max_degree: int = 2,
    density: float = 0.5,
    zero_entry: float = 0.3,
) -> LtiNetwork:
    """Random point-to-point network; self-loops get constant entries so they stay proper."""
    v = rng.randint(0, max_relays)
    nodes = [NodeSpec("tx", TRANSMITTER, rng.randint(1, max_ports), 0)]
    nodes += [NodeSpec(f"r{k}", RELAY, rng.randint(1, max_ports), rng.randint(1, max_ports)) for k in range(1, v + 1)]
    nodes.append(NodeSpec("rx", RECEIVER, 0, rng.randint(1, max_ports)))
    by = {n.id: n for n in nodes}
    ch = {}
    sources = ["tx"] + [f"r{k}" for k in range(1, v + 1)]
    sinks = [f"r{k}" for k in range(1, v + 1)] + ["rx"]
    for s in sources:
        for d in sinks:
            if rng.random() >= density:
                continue
            deg = 0 if s == d else max_degree
            rows = [
                [RatFn(random_poly(rng, deg)) if rng.random() >= zero_entry else 0 for _ in range(by[s].d_in)]
                for _ in range(by[d].d_out)
            ]
            ch[(s, d)] = RatMatrix(rows)
    return LtiNetwork(nodes, ch)


def random_multi_network(
    rng: random.Random,
    n_tx: int = 1,
    max_relays: int = 3,
    max_ports: int = 2,
    max_degree: int = 1,
    density: float = 0.6,
) -> LtiNetwork:
    """Random network with ``n_tx`` transmitters and two receivers (rx1, rx2)."""
    v = rng.randint(0, max_relays)
    txs = ["tx"] if n_tx == 1 else [f"tx{k}" for k in range(1, n_tx + 1)]
    nodes = [NodeSpec(t, TRANSMITTER, rng.randint(1, max_ports), 0) for t in txs]
    relays = [f"r{k}" for k in range(1, v + 1)]
    nodes += [NodeSpec(r, RELAY, rng.randint(1, max_ports), rng.randint(1, max_ports)) for r in relays]
    nodes += [NodeSpec(r, RECEIVER, 0, rng.randint(1, max_ports)) for r in ("rx1", "rx2")]
    by = {n.id: n for n in nodes}
    ch = {}
    for s in txs + relays:
        for d in relays + ["rx1", "rx2"]:
            if rng.random() >= density:
                continue
            deg = 0 if s == d else max_degree
            ch[(s, d)] = RatMatrix([[RatFn(random_poly(rng, deg)) for _ in range(by[s].d_in)] for _ in range(by[d].d_out)])
    return LtiNetwork(nodes, ch)


def random_stable_causal(rng: random.Random, coeff: int = 3) -> RatFn:
    """A small causal entry c, c/z or (a z + b)/(z - p) with |p| < 1."""
    kind = rng.randrange(4)
    c = rng.randint(-coeff, coeff)
    if kind == 0:
        return RatFn.const(c)
    if kind == 1:
        return RatFn(Poly([c]), Poly([0, 1]))
    pole = rng.choice([0, Fraction(1, 2), Fraction(-1, 2), Fraction(1, 3), Fraction(-1, 3)])
    return RatFn(Poly([rng.randint(-coeff, coeff), c]), Poly([-pole, 1]))


def random_stable_network(
    rng: random.Random,
    txs=("tx",),
    rxs=("rx",),
    max_relays: int = 2,
    max_ports: int = 2,
    density: float = 0.6,
    tx_ports: int | None = None,
    relay_loops: bool = True,
) -> LtiNetwork:
    """Random network whose channels are causal with poles strictly inside the unit circle."""
    v = rng.randint(0, max_relays)
    relays = [f"r{k}" for k in range(1, v + 1)]
    nodes = [NodeSpec(t, TRANSMITTER, tx_ports or rng.randint(1, max_ports), 0) for t in txs]
    nodes += [NodeSpec(r, RELAY, rng.randint(1, max_ports), rng.randint(1, max_ports)) for r in relays]
    nodes += [NodeSpec(r, RECEIVER, 0, rng.randint(1, max_ports)) for r in rxs]
    by = {n.id: n for n in nodes}
    ch = {}
    for s in list(txs) + relays:
        for d in relays + list(rxs):
            if rng.random() >= density or (s == d and not relay_loops):
                continue
            ch[(s, d)] = RatMatrix([[random_stable_causal(rng) for _ in range(by[s].d_in)] for _ in range(by[d].d_out)])
    return LtiNetwork(nodes, ch)


def random_unstable_plant(rng: random.Random, lam=2, max_m: int = 3, max_mult: int = 2, n_inputs: int = 1):
    """Plant with one unstable eigenvalue of geometric multiplicity <= max_mult, hidden by an integer similarity."""
    m = rng.randint(1, max_m)
    g = rng.randint(1, min(max_mult, m))
    blocks = [(lam, 1) for _ in range(g - 1)]
    rest = m - (g - 1)
    size = rng.randint(1, rest)
    blocks.append((lam, size))
    for _ in range(rest - size):
        blocks.append((rng.choice([0, Fraction(1, 2), Fraction(-1, 2)]), 1))
    J = jordan_matrix(blocks).constants()
    # unit upper-triangular similarity keeps everything integral
    T = [[1 if i == j else (rng.randint(-1, 1) if j > i else 0) for j in range(m)] for i in range(m)]
    A = qmat.mul(qmat.mul(T, J), qmat.inv(T))
    Bs = []
    for _ in range(n_inputs):
        q = rng.randint(1, 2)
        Bs.append(RatMatrix([[rng.randint(-2, 2) for _ in range(q)] for _ in range(m)]))
    C = RatMatrix([[rng.randint(-2, 2) for _ in range(m)] for _ in range(rng.randint(1, 2))])
    return qmat.to_ratmatrix(A, m, m), Bs, C


def random_ptop_problem(rng: random.Random, lam=2, max_m: int = 3, max_relays: int = 2, tries: int = 200):
    """A stabilizable point-to-point control problem (conditions checked exactly)."""
    from .conet import ControlProblem, Plant, stabilizability_ptop

    for _ in range(tries):
        A, Bs, C = random_unstable_plant(rng, lam, max_m)
        net = random_stable_network(rng, ("ob",), ("cn",), max_relays=max_relays)
        prob = ControlProblem("ptop", [Plant(A, Bs, C)], net, ["ob"], ["cn"])
        if stabilizability_ptop(prob)["stabilizable"]:
            return prob
    raise RuntimeError("no stabilizable ptop problem found")


def random_broadcast_problem(rng: random.Random, lam=2, max_m: int = 2, max_relays: int = 1, tries: int = 200):
    """Broadcast problem whose plants share the unstable eigenvalue and meet the sufficient condition."""
    from .conet import ControlProblem, Plant, stabilizability_broadcast

    for _ in range(tries):
        plants = []
        for _k in range(2):
            A, Bs, C = random_unstable_plant(rng, lam, max_m, max_mult=1)
            plants.append(Plant(A, Bs, C))
        net = random_stable_network(rng, ("ob",), ("cn1", "cn2"), max_relays=max_relays, tx_ports=2)
        prob = ControlProblem("broadcast", plants, net, ["ob"], ["cn1", "cn2"])
        if stabilizability_broadcast(prob)["sufficient"]:
            return prob
    raise RuntimeError("no independently stabilizable broadcast problem found")


def broadcast_gap_problem():
    """Scalar plants 3 and 2 behind a direct channel [3 - 6/z; 2 - 6/z]: necessary holds, sufficient fails."""
    from .conet import ControlProblem, Plant

    h1 = RatFn(Poly([-6, 3]), Poly([0, 1]))
    h2 = RatFn(Poly([-6, 2]), Poly([0, 1]))
    nodes = [NodeSpec("ob", TRANSMITTER, 1, 0), NodeSpec("cn1", RECEIVER, 0, 1), NodeSpec("cn2", RECEIVER, 0, 1)]
    net = LtiNetwork(nodes, {("ob", "cn1"): _m([[h1]]), ("ob", "cn2"): _m([[h2]])})
    plants = [Plant(_m([[3]]), [_m([[1]])], _m([[1]])), Plant(_m([[2]]), [_m([[1]])], _m([[1]]))]
    return ControlProblem("broadcast", plants, net, ["ob"], ["cn1", "cn2"])


def scalar_ptop_problem(a=2, channel=1):
    """Scalar plant x+ = a x + u + w observed and controlled over one direct channel."""
    from .conet import ControlProblem, Plant

    nodes = [NodeSpec("ob", TRANSMITTER, 1, 0), NodeSpec("cn", RECEIVER, 0, 1)]
    net = LtiNetwork(nodes, {("ob", "cn"): _m([[channel]])})
    return ControlProblem("ptop", [Plant(_m([[a]]), [_m([[1]])], _m([[1]]))], net, ["ob"], ["cn"])


def z_pow(k: int) -> RatFn:
    return Z**k


def jordan_matrix(blocks) -> RatMatrix:
    """Block-diagonal Jordan matrix from (eigenvalue, size) pairs."""
    m = sum(s for _, s in blocks)
    rows = [[0] * m for _ in range(m)]
    k = 0
    for lam, size in blocks:
        for i in range(size):
            rows[k + i][k + i] = lam
            if i + 1 < size:
                rows[k + i][k + i + 1] = 1
        k += size
    return RatMatrix(rows, rows=m, cols=m)


def random_jordan_system(rng: random.Random, max_m: int = 5, max_v: int = 3, proper: bool = False, sparsity: float = 0.6, eigen=(2, 3)):
    """Random Jordan-form system with sparse integer B_i, C_i (sparse so fixed modes show up)."""
    from .decsys import DecSystem

    m = rng.randint(1, max_m)
    blocks, left = [], m
    while left:
        size = rng.randint(1, left)
        blocks.append((rng.choice(eigen), size))
        left -= size
    A = jordan_matrix(blocks)
    v = rng.randint(1, max_v)

    def entry():
        return rng.randint(-2, 2) if rng.random() >= sparsity else 0

    qs = [rng.randint(1, 2) for _ in range(v)]
    rs = [rng.randint(1, 2) for _ in range(v)]
    B = [RatMatrix([[entry() for _ in range(q)] for _ in range(m)], rows=m, cols=q) for q in qs]
    C = [RatMatrix([[entry() for _ in range(m)] for _ in range(r)], rows=r, cols=m) for r in rs]
    D = None
    if proper:
        D = [[RatMatrix([[entry() for _ in range(qs[j])] for _ in range(rs[i])], rows=rs[i], cols=qs[j]) for j in range(v)] for i in range(v)]
    return DecSystem(A, B, C, D), [lam for lam, _ in blocks]
