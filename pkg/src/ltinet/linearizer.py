"""Network linearization with circulation arcs.

The state vector is ordered [X_ax; Y; X_1; ...; X_v] (with one X_ax block per
circulation arc in the two-arc modes).  Every node becomes a gain block
between a single transmitter tx' and the receivers, so the linearized
transfer A + sum B_g K_g C_g is affine in every gain.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .exactalg import LtiError, RatMatrix, block_diag, hstack, mat_rank, vstack
from .netmodel import (
    RECEIVER,
    RELAY,
    TRANSMITTER,
    GainAssignment,
    LoopSingular,
    LtiNetwork,
    NodeSpec,
    RankConfig,
    ValidationError,
    loop_matrix,
    mincut_rank,
    random_gains,
    transfer_matrix,
)


class OffsetViolation(LtiError):
    pass


class ModeShapeMismatch(LtiError):
    pass


class SynthesisBudgetExceeded(LtiError):
    pass


class Threshold(NamedTuple):
    receiver: str
    relation: str  # ">=" or "<="
    value: int

    def holds(self, rank: int) -> bool:
        return rank >= self.value if self.relation == ">=" else rank <= self.value


@dataclass
class LinearizedNetwork:
    """Linearized single-hop network and its A/B/C blocks.

    ``gain_nodes`` lists the gain blocks in state order; for the point-to-point
    case they are [tx, relays..., rx] under their original ids.
    """

    source: LtiNetwork
    base: LtiNetwork
    A: RatMatrix
    B: dict[str, RatMatrix]
    C: dict[str, RatMatrix]
    offset_d: int
    d_ax: int
    gain_nodes: list[str]
    tx_prime: str
    receivers: dict[str, list[str]]  # linearized receiver -> gain nodes it hears
    thresholds: list[Threshold] = field(default_factory=list)
    mode: str = "ptop"

    @property
    def dim(self) -> int:
        return self.A.rows

    def transfer(self, gains: dict[str, RatMatrix], receiver: str | None = None) -> RatMatrix:
        """A + sum over the receiver's gain blocks of B_g K_g C_g (I for the auxiliary receiver)."""
        receiver = receiver or next(iter(self.receivers))
        G = self.base.H(self.tx_prime, receiver)
        for g in self.receivers[receiver]:
            G = G + self.B[g] @ gains[g] @ self.C[g]
        return G

    def annex(self) -> dict:
        return {
            "offset_d": self.offset_d,
            "d_ax": self.d_ax,
            "thresholds": [{"receiver": t.receiver, "relation": t.relation, "value": t.value} for t in self.thresholds],
        }


def _prime(name: str) -> str:
    return name + "'"


def _state_layout(net: LtiNetwork, arcs: Sequence[int], rxs: Sequence[str]):
    """Offsets of X_ax blocks, Y blocks and X_i blocks in the stacked state."""
    relays = net.relays
    sizes = list(arcs) + [net.node(r).d_out for r in rxs] + [net.node(r).d_out for r in relays]
    offs = [0]
    for s in sizes:
        offs.append(offs[-1] + s)
    return sizes, offs


def _selector(total: int, start: int, size: int, sign: int = -1) -> RatMatrix:
    """size x total matrix with sign*I at columns [start, start+size)."""
    rows = [[sign if j == start + i else 0 for j in range(total)] for i in range(size)]
    return RatMatrix(rows, rows=size, cols=total)


def _column_stack(net: LtiNetwork, src: str, rxs: Sequence[str], n_arcs_rows: int) -> RatMatrix:
    """[0; H_src,rx...; H_src,1; ...; H_src,v] for one sending node."""
    d_in = net.node(src).d_in
    parts = [RatMatrix.zeros(n_arcs_rows, d_in)]
    parts += [net.H(src, r) for r in rxs]
    parts += [net.H(src, r) for r in net.relays]
    return vstack(parts, cols=d_in)


def _build(net: LtiNetwork, arcs: Sequence[int], txs: Sequence[str], rxs: Sequence[str]):
    """Shared construction of A, B, C for any number of arcs/terminals.

    ``txs[k]`` is the original transmitter feeding arc k; ``rxs[k]`` is the
    receiver closing arc k.  Returns (A, B, C, gain ids per role, d).
    """
    sizes, offs = _state_layout(net, arcs, rxs)
    total = offs[-1]
    n_ax = sum(arcs)
    d = total - n_ax
    A = block_diag([RatMatrix.zeros(n_ax, n_ax), RatMatrix.identity(d)])
    B, C = {}, {}
    tx_ids, rx_ids = [], []
    multi = len(arcs) > 1
    for k, (t, a) in enumerate(zip(txs, arcs)):
        gid = f"{t}@{k + 1}" if multi else t
        B[gid] = _column_stack(net, t, rxs, n_ax)
        C[gid] = _selector(total, offs[k], a)
        tx_ids.append(gid)
    for idx, r in enumerate(net.relays):
        B[r] = _column_stack(net, r, rxs, n_ax)
        C[r] = _selector(total, offs[len(arcs) + len(rxs) + idx], net.node(r).d_out)
    for k, r in enumerate(rxs):
        arc = k if len(arcs) > 1 else 0
        d_rx = net.node(r).d_out
        B[r] = _selector(total, offs[arc], arcs[arc], sign=1).T
        C[r] = _selector(total, offs[len(arcs) + k], d_rx)
        rx_ids.append(r)
    return A, B, C, tx_ids, rx_ids, d


def _gain_node(gid: str, Bm: RatMatrix, Cm: RatMatrix) -> NodeSpec:
    return NodeSpec(gid, RELAY, Bm.cols, Cm.rows)


def _assemble(net, A, B, C, order, tx_prime, receivers: dict[str, list[str]], aux: dict[str, RatMatrix] | None = None):
    total = A.rows
    nodes = [NodeSpec(tx_prime, TRANSMITTER, total, 0)]
    nodes += [_gain_node(g, B[g], C[g]) for g in order]
    nodes += [NodeSpec(r, RECEIVER, 0, total) for r in receivers]
    ch = {}
    for g in order:
        ch[(tx_prime, g)] = C[g]
    for r, heard in receivers.items():
        ch[(tx_prime, r)] = (aux or {}).get(r, A)
        for g in heard:
            ch[(g, r)] = B[g]
    return LtiNetwork(nodes, ch, net.field)


def linearize_ptop(net: LtiNetwork, d_ax: int, tx: str | None = None, rx: str | None = None) -> LinearizedNetwork:
    if d_ax < 1:
        raise ValueError("d_ax must be at least 1")
    tx, rx = net.terminal_pair(tx, rx)
    A, B, C, tx_ids, rx_ids, d = _build(net, [d_ax], [tx], [rx])
    order = tx_ids + net.relays + rx_ids
    rxp = _prime(rx)
    receivers = {rxp: list(order)}
    base = _assemble(net, A, B, C, order, _prime(tx), receivers)
    return LinearizedNetwork(
        source=net, base=base, A=A, B=B, C=C, offset_d=d, d_ax=d_ax, gain_nodes=order,
        tx_prime=_prime(tx), receivers=receivers, thresholds=[Threshold(rxp, ">=", d + d_ax)],
    )


def linearize_with_aux_receiver(net: LtiNetwork, d_ax: int, tx: str | None = None, rx: str | None = None) -> LinearizedNetwork:
    """Adds rx'' hearing I + sum_relays B_i K_i C_i; full rank there means I - blockHK is invertible."""
    lin = linearize_ptop(net, d_ax, tx, rx)
    return _with_aux(lin)


def _with_aux(lin: LinearizedNetwork) -> LinearizedNetwork:
    aux = lin.gain_nodes[-1] + "''" if lin.mode == "ptop" else "aux''"
    receivers = dict(lin.receivers)
    receivers[aux] = list(lin.source.relays)
    base = _assemble(lin.source, lin.A, lin.B, lin.C, lin.gain_nodes, lin.tx_prime, receivers, {aux: RatMatrix.identity(lin.dim)})
    thresholds = list(lin.thresholds) + [Threshold(aux, ">=", lin.dim)]
    return LinearizedNetwork(
        source=lin.source, base=base, A=lin.A, B=lin.B, C=lin.C, offset_d=lin.offset_d, d_ax=lin.d_ax,
        gain_nodes=lin.gain_nodes, tx_prime=lin.tx_prime, receivers=receivers, thresholds=thresholds, mode=lin.mode,
    )


def sample_linearized_gains(lin: LinearizedNetwork, rng: random.Random, bound: int) -> dict[str, RatMatrix]:
    out = {}
    for g in lin.gain_nodes:
        rows, cols = lin.B[g].cols, lin.C[g].rows
        out[g] = RatMatrix([[rng.randint(-bound, bound) for _ in range(cols)] for _ in range(rows)], rows=rows, cols=cols)
    return out


# ---------------------------------------------------------------------------
# rank offset checks


@dataclass
class OffsetReport:
    offset_d: int
    d_ax: int
    maxflow_original: int  # rank(K_rx G K_tx) + d
    maxflow_linearized: int  # rank G_lin
    mincut_original: int  # min{rank K_tx, rank K_rx, mincut} + d
    mincut_linearized: int
    rounds: list[tuple[int, int]]

    @property
    def maxflow_ok(self) -> bool:
        return self.maxflow_original == self.maxflow_linearized and all(a == b for a, b in self.rounds)

    @property
    def mincut_ok(self) -> bool:
        return self.mincut_original == self.mincut_linearized

    def as_dict(self) -> dict:
        return {
            "offset_d": self.offset_d,
            "d_ax": self.d_ax,
            "maxflow": {"original_plus_d": self.maxflow_original, "linearized": self.maxflow_linearized, "pass": self.maxflow_ok},
            "mincut": {"original_plus_d": self.mincut_original, "linearized": self.mincut_linearized, "pass": self.mincut_ok},
        }


def verify_offsets(net: LtiNetwork, lin: LinearizedNetwork, cfg: RankConfig = RankConfig(), strict: bool = True, budget: int = 32) -> OffsetReport:
    """Check both offset identities.

    The maxflow side substitutes the same random gains into the original
    network (explicit transfer matrix) and into G_lin, round by round.  The
    mincut side enumerates cuts of both networks.
    """
    tx, rx = lin.gain_nodes[0], lin.gain_nodes[-1]
    d_tx, d_rx = net.node(tx).d_in, net.node(rx).d_out
    if lin.d_ax < max(d_tx, d_rx):
        raise ValueError("d_ax must be at least max(d_tx, d_rx)")
    d = lin.offset_d
    rxp = next(iter(lin.receivers))
    rng = random.Random(cfg.seed)
    rounds = []
    for _ in range(cfg.rounds):
        for _ in range(budget):
            gains = sample_linearized_gains(lin, rng, cfg.sample_bound)
            relay_gains = GainAssignment({r: gains[r] for r in net.relays})
            try:
                G = transfer_matrix(net, relay_gains, tx, rx)
                break
            except LoopSingular:
                continue
        else:
            raise LoopSingular("could not sample a gain with an invertible loop")
        left = mat_rank(gains[rx] @ G @ gains[tx]) + d
        right = mat_rank(lin.transfer(gains, rxp))
        rounds.append((left, right))
    mc, _ = mincut_rank(net, None, tx, rx)
    lhs_cut = min(min(d_tx, lin.d_ax), min(d_rx, lin.d_ax), mc) + d
    rhs_cut, _ = mincut_rank(lin.base, None, lin.tx_prime, rxp)
    report = OffsetReport(
        offset_d=d, d_ax=lin.d_ax,
        maxflow_original=max(a for a, _ in rounds), maxflow_linearized=max(b for _, b in rounds),
        mincut_original=lhs_cut, mincut_linearized=rhs_cut, rounds=rounds,
    )
    if strict and not (report.maxflow_ok and report.mincut_ok):
        raise OffsetViolation(f"offset identities failed: {report.as_dict()}")
    return report


# ---------------------------------------------------------------------------
# multi-receiver linearization


@dataclass
class MultiLinearized(LinearizedNetwork):
    pairs: dict[str, tuple[str, str]] = field(default_factory=dict)  # receiver -> (rx gain, tx gain)


def linearize_multi(net: LtiNetwork, mode: str, d_ax: int | Sequence[int], targets: Sequence[int] | None = None) -> MultiLinearized:
    """Circulation-arc linearization for multicast, broadcast and unicast.

    multicast: one arc shared by both receivers; receivers rx1', rx2'.
    broadcast/unicast: one arc per receiver; receivers rx11', rx22' must carry
    d + d_1 and d + d_2, the cross receivers rx12' (arc 2 read at receiver 1)
    and rx21' (arc 1 read at receiver 2) must stay at or below d + d_cross.
    ``targets`` are (d_1, d_2) or (d_1, d_2, d_12, d_21); cross targets default to 0.
    """
    txs, rxs = net.transmitters, net.receivers
    if mode in ("multicast", "broadcast"):
        if len(txs) != 1 or len(rxs) != 2:
            raise ModeShapeMismatch(f"{mode} needs 1 transmitter and 2 receivers, got {len(txs)} and {len(rxs)}")
    elif mode == "unicast":
        if len(txs) != 2 or len(rxs) != 2:
            raise ModeShapeMismatch(f"unicast needs 2 transmitters and 2 receivers, got {len(txs)} and {len(rxs)}")
    else:
        raise ModeShapeMismatch(f"unknown mode {mode!r}")
    if mode == "multicast":
        arcs = [int(d_ax if isinstance(d_ax, int) else d_ax[0])]
        A, B, C, tx_ids, rx_ids, d = _build(net, arcs, [txs[0]], rxs)
        order = tx_ids + net.relays + rx_ids
        t1, t2 = (list(targets) + [None, None])[:2] if targets else (arcs[0], arcs[0])
        t1 = arcs[0] if t1 is None else t1
        t2 = arcs[0] if t2 is None else t2
        receivers = {}
        pairs = {}
        for k, r in enumerate(rx_ids):
            name = f"rx{k + 1}'"
            receivers[name] = tx_ids + net.relays + [r]
            pairs[name] = (r, tx_ids[0])
        thresholds = [Threshold("rx1'", ">=", d + t1), Threshold("rx2'", ">=", d + t2)]
        base = _assemble(net, A, B, C, order, "tx'", receivers)
        return MultiLinearized(
            source=net, base=base, A=A, B=B, C=C, offset_d=d, d_ax=arcs[0], gain_nodes=order, tx_prime="tx'",
            receivers=receivers, thresholds=thresholds, mode=mode, pairs=pairs,
        )
    arcs = [d_ax, d_ax] if isinstance(d_ax, int) else [int(x) for x in d_ax]
    feeders = [txs[0], txs[0]] if mode == "broadcast" else list(txs)
    A, B, C, tx_ids, rx_ids, d = _build(net, arcs, feeders, rxs)
    order = tx_ids + net.relays + rx_ids
    tg = list(targets) if targets else [arcs[0], arcs[1]]
    while len(tg) < 4:
        tg.append(0)
    receivers, pairs = {}, {}
    for a in (1, 2):
        for b in (1, 2):
            name = f"rx{a}{b}'"
            receivers[name] = [tx_ids[b - 1]] + net.relays + [rx_ids[a - 1]]
            pairs[name] = (rx_ids[a - 1], tx_ids[b - 1])
    thresholds = [
        Threshold("rx11'", ">=", d + tg[0]),
        Threshold("rx22'", ">=", d + tg[1]),
        Threshold("rx12'", "<=", d + tg[2]),
        Threshold("rx21'", "<=", d + tg[3]),
    ]
    base = _assemble(net, A, B, C, order, "tx'", receivers)
    return MultiLinearized(
        source=net, base=base, A=A, B=B, C=C, offset_d=d, d_ax=sum(arcs), gain_nodes=order, tx_prime="tx'",
        receivers=receivers, thresholds=thresholds, mode=mode, pairs=pairs,
    )


def original_pair_rank(ml: MultiLinearized, gains: dict[str, RatMatrix], receiver: str) -> int:
    """rank(K_rx G_tx,rx K_tx) in the original network for the pair a linearized receiver reads."""
    rx_gain, tx_gain = ml.pairs[receiver]
    net = ml.source
    tx = tx_gain.split("@")[0] if "@" in tx_gain else tx_gain
    G = transfer_matrix(net, GainAssignment({r: gains[r] for r in net.relays}), tx, rx_gain)
    return mat_rank(gains[rx_gain] @ G @ gains[tx_gain])


def check_thresholds(lin: LinearizedNetwork, gains: dict[str, RatMatrix]) -> dict[str, tuple[int, bool]]:
    out = {}
    for t in lin.thresholds:
        r = mat_rank(lin.transfer(gains, t.receiver))
        out[t.receiver] = (r, t.holds(r))
    return out


# ---------------------------------------------------------------------------
# code synthesis


def synthesize_gains(net: LtiNetwork, cfg: RankConfig = RankConfig(), budget: int = 32, tx: str | None = None, rx: str | None = None) -> GainAssignment:
    """Memoryless integer gains achieving the mincut with a well-defined loop."""
    tx, rx = net.terminal_pair(tx, rx)
    mc, _ = mincut_rank(net, None, tx, rx)
    if mc == 0:
        return GainAssignment({r: RatMatrix.zeros(net.node(r).d_in, net.node(r).d_out) for r in net.relays})
    lin = linearize_with_aux_receiver(net, mc, tx, rx)
    rng = random.Random(cfg.seed)
    for _ in range(budget):
        gains = sample_linearized_gains(lin, rng, cfg.sample_bound)
        if all(ok for _, ok in check_thresholds(lin, gains).values()):
            out = GainAssignment({r: gains[r] for r in net.relays}, tx=gains[tx], rx=gains[rx])
            if mat_rank(transfer_matrix(net, out, tx, rx)) != mc:
                raise OffsetViolation("linearized thresholds met but original rank differs from mincut")
            return out
    raise SynthesisBudgetExceeded(f"no mincut-achieving gains after {budget} samples")


def synthesize_multicast_gains(net: LtiNetwork, cfg: RankConfig = RankConfig(), budget: int = 32) -> tuple[GainAssignment, dict[str, int]]:
    """One relay assignment achieving min_k mincut(tx, rx_k) at every receiver."""
    (tx,) = net.transmitters
    rxs = net.receivers
    cuts = {r: mincut_rank(net, None, tx, r)[0] for r in rxs}
    rate = min(cuts.values())
    rng = random.Random(cfg.seed)
    for _ in range(budget):
        g = random_gains(net, rng, cfg.sample_bound)
        if net.relays and mat_rank(loop_matrix(net, g, tx, rxs[0])) < loop_matrix(net, g, tx, rxs[0]).rows:
            continue
        ranks = {r: mat_rank(transfer_matrix(net, g, tx, r)) for r in rxs}
        if all(v >= rate for v in ranks.values()):
            return g, ranks
    raise SynthesisBudgetExceeded(f"no multicast gains reaching rate {rate} after {budget} samples")
