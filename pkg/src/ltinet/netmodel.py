"""LTI communication networks: nodes, ports, channel blocks, transfer matrices and cuts.

A node transmits on ``ports_to_channel`` ports and listens on
``ports_from_channel`` ports.  The channel from node i to node j is a rational
matrix of shape (d_j,out x d_i,in); missing channels are zero blocks.  Relay i
applies a gain K_i of shape (d_i,in x d_i,out) to what it hears.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .exactalg import (
    LtiError,
    PoleAtPoint,
    RatFn,
    RatMatrix,
    Singular,
    block,
    eval_matrix,
    format_scalar,
    hstack,
    mat_rank,
    mat_solve,
    matrix_from_json,
    matrix_to_json,
    vstack,
)

TRANSMITTER, RELAY, RECEIVER = "transmitter", "relay", "receiver"
KINDS = (TRANSMITTER, RELAY, RECEIVER)
MAX_CUT_RELAYS = 20


class ValidationError(LtiError):
    """Malformed network description (maps to a parse/validation failure)."""


class DimensionMismatch(ValidationError):
    pass


class PortKindViolation(ValidationError):
    pass


class LoopSingular(LtiError):
    pass


class PoleAtLambda(LtiError):
    def __init__(self, src: str, dst: str, i: int, j: int, lam):
        self.src, self.dst, self.i, self.j, self.lam = src, dst, i, j, lam
        super().__init__(f"channel {src}->{dst} entry ({i},{j}) has a pole at {format_scalar(lam)}")


EvaluationPole = PoleAtLambda


class InvalidCut(LtiError):
    pass


class TooManyRelays(LtiError):
    pass


class MincutMismatch(LtiError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: str
    ports_to_channel: int
    ports_from_channel: int

    @property
    def d_in(self) -> int:
        return self.ports_to_channel

    @property
    def d_out(self) -> int:
        return self.ports_from_channel


@dataclass(frozen=True)
class Cut:
    members: frozenset

    def __contains__(self, node_id) -> bool:
        return node_id in self.members

    def sorted(self, order: Sequence[str]) -> list[str]:
        return [n for n in order if n in self.members]


@dataclass(frozen=True)
class RankConfig:
    sample_bound: int = 10**6
    rounds: int = 3
    seed: int = 0

    def with_seed(self, seed: int) -> "RankConfig":
        return RankConfig(self.sample_bound, self.rounds, seed)


@dataclass
class GainAssignment:
    relays: dict[str, RatMatrix] = field(default_factory=dict)
    tx: RatMatrix | None = None
    rx: RatMatrix | None = None

    def check_causal(self):
        for name, K in list(self.relays.items()) + [("tx", self.tx), ("rx", self.rx)]:
            if K is not None and not K.is_causal():
                raise ValidationError(f"gain {name} has a non-causal entry")


class LtiNetwork:
    """Nodes in order plus a sparse map of channel blocks keyed by (from, to)."""

    def __init__(self, nodes: Iterable[NodeSpec], channels: Mapping[tuple[str, str], RatMatrix] | None = None, field: str = "Q"):
        self.nodes: tuple[NodeSpec, ...] = tuple(nodes)
        self.channels: dict[tuple[str, str], RatMatrix] = dict(channels or {})
        self.field = field
        self._by_id = {n.id: n for n in self.nodes}

    def node(self, node_id: str) -> NodeSpec:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise ValidationError(f"unknown node {node_id!r}") from None

    def ids(self, kind: str | None = None) -> list[str]:
        return [n.id for n in self.nodes if kind is None or n.kind == kind]

    @property
    def relays(self) -> list[str]:
        return self.ids(RELAY)

    @property
    def transmitters(self) -> list[str]:
        return self.ids(TRANSMITTER)

    @property
    def receivers(self) -> list[str]:
        return self.ids(RECEIVER)

    def terminal_pair(self, tx: str | None = None, rx: str | None = None) -> tuple[str, str]:
        if tx is None:
            txs = self.transmitters
            if len(txs) != 1:
                raise ValidationError(f"network has {len(txs)} transmitters; name one explicitly")
            tx = txs[0]
        if rx is None:
            rxs = self.receivers
            if len(rxs) != 1:
                raise ValidationError(f"network has {len(rxs)} receivers; name one explicitly")
            rx = rxs[0]
        if self.node(tx).kind != TRANSMITTER or self.node(rx).kind != RECEIVER:
            raise ValidationError(f"{tx!r}/{rx!r} are not a transmitter/receiver pair")
        return tx, rx

    def H(self, src: str, dst: str) -> RatMatrix:
        m = self.channels.get((src, dst))
        if m is not None:
            return m
        return RatMatrix.zeros(self.node(dst).d_out, self.node(src).d_in)

    def evaluate(self, lam) -> "LtiNetwork":
        """Same topology with every channel evaluated at z = lam."""
        out = {}
        for (s, d), m in self.channels.items():
            try:
                out[(s, d)] = eval_matrix(m, lam)
            except PoleAtPoint as exc:
                raise PoleAtLambda(s, d, exc.i, exc.j, lam) from None
        return LtiNetwork(self.nodes, out, self.field)

    def with_channels(self, channels: Mapping[tuple[str, str], RatMatrix]) -> "LtiNetwork":
        merged = dict(self.channels)
        merged.update(channels)
        return LtiNetwork(self.nodes, merged, self.field)

    def without_relay(self, relay: str) -> "LtiNetwork":
        nodes = [n for n in self.nodes if n.id != relay]
        ch = {k: v for k, v in self.channels.items() if relay not in k}
        return LtiNetwork(nodes, ch, self.field)

    def __repr__(self):
        return f"LtiNetwork(nodes={[n.id for n in self.nodes]}, channels={sorted(self.channels)})"


def validate(net: LtiNetwork) -> None:
    seen = set()
    for n in net.nodes:
        if n.id in seen:
            raise ValidationError(f"duplicate node id {n.id!r}")
        seen.add(n.id)
        if n.kind not in KINDS:
            raise PortKindViolation(f"node {n.id!r} has unknown kind {n.kind!r}")
        if n.ports_to_channel < 0 or n.ports_from_channel < 0:
            raise DimensionMismatch(f"node {n.id!r} has a negative port count")
        if n.kind == TRANSMITTER and n.ports_from_channel != 0:
            raise PortKindViolation(f"transmitter {n.id!r} must not listen to the channel")
        if n.kind == RECEIVER and n.ports_to_channel != 0:
            raise PortKindViolation(f"receiver {n.id!r} must not transmit into the channel")
    if not net.transmitters or not net.receivers:
        raise PortKindViolation("network needs at least one transmitter and one receiver")
    if net.field not in ("Q", "Qi"):
        raise ValidationError(f"unknown field {net.field!r}")
    for (s, d), m in net.channels.items():
        src, dst = net.node(s), net.node(d)
        if dst.kind == TRANSMITTER:
            raise PortKindViolation(f"channel {s}->{d} enters a transmitter")
        if src.kind == RECEIVER:
            raise PortKindViolation(f"channel {s}->{d} leaves a receiver")
        if m.shape != (dst.d_out, src.d_in):
            raise DimensionMismatch(f"channel {s}->{d} has shape {m.shape}, expected {(dst.d_out, src.d_in)}")
        if s == d and not m.is_causal():
            raise ValidationError(f"self-loop channel at {s!r} has an improper entry")
        if net.field == "Q" and m.has_gauss():
            raise ValidationError(f"channel {s}->{d} has Gaussian entries but field is Q")


# ---------------------------------------------------------------------------
# transfer matrices


def _loop_blocks(net: LtiNetwork, gains: GainAssignment, tx: str, rx: str):
    relays = net.relays
    K = {}
    for r in relays:
        node = net.node(r)
        k = gains.relays.get(r)
        if k is None:
            raise ValidationError(f"no gain for relay {r!r}")
        if k.shape != (node.d_in, node.d_out):
            raise DimensionMismatch(f"gain {r!r} has shape {k.shape}, expected {(node.d_in, node.d_out)}")
        K[r] = k
    d_rx, d_tx = net.node(rx).d_out, net.node(tx).d_in
    n = sum(net.node(r).d_out for r in relays)
    h_row = hstack([net.H(r, rx) @ K[r] for r in relays], rows=d_rx)
    h_col = vstack([net.H(tx, r) for r in relays], cols=d_tx)
    loop = block([[net.H(i, j) @ K[i] for i in relays] for j in relays]) if relays else RatMatrix.zeros(0, 0)
    if loop.shape != (n, n):
        loop = RatMatrix.zeros(n, n)
    return h_row, loop, h_col, n


def transfer_matrix(net: LtiNetwork, gains: GainAssignment, tx: str | None = None, rx: str | None = None) -> RatMatrix:
    """End-to-end transfer H_tx,rx + [H_i,rx K_i] (I - blockHK)^{-1} [H_tx,i]."""
    tx, rx = net.terminal_pair(tx, rx)
    h_row, loop, h_col, n = _loop_blocks(net, gains, tx, rx)
    direct = net.H(tx, rx)
    if n == 0:
        return direct
    try:
        x = mat_solve(RatMatrix.identity(n) - loop, h_col)
    except Singular:
        raise LoopSingular("I - blockHK is singular for these gains") from None
    return direct + h_row @ x


def loop_matrix(net: LtiNetwork, gains: GainAssignment, tx: str | None = None, rx: str | None = None) -> RatMatrix:
    """I - blockHK, whose invertibility makes the closed loop well defined."""
    tx, rx = net.terminal_pair(tx, rx)
    _, loop, _, n = _loop_blocks(net, gains, tx, rx)
    return RatMatrix.identity(n) - loop


def transfer_rank(net: LtiNetwork, gains: GainAssignment, tx: str | None = None, rx: str | None = None) -> int:
    """rank of transfer_matrix without forming it.

    With L = I - blockHK invertible, [[H_tx,rx, -Hrow], [Hcol, L]] has rank
    n + rank(H_tx,rx + Hrow L^{-1} Hcol), so one block elimination replaces
    the inverse and the rational-function products.
    """
    tx, rx = net.terminal_pair(tx, rx)
    h_row, loop, h_col, n = _loop_blocks(net, gains, tx, rx)
    direct = net.H(tx, rx)
    if n == 0:
        return mat_rank(direct)
    L = RatMatrix.identity(n) - loop
    if mat_rank(L) < n:
        raise LoopSingular("I - blockHK is singular for these gains")
    return mat_rank(block([[direct, -h_row], [h_col, L]])) - n


def random_gains(net: LtiNetwork, rng: random.Random, bound: int, nodes: Sequence[str] | None = None) -> GainAssignment:
    """Memoryless integer gains drawn uniformly from [-bound, bound]."""
    out = {}
    for r in nodes if nodes is not None else net.relays:
        node = net.node(r)
        out[r] = RatMatrix([[rng.randint(-bound, bound) for _ in range(node.d_out)] for _ in range(node.d_in)], rows=node.d_in, cols=node.d_out)
    return GainAssignment(out)


def _check_bound(cfg: RankConfig, dim: int):
    if cfg.sample_bound < max(dim, 1):
        raise ValueError(f"sample bound {cfg.sample_bound} is below the matrix dimension {dim}")
    if cfg.rounds < 1:
        raise ValueError("at least one sampling round is required")


def generic_rank(net: LtiNetwork, at=None, cfg: RankConfig = RankConfig(), tx: str | None = None, rx: str | None = None, resample_budget: int = 32) -> int:
    """Rank of G(z, K) with the gains treated as indeterminates.

    Each round substitutes independent integer gains; the maximum over rounds
    equals the generic rank except with probability at most R * (n / (2S + 1)).
    ``at`` evaluates every channel at z = at first; None keeps z symbolic.
    """
    tx, rx = net.terminal_pair(tx, rx)
    base = net if at is None else net.evaluate(at)
    cap = min(net.node(tx).d_in, net.node(rx).d_out)
    _check_bound(cfg, sum(net.node(r).d_out for r in net.relays) + cap)
    rng = random.Random(cfg.seed)
    best = 0
    for _ in range(cfg.rounds):
        for _ in range(resample_budget):
            gains = random_gains(net, rng, cfg.sample_bound)
            try:
                r = transfer_rank(base, gains, tx, rx)
                break
            except LoopSingular:
                continue
        else:
            raise LoopSingular("every sampled gain made the loop singular")
        best = max(best, r)
        if best == cap:
            break
    return best


# ---------------------------------------------------------------------------
# cuts


def cut_matrix(net: LtiNetwork, cut: Cut | Iterable[str], tx: str | None = None, rx: str | None = None) -> RatMatrix:
    """Cross-cut channel: rows for rx then relays outside V, columns for tx then relays in V."""
    tx, rx = net.terminal_pair(tx, rx)
    members = cut.members if isinstance(cut, Cut) else frozenset(cut)
    if tx not in members or rx in members:
        raise InvalidCut("cut must contain the transmitter and exclude the receiver")
    relays = net.relays
    extra = members - set(relays) - {tx}
    if extra:
        raise InvalidCut(f"cut contains nodes that are not relays of this pair: {sorted(extra)}")
    inside = [tx] + [r for r in relays if r in members]
    outside = [rx] + [r for r in relays if r not in members]
    return block([[net.H(i, j) for i in inside] for j in outside])


def mincut_rank(net: LtiNetwork, at=None, tx: str | None = None, rx: str | None = None, cap: int = MAX_CUT_RELAYS) -> tuple[int, Cut]:
    """Exhaustive minimum of cut ranks over all 2^v cuts, with a minimizing cut."""
    tx, rx = net.terminal_pair(tx, rx)
    relays = net.relays
    if len(relays) > cap:
        raise TooManyRelays(f"{len(relays)} relays exceed the enumeration cap {cap}")
    base = net if at is None else net.evaluate(at)
    best, witness = None, None
    for mask in range(1 << len(relays)):
        members = frozenset([tx] + [r for k, r in enumerate(relays) if mask >> k & 1])
        r = mat_rank(cut_matrix(base, members, tx, rx))
        if best is None or r < best:
            best, witness = r, Cut(members)
            if best == 0:
                break
    return best, witness


def capacity_at(net: LtiNetwork, lam, cfg: RankConfig = RankConfig(), tx: str | None = None, rx: str | None = None, retries: int = 2) -> int:
    """Degree-of-freedom capacity at z = lam, cross-checked against the mincut."""
    tx, rx = net.terminal_pair(tx, rx)
    base = net.evaluate(lam)
    target, _ = mincut_rank(base, None, tx, rx)
    cur = cfg
    for attempt in range(retries + 1):
        got = generic_rank(base, None, cur, tx, rx)
        if got == target:
            return got
        cur = RankConfig(cur.sample_bound * 1000, cur.rounds + 2, cur.seed + attempt + 1)
    raise MincutMismatch(f"sampled rank {got} differs from mincut {target} at {format_scalar(lam)}")


# ---------------------------------------------------------------------------
# JSON


def network_to_json(net: LtiNetwork) -> dict:
    return {
        "field": net.field,
        "nodes": [
            {"id": n.id, "kind": n.kind, "ports_to_channel": n.ports_to_channel, "ports_from_channel": n.ports_from_channel}
            for n in net.nodes
        ],
        "channels": [
            {"from": s, "to": d, "matrix": matrix_to_json(m)}
            for (s, d), m in net.channels.items()
        ],
    }


def network_from_json(data: dict) -> LtiNetwork:
    if not isinstance(data, dict):
        raise ValidationError("network JSON must be an object")
    try:
        nodes = []
        for nd in data["nodes"]:
            nodes.append(NodeSpec(str(nd["id"]), nd["kind"], int(nd["ports_to_channel"]), int(nd["ports_from_channel"])))
        by_id = {n.id: n for n in nodes}
        channels = {}
        for ch in data.get("channels", []):
            s, d = str(ch["from"]), str(ch["to"])
            if s not in by_id or d not in by_id:
                raise ValidationError(f"channel {s}->{d} names an unknown node")
            if (s, d) in channels:
                raise ValidationError(f"duplicate channel {s}->{d}")
            rows, cols = by_id[d].d_out, by_id[s].d_in
            try:
                m = matrix_from_json(ch["matrix"], rows=rows, cols=cols) if rows == 0 or cols == 0 else matrix_from_json(ch["matrix"])
            except ValueError as exc:
                raise DimensionMismatch(f"channel {s}->{d}: {exc}") from None
            channels[(s, d)] = m
        net = LtiNetwork(nodes, channels, data.get("field", "Q"))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed network JSON: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, LtiError):
            raise
        raise ValidationError(f"malformed network JSON: {exc}") from None
    validate(net)
    return net
