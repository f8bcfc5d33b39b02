"""Control over LTI networks: stabilizability checks, closed-network realization and synthesis.

An observer node sees the plant output and transmits into the network; each
controller node receives from the network and drives one plant input.  All
channels must be causal and stable.  Designs use memoryless relay gains kept
below a Gershgorin-style margin, a (possibly dynamic) observer gain, and
deadbeat observer-based compensators at the controllers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import qmat
from .decsys import DecSystem, TooManyControllers, UnsupportedSpectrum, fixed_mode_algebraic, unstable_eigenvalues
from .exactalg import (
    LtiError,
    Poly,
    RatFn,
    RatMatrix,
    Singular,
    Z,
    eval_matrix,
    format_scalar,
    mat_det,
    mat_inverse,
    mat_rank,
    mat_solve,
    matrix_from_json,
    matrix_to_json,
    poly_to_json,
    roots_in_unit_disk,
    scalar_matrix_to_json,
    vstack,
    block_diag,
)
from .linearizer import SynthesisBudgetExceeded
from .netmodel import (
    RECEIVER,
    TRANSMITTER,
    GainAssignment,
    LoopSingular,
    LtiNetwork,
    NodeSpec,
    RankConfig,
    ValidationError,
    mincut_rank,
    network_from_json,
    network_to_json,
    transfer_matrix,
)

EPSILON_CAP = Fraction(1)
EPSILON_STEPS = 30
SYNTH_BOUND = 100  # integer grid for relay gains inside the margin
GAIN_BOUND = 9  # integer range for observer and post-processing gains


class NonCausalEntry(LtiError):
    pass


class UnstableChannel(ValidationError):
    pass


class NoMarginFound(LtiError):
    pass


class NotStabilizable(LtiError):
    pass


class NotIndependentlyStabilizable(LtiError):
    pass


class StrongConnectivityRequired(LtiError):
    pass


# ---------------------------------------------------------------------------
# state space


@dataclass
class StateSpace:
    """x[n+1] = A x + B u, y = C x + D u with constant exact matrices (nested lists)."""

    A: list
    B: list
    C: list
    D: list
    n_in: int
    n_out: int

    @property
    def n(self) -> int:
        return len(self.A)

    @classmethod
    def static(cls, K: list, n_out: int, n_in: int) -> "StateSpace":
        return cls([], [], [[] for _ in range(n_out)], qmat.copy(K) if K else [[] for _ in range(n_out)], n_in, n_out)

    def transfer(self) -> RatMatrix:
        """C (zI - A)^-1 B + D, symbolically."""
        D = qmat.to_ratmatrix(self.D, self.n_out, self.n_in)
        if not self.n:
            return D
        zI_A = RatMatrix.identity(self.n).scale(Z) - qmat.to_ratmatrix(self.A, self.n, self.n)
        X = mat_solve(zI_A, qmat.to_ratmatrix(self.B, self.n, self.n_in))
        return qmat.to_ratmatrix(self.C, self.n_out, self.n) @ X + D

    def markov_zero(self) -> bool:
        """True when the transfer is identically zero (D = 0 and C A^k B = 0 for k < n)."""
        if not qmat.is_zero(self.D):
            return False
        M = self.B
        for _ in range(self.n):
            if not qmat.is_zero(qmat.mul(self.C, M, cols=self.n_in)):
                return False
            M = qmat.mul(self.A, M, cols=self.n_in)
        return True

    def as_dict(self) -> dict:
        def js(M, r, c):
            return [[format_scalar(x) for x in row] for row in M] if r and c else []

        return {"A": js(self.A, self.n, self.n), "B": js(self.B, self.n, self.n_in),
                "C": js(self.C, self.n_out, self.n), "D": js(self.D, self.n_out, self.n_in),
                "n_in": self.n_in, "n_out": self.n_out}


def _scalar_realization(h: RatFn):
    """Controllable canonical realization of one causal scalar entry."""
    if not h.is_causal():
        raise NonCausalEntry(f"entry {h} is not causal")
    num, den = h.num, h.den  # denominator is monic
    k = den.deg
    if k == 0:
        return [], [], [], num.coeff(0) if num.deg >= 0 else 0
    d0 = num.coeff(k) if num.deg == k else 0
    rem = num - den * Poly([d0])
    A = [[0] * k for _ in range(k)]
    for i in range(k - 1):
        A[i][i + 1] = 1
    for j in range(k):
        A[k - 1][j] = -den.coeff(j)
    B = [[0] for _ in range(k)]
    B[k - 1][0] = 1
    C = [[rem.coeff(j) for j in range(k)]]
    return A, B, C, d0


def realize_channel(H: RatMatrix) -> StateSpace:
    """Entry-wise controllable-canonical realization, block assembled; C(zI-A)^-1 B + D = H."""
    if not H.is_causal():
        raise NonCausalEntry("channel has a non-causal entry")
    p, q = H.shape
    blocks, D = [], [[0] * q for _ in range(p)]
    for i in range(p):
        for j in range(q):
            h = H[i, j]
            if h.is_zero():
                continue
            A, B, C, d0 = _scalar_realization(h)
            D[i][j] = d0
            if A:
                blocks.append((i, j, A, B, C))
    n = sum(len(b[2]) for b in blocks)
    Aa, Ba, Ca = qmat.zeros(n, n), qmat.zeros(n, q), qmat.zeros(p, n)
    off = 0
    for i, j, A, B, C in blocks:
        k = len(A)
        for r in range(k):
            for c in range(k):
                Aa[off + r][off + c] = A[r][c]
            Ba[off + r][j] = B[r][0]
            Ca[i][off + r] = C[0][r]
        off += k
    return StateSpace(Aa, Ba, Ca, D, q, p)


# ---------------------------------------------------------------------------
# problems


@dataclass
class Plant:
    A: RatMatrix
    B: list[RatMatrix]  # one input matrix per controller driving this plant
    C: RatMatrix

    def __post_init__(self):
        m = self.A.rows
        if self.A.cols != m or not self.A.is_constant():
            raise ValidationError("plant A must be square and constant")
        for b in self.B:
            if b.rows != m or not b.is_constant():
                raise ValidationError("plant B must have m rows and constant entries")
        if self.C.cols != m or not self.C.is_constant():
            raise ValidationError("plant C must have m columns and constant entries")

    @property
    def m(self) -> int:
        return self.A.rows


MODES = ("ptop", "multicast", "broadcast", "unicast")


@dataclass
class ControlProblem:
    mode: str
    plants: list[Plant]
    net: LtiNetwork
    observer_nodes: list[str]
    controller_nodes: list[str]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        want = {"ptop": (1, 1, 1), "multicast": (1, 1, 2), "broadcast": (2, 1, 2), "unicast": (2, 2, 2)}[self.mode]
        got = (len(self.plants), len(self.observer_nodes), len(self.controller_nodes))
        if got != want:
            raise ValidationError(f"{self.mode} needs (plants, observers, controllers) = {want}, got {got}")
        for ob in self.observer_nodes:
            if self.net.node(ob).kind != TRANSMITTER:
                raise ValidationError(f"observer {ob!r} must be a transmitter node")
        for cn in self.controller_nodes:
            if self.net.node(cn).kind != RECEIVER:
                raise ValidationError(f"controller {cn!r} must be a receiver node")
        for (s, d), H in self.net.channels.items():
            if not H.is_causal():
                raise ValidationError(f"channel {s}->{d} is not causal")
            for row in H.e:
                for h in row:
                    if h.den.deg > 0 and not roots_in_unit_disk(h.den).strictly_stable:
                        raise UnstableChannel(f"channel {s}->{d} has a pole on or outside the unit circle")
        if self.mode == "multicast" and len(self.plants[0].B) != 2:
            raise ValidationError("multicast plant needs two input matrices")
        if self.mode != "multicast" and any(len(p.B) != 1 for p in self.plants):
            raise ValidationError("each plant needs exactly one input matrix")
        if self.mode in ("ptop", "multicast", "broadcast"):
            r_ob = sum(p.C.rows for p in self.plants)
            if r_ob < 1:
                raise ValidationError("observer sees no output")

    def controller_inputs(self) -> list[tuple[int, RatMatrix]]:
        """(plant index, B) for each controller node, in controller order."""
        if self.mode == "multicast":
            return [(0, self.plants[0].B[0]), (0, self.plants[0].B[1])]
        if self.mode == "ptop":
            return [(0, self.plants[0].B[0])]
        return [(0, self.plants[0].B[0]), (1, self.plants[1].B[0])]

    def observer_outputs(self) -> list[list[int]]:
        """Plant indices seen by each observer."""
        if self.mode == "unicast":
            return [[0], [1]]
        return [list(range(len(self.plants)))]


# ---------------------------------------------------------------------------
# condition checks


def geometric_multiplicity(A: RatMatrix, lam) -> int:
    return A.rows - mat_rank(RatMatrix.identity(A.rows).scale(lam) - A)


def _observable(A: RatMatrix, C: RatMatrix, lam) -> bool:
    m = A.rows
    return mat_rank(vstack([RatMatrix.identity(m).scale(lam) - A, C], cols=m)) == m


def _controllable(A: RatMatrix, B: RatMatrix, lam) -> bool:
    from .exactalg import hstack

    m = A.rows
    return mat_rank(hstack([RatMatrix.identity(m).scale(lam) - A, B], rows=m)) == m


def _field_of(prob: ControlProblem) -> str:
    return prob.net.field


def _lam_key(lam) -> str:
    return format_scalar(lam)


def stabilizability_ptop(prob: ControlProblem) -> dict:
    """Per unstable eigenvalue: observability, controllability and mincut versus m_lambda."""
    if prob.mode != "ptop":
        raise ValidationError("stabilizability_ptop needs a ptop problem")
    plant = prob.plants[0]
    ob, cn = prob.observer_nodes[0], prob.controller_nodes[0]
    rows = []
    for lam in unstable_eigenvalues(plant.A, _field_of(prob)):
        m_lam = geometric_multiplicity(plant.A, lam)
        mc, cut = mincut_rank(prob.net, lam, ob, cn)
        row = {
            "lambda": _lam_key(lam),
            "m_lambda": m_lam,
            "observable": _observable(plant.A, plant.C, lam),
            "controllable": _controllable(plant.A, plant.B[0], lam),
            "mincut": mc,
            "mincut_witness": sorted(cut.members),
        }
        row["ok"] = row["observable"] and row["controllable"] and m_lam <= mc
        rows.append(row)
    return {"mode": "ptop", "stabilizable": all(r["ok"] for r in rows), "eigenvalues": rows}


def stabilizability_multicast(prob: ControlProblem) -> dict:
    """Alternative stabilizability: ptop conditions per controller, mincut per receiver."""
    if prob.mode != "multicast":
        raise ValidationError("stabilizability_multicast needs a multicast problem")
    plant = prob.plants[0]
    ob = prob.observer_nodes[0]
    rows = []
    for lam in unstable_eigenvalues(plant.A, _field_of(prob)):
        m_lam = geometric_multiplicity(plant.A, lam)
        row = {"lambda": _lam_key(lam), "m_lambda": m_lam, "observable": _observable(plant.A, plant.C, lam)}
        ok = row["observable"]
        for k, cn in enumerate(prob.controller_nodes, 1):
            ctrl = _controllable(plant.A, plant.B[k - 1], lam)
            mc, _ = mincut_rank(prob.net, lam, ob, cn)
            row[f"controllable_{k}"] = ctrl
            row[f"mincut_{k}"] = mc
            ok = ok and ctrl and m_lam <= mc
        row["ok"] = ok
        rows.append(row)
    return {"mode": "multicast", "stabilizable": all(r["ok"] for r in rows), "eigenvalues": rows}


def augment_receivers(net: LtiNetwork, receivers: Sequence[str], new_id: str) -> LtiNetwork:
    """Merge receivers into one whose listen ports are stacked in the given order."""
    keep = [n for n in net.nodes if n.id not in receivers]
    dims = [net.node(r).d_out for r in receivers]
    nodes = keep + [NodeSpec(new_id, RECEIVER, 0, sum(dims))]
    ch = {k: v for k, v in net.channels.items() if k[1] not in receivers}
    for src in {s for (s, d) in net.channels if d in receivers}:
        ch[(src, new_id)] = vstack([net.H(src, r) for r in receivers], cols=net.node(src).d_in)
    return LtiNetwork(nodes, ch, net.field)


def augment_transmitters(net: LtiNetwork, transmitters: Sequence[str], new_id: str) -> LtiNetwork:
    from .exactalg import hstack

    keep = [n for n in net.nodes if n.id not in transmitters]
    dims = [net.node(t).d_in for t in transmitters]
    nodes = [NodeSpec(new_id, TRANSMITTER, sum(dims), 0)] + keep
    ch = {k: v for k, v in net.channels.items() if k[0] not in transmitters}
    for dst in {d for (s, d) in net.channels if s in transmitters}:
        ch[(new_id, dst)] = hstack([net.H(t, dst) for t in transmitters], rows=net.node(dst).d_out)
    return LtiNetwork(nodes, ch, net.field)


def _unstable_union(prob: ControlProblem) -> list:
    out = []
    for p in prob.plants:
        for lam in unstable_eigenvalues(p.A, _field_of(prob)):
            if lam not in out:
                out.append(lam)
    return out


def _m_max(plant: Plant, field_name: str) -> int:
    return max((geometric_multiplicity(plant.A, lam) for lam in unstable_eigenvalues(plant.A, field_name)), default=0)


def stabilizability_broadcast(prob: ControlProblem) -> dict:
    """Sufficient (worst-case block counts) and necessary (per-eigenvalue counts) conditions, evaluated separately."""
    if prob.mode != "broadcast":
        raise ValidationError("stabilizability_broadcast needs a broadcast problem")
    p1, p2 = prob.plants
    ob = prob.observer_nodes[0]
    cn1, cn2 = prob.controller_nodes
    aug_id = f"{cn1}+{cn2}"
    aug = augment_receivers(prob.net, [cn1, cn2], aug_id)
    f = _field_of(prob)
    M1, M2 = _m_max(p1, f), _m_max(p2, f)
    rows = []
    suff = nec = True
    for lam in _unstable_union(prob):
        m1, m2 = geometric_multiplicity(p1.A, lam), geometric_multiplicity(p2.A, lam)
        obs = _observable(p1.A, p1.C, lam) and _observable(p2.A, p2.C, lam)
        ctrl = _controllable(p1.A, p1.B[0], lam) and _controllable(p2.A, p2.B[0], lam)
        c1, _ = mincut_rank(prob.net, lam, ob, cn1)
        c2, _ = mincut_rank(prob.net, lam, ob, cn2)
        c12, _ = mincut_rank(aug, lam, ob, aug_id)
        s_ok = obs and ctrl and M1 + M2 <= c12 and M1 <= c1 and M2 <= c2
        n_ok = obs and ctrl and m1 + m2 <= c12 and m1 <= c1 and m2 <= c2
        suff &= s_ok
        nec &= n_ok
        rows.append({"lambda": _lam_key(lam), "m_1": m1, "m_2": m2, "observable": obs, "controllable": ctrl,
                     "mincut_1": c1, "mincut_2": c2, "mincut_12": c12, "sufficient": s_ok, "necessary": n_ok})
    return {"mode": "broadcast", "m_1_max": M1, "m_2_max": M2, "sufficient": suff, "necessary": nec, "eigenvalues": rows}


def stabilizability_unicast_check(prob: ControlProblem) -> dict:
    """Cut-set template for two observer/controller pairs; a necessary-type check only."""
    if prob.mode != "unicast":
        raise ValidationError("unicast check needs a unicast problem")
    p1, p2 = prob.plants
    ob1, ob2 = prob.observer_nodes
    cn1, cn2 = prob.controller_nodes
    both = augment_receivers(augment_transmitters(prob.net, [ob1, ob2], "obs"), [cn1, cn2], "cns")
    rows, ok_all = [], True
    for lam in _unstable_union(prob):
        m1, m2 = geometric_multiplicity(p1.A, lam), geometric_multiplicity(p2.A, lam)
        c1, _ = mincut_rank(prob.net, lam, ob1, cn1)
        c2, _ = mincut_rank(prob.net, lam, ob2, cn2)
        c12, _ = mincut_rank(both, lam, "obs", "cns")
        obs = _observable(p1.A, p1.C, lam) and _observable(p2.A, p2.C, lam)
        ctrl = _controllable(p1.A, p1.B[0], lam) and _controllable(p2.A, p2.B[0], lam)
        ok = obs and ctrl and m1 <= c1 and m2 <= c2 and m1 + m2 <= c12
        ok_all &= ok
        rows.append({"lambda": _lam_key(lam), "m_1": m1, "m_2": m2, "observable": obs, "controllable": ctrl,
                     "mincut_1": c1, "mincut_2": c2, "mincut_12": c12, "necessary": ok})
    return {"mode": "unicast", "necessary": ok_all, "eigenvalues": rows}


def strong_connectivity(sys: DecSystem) -> bool:
    """Every cut transfer C_V (zI - A)^-1 B_Vc is nonzero, checked on the symbolic resolvent."""
    from .decsys import MAX_CONTROLLERS
    from .exactalg import hstack

    v = sys.v
    if v > MAX_CONTROLLERS:
        raise TooManyControllers(f"{v} controllers exceed the enumeration cap")
    if v < 2:
        return True
    m = sys.m
    R = mat_inverse(RatMatrix.identity(m).scale(Z) - sys.A)
    for mask in range(1, (1 << v) - 1):
        V = [i for i in range(v) if mask >> i & 1]
        Vc = [i for i in range(v) if not mask >> i & 1]
        CV = vstack([sys.C[i] for i in V], cols=m)
        BVc = hstack([sys.B[i] for i in Vc], rows=m)
        if (CV @ R @ BVc).is_zero():
            return False
    return True


def alt_stabilizability_decentralized(systems: Sequence[DecSystem]) -> bool:
    """A strongly connected family is alternatively stabilizable iff none has an unstable fixed mode."""
    if not systems:
        return True
    ref = systems[0]
    for s in systems:
        if s.v != ref.v or any((s.q(i), s.r(i)) != (ref.q(i), ref.r(i)) for i in range(1, s.v)):
            raise ValidationError("controllers 2..v must have matching dimensions across the family")
        if not strong_connectivity(s):
            raise StrongConnectivityRequired("every system in the family must be strongly connected")
    for s in systems:
        for lam in unstable_eigenvalues(s.A, s.field):
            if fixed_mode_algebraic(s, lam)[0]:
                return False
    return True


# ---------------------------------------------------------------------------
# closed-network realization


@dataclass
class ClosedRealization:
    """The problem as a decentralized system: controllers are observers, relays, then controllers."""

    system: DecSystem
    roles: list[str]  # node id per controller index
    plant_slices: list[tuple[int, int]]
    channel_slices: dict[tuple[str, str], tuple[int, int]]

    @property
    def n_plant(self) -> int:
        return self.plant_slices[-1][1]


def realize_closed_network(prob: ControlProblem) -> ClosedRealization:
    net = prob.net
    plants = prob.plants
    plant_slices, off = [], 0
    for p in plants:
        plant_slices.append((off, off + p.m))
        off += p.m
    chans = sorted(net.channels)
    reals = {}
    channel_slices = {}
    for key in chans:
        ss = realize_channel(net.channels[key])
        reals[key] = ss
        channel_slices[key] = (off, off + ss.n)
        off += ss.n
    n = off
    A = qmat.zeros(n, n)
    for p, (a, b) in zip(plants, plant_slices):
        Ap = p.A.constants()
        for i in range(p.m):
            for j in range(p.m):
                A[a + i][a + j] = Ap[i][j]
    for key, ss in reals.items():
        a, _ = channel_slices[key]
        for i in range(ss.n):
            for j in range(ss.n):
                A[a + i][a + j] = ss.A[i][j]
    roles = list(prob.observer_nodes) + net.relays + list(prob.controller_nodes)
    obs_plants = prob.observer_outputs()
    cin = prob.controller_inputs()
    Bs, Cs = [], []
    for idx, node in enumerate(roles):
        if idx < len(prob.observer_nodes):
            seen = obs_plants[idx]
            r = sum(plants[k].C.rows for k in seen)
            Cm = qmat.zeros(r, n)
            row = 0
            for k in seen:
                Ck = plants[k].C.constants()
                a, _ = plant_slices[k]
                for i in range(plants[k].C.rows):
                    for j in range(plants[k].m):
                        Cm[row + i][a + j] = Ck[i][j]
                row += plants[k].C.rows
            q = net.node(node).d_in
        else:
            r = net.node(node).d_out
            Cm = qmat.zeros(r, n)
            for (s, d), ss in reals.items():
                if d == node:
                    a, _ = channel_slices[(s, d)]
                    for i in range(r):
                        for j in range(ss.n):
                            Cm[i][a + j] = ss.C[i][j]
            q = net.node(node).d_in if net.node(node).kind != RECEIVER else None
        if q is None:  # controller node drives a plant input
            k, Bk = cin[idx - len(prob.observer_nodes) - len(net.relays)]
            q = Bk.cols
            Bm = qmat.zeros(n, q)
            a, _ = plant_slices[k]
            Bc = Bk.constants()
            for i in range(plants[k].m):
                for j in range(q):
                    Bm[a + i][j] = Bc[i][j]
        else:
            Bm = qmat.zeros(n, q)
            for (s, d), ss in reals.items():
                if s == node:
                    a, _ = channel_slices[(s, d)]
                    for i in range(ss.n):
                        for j in range(q):
                            Bm[a + i][j] = ss.B[i][j]
        Bs.append(qmat.to_ratmatrix(Bm, n, q))
        Cs.append(qmat.to_ratmatrix(Cm, r, n))
    v = len(roles)
    D = []
    for i, dst in enumerate(roles):
        row = []
        for j, src in enumerate(roles):
            blk = qmat.zeros(Cs[i].rows, Bs[j].cols)
            if (src, dst) in reals and i >= len(prob.observer_nodes) and not (j >= v - len(prob.controller_nodes)):
                blk = qmat.copy(reals[(src, dst)].D)
            row.append(qmat.to_ratmatrix(blk, Cs[i].rows, Bs[j].cols))
        D.append(row)
    system = DecSystem(qmat.to_ratmatrix(A, n, n), Bs, Cs, D, net.field)
    return ClosedRealization(system, roles, plant_slices, channel_slices)


@dataclass
class ClosedLoop:
    """x[n+1] = A x + B [w; u_open], y_open = C x + D [w; u_open]; state is [x'; controller states]."""

    A: list
    B: list
    C: list
    D: list
    n_w: int
    n_open_in: int
    n_open_out: int
    ctrl_slices: dict[int, tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.A)


def close_loop(real: ClosedRealization, controllers: dict[int, StateSpace], w_cols: list) -> ClosedLoop:
    """Close the listed controllers (dynamic or static) around the realization.

    Controllers not listed stay open: their inputs are appended after the
    disturbance inputs and their observations become the outputs.
    Raises LoopSingular when the algebraic loop I - Dc D is singular.
    """
    sys = real.system
    n = sys.m
    v = sys.v
    closed = sorted(controllers)
    opened = [i for i in range(v) if i not in controllers]
    A = sys.A.constants()
    Bc_ = [sys.B[i].constants() for i in range(v)]
    Cc_ = [sys.C[i].constants() for i in range(v)]
    qs = [sys.q(i) for i in range(v)]
    rs = [sys.r(i) for i in range(v)]

    def Dblk(i, j):
        return sys.d(i, j).constants()

    # stacked closed-controller blocks
    nc = sum(controllers[i].n for i in closed)
    qC, rC = sum(qs[i] for i in closed), sum(rs[i] for i in closed)
    qO, rO = sum(qs[i] for i in opened), sum(rs[i] for i in opened)
    nw = len(w_cols[0]) if w_cols and w_cols[0] else 0
    Ac = qmat.block_diag([(controllers[i].A, controllers[i].n, controllers[i].n) for i in closed])
    Bk = qmat.block_diag([(controllers[i].B, controllers[i].n, rs[i]) for i in closed])
    Ck = qmat.block_diag([(controllers[i].C, qs[i], controllers[i].n) for i in closed])
    Dk = qmat.block_diag([(controllers[i].D, qs[i], rs[i]) for i in closed])
    for i in closed:
        ss = controllers[i]
        if (ss.n_in, ss.n_out) != (rs[i], qs[i]):
            raise ValidationError(f"controller {i} should map {rs[i]} inputs to {qs[i]} outputs, got {ss.n_in}->{ss.n_out}")

    def grid(rows_idx, cols_idx, rdim, cdim):
        return qmat.vstack([qmat.hstack([Dblk(i, j) for j in cols_idx], rdim[i]) for i in rows_idx]) if rows_idx else []

    D_CC = grid(closed, closed, rs, qs) or qmat.zeros(0, qC)
    D_CO = grid(closed, opened, rs, qs) or qmat.zeros(0, qO)
    D_OC = grid(opened, closed, rs, qs) or qmat.zeros(0, qC)
    D_OO = grid(opened, opened, rs, qs) or qmat.zeros(0, qO)
    B_C = qmat.hstack([Bc_[i] for i in closed], n)
    B_O = qmat.hstack([Bc_[i] for i in opened], n)
    C_C = qmat.vstack([Cc_[i] for i in closed])
    C_O = qmat.vstack([Cc_[i] for i in opened])

    # u_C = Q (Ck xi + Dk C_C x + Dk D_CO u_O),  Q = (I - Dk D_CC)^-1
    I_q = qmat.eye(qC)
    try:
        Q = qmat.inv(qmat.sub(I_q, qmat.mul(Dk, D_CC, cols=qC))) if qC else []
    except Singular as e:
        raise LoopSingular("algebraic loop through the closed controllers is singular") from e
    U_x = qmat.mul(Q, qmat.mul(Dk, C_C, cols=n), cols=n) if qC else []
    U_xi = qmat.mul(Q, Ck, cols=nc) if qC else []
    U_o = qmat.mul(Q, qmat.mul(Dk, D_CO, cols=qO), cols=qO) if qC else []

    N = n + nc
    Acl = qmat.zeros(N, N)
    Bcl = qmat.zeros(N, nw + qO)

    def put(M, r0, c0, src, rows, cols):
        for i in range(rows):
            for j in range(cols):
                if src[i][j]:
                    M[r0 + i][c0 + j] = qmat.canon(M[r0 + i][c0 + j] + src[i][j])

    put(Acl, 0, 0, A, n, n)
    if qC:
        put(Acl, 0, 0, qmat.mul(B_C, U_x, cols=n), n, n)
        put(Acl, 0, n, qmat.mul(B_C, U_xi, cols=nc), n, nc)
        put(Bcl, 0, nw, qmat.mul(B_C, U_o, cols=qO), n, qO)
    put(Bcl, 0, 0, w_cols, n, nw)
    put(Bcl, 0, nw, B_O, n, qO)
    if nc:
        # xi+ = Ac xi + Bk (C_C x + D_CC u_C + D_CO u_O)
        put(Acl, n, n, Ac, nc, nc)
        put(Acl, n, 0, qmat.mul(Bk, C_C, cols=n), nc, n)
        BD = qmat.mul(Bk, D_CC, cols=qC)
        put(Acl, n, 0, qmat.mul(BD, U_x, cols=n), nc, n)
        put(Acl, n, n, qmat.mul(BD, U_xi, cols=nc), nc, nc)
        put(Bcl, n, nw, qmat.mul(Bk, D_CO, cols=qO), nc, qO)
        put(Bcl, n, nw, qmat.mul(BD, U_o, cols=qO), nc, qO)
    # y_O = C_O x + D_OC u_C + D_OO u_O
    Ccl = qmat.zeros(rO, N)
    Dcl = qmat.zeros(rO, nw + qO)
    put(Ccl, 0, 0, C_O, rO, n)
    put(Dcl, 0, nw, D_OO, rO, qO)
    if qC and rO:
        put(Ccl, 0, 0, qmat.mul(D_OC, U_x, cols=n), rO, n)
        put(Ccl, 0, n, qmat.mul(D_OC, U_xi, cols=nc), rO, nc)
        put(Dcl, 0, nw, qmat.mul(D_OC, U_o, cols=qO), rO, qO)
    slices, off = {}, n
    for i in closed:
        slices[i] = (off, off + controllers[i].n)
        off += controllers[i].n
    return ClosedLoop(Acl, Bcl, Ccl, Dcl, nw, qO, rO, slices)


def _plant_w_cols(real: ClosedRealization, which: Sequence[int] | None = None) -> list:
    n = real.system.m
    slices = real.plant_slices
    which = range(len(slices)) if which is None else which
    total = sum(slices[k][1] - slices[k][0] for k in which)
    W = qmat.zeros(n, total)
    c = 0
    for k in which:
        a, b = slices[k]
        for i in range(b - a):
            W[a + i][c + i] = 1
        c += b - a
    return W


# ---------------------------------------------------------------------------
# relay margin


def _relay_graph_has_cycle(net: LtiNetwork) -> bool:
    relays = set(net.relays)
    adj = {r: [d for (s, d) in net.channels if s == r and d in relays] for r in relays}
    state = {}

    def visit(u):
        state[u] = 1
        for w in adj[u]:
            if state.get(w) == 1 or (w not in state and visit(w)):
                return True
        state[u] = 2
        return False

    return any(r not in state and visit(r) for r in relays)


def _network_poles_stable(real: ClosedRealization, relay_gains: dict[str, RatMatrix]) -> bool:
    """Closed relay loop with observers and controllers open; plant states decouple and are skipped."""
    ctrls = {}
    for idx, node in enumerate(real.roles):
        if node in relay_gains:
            K = relay_gains[node].constants()
            ctrls[idx] = StateSpace.static(K, real.system.q(idx), real.system.r(idx))
    try:
        cl = close_loop(real, ctrls, [])
    except LoopSingular:
        return False
    p0 = real.n_plant
    sub = [row[p0:real.system.m] for row in cl.A[p0:real.system.m]]
    if not sub:
        return True
    return roots_in_unit_disk(qmat.char_poly(sub)).strictly_stable


def _sign_gains(net: LtiNetwork, eps, rng: random.Random, mode: str) -> dict[str, RatMatrix]:
    out = {}
    for r in net.relays:
        nd = net.node(r)
        if mode == "plus":
            vals = [[eps] * nd.d_out for _ in range(nd.d_in)]
        elif mode == "minus":
            vals = [[-eps] * nd.d_out for _ in range(nd.d_in)]
        else:
            vals = [[eps if rng.random() < 0.5 else -eps for _ in range(nd.d_out)] for _ in range(nd.d_in)]
        out[r] = RatMatrix(vals, rows=nd.d_in, cols=nd.d_out)
    return out


def gershgorin_epsilon(prob: ControlProblem, samples: int = 6, seed: int = 0) -> Fraction:
    """Largest 2^-k (k >= 0, capped at 1) whose sampled extreme relay assignments keep the network poles inside."""
    net = prob.net
    real = realize_closed_network(prob)
    if not _network_poles_stable(real, {}):
        raise NoMarginFound("channel poles are not strictly inside the unit circle")
    if not _relay_graph_has_cycle(net):
        return EPSILON_CAP
    rng = random.Random(seed)
    eps = EPSILON_CAP
    for _ in range(EPSILON_STEPS):
        trials = [_sign_gains(net, eps, rng, "plus"), _sign_gains(net, eps, rng, "minus")]
        trials += [_sign_gains(net, eps, rng, "random") for _ in range(samples)]
        if all(_network_poles_stable(real, g) for g in trials):
            return eps
        eps = eps / 2
    raise NoMarginFound(f"no relay margin down to 2^-{EPSILON_STEPS}")


# ---------------------------------------------------------------------------
# deadbeat design


def place_deadbeat(A: list, B: list, rng: random.Random, budget: int = 32) -> list:
    """F with every reachable mode of A + B F at zero; unreachable modes are untouched."""
    n = len(A)
    q = len(B[0]) if B and B[0] else 0
    basis = qmat.krylov(A, B) if q else []
    k = len(basis)
    if k == 0:
        return qmat.zeros(q, n)
    Tm = qmat.T(qmat.complete_basis(basis, n))
    Ti = qmat.inv(Tm)
    Ab = qmat.mul(qmat.mul(Ti, A), Tm)
    Bb = qmat.mul(Ti, B, cols=q)
    A11 = [row[:k] for row in Ab[:k]]
    B1 = Bb[:k]
    for attempt in range(budget):
        F0 = qmat.zeros(q, k) if attempt == 0 else [[rng.randint(-2, 2) for _ in range(k)] for _ in range(q)]
        g = [[1 if (attempt == 0 and j == 0) else rng.randint(-3, 3)] for j in range(q)]
        Ac = qmat.add(A11, qmat.mul(B1, F0, cols=k))
        b = qmat.mul(B1, g, cols=1)
        cols, v = [], [r[0] for r in b]
        for _ in range(k):
            cols.append(v)
            v = qmat.matvec(Ac, v)
        Ctrb = qmat.T(cols)
        if qmat.rank(Ctrb) < k:
            continue
        last = qmat.inv(Ctrb)[k - 1]
        f = qmat.neg(qmat.mul([last], qmat.power(Ac, k), cols=k))
        F1 = qmat.add(F0, qmat.mul(g, f, cols=k))
        Acl = qmat.add(A11, qmat.mul(B1, F1, cols=k))
        if not qmat.is_zero(qmat.power(Acl, k)):
            continue
        full = [row + [0] * (n - k) for row in F1]
        return qmat.mul(full, Ti, cols=n)
    raise SynthesisBudgetExceeded("could not find a cyclic input direction for deadbeat placement")


def deadbeat_compensator(A: list, B: list, C: list, D: list, rng: random.Random) -> StateSpace:
    """Observer-based compensator with reachable and observable modes placed at zero.

    xh+ = A xh + B u + L (C xh + D u - y),  u = F xh, with A + B F and A + L C deadbeat
    on their assignable parts.
    """
    n = len(A)
    q = len(B[0]) if B and B[0] else 0
    r = len(C)
    F = place_deadbeat(A, B, rng)
    Fd = place_deadbeat(qmat.T(A, n), qmat.T(C, n), rng)
    L = qmat.T(Fd, n)  # A + L C deadbeat on the observable part
    Ak = qmat.add(qmat.add(A, qmat.mul(B, F, cols=n)), qmat.mul(L, qmat.add(C, qmat.mul(D, F, cols=n)) if r else qmat.zeros(0, n), cols=n))
    Bk = qmat.neg(L)
    return StateSpace(Ak, Bk, F, qmat.zeros(q, r), r, q)


# ---------------------------------------------------------------------------
# designs


@dataclass
class SynthesisDesign:
    mode: str
    relay_gains: dict[str, RatMatrix]
    observer: StateSpace
    controllers: list[StateSpace]
    closed_loop: ClosedLoop
    realization: ClosedRealization
    certificate: Poly
    stable: bool
    epsilon: Fraction
    extras: dict = field(default_factory=dict)

    @property
    def plant_slices(self) -> list[tuple[int, int]]:
        return self.realization.plant_slices

    def disturbance_to_state(self, src: int, dst: int) -> StateSpace:
        """Closed-loop map from plant src's disturbance to plant dst's state."""
        a0, a1 = self.plant_slices[src]
        b0, b1 = self.plant_slices[dst]
        off = sum(s1 - s0 for s0, s1 in self.plant_slices[:src])
        B = [row[off:off + (a1 - a0)] for row in self.closed_loop.B]
        N = self.closed_loop.n
        C = [[1 if j == b0 + i else 0 for j in range(N)] for i in range(b1 - b0)]
        return StateSpace(self.closed_loop.A, B, C, qmat.zeros(b1 - b0, a1 - a0), a1 - a0, b1 - b0)

    def as_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "epsilon": format_scalar(self.epsilon),
            "relay_gains": {k: scalar_matrix_to_json(v) for k, v in sorted(self.relay_gains.items())},
            "observer": self.observer.as_dict(),
            "controllers": [c.as_dict() for c in self.controllers],
            "closed_loop_order": self.closed_loop.n,
            "certificate": {"char_poly": poly_to_json(self.certificate), "strictly_stable": self.stable},
            "verdict": "stable" if self.stable else "unstable",
        }
        for k, v in self.extras.items():
            out[k] = v
        return out


def _scaled_gains(net: LtiNetwork, rng: random.Random, eps, bound: int) -> dict[str, RatMatrix]:
    out = {}
    for r in net.relays:
        nd = net.node(r)
        out[r] = RatMatrix([[Fraction(rng.randint(-bound, bound)) * eps / bound for _ in range(nd.d_out)] for _ in range(nd.d_in)],
                           rows=nd.d_in, cols=nd.d_out)
    return out


def _int_matrix(rng: random.Random, rows: int, cols: int, bound: int) -> RatMatrix:
    return RatMatrix([[rng.randint(-bound, bound) for _ in range(cols)] for _ in range(rows)], rows=rows, cols=cols)


def certify(cl: ClosedLoop) -> tuple[Poly, bool]:
    p = qmat.char_poly(cl.A)
    return p, roots_in_unit_disk(p).strictly_stable if p.deg > 0 else True


def _relay_controllers(real: ClosedRealization, gains: dict[str, RatMatrix]) -> dict[int, StateSpace]:
    out = {}
    for idx, node in enumerate(real.roles):
        if node in gains:
            out[idx] = StateSpace.static(gains[node].constants(), real.system.q(idx), real.system.r(idx))
    return out


def synthesize_ptop(prob: ControlProblem, cfg: RankConfig = RankConfig(), budget: int = 32) -> SynthesisDesign:
    rep = stabilizability_ptop(prob)
    if not rep["stabilizable"]:
        raise NotStabilizable("the stabilizability conditions fail; see the per-eigenvalue report")
    plant = prob.plants[0]
    net = prob.net
    ob, cn = prob.observer_nodes[0], prob.controller_nodes[0]
    lams = unstable_eigenvalues(plant.A, _field_of(prob))
    m_l = {lam: geometric_multiplicity(plant.A, lam) for lam in lams}
    eps = gershgorin_epsilon(prob, seed=cfg.seed)
    real = realize_closed_network(prob)
    rng = random.Random(cfg.seed)
    bound = min(cfg.sample_bound, SYNTH_BOUND)
    m = plant.m
    at = {lam: net.evaluate(lam) for lam in lams}
    for _ in range(budget):
        gains = _scaled_gains(net, rng, eps, bound)
        try:
            G = {lam: transfer_matrix(at[lam], GainAssignment(gains), ob, cn) for lam in lams}
        except LoopSingular:
            continue
        if any(mat_rank(G[lam]) < m_l[lam] for lam in lams):
            continue
        K_ob = _int_matrix(rng, net.node(ob).d_in, plant.C.rows, GAIN_BOUND)
        if any(not _observable(plant.A, G[lam] @ K_ob @ plant.C, lam) for lam in lams):
            continue
        ctrls = _relay_controllers(real, gains)
        ctrls[0] = StateSpace.static(K_ob.constants(), K_ob.rows, K_ob.cols)
        cn_idx = len(real.roles) - 1
        try:
            view = close_loop(real, ctrls, [])
        except LoopSingular:
            continue
        comp = deadbeat_compensator(view.A, view.B, view.C, view.D, rng)
        ctrls[cn_idx] = comp
        cl = close_loop(real, ctrls, _plant_w_cols(real))
        poly, ok = certify(cl)
        if not ok:
            continue
        return SynthesisDesign("ptop", gains, ctrls[0], [comp], cl, real, poly, ok, eps,
                               {"stabilizability": rep, "observer_gain": scalar_matrix_to_json(K_ob)})
    raise SynthesisBudgetExceeded(f"no certified ptop design after {budget} attempts")


def causality_delay(M: RatMatrix) -> int:
    """Smallest d >= 0 making every entry of z^-d M causal."""
    return max([0] + [h.num.deg - h.den.deg for row in M.e for h in row if not h.is_zero()])


def _filter_realization(f: RatFn, k: int) -> StateSpace:
    """f(z) I_k as a state-space system."""
    return realize_channel(RatMatrix.identity(k).scale(f)) if k else StateSpace([], [], [], [], 0, 0)


def _plant_with_filter(plant: Plant, obs: list, filt: StateSpace) -> tuple[list, list, list, list]:
    """Plant followed by the scalar filter on the observation obs @ x; returns (A, B, C, D)."""
    m = plant.m
    nf = filt.n
    Ap, Bp = plant.A.constants(), plant.B[0].constants()
    q = plant.B[0].cols
    k = len(obs)
    A = qmat.zeros(m + nf, m + nf)
    for i in range(m):
        for j in range(m):
            A[i][j] = Ap[i][j]
    BfO = qmat.mul(filt.B, obs, cols=m) if nf else []
    for i in range(nf):
        for j in range(m):
            A[m + i][j] = BfO[i][j]
        for j in range(nf):
            A[m + i][m + j] = filt.A[i][j]
    B = [list(Bp[i]) for i in range(m)] + [[0] * q for _ in range(nf)]
    DfO = qmat.mul(filt.D, obs, cols=m) if k else []
    C = [DfO[i] + (filt.C[i] if nf else []) for i in range(k)]
    return A, B, C, qmat.zeros(k, q)


def synthesize_broadcast(prob: ControlProblem, cfg: RankConfig = RankConfig(), budget: int = 32) -> SynthesisDesign:
    rep = stabilizability_broadcast(prob)
    if not rep["sufficient"]:
        raise NotIndependentlyStabilizable("the sufficient condition for independent stabilization fails")
    p1, p2 = prob.plants
    net = prob.net
    ob = prob.observer_nodes[0]
    cn1, cn2 = prob.controller_nodes
    f_name = _field_of(prob)
    lams = _unstable_union(prob)
    M1, M2 = rep["m_1_max"], rep["m_2_max"]
    M = M1 + M2
    eps = gershgorin_epsilon(prob, seed=cfg.seed)
    real = realize_closed_network(prob)
    rng = random.Random(cfg.seed)
    bound = min(cfg.sample_bound, SYNTH_BOUND)
    at = {lam: net.evaluate(lam) for lam in lams}
    q_ob = net.node(ob).d_in
    r1, r2 = net.node(cn1).d_out, net.node(cn2).d_out
    for _ in range(budget):
        gains = _scaled_gains(net, rng, eps, bound)
        ga = GainAssignment(gains)
        try:
            G1 = {lam: transfer_matrix(at[lam], ga, ob, cn1) for lam in lams}
            G2 = {lam: transfer_matrix(at[lam], ga, ob, cn2) for lam in lams}
        except LoopSingular:
            continue
        if any(mat_rank(G1[l]) < M1 or mat_rank(G2[l]) < M2 or mat_rank(vstack([G1[l], G2[l]], cols=q_ob)) < M for l in lams):
            continue
        Kc1 = _int_matrix(rng, M1, r1, GAIN_BOUND)
        Kc2 = _int_matrix(rng, M2, r2, GAIN_BOUND)
        Kobp = _int_matrix(rng, q_ob, M, GAIN_BOUND)
        G12 = vstack([transfer_matrix(net, ga, ob, cn1), transfer_matrix(net, ga, ob, cn2)], cols=q_ob)
        Gp = block_diag([Kc1, Kc2]) @ G12 @ Kobp
        if M and any(not mat_det(eval_matrix(Gp, l)) for l in lams):
            continue
        if M:
            det = mat_det(Gp)
            adj = mat_inverse(Gp).scale(det)
            d = causality_delay(adj)
            delay = RatFn(Poly([1]), Poly([0] * d + [1]))
            Kob2 = adj.scale(delay)
            filt_fn = det * delay
        else:
            d, Kob2, filt_fn = 0, RatMatrix.zeros(0, 0), RatFn.const(1)
        K3 = _int_matrix(rng, M1, p1.C.rows, GAIN_BOUND)
        K4 = _int_matrix(rng, M2, p2.C.rows, GAIN_BOUND)
        if any(not _observable(p.A, K @ p.C, l) for p, K in ((p1, K3), (p2, K4))
               for l in unstable_eigenvalues(p.A, f_name)):
            continue
        K_ob = Kobp @ Kob2 @ block_diag([K3, K4])
        obs_ss = realize_channel(K_ob)
        filt1, filt2 = _filter_realization(filt_fn, M1), _filter_realization(filt_fn, M2)
        comps = []
        for plant, K, filt, Kc in ((p1, K3, filt1, Kc1), (p2, K4, filt2, Kc2)):
            obs = (K @ plant.C).constants() if K.rows else []
            A, B, C, D = _plant_with_filter(plant, obs, filt)
            comp = deadbeat_compensator(A, B, C, D, rng)
            # controller node = compensator after the static post-processor
            Kcc = Kc.constants()
            comps.append(StateSpace(comp.A, qmat.mul(comp.B, Kcc, cols=Kc.cols) if comp.n else [], comp.C,
                                    qmat.zeros(comp.n_out, Kc.cols), Kc.cols, comp.n_out))
        ctrls = _relay_controllers(real, gains)
        ctrls[0] = obs_ss
        v = len(real.roles)
        ctrls[v - 2], ctrls[v - 1] = comps
        try:
            cl = close_loop(real, ctrls, _plant_w_cols(real))
        except LoopSingular:
            continue
        poly, ok = certify(cl)
        if not ok:
            continue
        design = SynthesisDesign("broadcast", gains, obs_ss, comps, cl, real, poly, ok, eps)
        cross = {
            "w1_to_x2_zero": design.disturbance_to_state(0, 1).markov_zero(),
            "w2_to_x1_zero": design.disturbance_to_state(1, 0).markov_zero(),
        }
        design.extras = {
            "stabilizability": rep,
            "delay_d": d,
            "precoder_K_ob_prime": scalar_matrix_to_json(Kobp),
            "postprocessor_K_cn1_prime": scalar_matrix_to_json(Kc1),
            "postprocessor_K_cn2_prime": scalar_matrix_to_json(Kc2),
            "orthogonalizer_K_ob_second": matrix_to_json(Kob2),
            "selector_K_ob_third": scalar_matrix_to_json(K3),
            "selector_K_ob_fourth": scalar_matrix_to_json(K4),
            "orthogonality": cross,
        }
        if not all(cross.values()):
            raise LtiError(f"broadcast design leaks across plants: {cross}")
        return design
    raise SynthesisBudgetExceeded(f"no certified broadcast design after {budget} attempts")


# ---------------------------------------------------------------------------
# JSON


def _matrix_depth(x) -> int:
    d = 0
    while isinstance(x, list) and x:
        d += 1
        x = x[0]
    return d


def plant_from_json(data: dict) -> Plant:
    A = data["A"]
    m = len(A)
    Bs = data["B"]
    Bl = Bs if _matrix_depth(Bs) == 3 else [Bs]
    C = data["C"]
    return Plant(matrix_from_json(A, m, m), [matrix_from_json(b, m, len(b[0]) if b else 0) for b in Bl],
                 matrix_from_json(C, len(C), m))


def plant_to_json(p: Plant) -> dict:
    B = [scalar_matrix_to_json(b) for b in p.B]
    return {"A": scalar_matrix_to_json(p.A), "B": B[0] if len(B) == 1 else B, "C": scalar_matrix_to_json(p.C)}


def problem_from_json(data: dict) -> ControlProblem:
    try:
        obs = data["observer_node"]
        obs = [obs] if isinstance(obs, str) else list(obs)
        return ControlProblem(data["mode"], [plant_from_json(p) for p in data["plants"]], network_from_json(data["network"]),
                              obs, list(data["controller_nodes"]))
    except (KeyError, TypeError, IndexError) as e:
        raise ValidationError(f"malformed problem JSON: {e}") from e


def problem_to_json(prob: ControlProblem) -> dict:
    return {
        "mode": prob.mode,
        "plants": [plant_to_json(p) for p in prob.plants],
        "network": network_to_json(prob.net),
        "observer_node": prob.observer_nodes[0] if len(prob.observer_nodes) == 1 else list(prob.observer_nodes),
        "controller_nodes": list(prob.controller_nodes),
    }
