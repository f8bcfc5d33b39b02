"""Decentralized linear systems: fixed modes, Jordan indexing and externalization.

A system is x[n+1] = A x[n] + sum_i B_i u_i[n], y_i[n] = C_i x[n] + sum_j D_ij u_j[n]
with static feedback u_i = K_i y_i.  Controller i appears as relay "K{i}" in
the externalized networks, whose terminals are "tx" and "rx".
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .exactalg import (
    LtiError,
    RatMatrix,
    Singular,
    Z,
    abs2,
    block_diag,
    char_poly,
    eval_matrix,
    hstack,
    is_gauss,
    mat_det,
    mat_inverse,
    mat_rank,
    matrix_from_json,
    roots_in_field,
    roots_in_unit_disk,
    scalar_matrix_to_json,
    vstack,
)
from .netmodel import (
    RECEIVER,
    RELAY,
    TRANSMITTER,
    DimensionMismatch,
    GainAssignment,
    LtiNetwork,
    NodeSpec,
    RankConfig,
    ValidationError,
    generic_rank,
    mincut_rank,
)

MAX_CONTROLLERS = 20
SAMPLING_ROUNDS = 5


class TooManyControllers(LtiError):
    pass


class NotJordanForm(LtiError):
    pass


class UnsupportedSpectrum(LtiError):
    pass


class InnerLoopSingular(LtiError):
    pass


class EquivalenceViolation(LtiError):
    pass


@dataclass
class DecSystem:
    A: RatMatrix
    B: list[RatMatrix]
    C: list[RatMatrix]
    D: list[list[RatMatrix]] | None = None  # D[i][j] is r_i x q_j
    field: str = "Q"

    def __post_init__(self):
        m = self.A.rows
        if self.A.cols != m:
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if not self.A.is_constant():
            raise ValidationError("A must have constant entries")
        if len(self.B) != len(self.C):
            raise DimensionMismatch(f"{len(self.B)} B blocks but {len(self.C)} C blocks")
        for i, (b, c) in enumerate(zip(self.B, self.C), 1):
            if b.rows != m or c.cols != m:
                raise DimensionMismatch(f"controller {i}: B is {b.shape}, C is {c.shape}, state dimension {m}")
        if self.D is not None:
            v = self.v
            if len(self.D) != v or any(len(row) != v for row in self.D):
                raise DimensionMismatch("D grid must be v x v")
            for i in range(v):
                for j in range(v):
                    if self.D[i][j].shape != (self.r(i), self.q(j)):
                        raise DimensionMismatch(f"D[{i + 1}][{j + 1}] should be {self.r(i)}x{self.q(j)}, got {self.D[i][j].shape}")
        if self.field not in ("Q", "Qi"):
            raise ValidationError(f"unknown field {self.field!r}")

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def v(self) -> int:
        return len(self.B)

    def q(self, i: int) -> int:
        return self.B[i].cols

    def r(self, i: int) -> int:
        return self.C[i].rows

    @property
    def proper(self) -> bool:
        return self.D is not None

    def d(self, i: int, j: int) -> RatMatrix:
        if self.D is None:
            return RatMatrix.zeros(self.r(i), self.q(j))
        return self.D[i][j]

    def with_zero_d(self) -> "DecSystem":
        v = self.v
        return DecSystem(self.A, self.B, self.C, [[RatMatrix.zeros(self.r(i), self.q(j)) for j in range(v)] for i in range(v)], self.field)


def _check_cap(v: int):
    if v > MAX_CONTROLLERS:
        raise TooManyControllers(f"{v} controllers exceed the subset enumeration cap of {MAX_CONTROLLERS}")


def _subsets(v: int):
    for mask in range(1 << v):
        yield mask, [i for i in range(v) if mask >> i & 1], [i for i in range(v) if not mask >> i & 1]


def _bordered(top_left: RatMatrix, B_cols: list[RatMatrix], C_rows: list[RatMatrix], inner) -> RatMatrix:
    """[[top_left, B_V], [C_Vc, inner(j, i)]] with empty parts handled."""
    n_r, n_c = top_left.shape
    rows_top = hstack([top_left] + B_cols, rows=n_r)
    if not C_rows:
        return rows_top
    grid = [[C] + [inner(j, i) for i in range(len(B_cols))] for j, C in enumerate(C_rows)]
    bottom = vstack([hstack(row, rows=row[0].rows) for row in grid], cols=rows_top.cols)
    return vstack([rows_top, bottom], cols=rows_top.cols)


def fixed_mode_algebraic(sys: DecSystem, lam) -> tuple[bool, list[int]]:
    """min over V of rank [lam I - A, -B_V; C_Vc, D_Vc,V] compared with dim A.

    Returns (fixed, witness) where the witness lists 1-based controller
    indices of a minimizing subset.
    """
    _check_cap(sys.v)
    m = sys.m
    top = RatMatrix.identity(m).scale(lam) - sys.A
    best, witness = None, []
    for _, V, Vc in _subsets(sys.v):
        M = _bordered(top, [-sys.B[i] for i in V], [sys.C[j] for j in Vc], lambda jj, ii: sys.d(Vc[jj], V[ii]))
        r = mat_rank(M)
        if best is None or r < best:
            best, witness = r, [i + 1 for i in V]
    return best < m, witness


def closed_loop_matrix(sys: DecSystem, K: Sequence[RatMatrix]) -> RatMatrix:
    """A + B K (I - D K)^-1 C for block-diagonal K; raises Singular when I - DK is."""
    Bm = hstack(sys.B, rows=sys.m)
    Cm = vstack(sys.C, cols=sys.m)
    Kb = block_diag(list(K))
    if not sys.proper:
        return sys.A + Bm @ Kb @ Cm
    Dm = vstack([hstack(row, rows=row[0].rows) for row in sys.D], cols=Kb.rows) if sys.v else RatMatrix.zeros(0, 0)
    inner = mat_inverse(RatMatrix.identity(Dm.rows) - Dm @ Kb)
    return sys.A + Bm @ Kb @ inner @ Cm


def random_controller_gains(sys: DecSystem, rng: random.Random, bound: int) -> list[RatMatrix]:
    return [
        RatMatrix([[rng.randint(-bound, bound) for _ in range(sys.r(i))] for _ in range(sys.q(i))], rows=sys.q(i), cols=sys.r(i))
        for i in range(sys.v)
    ]


def fixed_mode_sampling(sys: DecSystem, lam, cfg: RankConfig | None = None, budget: int = 32) -> bool:
    """Fixed iff det(lam I - closed loop) vanishes at every sampled gain."""
    cfg = cfg or RankConfig(rounds=SAMPLING_ROUNDS)
    rng = random.Random(cfg.seed)
    I = RatMatrix.identity(sys.m)
    for _ in range(cfg.rounds):
        for _ in range(budget):
            K = random_controller_gains(sys, rng, cfg.sample_bound)
            try:
                Acl = closed_loop_matrix(sys, K)
                break
            except Singular:
                continue
        else:
            continue
        if mat_det(I.scale(lam) - Acl):
            return False
    return True


def unstable_eigenvalues(A: RatMatrix, field: str = "Q") -> list:
    """Distinct eigenvalues with |lam| >= 1, exactly, in the working field."""
    p = char_poly(A)
    roots, _ = roots_in_field(p)
    if field == "Q":
        roots = [r for r in roots if not is_gauss(r)]
    unstable = [r for r in roots if abs2(r) >= 1]
    count = roots_in_unit_disk(p)
    if len(unstable) < count.outside + count.boundary:
        raise UnsupportedSpectrum(
            f"{count.outside + count.boundary} unstable eigenvalues but only {len(unstable)} lie in the working field; "
            "supply candidates explicitly"
        )
    out = []
    for r in unstable:
        if r not in out:
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# Jordan indexing


def check_jordan(A: RatMatrix) -> None:
    """Structural check: zero off the diagonal except a 0/1 superdiagonal joining equal eigenvalues."""
    if not A.is_constant():
        raise NotJordanForm("A must be constant")
    a = A.constants()
    m = A.rows
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            if j == i + 1:
                if a[i][j] not in (0, 1):
                    raise NotJordanForm(f"superdiagonal entry ({i + 1},{j + 1}) is {a[i][j]}")
                if a[i][j] == 1 and a[i][i] != a[j][j]:
                    raise NotJordanForm(f"superdiagonal 1 at ({i + 1},{j + 1}) joins different eigenvalues")
            elif a[i][j]:
                raise NotJordanForm(f"nonzero entry ({i + 1},{j + 1}) off the Jordan pattern")


@dataclass
class JordanIndexing:
    lam: object
    m_lambda: int
    kappa_L: tuple[int, ...]
    kappa_R: tuple[int, ...]
    iota_L: tuple[int, ...]
    iota_R: tuple[int, ...]
    pi_L: tuple[int, ...]
    pi_R: tuple[int, ...]
    P_L: RatMatrix
    P_R: RatMatrix

    def as_dict(self) -> dict:
        return {
            "m_lambda": self.m_lambda,
            "kappa_L": list(self.kappa_L),
            "kappa_R": list(self.kappa_R),
            "iota_L": list(self.iota_L),
            "iota_R": list(self.iota_R),
            "pi_L": list(self.pi_L),
            "pi_R": list(self.pi_R),
            "P_L": scalar_matrix_to_json(self.P_L),
            "P_R": scalar_matrix_to_json(self.P_R),
        }


def _count_sequence(m: int, hits) -> tuple[list[int], list[int]]:
    kappa, iota = [0], [0]
    for i in range(1, m + 1):
        if hits(i):
            kappa.append(kappa[-1] + 1)
            iota.append(i)
        else:
            kappa.append(kappa[-1])
    return kappa, iota


def _permutation(kappa: list[int], m: int) -> list[int]:
    total = kappa[m]
    return [kappa[i] if kappa[i] > kappa[i - 1] else i + total - kappa[i] for i in range(1, m + 1)]


def _perm_matrix(pi: list[int]) -> RatMatrix:
    m = len(pi)
    return RatMatrix([[1 if pi[i] - 1 == j else 0 for j in range(m)] for i in range(m)], rows=m, cols=m)


def jordan_indexing(A: RatMatrix, lam) -> JordanIndexing:
    check_jordan(A)
    a = A.constants()
    m = A.rows

    def diag(i):
        return a[i - 1][i - 1] == lam

    # block ends (left, rows of lam I - A that vanish) and block starts (right, zero columns)
    kL, iL = _count_sequence(m, lambda i: diag(i) and (i == m or a[i - 1][i] == 0))
    kR, iR = _count_sequence(m, lambda i: diag(i) and (i == 1 or a[i - 2][i - 1] == 0))
    piL, piR = _permutation(kL, m), _permutation(kR, m)
    return JordanIndexing(lam, kL[m], tuple(kL), tuple(kR), tuple(iL), tuple(iR), tuple(piL), tuple(piR), _perm_matrix(piL), _perm_matrix(piR))


@dataclass
class PartitionedSystem:
    indexing: JordanIndexing
    A11: RatMatrix
    A12: RatMatrix
    A21: RatMatrix
    A22: RatMatrix
    B1: list[RatMatrix]
    B2: list[RatMatrix]
    C1: list[RatMatrix]
    C2: list[RatMatrix]
    B_lam: RatMatrix
    C_lam: RatMatrix


def partition_at_lambda(sys: DecSystem, lam) -> PartitionedSystem:
    """Blocks of P_L^T (zI - A) P_R and the matching splits of B_i, C_i."""
    ji = jordan_indexing(sys.A, lam)
    m, k = sys.m, ji.m_lambda
    PL, PR = ji.P_L, ji.P_R
    M = PL.T @ (RatMatrix.identity(m).scale(Z) - sys.A) @ PR
    top, bot = list(range(k)), list(range(k, m))
    A11, A12 = M.submatrix(top, top), M.submatrix(top, bot)
    A21, A22 = M.submatrix(bot, top), M.submatrix(bot, bot)
    B1, B2, C1, C2 = [], [], [], []
    for b, c in zip(sys.B, sys.C):
        pb, pc = PL.T @ b, c @ PR
        B1.append(pb.submatrix(top, range(b.cols)))
        B2.append(pb.submatrix(bot, range(b.cols)))
        C1.append(pc.submatrix(range(c.rows), top))
        C2.append(pc.submatrix(range(c.rows), bot))
    B_lam = PL.submatrix(range(m), top)
    C_lam = PR.T.submatrix(top, range(m))
    at = eval_matrix
    if not (at(A11, lam).is_zero() and at(A12, lam).is_zero() and at(A21, lam).is_zero()):
        raise NotJordanForm("partition at lambda left nonzero coupling blocks")
    if mat_rank(at(A22, lam)) != m - k:
        raise NotJordanForm("A22(lambda) is singular")
    return PartitionedSystem(ji, A11, A12, A21, A22, B1, B2, C1, C2, B_lam, C_lam)


def fixed_mode_algebraic_jordan(sys: DecSystem, lam) -> tuple[bool, list[int]]:
    """min over V of rank [0, -B_V1; C_Vc1, C_Vc2 A22^-1 B_V2 + D_Vc,V] compared with m_lambda."""
    _check_cap(sys.v)
    part = partition_at_lambda(sys, lam)
    k = part.indexing.m_lambda
    if k == 0:
        return False, []
    W = mat_inverse(eval_matrix(part.A22, lam))
    best, witness = None, []
    for _, V, Vc in _subsets(sys.v):
        M = _bordered(
            RatMatrix.zeros(k, k),
            [-part.B1[i] for i in V],
            [part.C1[j] for j in Vc],
            lambda jj, ii: part.C2[Vc[jj]] @ W @ part.B2[V[ii]] + sys.d(Vc[jj], V[ii]),
        )
        r = mat_rank(M)
        if best is None or r < best:
            best, witness = r, [i + 1 for i in V]
    return best < k, witness


# ---------------------------------------------------------------------------
# standard networks


@dataclass
class StandardNetwork:
    """The 8-tuple (A; B_i, B_i'; C_i, C_i'; D, D'; S, S').

    The inner state has dimension s = S.rows; with s = 0 the network is the
    plain A + sum B_i K_i C_i form.
    """

    A: RatMatrix
    B: list[RatMatrix]
    Bp: list[RatMatrix]
    C: list[RatMatrix]
    Cp: list[RatMatrix]
    D: RatMatrix
    Dp: RatMatrix
    S: RatMatrix
    Sp: RatMatrix

    def __post_init__(self):
        n_out, n_in = self.A.shape
        s = self.S.rows
        if self.S.shape != (s, s) or self.Sp.shape != (s, s):
            raise DimensionMismatch("S and S' must be square and equal in size")
        if self.D.shape != (n_out, s) or self.Dp.shape != (s, n_in):
            raise DimensionMismatch("D must be n_out x s and D' must be s x n_in")
        for i, (b, bp, c, cp) in enumerate(zip(self.B, self.Bp, self.C, self.Cp), 1):
            q, r = b.cols, c.rows
            if b.rows != n_out or bp.shape != (s, q) or c.cols != n_in or cp.shape != (r, s):
                raise DimensionMismatch(f"relay {i} blocks are not conformable")

    @property
    def v(self) -> int:
        return len(self.B)

    def gain_shape(self, i: int) -> tuple[int, int]:
        return self.B[i].cols, self.C[i].rows

    def _inner(self) -> RatMatrix:
        return mat_inverse(mat_inverse(self.S) - self.Sp)

    def channels(self) -> dict:
        """Channel matrices between tx, relays K1..Kv and rx."""
        out = {}
        if self.S.rows:
            try:
                W = self._inner()
            except Singular as e:
                raise InnerLoopSingular("S^-1 - S' is singular") from e
            out[("tx", "rx")] = self.A + self.D @ W @ self.Dp
            for i in range(self.v):
                out[("tx", f"K{i + 1}")] = self.C[i] + self.Cp[i] @ W @ self.Dp
                out[(f"K{i + 1}", "rx")] = self.B[i] + self.D @ W @ self.Bp[i]
                for j in range(self.v):
                    out[(f"K{i + 1}", f"K{j + 1}")] = self.Cp[j] @ W @ self.Bp[i]
        else:
            out[("tx", "rx")] = self.A
            for i in range(self.v):
                out[("tx", f"K{i + 1}")] = self.C[i]
                out[(f"K{i + 1}", "rx")] = self.B[i]
        return {k: m for k, m in out.items() if not m.is_zero()}

    def evaluate(self, lam) -> "StandardNetwork":
        e = lambda M: eval_matrix(M, lam)
        return StandardNetwork(e(self.A), [e(x) for x in self.B], [e(x) for x in self.Bp], [e(x) for x in self.C],
                               [e(x) for x in self.Cp], e(self.D), e(self.Dp), e(self.S), e(self.Sp))

    def to_network(self, field: str = "Q") -> LtiNetwork:
        n_out, n_in = self.A.shape
        nodes = [NodeSpec("tx", TRANSMITTER, n_in, 0)]
        nodes += [NodeSpec(f"K{i + 1}", RELAY, *self.gain_shape(i)) for i in range(self.v)]
        nodes.append(NodeSpec("rx", RECEIVER, 0, n_out))
        return LtiNetwork(nodes, self.channels(), field)


def std_transfer(std: StandardNetwork, gains: Sequence[RatMatrix]) -> RatMatrix:
    G = std.A
    for b, k, c in zip(std.B, gains, std.C):
        G = G + b @ k @ c
    if not std.S.rows:
        return G
    left, mid, right = std.D, std.Sp, std.Dp
    for b, bp, c, cp, k in zip(std.B, std.Bp, std.C, std.Cp, gains):
        left = left + b @ k @ cp
        mid = mid + bp @ k @ cp
        right = right + bp @ k @ c
    try:
        inner = mat_inverse(mat_inverse(std.S) - mid)
    except Singular as e:
        raise InnerLoopSingular("S^-1 - (S' + sum B_i' K_i C_i') is singular at these gains") from e
    return G + left @ inner @ right


def _selector_row(sizes: list[int], k: int) -> RatMatrix:
    """[0 .. I .. 0] picking block k of a stacked vector."""
    total = sum(sizes)
    start = sum(sizes[:k])
    return RatMatrix([[1 if j == start + i else 0 for j in range(total)] for i in range(sizes[k])], rows=sizes[k], cols=total)


def canonical_standard(sys: DecSystem) -> StandardNetwork:
    """zI - A with controllers -B_i, C_i; the proper form routes outputs through I - DK."""
    m, v = sys.m, sys.v
    A = RatMatrix.identity(m).scale(Z) - sys.A
    if not sys.proper:
        z0 = RatMatrix.zeros
        return StandardNetwork(A, [-b for b in sys.B], [z0(0, sys.q(i)) for i in range(v)], list(sys.C),
                               [z0(sys.r(i), 0) for i in range(v)], z0(m, 0), z0(0, m), z0(0, 0), z0(0, 0))
    rs = [sys.r(i) for i in range(v)]
    s = sum(rs)
    Bp = [vstack([sys.d(j, i) for j in range(v)], cols=sys.q(i)) for i in range(v)]
    Cp = [_selector_row(rs, i) for i in range(v)]
    return StandardNetwork(A, [-b for b in sys.B], Bp, [RatMatrix.zeros(sys.r(i), m) for i in range(v)], Cp,
                           RatMatrix.zeros(m, s), vstack(sys.C, cols=m), RatMatrix.identity(s), RatMatrix.zeros(s, s))


def jordan_standard(sys: DecSystem, lam) -> StandardNetwork:
    """Standard network whose transfer is the Schur complement of the lambda-partition."""
    part = partition_at_lambda(sys, lam)
    v, k = sys.v, part.indexing.m_lambda
    n2 = sys.m - k
    if not sys.proper:
        I2 = RatMatrix.identity(n2)
        return StandardNetwork(part.A11, [-b for b in part.B1], list(part.B2), list(part.C1), list(part.C2),
                               part.A12, -part.A21, I2, I2 - part.A22)
    rs = [sys.r(i) for i in range(v)]
    sizes = [n2] + rs
    s = sum(sizes)
    D = hstack([part.A12] + [RatMatrix.zeros(k, r) for r in rs], rows=k)
    Dp = vstack([-part.A21] + list(part.C1), cols=k)
    first_col = vstack([RatMatrix.identity(n2) - part.A22] + list(part.C2), cols=n2)
    Sp = hstack([first_col, RatMatrix.zeros(s, s - n2)], rows=s)
    Bp = [vstack([part.B2[i]] + [sys.d(j, i) for j in range(v)], cols=sys.q(i)) for i in range(v)]
    Cp = [_selector_row(sizes, i + 1) for i in range(v)]
    C = [RatMatrix.zeros(sys.r(i), k) for i in range(v)]
    return StandardNetwork(part.A11, [-b for b in part.B1], Bp, C, Cp, D, Dp, RatMatrix.identity(s), Sp)


def _controller_nodes(sys: DecSystem, n: int) -> list[NodeSpec]:
    nodes = [NodeSpec("tx", TRANSMITTER, n, 0)]
    nodes += [NodeSpec(f"K{i + 1}", RELAY, sys.q(i), sys.r(i)) for i in range(sys.v)]
    nodes.append(NodeSpec("rx", RECEIVER, 0, n))
    return nodes


def _drop_zero(ch: dict) -> dict:
    return {k: m for k, m in ch.items() if not m.is_zero()}


def externalize_canonical(sys: DecSystem, lam) -> LtiNetwork:
    """Network at z = lam with H_tx,rx = lam I - A, H_tx,i = C_i, H_i,rx = -B_i, H_i,j = D_ji."""
    m = sys.m
    ch = {("tx", "rx"): RatMatrix.identity(m).scale(lam) - sys.A}
    for i in range(sys.v):
        ch[("tx", f"K{i + 1}")] = sys.C[i]
        ch[(f"K{i + 1}", "rx")] = -sys.B[i]
        if sys.proper:
            for j in range(sys.v):
                ch[(f"K{i + 1}", f"K{j + 1}")] = sys.d(j, i)
    return LtiNetwork(_controller_nodes(sys, m), _drop_zero(ch), sys.field)


def externalize_jordan(sys: DecSystem, lam) -> LtiNetwork:
    """Network at z = lam carrying only the m_lambda Jordan-block directions; no tx -> rx link."""
    part = partition_at_lambda(sys, lam)
    k = part.indexing.m_lambda
    W = mat_inverse(eval_matrix(part.A22, lam))
    ch = {}
    for i in range(sys.v):
        ch[("tx", f"K{i + 1}")] = part.C1[i]
        ch[(f"K{i + 1}", "rx")] = -part.B1[i]
        for j in range(sys.v):
            ch[(f"K{i + 1}", f"K{j + 1}")] = part.C2[j] @ W @ part.B2[i] + sys.d(j, i)
    return LtiNetwork(_controller_nodes(sys, k), _drop_zero(ch), sys.field)


# ---------------------------------------------------------------------------
# equivalence


@dataclass
class EquivalenceReport:
    lam: object
    branch: str
    dimension: int
    statements: dict[str, bool] = field(default_factory=dict)
    details: dict[str, object] = field(default_factory=dict)

    @property
    def unanimous(self) -> bool:
        return len(set(self.statements.values())) == 1

    @property
    def fixed(self) -> bool:
        return self.statements["bordered_min"]

    def as_dict(self) -> dict:
        return {"branch": self.branch, "dimension": self.dimension, "statements": dict(self.statements),
                "details": dict(self.details), "unanimous": self.unanimous, "fixed": self.fixed}


def _sampled_std_rank(std: StandardNetwork, lam, sys: DecSystem, cfg: RankConfig, budget: int = 32) -> int:
    at = std.evaluate(lam)
    rng = random.Random(cfg.seed)
    best = 0
    cap = min(at.A.shape)
    for _ in range(cfg.rounds):
        for _ in range(budget):
            K = random_controller_gains(sys, rng, cfg.sample_bound)
            try:
                best = max(best, mat_rank(std_transfer(at, K)))
                break
            except InnerLoopSingular:
                continue
        if best == cap:
            break
    return best


def equivalence_report(sys: DecSystem, lam, cfg: RankConfig = RankConfig(), branch: str = "canonical", strict: bool = True) -> EquivalenceReport:
    """Evaluate the five fixed-mode statements independently and compare them.

    canonical: dimension is dim A and the network is the canonical externalization.
    jordan: dimension is m_lambda and the network carries the Jordan directions only.
    """
    if branch == "canonical":
        dim = sys.m
        std = canonical_standard(sys)
        net = externalize_canonical(sys, lam)
        algebraic = fixed_mode_algebraic(sys, lam)
    elif branch == "jordan":
        dim = jordan_indexing(sys.A, lam).m_lambda
        std = jordan_standard(sys, lam)
        net = externalize_jordan(sys, lam)
        algebraic = fixed_mode_algebraic_jordan(sys, lam)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    rep = EquivalenceReport(lam, branch, dim)
    rep.statements["sampling"] = fixed_mode_sampling(sys, lam, RankConfig(cfg.sample_bound, max(cfg.rounds, SAMPLING_ROUNDS), cfg.seed))
    if dim == 0:
        for key in ("generic_rank", "network_rank", "mincut", "bordered_min"):
            rep.statements[key] = False
    else:
        g = _sampled_std_rank(std, lam, sys, cfg)
        nr = generic_rank(net, None, cfg)
        mc, cut = mincut_rank(net)
        rep.details = {"generic_rank": g, "network_rank": nr, "mincut": mc, "mincut_witness": sorted(cut.members), "bordered_witness": algebraic[1]}
        rep.statements["generic_rank"] = g < dim
        rep.statements["network_rank"] = nr < dim
        rep.statements["mincut"] = mc < dim
        rep.statements["bordered_min"] = algebraic[0]
    if strict and not rep.unanimous:
        raise EquivalenceViolation(f"fixed-mode statements disagree at {lam}: {rep.statements}")
    return rep


# ---------------------------------------------------------------------------
# JSON


def system_to_json(sys: DecSystem) -> dict:
    out = {
        "field": sys.field,
        "A": scalar_matrix_to_json(sys.A),
        "controllers": [{"B": scalar_matrix_to_json(b), "C": scalar_matrix_to_json(c)} for b, c in zip(sys.B, sys.C)],
    }
    if sys.proper:
        out["D"] = [[scalar_matrix_to_json(d) for d in row] for row in sys.D]
    return out


def system_from_json(data: dict) -> DecSystem:
    try:
        A = data["A"]
        m = len(A)
        Am = matrix_from_json(A, m, m)
        B, C = [], []
        for ctl in data["controllers"]:
            b, c = ctl["B"], ctl["C"]
            q = len(b[0]) if b else 0
            r = len(c)
            B.append(matrix_from_json(b, m, q))
            C.append(matrix_from_json(c, r, m))
        D = None
        if data.get("D") is not None:
            D = [[matrix_from_json(data["D"][i][j], C[i].rows, B[j].cols) for j in range(len(B))] for i in range(len(B))]
    except (KeyError, TypeError, IndexError) as e:
        raise ValidationError(f"malformed system JSON: {e}") from e
    return DecSystem(Am, B, C, D, data.get("field", "Q"))
