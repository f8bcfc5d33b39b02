"""Exact closed-loop simulation under bounded disturbances, plus a boundedness verdict.

The certificate (strict Schur-Cohn stability of the closed-loop characteristic
polynomial) is the verdict that counts; a finite trace can only corroborate it.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction

from . import qmat
from .conet import ClosedLoop, SynthesisDesign, certify
from .exactalg import GaussRat, canon

KINDS = ("zero", "constant", "alternating", "seeded-random-signs")
TARGETS = ("plant1", "plant2", "both")


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str = "alternating"
    amplitude: Fraction = Fraction(1)
    target: str = "both"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown disturbance target {self.target!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")

    def sequence(self, steps: int, plant_dims: list[int]) -> list[list]:
        """w[0..steps-1] over the stacked plant disturbance inputs."""
        active = []
        for k, d in enumerate(plant_dims):
            on = self.target == "both" or self.target == f"plant{k + 1}"
            active += [on] * d
        rng = random.Random(self.seed)
        a = canon(Fraction(self.amplitude))
        out = []
        for n in range(steps):
            if self.kind == "zero":
                row = [0] * len(active)
            elif self.kind == "constant":
                row = [a if on else 0 for on in active]
            elif self.kind == "alternating":
                s = a if n % 2 == 0 else -a
                row = [s if on else 0 for on in active]
            else:
                row = [(a if rng.random() < 0.5 else -a) if on else 0 for on in active]
            out.append(row)
        return out


def _mag(v):
    return abs(v.re) + abs(v.im) if isinstance(v, GaussRat) else abs(v)


def max_norm(x: list):
    """Exact max-norm; Gaussian entries contribute |re| + |im|."""
    return max((_mag(v) for v in x), default=0)


@dataclass
class SimTrace:
    horizon: int
    states: list[list]
    norms: list

    def __post_init__(self):
        assert len(self.states) == self.horizon + 1 == len(self.norms)

    @property
    def peak(self):
        return max(self.norms)

    def to_csv(self, precision: int = 12) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = len(self.states[0]) if self.states else 0
        w.writerow(["step"] + [f"x{i}" for i in range(n)] + ["max_norm"])
        for k, (x, nm) in enumerate(zip(self.states, self.norms)):
            w.writerow([k] + [decimal_string(v, precision) for v in x] + [decimal_string(nm, precision)])
        return buf.getvalue()


def decimal_string(x, precision: int = 12) -> str:
    """Round an exact scalar to ``precision`` fractional digits."""
    if isinstance(x, GaussRat):
        re, im = decimal_string(x.re, precision), decimal_string(x.im, precision)
        return f"{re}{'' if im.startswith('-') else '+'}{im}i"
    x = Fraction(x)
    with localcontext() as ctx:
        ctx.prec = max(28, precision + len(str(abs(x.numerator // x.denominator))) + 5)
        d = Decimal(x.numerator) / Decimal(x.denominator)
        return format(d.quantize(Decimal(1).scaleb(-precision)), "f")


def _closed(design) -> tuple[ClosedLoop, list[int]]:
    if isinstance(design, SynthesisDesign):
        return design.closed_loop, [b - a for a, b in design.plant_slices]
    return design, [design.n_w]


def simulate(design: SynthesisDesign | ClosedLoop, dist: DisturbanceSpec, steps: int) -> SimTrace:
    """x'[n+1] = A_cl x'[n] + B_w w[n] from x'[0] = 0, in exact arithmetic."""
    cl, dims = _closed(design)
    n, nw = cl.n, cl.n_w
    Bw = [row[:nw] for row in cl.B]
    x = [0] * n
    states, norms = [list(x)], [0]
    for w in dist.sequence(steps, dims):
        Ax = qmat.matvec(cl.A, x)
        Bw_w = qmat.matvec(Bw, w) if nw else [0] * n
        x = [canon(a + b) for a, b in zip(Ax, Bw_w)]
        states.append(x)
        norms.append(max_norm(x))
    return SimTrace(steps, states, norms)


def boundedness_verdict(trace: SimTrace, design: SynthesisDesign | ClosedLoop, growth: Fraction = Fraction(1)) -> bool:
    """Certificate AND a non-growing trace.

    The late-half peak may exceed the early-half peak by at most ``growth``
    times the early peak.  A stable pole r approached monotonically under a
    constant input gives late/early = 1 + r^(N/2) <= 2, so growth = 1 admits
    it, while any geometric growth over N/2 steps beyond a doubling fails.
    """
    if isinstance(design, SynthesisDesign):
        stable = design.stable
    else:
        stable = certify(design)[1]
    half = trace.horizon // 2
    early = max(trace.norms[: half + 1])
    late = max(trace.norms[half:])
    return stable and late - early <= growth * early


def impulse_bound(design: SynthesisDesign | ClosedLoop, amplitude, steps: int):
    """amplitude * sum_{k<steps} ||A^k B_w||_inf, an exact bound on every state norm up to ``steps``."""
    cl, _ = _closed(design)
    nw = cl.n_w
    M = [row[:nw] for row in cl.B]
    total = 0
    for _ in range(steps):
        total += max((sum(_mag(v) for v in row) for row in M), default=0)
        M = qmat.mul(cl.A, M, cols=nw)
    return amplitude * total
