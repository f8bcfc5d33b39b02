"""Exact scalars, polynomials, rational functions and matrices over Q(z) and Q(i)(z).

Scalars are plain ``int``/``Fraction`` for rationals and :class:`GaussRat` for
Gaussian rationals with a nonzero imaginary part.  Every value is immutable.
Heavy elimination work (rank, solve, determinant) clears denominators row by
row and runs fraction-free over integer polynomials, so no rational-function
gcd is needed until the final answer is assembled.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, NamedTuple, Sequence


class LtiError(Exception):
    """Base class for analysis failures raised by this package."""


class SingularD(LtiError):
    pass


class Singular(LtiError):
    pass


class NonConstantEntries(LtiError):
    pass


class PoleAtPoint(LtiError):
    def __init__(self, i: int, j: int, point=None):
        self.i, self.j, self.point = i, j, point
        super().__init__(f"entry ({i},{j}) has a pole at z={format_scalar(point) if point is not None else '?'}")


# ---------------------------------------------------------------------------
# scalars


class GaussRat:
    """Gaussian rational re + im*i with exact Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, o):
        if isinstance(o, GaussRat):
            return _gr(self.re + o.re, self.im + o.im)
        if isinstance(o, (int, Fraction)):
            return _gr(self.re + o, self.im)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, GaussRat):
            return _gr(self.re - o.re, self.im - o.im)
        if isinstance(o, (int, Fraction)):
            return _gr(self.re - o, self.im)
        return NotImplemented

    def __rsub__(self, o):
        if isinstance(o, (int, Fraction)):
            return _gr(o - self.re, -self.im)
        return NotImplemented

    def __mul__(self, o):
        if isinstance(o, GaussRat):
            return _gr(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
        if isinstance(o, (int, Fraction)):
            return _gr(self.re * o, self.im * o)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, GaussRat):
            n = o.re * o.re + o.im * o.im
            return _gr((self.re * o.re + self.im * o.im) / n, (self.im * o.re - self.re * o.im) / n)
        if isinstance(o, (int, Fraction)):
            return _gr(self.re / o, self.im / o)
        return NotImplemented

    def __rtruediv__(self, o):
        if isinstance(o, (int, Fraction)):
            return GaussRat(o) / self
        return NotImplemented

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __eq__(self, o):
        if isinstance(o, GaussRat):
            return self.re == o.re and self.im == o.im
        if isinstance(o, (int, Fraction)):
            return self.im == 0 and self.re == o
        return NotImplemented

    def __hash__(self):
        return hash(self.re) if self.im == 0 else hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conjugate(self):
        return GaussRat(self.re, -self.im)

    def __repr__(self):
        return f"GaussRat({format_scalar(self)!r})"


def _gr(re, im):
    if im == 0:
        return canon(re)
    return GaussRat(re, im)


def canon(x):
    """Canonical scalar: int when integral, Fraction when rational, GaussRat otherwise."""
    if isinstance(x, int) and not isinstance(x, bool):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, GaussRat):
        return canon(x.re) if x.im == 0 else x
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, str):
        return parse_scalar(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def conj(x):
    return x.conjugate() if isinstance(x, GaussRat) else x


def abs2(x) -> Fraction | int:
    """|x|^2, always rational."""
    if isinstance(x, GaussRat):
        return canon(x.re * x.re + x.im * x.im)
    return x * x


def is_gauss(x) -> bool:
    return isinstance(x, GaussRat)


def format_scalar(x) -> str:
    x = canon(x)
    if not isinstance(x, GaussRat):
        return str(Fraction(x))
    im = str(x.im) + "i"
    if x.re == 0:
        return im
    return f"{x.re}{'' if x.im < 0 else '+'}{im}"


def parse_scalar(s) -> int | Fraction | GaussRat:
    """Parse "p/q", "a/b+c/di" and friends; ints pass through."""
    if isinstance(s, bool):
        raise ValueError("boolean is not a scalar")
    if isinstance(s, (int, Fraction, GaussRat)):
        return canon(s)
    if not isinstance(s, str):
        raise ValueError(f"scalar must be a string or integer, got {s!r}")
    t = s.replace(" ", "")
    if not t:
        raise ValueError("empty scalar")
    try:
        if not t.endswith("i"):
            return canon(Fraction(t))
        body = t[:-1]
        cut = max(body.rfind("+"), body.rfind("-"))
        if cut > 0 and body[cut - 1] not in "eE":
            re_s, im_s = body[:cut], body[cut:]
        else:
            re_s, im_s = "0", body
        if im_s in ("", "+"):
            im = Fraction(1)
        elif im_s == "-":
            im = Fraction(-1)
        else:
            im = Fraction(im_s)
        return _gr(Fraction(re_s), im)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad scalar {s!r}") from exc


# ---------------------------------------------------------------------------
# coefficient-tuple helpers (ascending order, no trailing zeros)


def _trim(c: list) -> list:
    while c and not c[-1]:
        c.pop()
    return c


def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, x in enumerate(b):
        out[i] = out[i] + x
    return _trim(out)


def _psub(a, b):
    out = list(a) + [0] * (len(b) - len(a))
    for i, x in enumerate(b):
        out[i] = out[i] - x
    return _trim(out)


def _pmul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def _pscale(a, s):
    if not s:
        return []
    return [x * s for x in a]


def _pdivmod_field(a, b):
    """Long division over a field (Fraction / GaussRat coefficients)."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(a)
    q = [0] * max(len(a) - len(b) + 1, 0)
    lb = _field(b[-1])
    db = len(b) - 1
    while len(r) - 1 >= db and r:
        k = len(r) - 1 - db
        f = r[-1] / lb
        q[k] = f
        for i, y in enumerate(b):
            r[i + k] = r[i + k] - f * y
        r.pop()
        _trim(r)
    return _trim(q), r


def _pdiv_exact_int(a, b):
    """Exact division in Z[z]; raises ArithmeticError if b does not divide a."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    if len(b) == 1:
        d = b[0]
        out = []
        for x in a:
            qq, rr = divmod(x, d)
            if rr:
                raise ArithmeticError("inexact division")
            out.append(qq)
        return out
    r = list(a)
    db = len(b) - 1
    lb = b[-1]
    q = [0] * max(len(a) - db, 0)
    while r and len(r) - 1 >= db:
        k = len(r) - 1 - db
        f, rem = divmod(r[-1], lb)
        if rem:
            raise ArithmeticError("inexact division")
        q[k] = f
        if f:
            for i, y in enumerate(b):
                r[i + k] -= f * y
        r.pop()
        _trim(r)
    if r:
        raise ArithmeticError("inexact division")
    return _trim(q)


def _pdiv_exact_field(a, b):
    q, r = _pdivmod_field(a, b)
    if r:
        raise ArithmeticError("inexact division")
    return q


def _content(a: Sequence[int]) -> int:
    g = 0
    for x in a:
        g = gcd(g, x)
        if g == 1:
            break
    return g


def _primitive(a: list[int]) -> list[int]:
    g = _content(a)
    if g > 1:
        a = [x // g for x in a]
    if a and a[-1] < 0:
        a = [-x for x in a]
    return a


_PRIMES = (2**61 - 1, 2**31 - 1)


def _mod_gcd_degree(a: list[int], b: list[int], p: int) -> int | None:
    """Degree of gcd(a, b) over GF(p), or None if p divides a leading coefficient."""
    if a[-1] % p == 0 or b[-1] % p == 0:
        return None
    x = [v % p for v in a]
    y = [v % p for v in b]
    _trim(x)
    _trim(y)
    while y:
        inv = pow(y[-1], -1, p)
        while len(x) >= len(y):
            f = x[-1] * inv % p
            k = len(x) - len(y)
            for i, v in enumerate(y):
                x[i + k] = (x[i + k] - f * v) % p
            x.pop()
            _trim(x)
            if not x:
                break
        x, y = y, x
    return len(x) - 1


def _int_poly_gcd(a: list[int], b: list[int]) -> list[int]:
    """Primitive gcd of two integer polynomials via primitive remainder sequences.

    A gcd of degree 0 modulo a prime not dividing either leading coefficient
    proves the integer gcd is constant, which is the common case and skips the
    remainder sequence entirely.
    """
    for p in _PRIMES:
        d = _mod_gcd_degree(a, b, p)
        if d == 0:
            return [1]
        if d is not None:
            break
    a, b = _primitive(list(a)), _primitive(list(b))
    if len(a) < len(b):
        a, b = b, a
    while b:
        # pseudo-remainder of a by b
        r = list(a)
        lb = b[-1]
        db = len(b) - 1
        while r and len(r) - 1 >= db:
            k = len(r) - 1 - db
            lr = r[-1]
            r = [x * lb for x in r]
            for i, y in enumerate(b):
                r[i + k] -= lr * y
            r.pop()
            _trim(r)
        a, b = b, _primitive(r)
    return a


def _to_int_poly(c) -> tuple[list[int], int]:
    """Scale a rational coefficient list to integers; returns (ints, multiplier)."""
    m = 1
    for x in c:
        if isinstance(x, Fraction):
            m = lcm(m, x.denominator)
    if m == 1:
        return [int(x) for x in c], 1
    return [int(x * m) for x in c], m


# ---------------------------------------------------------------------------
# polynomials


class Poly:
    """Univariate polynomial in z, coefficients stored in ascending order."""

    __slots__ = ("c",)

    def __init__(self, coeffs: Iterable = ()):
        self.c = tuple(_trim([canon(x) for x in coeffs]))

    @classmethod
    def _raw(cls, c) -> "Poly":
        p = object.__new__(cls)
        p.c = tuple(canon(x) for x in c) if c else ()
        return p

    @classmethod
    def const(cls, x) -> "Poly":
        return cls((x,))

    @classmethod
    def z(cls) -> "Poly":
        return cls((0, 1))

    @property
    def deg(self) -> int:
        return len(self.c) - 1

    def is_zero(self) -> bool:
        return not self.c

    @property
    def lead(self):
        return self.c[-1] if self.c else 0

    def coeff(self, k: int):
        return self.c[k] if 0 <= k < len(self.c) else 0

    def has_gauss(self) -> bool:
        return any(isinstance(x, GaussRat) for x in self.c)

    def __add__(self, o):
        o = _as_poly(o)
        if o is None:
            return NotImplemented
        return Poly._raw(_padd(self.c, o.c))

    __radd__ = __add__

    def __sub__(self, o):
        o = _as_poly(o)
        if o is None:
            return NotImplemented
        return Poly._raw(_psub(self.c, o.c))

    def __rsub__(self, o):
        o = _as_poly(o)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, o):
        o = _as_poly(o)
        if o is None:
            return NotImplemented
        return Poly._raw(_pmul(self.c, o.c))

    __rmul__ = __mul__

    def __neg__(self):
        return Poly._raw([-x for x in self.c])

    def __pow__(self, k: int):
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __divmod__(self, o):
        o = _as_poly(o)
        q, r = _pdivmod_field([Fraction(x) if not isinstance(x, GaussRat) else x for x in self.c], list(o.c))
        return Poly(q), Poly(r)

    def __floordiv__(self, o):
        return divmod(self, o)[0]

    def __mod__(self, o):
        return divmod(self, o)[1]

    def __call__(self, x):
        acc = 0
        for a in reversed(self.c):
            acc = acc * x + a
        return canon(acc) if not isinstance(acc, GaussRat) else acc

    def __eq__(self, o):
        if isinstance(o, Poly):
            return self.c == o.c
        if isinstance(o, (int, Fraction, GaussRat)):
            return self.c == Poly.const(o).c
        return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def monic(self) -> "Poly":
        if not self.c:
            return self
        lc = self.c[-1]
        if lc == 1:
            return self
        lc = _field(lc)
        return Poly([x / lc for x in self.c])

    def derivative(self) -> "Poly":
        return Poly([k * a for k, a in enumerate(self.c)][1:])

    def reciprocal_conj(self, n: int | None = None) -> "Poly":
        """z^n * conj(p(1/conj z)); n defaults to the degree."""
        n = self.deg if n is None else n
        out = [0] * (n + 1)
        for k, a in enumerate(self.c):
            out[n - k] = conj(a)
        return Poly(out)

    def __repr__(self):
        return f"Poly({[format_scalar(x) for x in self.c]})"

    def __str__(self):
        if not self.c:
            return "0"
        terms = []
        for k, a in enumerate(self.c):
            if not a:
                continue
            s = format_scalar(a)
            if isinstance(a, GaussRat):
                s = f"({s})"
            if k == 0:
                terms.append(s)
            else:
                zk = "z" if k == 1 else f"z^{k}"
                terms.append(zk if a == 1 else ("-" + zk if a == -1 else f"{s}*{zk}"))
        return " + ".join(reversed(terms)).replace("+ -", "- ")


def _as_poly(o) -> Poly | None:
    if isinstance(o, Poly):
        return o
    if isinstance(o, (int, Fraction, GaussRat)):
        return Poly.const(o)
    return None


ONE = Poly.const(1)
ZERO = Poly()


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd; gcd(0, 0) = 0."""
    if a.is_zero():
        return b.monic()
    if b.is_zero():
        return a.monic()
    if a.deg == 0 or b.deg == 0:
        return ONE
    if a.has_gauss() or b.has_gauss():
        x = [x if isinstance(x, GaussRat) else Fraction(x) for x in a.c]
        y = [x if isinstance(x, GaussRat) else Fraction(x) for x in b.c]
        while y:
            _, r = _pdivmod_field(x, y)
            x, y = y, r
        return Poly(x).monic()
    ia, _ = _to_int_poly(a.c)
    ib, _ = _to_int_poly(b.c)
    return Poly(_int_poly_gcd(ia, ib)).monic()


# ---------------------------------------------------------------------------
# rational functions


class RatFn:
    """num/den in lowest terms with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num=ZERO, den=ONE):
        num = num if isinstance(num, Poly) else Poly.const(num)
        den = den if isinstance(den, Poly) else Poly.const(den)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            self.num, self.den = ZERO, ONE
            return
        if den.deg > 0:
            g = poly_gcd(num, den)
            if g.deg > 0:
                num, den = num // g, den // g
        lc = den.lead
        if lc != 1:
            lc = _field(lc)
            num = Poly([x / lc for x in num.c])
            den = Poly([x / lc for x in den.c])
        self.num, self.den = num, den

    @classmethod
    def _raw(cls, num: Poly, den: Poly = ONE) -> "RatFn":
        r = object.__new__(cls)
        r.num, r.den = num, den
        return r

    @classmethod
    def const(cls, x) -> "RatFn":
        return cls._raw(Poly.const(x))

    @classmethod
    def z(cls) -> "RatFn":
        return cls._raw(Poly.z())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __bool__(self):
        return not self.num.is_zero()

    def is_poly(self) -> bool:
        return self.den.deg == 0

    def is_causal(self) -> bool:
        return self.num.deg <= self.den.deg

    def is_constant(self) -> bool:
        return self.den.deg == 0 and self.num.deg <= 0

    def constant(self):
        if not self.is_constant():
            raise NonConstantEntries(f"{self} is not constant")
        return self.num.coeff(0)

    def has_gauss(self) -> bool:
        return self.num.has_gauss() or self.den.has_gauss()

    def __add__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        if self.den.deg == 0 and o.den.deg == 0:
            return RatFn._raw(self.num + o.num)
        if self.den == o.den:
            return RatFn(self.num + o.num, self.den)
        return RatFn(self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self):
        return RatFn._raw(-self.num, self.den)

    def __sub__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        if self.num.is_zero() or o.num.is_zero():
            return RatFn._raw(ZERO)
        if self.den.deg == 0 and o.den.deg == 0:
            return RatFn._raw(self.num * o.num)
        return RatFn(self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def inverse(self) -> "RatFn":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero rational function")
        return RatFn(self.den, self.num)

    def __truediv__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, o):
        o = _as_ratfn(o)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = RatFn.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, z0):
        d = self.den(z0)
        if not d:
            raise ZeroDivisionError("pole")
        n = self.num(z0)
        return _div_scalar(n, d)

    def __eq__(self, o):
        o2 = _as_ratfn(o)
        if o2 is None:
            return NotImplemented
        return self.num == o2.num and self.den == o2.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"RatFn({self})"

    def __str__(self):
        if self.den.deg == 0:
            return str(self.num)
        return f"({self.num})/({self.den})"


def _field(x):
    """Lift an int to Fraction so that true division stays exact."""
    return x if isinstance(x, (Fraction, GaussRat)) else Fraction(x)


def _div_scalar(a, b):
    if isinstance(a, GaussRat) or isinstance(b, GaussRat):
        return canon(GaussRat(a) / b if not isinstance(a, GaussRat) else a / b)
    return canon(Fraction(a) / b)


def _as_ratfn(o) -> RatFn | None:
    if isinstance(o, RatFn):
        return o
    if isinstance(o, Poly):
        return RatFn._raw(o)
    if isinstance(o, (int, Fraction, GaussRat)):
        return RatFn.const(canon(o))
    return None


def to_ratfn(o) -> RatFn:
    r = _as_ratfn(o if not isinstance(o, str) else parse_scalar(o))
    if r is None:
        raise TypeError(f"cannot interpret {o!r} as a rational function")
    return r


Z = RatFn.z()


# ---------------------------------------------------------------------------
# matrices


class RatMatrix:
    """Dense matrix of rational functions.  Shape is explicit so empty blocks work."""

    __slots__ = ("rows", "cols", "e")

    def __init__(self, entries: Sequence[Sequence] = (), rows: int | None = None, cols: int | None = None):
        e = tuple(tuple(to_ratfn(x) for x in row) for row in entries)
        r = len(e) if rows is None else rows
        c = (len(e[0]) if e else 0) if cols is None else cols
        if len(e) != r or any(len(row) != c for row in e):
            if r == 0 or c == 0:
                e = tuple(() for _ in range(r))
            else:
                raise ValueError("ragged or mis-sized matrix entries")
        self.rows, self.cols, self.e = r, c, e

    @classmethod
    def _raw(cls, e, rows, cols) -> "RatMatrix":
        m = object.__new__(cls)
        m.rows, m.cols = rows, cols
        m.e = tuple(tuple(row) for row in e) if cols else tuple(() for _ in range(rows))
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RatMatrix":
        zero = RatFn._raw(ZERO)
        return cls._raw([[zero] * cols for _ in range(rows)], rows, cols)

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        zero, one = RatFn._raw(ZERO), RatFn.const(1)
        return cls._raw([[one if i == j else zero for j in range(n)] for i in range(n)], n, n)

    @classmethod
    def diag(cls, values: Sequence) -> "RatMatrix":
        n = len(values)
        out = [[RatFn._raw(ZERO)] * n for _ in range(n)]
        for i, v in enumerate(values):
            out[i][i] = to_ratfn(v)
        return cls._raw(out, n, n)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij):
        i, j = ij
        return self.e[i][j]

    def tolist(self) -> list[list[RatFn]]:
        return [list(r) for r in self.e]

    def __eq__(self, o):
        if not isinstance(o, RatMatrix):
            return NotImplemented
        return self.shape == o.shape and self.e == o.e

    def __hash__(self):
        return hash((self.rows, self.cols, self.e))

    def __add__(self, o: "RatMatrix"):
        _same_shape(self, o)
        return RatMatrix._raw([[a + b for a, b in zip(r, s)] for r, s in zip(self.e, o.e)], self.rows, self.cols)

    def __sub__(self, o: "RatMatrix"):
        _same_shape(self, o)
        return RatMatrix._raw([[a - b for a, b in zip(r, s)] for r, s in zip(self.e, o.e)], self.rows, self.cols)

    def __neg__(self):
        return RatMatrix._raw([[-a for a in r] for r in self.e], self.rows, self.cols)

    def __matmul__(self, o: "RatMatrix"):
        if self.cols != o.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {o.shape}")
        out = []
        ocols = [[o.e[k][j] for k in range(o.rows)] for j in range(o.cols)]
        for r in self.e:
            row = []
            for col in ocols:
                acc = RatFn._raw(ZERO)
                for a, b in zip(r, col):
                    if a.num.c and b.num.c:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return RatMatrix._raw(out, self.rows, o.cols)

    def scale(self, s) -> "RatMatrix":
        s = to_ratfn(s)
        return RatMatrix._raw([[a * s for a in r] for r in self.e], self.rows, self.cols)

    @property
    def T(self) -> "RatMatrix":
        return RatMatrix._raw([[self.e[i][j] for i in range(self.rows)] for j in range(self.cols)], self.cols, self.rows)

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RatMatrix":
        return RatMatrix._raw([[self.e[i][j] for j in cols] for i in rows], len(rows), len(cols))

    def is_zero(self) -> bool:
        return all(not a for r in self.e for a in r)

    def is_constant(self) -> bool:
        return all(a.is_constant() for r in self.e for a in r)

    def is_causal(self) -> bool:
        return all(a.is_causal() for r in self.e for a in r)

    def has_gauss(self) -> bool:
        return any(a.has_gauss() for r in self.e for a in r)

    def constants(self) -> list[list]:
        if not self.is_constant():
            raise NonConstantEntries("matrix has non-constant entries")
        return [[a.num.coeff(0) for a in r] for r in self.e]

    def map(self, f) -> "RatMatrix":
        return RatMatrix._raw([[f(a) for a in r] for r in self.e], self.rows, self.cols)

    def __repr__(self):
        return f"RatMatrix({[[str(a) for a in r] for r in self.e]}, shape={self.shape})"


def _same_shape(a: RatMatrix, b: RatMatrix):
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


def hstack(mats: Sequence[RatMatrix], rows: int | None = None) -> RatMatrix:
    mats = list(mats)
    if not mats:
        return RatMatrix.zeros(rows or 0, 0)
    r = mats[0].rows
    if any(m.rows != r for m in mats):
        raise ValueError("hstack row mismatch")
    return RatMatrix._raw([sum((m.e[i] for m in mats), ()) for i in range(r)], r, sum(m.cols for m in mats))


def vstack(mats: Sequence[RatMatrix], cols: int | None = None) -> RatMatrix:
    mats = list(mats)
    if not mats:
        return RatMatrix.zeros(0, cols or 0)
    c = mats[0].cols
    if any(m.cols != c for m in mats):
        raise ValueError("vstack column mismatch")
    return RatMatrix._raw([row for m in mats for row in m.e], sum(m.rows for m in mats), c)


def block(grid: Sequence[Sequence[RatMatrix]]) -> RatMatrix:
    return vstack([hstack(row) for row in grid])


def block_diag(mats: Sequence[RatMatrix]) -> RatMatrix:
    mats = list(mats)
    n = sum(m.rows for m in mats)
    c = sum(m.cols for m in mats)
    out = [[RatFn._raw(ZERO)] * c for _ in range(n)]
    r0 = c0 = 0
    for m in mats:
        for i in range(m.rows):
            for j in range(m.cols):
                out[r0 + i][c0 + j] = m.e[i][j]
        r0 += m.rows
        c0 += m.cols
    return RatMatrix._raw(out, n, c)


def eval_matrix(M: RatMatrix, z0) -> RatMatrix:
    """Entrywise evaluation at z = z0; the result has constant entries."""
    z0 = canon(z0)
    out = []
    for i, r in enumerate(M.e):
        row = []
        for j, a in enumerate(r):
            if a.den.deg == 0:
                row.append(RatFn.const(a.num(z0)) if a.num.deg > 0 else a)
                continue
            try:
                row.append(RatFn.const(a(z0)))
            except ZeroDivisionError:
                raise PoleAtPoint(i, j, z0) from None
        out.append(row)
    return RatMatrix._raw(out, M.rows, M.cols)


# ---------------------------------------------------------------------------
# fraction-free elimination kernels


class _Cleared(NamedTuple):
    rows: list  # list of rows of coefficient lists
    field: bool  # True: coefficients in a field (Gaussian case), else Z
    multipliers: list  # per-row Poly multiplier (row was multiplied by it)


def _clear(rows: Sequence[Sequence[RatFn]]) -> _Cleared:
    gauss = any(a.has_gauss() for r in rows for a in r)
    out, mults = [], []
    for r in rows:
        dens = [a.den for a in r if a.den.deg > 0]
        L = ONE
        for d in dens:
            if d != L:
                g = poly_gcd(L, d)
                L = L * (d // g) if g.deg > 0 else L * d
        if L.deg > 0:
            polys = [(a.num * (L // a.den)).c if a.den != L else a.num.c for a in r]
        else:
            polys = [a.num.c for a in r]
        if gauss:
            out.append([list(p) for p in polys])
            mults.append(L)
            continue
        m = 1
        for p in polys:
            for x in p:
                if isinstance(x, Fraction):
                    m = lcm(m, x.denominator)
        if m == 1:
            out.append([[int(x) for x in p] for p in polys])
        else:
            out.append([[int(x * m) for x in p] for p in polys])
        mults.append(L * m)
    return _Cleared(out, gauss, mults)


def _bareiss_rank(rows: list, ncols: int, field: bool) -> int:
    M = [list(r) for r in rows]
    n = len(M)
    div = _pdiv_exact_field if field else _pdiv_exact_int
    prev = [1]
    r = 0
    for c in range(ncols):
        if r == n:
            break
        piv = next((i for i in range(r, n) if M[i][c]), None)
        if piv is None:
            continue
        if piv != r:
            M[r], M[piv] = M[piv], M[r]
        pr = M[r]
        pv = pr[c]
        trivial = prev == [1]
        for i in range(r + 1, n):
            row = M[i]
            a = row[c]
            for j in range(c + 1, ncols):
                x = _pmul(pv, row[j])
                if a and pr[j]:
                    x = _psub(x, _pmul(a, pr[j]))
                row[j] = x if trivial or not x else div(x, prev)
            row[c] = []
        prev = pv
        r += 1
    return r


def _bareiss_solve(rows: list, n: int, field: bool):
    """Fraction-free Gauss-Jordan on an augmented system [P | Q].

    Returns (diag, rows, sign) where every diagonal entry equals ``diag`` and the
    augmented part holds diag * P^{-1} Q; sign tracks row swaps so that the
    determinant of P is sign * diag.
    """
    M = [list(r) for r in rows]
    width = len(M[0]) if M else 0
    div = _pdiv_exact_field if field else _pdiv_exact_int
    prev = [1]
    sign = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c]), None)
        if piv is None:
            raise Singular("matrix is singular")
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            sign = -sign
        pr = M[c]
        pv = pr[c]
        trivial = prev == [1]
        for i in range(n):
            if i == c:
                continue
            row = M[i]
            a = row[c]
            for j in range(width):
                if j == c:
                    continue
                x = _pmul(pv, row[j])
                if a and pr[j]:
                    x = _psub(x, _pmul(a, pr[j]))
                row[j] = x if trivial or not x else div(x, prev)
            row[c] = []
        prev = pv
    return (prev if n else [1]), M, sign


def mat_rank(M: RatMatrix) -> int:
    """Exact rank over the rational-function field (fraction-free elimination)."""
    if M.rows == 0 or M.cols == 0:
        return 0
    if M.rows < M.cols:
        M = M.T
    cl = _clear(M.e)
    return _bareiss_rank(cl.rows, M.cols, cl.field)


def mat_solve(A: RatMatrix, B: RatMatrix) -> RatMatrix:
    """A^{-1} B for square A; raises Singular."""
    n = A.rows
    if A.cols != n or B.rows != n:
        raise ValueError("mat_solve needs square A and conformable B")
    if n == 0:
        return RatMatrix.zeros(0, B.cols)
    cl = _clear([a + b for a, b in zip(A.e, B.e)])
    d, M, _ = _bareiss_solve(cl.rows, n, cl.field)
    den = Poly(d)
    out = [[RatFn(Poly(M[i][n + j]), den) for j in range(B.cols)] for i in range(n)]
    return RatMatrix._raw(out, n, B.cols)


def mat_inverse(M: RatMatrix) -> RatMatrix:
    if M.rows != M.cols:
        raise ValueError("inverse of a non-square matrix")
    return mat_solve(M, RatMatrix.identity(M.rows))


def mat_det(M: RatMatrix) -> RatFn:
    n = M.rows
    if M.cols != n:
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return RatFn.const(1)
    cl = _clear(M.e)
    try:
        d, _, sign = _bareiss_solve(cl.rows, n, cl.field)
    except Singular:
        return RatFn.const(0)
    den = ONE
    for m in cl.multipliers:
        den = den * m
    return RatFn(Poly(d) * sign, den)


def schur_rank(A: RatMatrix, B: RatMatrix, C: RatMatrix, D: RatMatrix) -> int:
    """rank D + rank(A - B D^{-1} C), the rank of the block matrix [A B; C D]."""
    if D.rows != D.cols:
        raise SingularD("D must be square")
    try:
        X = mat_solve(D, C)
    except Singular:
        raise SingularD("D is not invertible") from None
    return D.rows + mat_rank(A - B @ X)


# ---------------------------------------------------------------------------
# characteristic polynomial and unit-circle root counting


def char_poly(M: RatMatrix) -> Poly:
    """det(zI - M) for a constant matrix (Faddeev-LeVerrier recursion)."""
    if M.rows != M.cols:
        raise ValueError("char_poly of a non-square matrix")
    if not M.is_constant():
        raise NonConstantEntries("char_poly needs constant entries")
    return char_poly_scalar(M.constants())


def char_poly_scalar(A: Sequence[Sequence]) -> Poly:
    n = len(A)
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    Mk = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        # Mk = A @ M_{k-1} + c_{n-k+1} I
        prod = [[sum((A[i][t] * Mk[t][j] for t in range(n) if A[i][t] and Mk[t][j]), 0) for j in range(n)] for i in range(n)]
        c_prev = coeffs[n - k + 1]
        for i in range(n):
            prod[i][i] = prod[i][i] + c_prev
        Mk = prod
        tr = 0
        for i in range(n):
            for t in range(n):
                if A[i][t] and Mk[t][i]:
                    tr = tr + A[i][t] * Mk[t][i]
        coeffs[n - k] = _div_scalar(-tr, k)
    return Poly(coeffs)


class UnitDiskCount(NamedTuple):
    inside: int
    outside: int
    boundary: int

    @property
    def on_boundary(self) -> bool:
        return self.boundary > 0

    @property
    def strictly_stable(self) -> bool:
        return self.outside == 0 and self.boundary == 0


def roots_in_unit_disk(p: Poly) -> UnitDiskCount:
    """Exact counts of roots with |z| < 1, |z| > 1 and |z| = 1 (with multiplicity)."""
    if p.is_zero():
        raise ValueError("zero polynomial has no finite root count")
    n = p.deg
    if n == 0:
        return UnitDiskCount(0, 0, 0)
    k = 0
    while not p.c[k]:
        k += 1
    inside = k
    q = Poly(p.c[k:])
    g = poly_gcd(q, q.reciprocal_conj())
    h = q // g if g.deg > 0 else q
    sc = _schur_cohn_inside(h)
    if sc is None:
        sc = _inertia_inside(h)
    inside += sc
    on_circle = _circle_root_count(g) if g.deg > 0 else 0
    paired = (g.deg - on_circle) // 2
    inside += paired
    return UnitDiskCount(inside, n - inside - on_circle, on_circle)


def _normalize_scale(q: Poly) -> Poly:
    """Rescale a rational polynomial to primitive integer form; roots are unchanged."""
    if q.is_zero() or q.has_gauss():
        return q
    ints, _ = _to_int_poly(q.c)
    return Poly._raw(_primitive(ints))


def _schur_cohn_inside(q: Poly) -> int | None:
    """Schur-Cohn recursion for q with no unit-circle roots; None on a singular step."""
    steps = []
    while q.deg > 0:
        a0, an = q.c[0], q.c[-1]
        delta = abs2(an) - abs2(a0)
        if delta == 0:
            return None
        q1 = q * conj(an) - q.reciprocal_conj() * a0
        steps.append((delta > 0, q.deg))
        q = _normalize_scale(Poly(q1.c[1:]))
    count = 0
    for grow, n in reversed(steps):
        count = count + 1 if grow else n - 1 - count
    return count


def _inertia_inside(q: Poly) -> int:
    """Roots inside via the Schur-Cohn Hermitian form; needs gcd(q, q*) = 1."""
    n = q.deg
    a = q.c
    A = [[a[i - j] if i >= j else 0 for j in range(n)] for i in range(n)]
    B = [[conj(a[n - (i - j)]) if i >= j else 0 for j in range(n)] for i in range(n)]
    H = [[sum((conj(A[k][i]) * A[k][j] - conj(B[k][i]) * B[k][j] for k in range(n)), 0) for j in range(n)] for i in range(n)]
    cp = char_poly_scalar(H)
    coeffs = [x.re if isinstance(x, GaussRat) else x for x in cp.c]
    # eigenvalues are real, so sign changes of cp(-x) count the negative ones exactly
    neg = [c * (-1) ** i for i, c in enumerate(coeffs)]
    return _sign_changes(neg)


def _sign_changes(c: Sequence) -> int:
    signs = [1 if x > 0 else -1 for x in c if x]
    return sum(1 for s, t in zip(signs, signs[1:]) if s != t)


def _circle_root_count(g: Poly) -> int:
    """Number of roots on |z| = 1 of a self-inversive polynomial, with multiplicity."""
    count = 0
    minus_one = Poly((1, 1))
    while g.deg > 0 and not g(-1):
        g = g // minus_one
        count += 1
    k = g.deg
    if k <= 0:
        return count
    # Cayley map z = (1 + i w) / (1 - i w) sends the real line onto the circle
    up = Poly((1, GaussRat(0, 1)))
    down = Poly((1, GaussRat(0, -1)))
    q = ZERO
    for j, gj in enumerate(g.c):
        if gj:
            q = q + (up ** j) * (down ** (k - j)) * gj
    pivot = _field(q.lead)
    q = Poly([x / pivot for x in q.c])
    if q.has_gauss():
        raise ArithmeticError("circle factor is not self-inversive")
    return count + _real_roots_with_multiplicity(q)


def _real_roots_with_multiplicity(q: Poly) -> int:
    return sum(k * _sturm_real_roots(f) for f, k in squarefree_factors(q))


def _sturm_real_roots(p: Poly) -> int:
    if p.deg <= 0:
        return 0
    seq = [p, p.derivative()]
    while seq[-1].deg > 0:
        r = seq[-2] % seq[-1]
        if r.is_zero():
            break
        seq.append(-r)
    at_pos = [s.lead for s in seq]
    at_neg = [s.lead * (-1) ** s.deg for s in seq]
    return _sign_changes(at_neg) - _sign_changes(at_pos)


# ---------------------------------------------------------------------------
# constant-matrix helpers used across modules


def const_matrix(rows: Sequence[Sequence]) -> RatMatrix:
    return RatMatrix(rows)


def squarefree_factors(p: Poly) -> list[tuple[Poly, int]]:
    """Yun decomposition: p = lead * prod f_k^k with square-free, coprime f_k."""
    out = []
    if p.deg <= 0:
        return out
    a = p.monic()
    b = a.derivative()
    c = poly_gcd(a, b)
    w = a // c
    y = b // c
    zz = y - w.derivative()
    k = 1
    while w.deg > 0:
        g = poly_gcd(w, zz)
        if g.deg > 0:
            out.append((g, k))
        k += 1
        w = w // g
        y = zz // g
        zz = y - w.derivative()
    return out


def roots_in_field(p: Poly) -> tuple[list, Poly]:
    """Roots of p in Q(i) with multiplicity, plus the monic cofactor holding the rest.

    Candidates come from floating-point roots of each square-free factor; each
    candidate is rationalized and accepted only after an exact zero test, so the
    returned roots are always exact.  Roots that cannot be recognized stay in
    the cofactor for the caller to account for.
    """
    import numpy as np

    found = []
    rest = p.monic() if p.deg > 0 else ONE
    for f, mult in squarefree_factors(p):
        f = f.monic()
        while f.deg > 0 and not f.c[0]:
            found.extend([0] * mult)
            f = Poly(f.c[1:])
        if f.deg <= 0:
            continue
        coeffs = [complex(float(x.re), float(x.im)) if isinstance(x, GaussRat) else float(x) for x in reversed(f.c)]
        for r in np.roots(coeffs):
            cand = _rationalize(complex(r), f)
            if cand is not None and not f(cand):
                found.extend([cand] * mult)
                f = f // Poly((-cand, 1))
                if f.deg <= 0:
                    break
    for r in found:
        rest = rest // Poly((-r, 1))
    return found, rest


def _rationalize(r: complex, f: Poly):
    for bound in (1, 10, 100, 1000, 10**4, 10**6):
        re = Fraction(r.real).limit_denominator(bound)
        im = Fraction(r.imag).limit_denominator(bound)
        if abs(complex(float(re), float(im)) - r) > 1e-6 * (1 + abs(r)):
            continue  # snapped to some other point, possibly another root
        cand = _gr(re, im)
        if not f(cand):
            return cand
    return None


# ---------------------------------------------------------------------------
# JSON helpers


def poly_to_json(p: Poly) -> list[str]:
    return [format_scalar(x) for x in p.c] or ["0"]


def poly_from_json(data) -> Poly:
    if isinstance(data, (str, int)) and not isinstance(data, bool):
        return Poly.const(parse_scalar(data))
    if not isinstance(data, list):
        raise ValueError(f"polynomial must be a list of coefficients, got {data!r}")
    return Poly([parse_scalar(x) for x in data])


def ratfn_to_json(r: RatFn) -> dict:
    return {"num": poly_to_json(r.num), "den": poly_to_json(r.den)}


def ratfn_from_json(data) -> RatFn:
    if isinstance(data, dict):
        if set(data) - {"num", "den"} or "num" not in data:
            raise ValueError(f"rational function needs 'num' and optional 'den': {data!r}")
        num = poly_from_json(data["num"])
        den = poly_from_json(data.get("den", ["1"]))
        if den.is_zero():
            raise ValueError("zero denominator")
        return RatFn(num, den)
    return RatFn.const(parse_scalar(data))


def matrix_to_json(M: RatMatrix) -> list[list[dict]]:
    return [[ratfn_to_json(a) for a in r] for r in M.e]


def matrix_from_json(data, rows: int | None = None, cols: int | None = None) -> RatMatrix:
    if not isinstance(data, list) or any(not isinstance(r, list) for r in data):
        raise ValueError("matrix must be a list of rows")
    return RatMatrix([[ratfn_from_json(x) for x in r] for r in data], rows=rows, cols=cols)


def scalar_matrix_to_json(M: RatMatrix) -> list[list[str]]:
    return [[format_scalar(x) for x in r] for r in M.constants()]
