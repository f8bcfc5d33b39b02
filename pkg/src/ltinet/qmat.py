"""Dense constant matrices over Q or Q(i) as nested lists.

State-space work (realizations, pole placement, simulation) only ever needs
constant matrices, so it runs on plain lists of exact scalars instead of
RatMatrix; the conversions below bridge the two.
"""

from __future__ import annotations

from typing import Sequence

from fractions import Fraction
from math import comb, isqrt, lcm

from .exactalg import GaussRat, Poly, RatMatrix, Singular, _div_scalar, canon

Mat = list[list]


def zeros(r: int, c: int) -> Mat:
    return [[0] * c for _ in range(r)]


def eye(n: int) -> Mat:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def shape(A: Mat, cols: int | None = None) -> tuple[int, int]:
    return len(A), (len(A[0]) if A else (cols or 0))


def copy(A: Mat) -> Mat:
    return [list(r) for r in A]


def add(A: Mat, B: Mat) -> Mat:
    return [[canon(a + b) for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def sub(A: Mat, B: Mat) -> Mat:
    return [[canon(a - b) for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def scale(A: Mat, s) -> Mat:
    return [[canon(a * s) for a in r] for r in A]


def neg(A: Mat) -> Mat:
    return [[canon(-a) for a in r] for r in A]


def mul(A: Mat, B: Mat, inner: int | None = None, cols: int | None = None) -> Mat:
    """A @ B; ``cols`` gives the result width when B has no rows."""
    n = len(B[0]) if B else (cols or 0)
    out = []
    for ra in A:
        row = [0] * n
        for t, a in enumerate(ra):
            if not a:
                continue
            for j, b in enumerate(B[t]):
                if b:
                    row[j] = row[j] + a * b
        out.append([canon(x) for x in row])
    return out


def matvec(A: Mat, x: Sequence) -> list:
    out = []
    for r in A:
        s = 0
        for a, b in zip(r, x):
            if a and b:
                s = s + a * b
        out.append(canon(s))
    return out


def T(A: Mat, rows: int = 0) -> Mat:
    if not A:
        return [[] for _ in range(rows)]
    return [list(c) for c in zip(*A)]


def hstack(mats: Sequence[Mat], rows: int) -> Mat:
    out = [[] for _ in range(rows)]
    for M in mats:
        for i in range(rows):
            out[i].extend(M[i] if M else [])
    return out


def vstack(mats: Sequence[Mat]) -> Mat:
    out = []
    for M in mats:
        out.extend(list(r) for r in M)
    return out


def block_diag(mats: Sequence[tuple[Mat, int, int]]) -> Mat:
    """Block diagonal of (matrix, rows, cols) triples so empty blocks keep their widths."""
    R = sum(r for _, r, _ in mats)
    C = sum(c for _, _, c in mats)
    out = zeros(R, C)
    i0 = j0 = 0
    for M, r, c in mats:
        for i in range(r):
            for j in range(c):
                out[i0 + i][j0 + j] = M[i][j]
        i0 += r
        j0 += c
    return out


def is_zero(A: Mat) -> bool:
    return all(not x for r in A for x in r)


def from_ratmatrix(M: RatMatrix) -> Mat:
    return M.constants()


def to_ratmatrix(A: Mat, rows: int | None = None, cols: int | None = None) -> RatMatrix:
    r = len(A) if rows is None else rows
    c = (len(A[0]) if A else 0) if cols is None else cols
    return RatMatrix(A, rows=r, cols=c)


def _eliminate(A: Mat, ncols: int):
    """Row echelon form in place; returns the pivot columns."""
    M = A
    rows = len(M)
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, rows) if M[i][c]), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        pv = M[r][c]
        for i in range(r + 1, rows):
            if M[i][c]:
                f = _div_scalar(M[i][c], pv)
                M[i] = [canon(a - f * b) for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return pivots


def rank(A: Mat) -> int:
    if not A or not A[0]:
        return 0
    return len(_eliminate(copy(A), len(A[0])))


def inv(A: Mat) -> Mat:
    n = len(A)
    M = [list(r) + [1 if i == j else 0 for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        p = next((i for i in range(c, n) if M[i][c]), None)
        if p is None:
            raise Singular("constant matrix is singular")
        M[c], M[p] = M[p], M[c]
        pv = M[c][c]
        M[c] = [_div_scalar(x, pv) for x in M[c]]
        for i in range(n):
            if i != c and M[i][c]:
                f = M[i][c]
                M[i] = [canon(a - f * b) for a, b in zip(M[i], M[c])]
    return [r[n:] for r in M]


def solve(A: Mat, B: Mat) -> Mat:
    return mul(inv(A), B, cols=len(B[0]) if B else 0)


def column_basis(cols: Sequence[list], n: int) -> list[list]:
    """Greedy maximal independent subset of the given column vectors."""
    basis = []
    for v in cols:
        trial = basis + [v]
        if rank(T(trial)) == len(trial):
            basis = trial
        if len(basis) == n:
            break
    return basis


def complete_basis(basis: list[list], n: int) -> list[list]:
    """Extend independent columns to a basis of the whole space with unit vectors."""
    out = list(basis)
    for k in range(n):
        if len(out) == n:
            break
        e = [1 if i == k else 0 for i in range(n)]
        if rank(T(out + [e])) == len(out) + 1:
            out.append(e)
    return out


def power(A: Mat, k: int) -> Mat:
    n = len(A)
    R = eye(n)
    for _ in range(k):
        R = mul(R, A)
    return R


def krylov(A: Mat, B: Mat) -> list[list]:
    """Columns of [B, AB, A^2 B, ...] up to the state dimension, as a basis of the reachable subspace."""
    n = len(A)
    cols = T(B, n)
    basis = []
    frontier = cols
    for _ in range(n):
        new = []
        for v in frontier:
            trial = basis + [v]
            if rank(T(trial)) == len(trial):
                basis = trial
                new.append(v)
        if not new or len(basis) == n:
            break
        frontier = [matvec(A, v) for v in new]
    return basis


def char_poly(A: Mat) -> Poly:
    """det(zI - A); rational matrices go through the modular route, Gaussian ones stay exact-rational."""
    if any(isinstance(x, GaussRat) for r in A for x in r):
        return char_poly_hessenberg(A)
    return char_poly_modular(A)


def char_poly_hessenberg(A: Mat) -> Poly:
    """det(zI - A) via reduction to upper Hessenberg form over the exact field."""
    n = len(A)
    H = copy(A)
    for m in range(1, n - 1):
        p = next((i for i in range(m, n) if H[i][m - 1]), None)
        if p is None:
            continue
        if p != m:
            H[p], H[m] = H[m], H[p]
            for r in H:
                r[p], r[m] = r[m], r[p]
        piv = H[m][m - 1]
        for i in range(m + 1, n):
            if H[i][m - 1]:
                t = _div_scalar(H[i][m - 1], piv)
                H[i] = [canon(a - t * b) for a, b in zip(H[i], H[m])]
                for r in H:
                    r[m] = canon(r[m] + t * r[i])
    polys = [Poly([1])]
    for k in range(n):
        pk = Poly([-H[k][k], 1]) * polys[k]
        t = 1
        for i in range(1, k + 1):
            t = canon(t * H[k - i + 1][k - i])
            if not t:
                break
            coef = canon(t * H[k - i][k])
            if coef:
                pk = pk - polys[k - i] * Poly([coef])
        polys.append(pk)
    return polys[n]


def _is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes_below(start: int):
    p = start
    while True:
        p -= 1
        if _is_prime(p):
            yield p


def _char_poly_mod(M: list[list[int]], p: int) -> list[int]:
    """Ascending coefficients of det(zI - M) mod p via Hessenberg reduction over GF(p)."""
    n = len(M)
    H = [[x % p for x in r] for r in M]
    for m in range(1, n - 1):
        piv = next((i for i in range(m, n) if H[i][m - 1]), None)
        if piv is None:
            continue
        if piv != m:
            H[piv], H[m] = H[m], H[piv]
            for r in H:
                r[piv], r[m] = r[m], r[piv]
        inv_p = pow(H[m][m - 1], p - 2, p)
        for i in range(m + 1, n):
            if H[i][m - 1]:
                t = H[i][m - 1] * inv_p % p
                Hm = H[m]
                H[i] = [(a - t * b) % p for a, b in zip(H[i], Hm)]
                for r in H:
                    r[m] = (r[m] + t * r[i]) % p
    polys = [[1]]
    for k in range(n):
        prev = polys[k]
        pk = [0] * (k + 2)
        h = H[k][k]
        for j, c in enumerate(prev):
            pk[j + 1] = (pk[j + 1] + c) % p
            pk[j] = (pk[j] - h * c) % p
        t = 1
        for i in range(1, k + 1):
            t = t * H[k - i + 1][k - i] % p
            if not t:
                break
            coef = t * H[k - i][k] % p
            if coef:
                for j, c in enumerate(polys[k - i]):
                    pk[j] = (pk[j] - coef * c) % p
        polys.append(pk)
    return polys[n]


def char_poly_modular(A: Mat) -> Poly:
    """det(zI - A) for a rational matrix by CRT over word-size primes.

    With M = L A integral, every coefficient of det(zI - M) is a sum of
    principal minors, bounded by C(n, k) beta^k (beta the largest column
    norm); enough primes are used to cover twice that bound.
    """
    n = len(A)
    if n == 0:
        return Poly([1])
    L = 1
    for r in A:
        for x in r:
            if isinstance(x, Fraction):
                L = lcm(L, x.denominator)
    M = [[int(x * L) for x in r] for r in A]
    beta = isqrt(max(sum(M[i][j] ** 2 for i in range(n)) for j in range(n))) + 1
    bound = max(comb(n, k) * beta**k for k in range(n + 1))
    modulus, coeffs = 1, [0] * (n + 1)
    for p in _primes_below(1 << 62):
        res = _char_poly_mod(M, p)
        if modulus == 1:
            coeffs = res
        else:
            inv_m = pow(modulus, -1, p)
            coeffs = [c + modulus * ((r - c) * inv_m % p) for c, r in zip(coeffs, res)]
        modulus *= p
        if modulus > 2 * bound:
            break
    half = modulus // 2
    ints = [c - modulus if c > half else c for c in coeffs]
    # det(zI - M/L) = L^-n det(L z I - M)
    return Poly([Fraction(c * L**k, L**n) for k, c in enumerate(ints)])
