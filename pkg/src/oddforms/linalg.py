"""Exact linear algebra over Fraction: the small toolkit used for
Lagrangian subspaces, transversality ranks and Berezinians."""

from __future__ import annotations

from fractions import Fraction

from .errors import DomainError


def mat(rows) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in rows]


def identity(n: int) -> list[list[Fraction]]:
    return [[Fraction(1 if i == j else 0) for j in range(n)] for i in range(n)]


def zeros(r: int, c: int) -> list[list[Fraction]]:
    return [[Fraction(0)] * c for _ in range(r)]


def mat_mul(a, b):
    rb = len(b)
    cb = len(b[0]) if b else 0
    out = zeros(len(a), cb)
    for i, row in enumerate(a):
        for k, aik in enumerate(row):
            if aik:
                brow = b[k]
                orow = out[i]
                for j in range(cb):
                    orow[j] += aik * brow[j]
    return out


def mat_vec(a, v):
    return [sum((aij * vj for aij, vj in zip(row, v)), Fraction(0)) for row in a]


def transpose(a):
    if not a:
        return []
    return [list(col) for col in zip(*a)]


def rref(a):
    """Reduced row echelon form; returns (R, pivot_columns)."""
    m = [list(row) for row in a]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        pivot = None
        for i in range(r, rows):
            if m[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        pv = m[r][c]
        m[r] = [x / pv for x in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(a) -> int:
    if not a:
        return 0
    _, pivots = rref(a)
    return len(pivots)


def row_space_basis(a):
    """Canonical (RREF, zero rows dropped) basis of the row space."""
    if not a:
        return []
    r, pivots = rref(a)
    return [row for row in r[: len(pivots)]]


def nullspace(a, cols: int = None):
    """Canonical basis of {v : a v = 0}."""
    if not a:
        if cols is None:
            raise DomainError("nullspace of an empty matrix needs an explicit width")
        return [basis_vector(cols, i) for i in range(cols)]
    n = len(a[0])
    r, pivots = rref(a)
    free = [j for j in range(n) if j not in pivots]
    out = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -r[i][f]
        out.append(v)
    return out


def basis_vector(n: int, i: int):
    v = [Fraction(0)] * n
    v[i] = Fraction(1)
    return v


def det(a) -> Fraction:
    n = len(a)
    if n == 0:
        return Fraction(1)
    m = [list(row) for row in a]
    sign = 1
    d = Fraction(1)
    for c in range(n):
        pivot = None
        for i in range(c, n):
            if m[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            sign = -sign
        d *= m[c][c]
        inv = 1 / m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] * inv
                m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return d * sign


def inverse(a):
    n = len(a)
    aug = [list(row) + list(e) for row, e in zip(a, identity(n))]
    r, pivots = rref(aug)
    if pivots != list(range(n)):
        raise DomainError("matrix is singular")
    return [row[n:] for row in r]


def solve(a, b):
    """One solution of a x = b, or None."""
    n = len(a[0]) if a else 0
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    r, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, p in enumerate(pivots):
        x[p] = r[i][n]
    return x


def same_row_space(a, b) -> bool:
    return row_space_basis(a) == row_space_basis(b)


def is_positive_definite(q) -> bool:
    """Sylvester criterion for a symmetric rational matrix."""
    n = len(q)
    for k in range(1, n + 1):
        minor = [row[:k] for row in q[:k]]
        if det(minor) <= 0:
            return False
    return True
