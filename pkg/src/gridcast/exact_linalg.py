"""Small dense linear algebra over Fractions (row reduction, rank, solve)."""

from __future__ import annotations

from fractions import Fraction


def rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; pivots chosen as leftmost nonzero column,
    first available row."""
    m = [list(map(Fraction, r)) for r in rows]
    pivots: list[int] = []
    if not m:
        return m, pivots
    n_cols = len(m[0])
    r = 0
    for c in range(n_cols):
        p = next((i for i in range(r, len(m)) if m[i][c]), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        pivot_row = m[r]
        nz = [j for j in range(c, n_cols) if pivot_row[j]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                row = m[i]
                for j in nz:
                    row[j] -= f * pivot_row[j]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows: list[list[Fraction]]) -> int:
    return len(rref(rows)[1])


def solve(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction] | None:
    """One solution of a x = b (free variables set to 0), or None."""
    n = len(a[0]) if a else 0
    aug = [list(row) + [bi] for row, bi in zip(a, b)]
    red, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = red[i][n]
    return x


def matvec(a: list[list[Fraction]], x: list[Fraction]) -> list[Fraction]:
    return [sum((aij * xj for aij, xj in zip(row, x) if aij and xj), Fraction(0)) for row in a]


def transpose(a: list[list]) -> list[list]:
    return [list(c) for c in zip(*a)]
