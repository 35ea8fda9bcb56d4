"""Small exact linear algebra over the rationals."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations


def det(m: list[list[Fraction]]) -> Fraction:
    a = [list(row) for row in m]
    n = len(a)
    out = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            out = -out
        out *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return out


def solve(m: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve a nonsingular square system."""
    n = len(m)
    a = [list(row) + [r] for row, r in zip(m, rhs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col] / a[col][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def is_psd(m: list[list[Fraction]]) -> bool:
    """Positive semidefiniteness of a symmetric matrix via all principal minors."""
    n = len(m)
    for k in range(1, n + 1):
        for idx in combinations(range(n), k):
            if det([[m[i][j] for j in idx] for i in idx]) < 0:
                return False
    return True
