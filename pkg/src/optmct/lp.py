"""Exact feasibility for ``A x = b, x >= 0`` by the two-phase simplex method.

Only phase one is needed: artificial variables are driven out of the basis
with Bland's rule, which guarantees termination.  All pivots are exact
rationals.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

__all__ = ["feasible_point"]


def feasible_point(a_rows: Sequence[Sequence], b: Sequence) -> list | None:
    """A non-negative solution of ``A x = b``, or None when none exists."""
    m = len(a_rows)
    if m == 0:
        return []
    n = len(a_rows[0])
    tab = []
    for row, rhs in zip(a_rows, b):
        row = [Fraction(v) for v in row]
        rhs = Fraction(rhs)
        if rhs < 0:
            row = [-v for v in row]
            rhs = -rhs
        tab.append(row + [Fraction(int(i == len(tab))) for i in range(m)] + [rhs])
    basis = [n + i for i in range(m)]
    width = n + m
    # reduced costs of "minimise the sum of artificials"
    obj = [Fraction(0)] * (width + 1)
    for row in tab:
        for j in range(n):
            obj[j] -= row[j]
        obj[width] -= row[width]

    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for i, row in enumerate(tab):
            if row[enter] > 0:
                ratio = row[width] / row[enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    leave, best = i, ratio
        if leave is None:   # unbounded direction; cannot happen in phase one
            break
        _pivot(tab, obj, leave, enter)
        basis[leave] = enter

    if obj[width] != 0:
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = tab[i][width]
    return x


def _pivot(tab, obj, r, c):
    prow = tab[r]
    p = prow[c]
    if p != 1:
        prow[:] = [v / p for v in prow]
    for row in tab + [obj]:
        if row is prow:
            continue
        f = row[c]
        if f:
            row[:] = [v - f * w for v, w in zip(row, prow)]
