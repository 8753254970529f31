"""
Exact rational simplex for small equality-form linear programs.

Solves ``min c.x  s.t.  A x = b, x >= 0`` over :class:`fractions.Fraction`
with a two-phase revised simplex and Bland's rule, so the result is exact and
termination is guaranteed on degenerate problems.  ``A`` is given column-wise
as sparse ``{row: value}`` dicts, which keeps pricing cheap when columns have
few nonzeros.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

ZERO = Fraction(0)
ONE = Fraction(1)


class ExactInfeasible(Exception):
    pass


class ExactUnbounded(Exception):
    pass


@dataclass
class ExactSolution:
    value: Fraction
    x: dict[int, Fraction]
    pivots: int


class _Simplex:
    def __init__(self, columns: Sequence[dict[int, Fraction]], b: Sequence[Fraction]):
        self.m = len(b)
        self.cols = [dict(c) for c in columns]
        self.n_real = len(columns)
        for i in range(self.m):
            self.cols.append({i: ONE})
        self.b = list(b)
        self.basis = [self.n_real + i for i in range(self.m)]
        self.binv = [[ONE if i == j else ZERO for j in range(self.m)] for i in range(self.m)]
        self.xb = list(self.b)
        self.pivots = 0

    def column(self, j: int) -> list[Fraction]:
        col = self.cols[j]
        return [sum((row[r] * v for r, v in col.items()), ZERO) for row in self.binv]

    def duals(self, cost: Sequence[Fraction]) -> list[Fraction]:
        cb = [cost[j] for j in self.basis]
        return [sum((cb[i] * self.binv[i][r] for i in range(self.m) if cb[i]), ZERO)
                for r in range(self.m)]

    def pivot(self, r: int, j: int, d: list[Fraction]) -> None:
        piv = d[r]
        row_r = [v / piv for v in self.binv[r]]
        xr = self.xb[r] / piv
        for i in range(self.m):
            if i == r or d[i] == 0:
                continue
            f = d[i]
            bi = self.binv[i]
            self.binv[i] = [bi[k] - f * row_r[k] for k in range(self.m)]
            self.xb[i] -= f * xr
        self.binv[r] = row_r
        self.xb[r] = xr
        self.basis[r] = j
        self.pivots += 1

    def run(self, cost: Sequence[Fraction], allowed: int) -> None:
        """Bland's rule over columns ``0..allowed-1``."""
        while True:
            y = self.duals(cost)
            in_basis = set(self.basis)
            entering = None
            for j in range(allowed):
                if j in in_basis:
                    continue
                rc = cost[j] - sum((y[r] * v for r, v in self.cols[j].items()), ZERO)
                if rc < 0:
                    entering = j
                    break
            if entering is None:
                return
            d = self.column(entering)
            best, leave = None, None
            for i in range(self.m):
                if d[i] > 0:
                    ratio = self.xb[i] / d[i]
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                raise ExactUnbounded("objective is unbounded below")
            self.pivot(leave, entering, d)


def solve_exact(columns: Sequence[dict[int, Fraction]], b: Sequence[Fraction],
                cost: Sequence[Fraction], hint: Sequence[int] | None = None) -> ExactSolution:
    """
    Exact optimum of ``min cost.x`` subject to ``A x = b``, ``x >= 0``.

    Rows with negative right-hand side are negated first.  ``hint`` lists
    columns expected in an optimal basis (for instance from a floating-point
    solver); they are moved to the front of the pricing order.  Bland's rule
    terminates under any fixed column order, so the hint changes only the
    pivot path, never the optimum.  Raises :class:`ExactInfeasible` or
    :class:`ExactUnbounded`.
    """
    b = [Fraction(v) for v in b]
    columns = [{r: Fraction(v) for r, v in c.items()} for c in columns]
    for r, v in enumerate(b):
        if v < 0:
            b[r] = -v
            for c in columns:
                if r in c:
                    c[r] = -c[r]
    cost = [Fraction(c) for c in cost]
    order = list(range(len(columns)))
    if hint is not None:
        first = list(dict.fromkeys(int(j) for j in hint))
        chosen = set(first)
        order = first + [j for j in order if j not in chosen]
        columns = [columns[j] for j in order]
        cost = [cost[j] for j in order]
    sol = _solve(columns, b, cost)
    return ExactSolution(sol.value, {order[j]: v for j, v in sol.x.items()}, sol.pivots)


def _solve(columns, b, cost) -> ExactSolution:
    sx = _Simplex(columns, b)
    n, m = sx.n_real, sx.m
    phase1 = [ZERO] * n + [ONE] * m
    sx.run(phase1, n)
    if sum((sx.xb[i] for i in range(m) if sx.basis[i] >= n), ZERO) != 0:
        raise ExactInfeasible("equality system has no nonnegative solution")
    # drive zero-level artificials out; rows where none can leave are redundant
    for i in range(m):
        if sx.basis[i] < n:
            continue
        in_basis = set(sx.basis)
        row = sx.binv[i]
        for j in range(n):
            if j in in_basis:
                continue
            if sum((row[r] * v for r, v in sx.cols[j].items()), ZERO) != 0:
                sx.pivot(i, j, sx.column(j))
                break
    cost = cost + [ZERO] * m
    sx.run(cost, n)
    x = {sx.basis[i]: sx.xb[i] for i in range(m) if sx.basis[i] < n and sx.xb[i] != 0}
    value = sum((cost[j] * v for j, v in x.items()), ZERO)
    return ExactSolution(value, x, sx.pivots)
