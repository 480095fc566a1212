"""Exact two-phase tableau simplex over rationals with Bland's anti-cycling rule.

minimize c.x  subject to  rows, x >= 0
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


@dataclass
class LPResult:
    status: str                      # optimal | infeasible | unbounded
    value: Optional[Fraction] = None
    x: dict = field(default_factory=dict)
    conflict: set = field(default_factory=set)  # row indices certifying infeasibility
    pivots: int = 0


class _Tableau:
    def __init__(self, nrows, ncols):
        self.a = [[Fraction(0)] * ncols for _ in range(nrows)]
        self.b = [Fraction(0)] * nrows
        self.basis = [-1] * nrows
        self.pivots = 0

    def pivot(self, r, c):
        self.pivots += 1
        row = self.a[r]
        pv = row[c]
        if pv != 1:
            inv = 1 / pv
            self.a[r] = row = [x * inv for x in row]
            self.b[r] *= inv
        nz = [j for j, x in enumerate(row) if x != 0]
        for i in range(len(self.a)):
            if i == r:
                continue
            f = self.a[i][c]
            if f == 0:
                continue
            ai = self.a[i]
            for j in nz:
                ai[j] -= f * row[j]
            self.b[i] -= f * self.b[r]
        self.basis[r] = c

    def reduced(self, cost):
        """Reduced costs and objective value for cost vector under the current basis."""
        rc = list(cost)
        val = Fraction(0)
        for i, bv in enumerate(self.basis):
            cb = cost[bv]
            if cb == 0:
                continue
            ai = self.a[i]
            for j, x in enumerate(ai):
                if x != 0:
                    rc[j] -= cb * x
            val += cb * self.b[i]
        return rc, val

    def optimize(self, cost, allowed):
        """Bland's rule; returns 'optimal' or 'unbounded'."""
        while True:
            rc, _ = self.reduced(cost)
            enter = next((j for j in allowed if rc[j] < 0), None)
            if enter is None:
                return "optimal"
            best = None
            for i, row in enumerate(self.a):
                x = row[enter]
                if x > 0:
                    ratio = self.b[i] / x
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self.pivot(best[1], enter)


def solve_lp(objective: dict, rows: list, variables=None) -> LPResult:
    """rows: list of (coeffs: dict var -> number, op in {'<=', '>=', '='}, rhs)."""
    names = list(variables) if variables is not None else []
    seen = set(names)
    for coeffs, _, _ in rows:
        for v in coeffs:
            if v not in seen:
                seen.add(v)
                names.append(v)
    for v in objective:
        if v not in seen:
            seen.add(v)
            names.append(v)
    col = {v: j for j, v in enumerate(names)}
    n = len(names)

    norm = []
    for coeffs, op, rhs in rows:
        coeffs = {v: Fraction(c) for v, c in coeffs.items() if c != 0}
        rhs = Fraction(rhs)
        if rhs < 0:
            coeffs = {v: -c for v, c in coeffs.items()}
            rhs = -rhs
            op = {"<=": ">=", ">=": "<=", "=": "="}[op]
        norm.append((coeffs, op, rhs))

    # columns: structural | slack/surplus | artificial
    nslack = sum(1 for _, op, _ in norm if op != "=")
    nart = sum(1 for _, op, _ in norm if op != "<=")
    ncols = n + nslack + nart
    t = _Tableau(len(norm), ncols)
    slack_of, art_of = {}, {}
    s, a = n, n + nslack
    for i, (coeffs, op, rhs) in enumerate(norm):
        for v, c in coeffs.items():
            t.a[i][col[v]] = c
        t.b[i] = rhs
        if op == "<=":
            t.a[i][s] = Fraction(1)
            slack_of[i] = s
            t.basis[i] = s
            s += 1
        else:
            if op == ">=":
                t.a[i][s] = Fraction(-1)
                slack_of[i] = s
                s += 1
            t.a[i][a] = Fraction(1)
            art_of[i] = a
            t.basis[i] = a
            a += 1

    arts = set(art_of.values())
    if arts:
        cost1 = [Fraction(0)] * ncols
        for j in arts:
            cost1[j] = Fraction(1)
        t.optimize(cost1, range(ncols))
        rc, val = t.reduced(cost1)
        if val > 0:
            conflict = set()
            for i in range(len(norm)):
                if i in art_of:
                    y = 1 - rc[art_of[i]]
                else:
                    y = -rc[slack_of[i]]
                if y != 0:
                    conflict.add(i)
            return LPResult("infeasible", conflict=conflict, pivots=t.pivots)
        # drive zero-valued artificials out of the basis
        keep = []
        for i in range(len(t.a)):
            if t.basis[i] in arts:
                j = next((j for j in range(n + nslack) if t.a[i][j] != 0), None)
                if j is None:
                    continue  # redundant row
                t.pivot(i, j)
            keep.append(i)
        t.a = [t.a[i] for i in keep]
        t.b = [t.b[i] for i in keep]
        t.basis = [t.basis[i] for i in keep]

    cost2 = [Fraction(0)] * ncols
    for v, c in objective.items():
        cost2[col[v]] = Fraction(c)
    status = t.optimize(cost2, range(n + nslack))
    if status == "unbounded":
        return LPResult("unbounded", pivots=t.pivots)
    x = {v: Fraction(0) for v in names}
    for i, bv in enumerate(t.basis):
        if bv < n:
            x[names[bv]] = t.b[i]
    value = sum((Fraction(c) * x[v] for v, c in objective.items()), Fraction(0))
    return LPResult("optimal", value, x, pivots=t.pivots)
