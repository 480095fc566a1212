"""Potential and mode inference: starred annotations become LP variables, the
checker runs in constraint-emission mode, and the optimum is substituted back."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import (
    Get, GetPot, Mode, ModeVar, NomError, Pay, PayPot, PotVar, ProcDecl, SourceProgram, map_nodes,
    walk,
)
from .linear import LinExpr
from .parser import load_signature
from .simplex import solve_lp
from .typechecker import Checker, Constraint, ModeSolver, SymbolicEmitter, shared_types_in_use


class Infeasible(NomError):
    code = "Infeasible"

    def __init__(self, rows: list, span=None):
        lines = "; ".join(f"{r.why} at {r.span}" for r in rows[:6])
        more = f" (+{len(rows) - 6} more)" if len(rows) > 6 else ""
        super().__init__(f"no potential assignment satisfies: {lines}{more}",
                         rows[0].span if rows else span)
        self.rows = rows


class NonIntegral(NomError):
    code = "NonIntegral"


@dataclass
class ConstraintSet:
    rows: list = field(default_factory=list)       # Constraint: expr (= | >=) 0
    site_vars: list = field(default_factory=list)  # annotation sites, weight 1 in the objective
    fresh_vars: list = field(default_factory=list)
    mode_assign: dict = field(default_factory=dict)

    def variables(self) -> list:
        return list(self.site_vars) + list(self.fresh_vars)


@dataclass
class Solution:
    pot_assign: dict = field(default_factory=dict)   # var id -> Fraction
    mode_assign: dict = field(default_factory=dict)  # mode var id -> Mode
    objective: Fraction = Fraction(0)
    pivots: int = 0


# ---------------------------------------------------------------- elaboration

def elaborate_unknowns(p: SourceProgram) -> SourceProgram:
    """Give every `*` and every missing mode a program-wide unique variable."""
    counts = {"pot": 0, "mode": 0}

    def fresh(n):
        if isinstance(n, PotVar):
            counts["pot"] += 1
            return PotVar(f"p{counts['pot']}")
        if isinstance(n, ModeVar):
            counts["mode"] += 1
            return ModeVar(f"m{counts['mode']}")
        return n
    return SourceProgram(map_nodes(p.decls, fresh), p.file)


def count_unknowns(p: SourceProgram) -> tuple:
    pots = sum(1 for n in walk(p.decls) if isinstance(n, PotVar))
    modes = sum(1 for n in walk(p.decls) if isinstance(n, ModeVar))
    return pots, modes


def star_program(p: SourceProgram) -> SourceProgram:
    """Replace every pay/get/type-level/turnstile potential with `*`; work stays as written."""
    star = PotVar("*")

    def go(n):
        if isinstance(n, (PayPot, GetPot, Pay, Get)):
            return dataclasses.replace(n, pot=star)
        if isinstance(n, ProcDecl):
            return dataclasses.replace(n, pot=star)
        return n
    return elaborate_unknowns(SourceProgram(map_nodes(p.decls, go), p.file))


def apply_solution(p: SourceProgram, s: Solution) -> SourceProgram:
    def go(n):
        if isinstance(n, PotVar):
            v = s.pot_assign.get(n.id, Fraction(0))
            if Fraction(v).denominator != 1:
                raise NonIntegral(f"non-integral potential {v} for {n.id}")
            return int(v)
        if isinstance(n, ModeVar):
            return s.mode_assign[n.id]
        return n
    return SourceProgram(map_nodes(p.decls, go), p.file)


# ---------------------------------------------------------------- constraint generation

def _mode_vars(p) -> list:
    out, seen = [], set()
    for n in walk(p):
        if isinstance(n, ModeVar) and n not in seen:
            seen.add(n)
            out.append(n)
    return out


def infer_modes(p: SourceProgram) -> tuple:
    """Unify mode variables over a permissive checking pass; returns (program, assignment)."""
    mvars = _mode_vars(p.decls)
    if not mvars:
        return p, {}
    sig = load_signature(p)
    solver = ModeSolver()
    for d in sig.proc_defs.values():
        Checker(sig, SymbolicEmitter(), modes=solver).decl(d)
    assign = solver.resolve(mvars)

    def go(n):
        return assign[n.id] if isinstance(n, ModeVar) else n
    return SourceProgram(map_nodes(p.decls, go), p.file), assign


def generate_constraints(p: SourceProgram) -> tuple:
    """Returns (mode-resolved program, ConstraintSet). Structural errors raise at once."""
    p, massign = infer_modes(p)
    sig = load_signature(p)
    em = SymbolicEmitter()
    c = Checker(sig, em)
    for t, span in shared_types_in_use(sig):
        c.esync(t, span)
    for f in sig.fun_defs.values():
        c.fundecl(f)
    for d in sig.proc_defs.values():
        c.decl(d)
    sites, seen = [], set()
    for n in walk(p.decls):
        if isinstance(n, PotVar) and n.id not in seen:
            seen.add(n.id)
            sites.append(n.id)
    return p, ConstraintSet(em.rows, sites, em.fresh_vars, massign)


# ---------------------------------------------------------------- solving

class _Presolved:
    def __init__(self):
        self.rows = {}    # id -> [expr, op, prov]
        self.index = {}   # var -> set of row ids
        self.defs = []    # (var, LinExpr) in elimination order
        self.next = 0

    def add(self, expr: LinExpr, op: str, prov: frozenset):
        rid = self.next
        self.next += 1
        self.rows[rid] = [expr, op, prov]
        for v in expr.coeffs:
            self.index.setdefault(v, set()).add(rid)
        return rid

    def remove(self, rid):
        expr, _, _ = self.rows.pop(rid)
        for v in expr.coeffs:
            self.index[v].discard(rid)

    def substitute(self, var, defn: LinExpr):
        for rid in list(self.index.get(var, ())):
            expr, op, prov = self.rows[rid]
            c = expr.coeffs[var]
            new = expr + (defn - LinExpr.var(var)).scale(c)
            self.remove(rid)
            self.rows[rid] = [new, op, prov]
            for v in new.coeffs:
                self.index.setdefault(v, set()).add(rid)


def solve(cs: ConstraintSet) -> Solution:
    fresh = set(cs.fresh_vars)
    pre = _Presolved()
    for i, r in enumerate(cs.rows):
        pre.add(LinExpr.of(r.expr), r.op, frozenset([i]))
    objective = LinExpr({v: 1 for v in cs.site_vars})
    infeasible_prov = None

    # eliminate variables through equalities
    progress = True
    while progress and infeasible_prov is None:
        progress = False
        for rid in sorted(pre.rows):
            if rid not in pre.rows:
                continue
            expr, op, prov = pre.rows[rid]
            if op != "=":
                continue
            if expr.is_const():
                pre.remove(rid)
                if expr.const != 0:
                    infeasible_prov = prov
                    break
                continue
            cands = sorted(expr.coeffs, key=lambda v: (v not in fresh, len(pre.index.get(v, ())), v))
            var = cands[0]
            c = expr.coeffs[var]
            defn = (LinExpr.var(var) - expr.scale(1 / c))
            pre.remove(rid)
            pre.substitute(var, defn)
            if var in objective.coeffs:
                oc = objective.coeffs[var]
                objective = objective + (defn - LinExpr.var(var)).scale(oc)
            pre.defs.append((var, defn))
            pre.add(defn, ">=", prov)
            progress = True

    # remaining inequalities: drop trivially true rows, keep the tightest duplicate
    best = {}
    if infeasible_prov is None:
        for rid, (expr, op, prov) in pre.rows.items():
            if expr.is_const():
                if expr.const < 0 or (op == "=" and expr.const != 0):
                    infeasible_prov = prov
                    break
                continue
            if op == ">=" and expr.const >= 0 and all(c > 0 for c in expr.coeffs.values()):
                continue
            key = (op, frozenset(expr.coeffs.items()))
            if op == "=" or key not in best or expr.const < best[key][0].const:
                best[key] = (expr, prov)
    if infeasible_prov is not None:
        raise Infeasible([cs.rows[i] for i in sorted(infeasible_prov)])

    lp_rows, provs = [], []
    for (op, _), (expr, prov) in best.items():
        lp_rows.append((dict(expr.coeffs), op, -expr.const))
        provs.append(prov)
    obj = dict(objective.coeffs)
    res = solve_lp(obj, lp_rows)
    if res.status == "infeasible":
        prov = set()
        for i in res.conflict:
            prov |= provs[i]
        raise Infeasible([cs.rows[i] for i in sorted(prov)])
    if res.status == "unbounded":
        raise Infeasible([], None)

    values = {v: Fraction(0) for v in cs.variables()}
    values.update(res.x)
    for var, defn in reversed(pre.defs):
        values[var] = defn.evaluate(values)
    for v in cs.site_vars:
        if values[v].denominator != 1:
            raise NonIntegral(f"optimum assigns non-integral potential {values[v]} to {v}")
    total = sum((values[v] for v in cs.site_vars), Fraction(0))
    return Solution(values, dict(cs.mode_assign), total, res.pivots)


# ---------------------------------------------------------------- pipeline

@dataclass
class InferenceResult:
    program: SourceProgram
    constraints: ConstraintSet
    solution: Solution
    elapsed: float


def infer(p: SourceProgram) -> InferenceResult:
    t0 = time.perf_counter()
    ep = elaborate_unknowns(p)
    mp, cs = generate_constraints(ep)
    sol = solve(cs)
    out = apply_solution(mp, sol)
    return InferenceResult(out, cs, sol, time.perf_counter() - t0)


def dump_lp(cs: ConstraintSet) -> str:
    """One row per line with a `#` comment naming the source location and rule."""
    lines = ["min: " + (" + ".join(cs.site_vars) if cs.site_vars else "0")]
    for i, r in enumerate(cs.rows):
        lines.append(f"c{i}: {r.expr} {r.op} 0  # {r.span} {r.why}")
    lines.append("nonneg: " + " ".join(cs.variables()))
    return "\n".join(lines) + "\n"
