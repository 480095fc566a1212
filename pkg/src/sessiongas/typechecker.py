"""Bidirectional checker for processes and functional terms with exact potential accounting.

The checker is parameterized by a potential emitter (concrete arithmetic or
constraint recording) and an optional mode solver (unification of mode
variables). Inference runs the same rules with the symbolic variants."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    Accept, Acquire, Annot, App, Arrow, Base, BinOp, BOOL, BoolLit, Case, CaseE, ChanParam,
    ChanRef, Close, Cons, Detach, Down, Expr, External, FunDecl, FunParam, Fst, Fwd, Get, GetPot,
    If, IfE, INT, Inl, Inr, IntLit, Internal, KIND_MODE, Lam, Let, LetE, ListT, Lolli, Match,
    Mode, ModeVar, MonadT, Named, Nil, NomError, Not, One, Pair, Pay, PayPot, ProcDecl, ProcVal,
    ProdT, RecvChan, RecvVal, RecvValue, Release, SendChan, SendLabel, SendVal, SendValue,
    Signature, Snd, Spawn, SumT, TailCall, Tensor, Tick, Up, UnknownName, Var, Wait, Work,
    unfold, walk,
)
from .linear import LinExpr


# ---------------------------------------------------------------- errors

class LinearityViolation(NomError):
    code = "LinearityViolation"

    def __init__(self, chan: str, message: str, span=None):
        super().__init__(message, span)
        self.chan = chan


class PotentialMismatch(NomError):
    code = "PotentialMismatch"

    def __init__(self, expected, actual, span=None, why: str = ""):
        msg = f"{why}: expected potential {expected}, found {actual}" if why else \
            f"expected potential {expected}, found {actual}"
        super().__init__(msg, span)
        self.expected = expected
        self.actual = actual


class ModeViolation(NomError):
    code = "ModeViolation"

    def __init__(self, message: str, span=None, clause: str = ""):
        super().__init__(message, span)
        self.clause = clause


class ProtocolMismatch(NomError):
    code = "ProtocolMismatch"

    def __init__(self, expected: str, form: str, span=None):
        super().__init__(f"expected {expected}, found {form}", span)
        self.expected = expected
        self.form = form


class TypeMismatch(NomError):
    code = "TypeMismatch"


class NotEquiSync(NomError):
    code = "NotEquiSync"

    def __init__(self, type_name: str, path: list, span=None):
        where = ".".join(path) if path else "<root>"
        super().__init__(f"type {type_name} is not equi-synchronizing along {where}", span)
        self.path = list(path)


class NotPure(NomError):
    code = "NotPure"

    def __init__(self, chan: str, span=None):
        super().__init__(f"linear context is not purely linear: ${chan} is not at mode R", span)
        self.chan = chan


# ---------------------------------------------------------------- potential emitters

class ConcreteEmitter:
    symbolic = False

    def eq(self, actual: LinExpr, expected: LinExpr, span, why: str):
        a, e = LinExpr.of(actual), LinExpr.of(expected)
        if not (a.is_const() and e.is_const()):
            raise PotentialMismatch(e, a, span, why + " (unresolved potential variable)")
        if a.const != e.const:
            raise PotentialMismatch(e.const, a.const, span, why)

    def spend(self, q: LinExpr, r: LinExpr, span, why: str) -> LinExpr:
        q, r = LinExpr.of(q), LinExpr.of(r)
        if not (q.is_const() and r.is_const()):
            raise PotentialMismatch(r, q, span, why + " (unresolved potential variable)")
        if q.const < r.const:
            raise PotentialMismatch(f">= {r.const}", q.const, span, why)
        return q - r


@dataclass
class Constraint:
    expr: LinExpr  # expr (op) 0
    op: str        # "=" or ">="
    span: object = None
    why: str = ""


class SymbolicEmitter:
    """Records `=` rows; fresh intermediate variables are implicitly nonnegative."""
    symbolic = True

    def __init__(self, prefix: str = "t"):
        self.rows: list[Constraint] = []
        self.prefix = prefix
        self.n = 0
        self.fresh_vars: list[str] = []

    def fresh(self) -> LinExpr:
        self.n += 1
        name = f"{self.prefix}{self.n}"
        self.fresh_vars.append(name)
        return LinExpr.var(name)

    def eq(self, actual, expected, span, why):
        a, e = LinExpr.of(actual), LinExpr.of(expected)
        d = a - e
        if d.is_const():
            if d.const != 0:
                raise PotentialMismatch(e.const, a.const, span, why)
            return
        self.rows.append(Constraint(d, "=", span, why))

    def spend(self, q, r, span, why):
        q, r = LinExpr.of(q), LinExpr.of(r)
        if q.is_const() and r.is_const():
            if q.const < r.const:
                raise PotentialMismatch(f">= {r.const}", q.const, span, why)
            return q - r
        nq = self.fresh()
        self.eq(q, nq + r, span, why)
        return nq


# ---------------------------------------------------------------- mode solver

class ModeSolver:
    """Union-find over mode variables with fixed values and domain restrictions."""

    PREFERENCE = (Mode.R, Mode.L, Mode.T, Mode.S)

    def __init__(self):
        self.parent: dict = {}
        self.value: dict = {}
        self.domain: dict = {}
        self.count = 0

    def _root(self, v: ModeVar):
        self.parent.setdefault(v, v)
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def find(self, m):
        if isinstance(m, Mode):
            return m
        r = self._root(m)
        return self.value.get(r, r)

    def unify(self, a, b, span, what):
        self.count += 1
        a, b = self.find(a), self.find(b)
        if isinstance(a, Mode) and isinstance(b, Mode):
            if a != b:
                raise ModeViolation(f"{what}: mode {a} conflicts with mode {b}", span)
            return
        if isinstance(a, Mode):
            a, b = b, a
        if isinstance(b, Mode):
            dom = self.domain.get(a)
            if dom is not None and b not in dom:
                raise ModeViolation(f"{what}: mode {b} not allowed here", span)
            self.value[a] = b
            return
        if a == b:
            return
        self.parent[a] = b
        if a in self.domain:
            dom = self.domain.pop(a)
            self.domain[b] = dom & self.domain.get(b, dom)
            if not self.domain[b]:
                raise ModeViolation(f"{what}: no mode satisfies all uses", span)

    def restrict(self, m, allowed, span, what):
        self.count += 1
        f = self.find(m)
        if isinstance(f, Mode):
            if f not in allowed:
                raise ModeViolation(f"{what}: mode {f} not in {{{', '.join(map(str, allowed))}}}", span)
            return
        dom = self.domain.get(f, set(Mode)) & set(allowed)
        if not dom:
            raise ModeViolation(f"{what}: no mode satisfies all uses", span)
        self.domain[f] = dom

    def resolve(self, variables) -> dict:
        out = {}
        for v in variables:
            f = self.find(v)
            if isinstance(f, Mode):
                out[v.id] = f
                continue
            dom = self.domain.get(f, set(Mode))
            choice = next(m for m in self.PREFERENCE if m in dom)
            self.value[f] = choice
            out[v.id] = choice
        return out


# ---------------------------------------------------------------- reports

@dataclass
class CheckReport:
    name: str
    error: Optional[NomError] = None
    trace: list = field(default_factory=list)  # (line, rule, residual potential)
    rules: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None

    def render(self, file: str = "<input>") -> str:
        if self.ok:
            return f"{self.name}: ok"
        return self.error.render(file)


@dataclass
class ProgramReport:
    reports: dict = field(default_factory=dict)  # name -> CheckReport
    esync_errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.esync_errors and all(r.ok for r in self.reports.values())

    def errors(self) -> list:
        return list(self.esync_errors) + [r.error for r in self.reports.values() if not r.ok]


# ---------------------------------------------------------------- helpers

def _annots(t) -> list:
    """Stored-potential annotations of a functional type, in a fixed order."""
    if isinstance(t, ListT):
        return [t.pot] + _annots(t.elem)
    if isinstance(t, (SumT, ProdT)):
        return _annots(t.left) + _annots(t.right)
    return []


def _reannot(t, pots: list):
    it = iter(pots)

    def go(t):
        if isinstance(t, ListT):
            p = next(it)
            return dataclasses.replace(t, pot=p, elem=go(t.elem))
        if isinstance(t, (SumT, ProdT)):
            return dataclasses.replace(t, left=go(t.left), right=go(t.right))
        return t
    return go(t)


def _zeroed(t):
    return _reannot(t, [0] * len(_annots(t)))


def _short(t) -> str:
    from .parser import pp_stype
    s = " ".join(pp_stype(t).split())
    return s if len(s) <= 60 else s[:57] + "..."


def _form(p) -> str:
    return {
        SendLabel: "label send", Case: "case", SendChan: "channel send", RecvChan: "channel receive",
        SendValue: "value send", RecvValue: "value receive", Close: "close", Wait: "wait",
        Fwd: "forward", Spawn: "spawn", TailCall: "tail call", Work: "work", Pay: "pay", Get: "get",
        Acquire: "acquire", Accept: "accept", Release: "release", Detach: "detach",
    }.get(type(p), type(p).__name__)


LEGAL_SPAWNS = {
    Mode.R: {Mode.R, Mode.S, Mode.L, Mode.T},
    Mode.S: {Mode.S, Mode.L, Mode.T},
    Mode.T: {Mode.L, Mode.T},
}


@dataclass
class Ctx:
    psi: dict
    gamma: dict
    delta: dict          # name -> (type, mode)
    q: LinExpr
    off: tuple           # (name, type, mode)
    consumed: set = field(default_factory=set)

    def copy(self) -> "Ctx":
        return Ctx(dict(self.psi), dict(self.gamma), dict(self.delta), self.q, self.off,
                   set(self.consumed))


# ---------------------------------------------------------------- checker

class Checker:
    def __init__(self, sig: Signature, emitter=None, modes: Optional[ModeSolver] = None,
                 messages: bool = False, record: bool = False):
        self.sig = sig
        self.em = emitter or ConcreteEmitter()
        self.modes = modes
        self.messages = messages  # message objects may forward at any mode
        self.record = record
        self.rules = 0
        self.trace: list = []
        self._esync_ok: set = set()

    # -- modes
    def mval(self, m):
        if isinstance(m, Mode):
            return m
        if self.modes is not None:
            f = self.modes.find(m)
            return f if isinstance(f, Mode) else None
        raise ModeViolation(f"unresolved mode variable {m}")

    def meq(self, a, b, span, what):
        if self.modes is not None:
            self.modes.unify(a, b, span, what)
            return
        if isinstance(a, ModeVar) or isinstance(b, ModeVar):
            raise ModeViolation(f"{what}: unresolved mode variable", span)
        if a != b:
            raise ModeViolation(f"{what}: expected mode {b}, found {a}", span)

    def min_(self, m, allowed, span, what, clause=""):
        if self.modes is not None:
            self.modes.restrict(m, allowed, span, what)
            return
        if isinstance(m, ModeVar):
            raise ModeViolation(f"{what}: unresolved mode variable", span, clause)
        if m not in allowed:
            names = ", ".join(sorted(str(x) for x in allowed))
            raise ModeViolation(f"{what}: mode {m} not in {{{names}}}", span, clause)

    # -- types
    def unf(self, t):
        return unfold(self.sig, t)

    def type_eq(self, a, b, span, what) -> None:
        if not self._teq(a, b, set(), span):
            raise ProtocolMismatch(_short(b), f"{what} of type {_short(a)}", span)

    def _teq(self, a, b, assumed, span) -> bool:
        if a is b:
            return True
        if isinstance(a, Named) and isinstance(b, Named) and a.name == b.name:
            return True
        if isinstance(a, Named) or isinstance(b, Named):
            key = (a, b)
            if key in assumed:
                return True
            assumed.add(key)
            return self._teq(self.unf(a), self.unf(b), assumed, span)
        if type(a) is not type(b):
            return False
        if isinstance(a, One):
            return True
        if isinstance(a, (Internal, External)):
            if [l for l, _ in a.branches] != [l for l, _ in b.branches]:
                if sorted(l for l, _ in a.branches) != sorted(l for l, _ in b.branches):
                    return False
            bb = dict(b.branches)
            return all(self._teq(x, bb[l], assumed, span) for l, x in a.branches)
        if isinstance(a, (Tensor, Lolli)):
            if not self._meq_soft(a.mode, b.mode, span):
                return False
            return self._teq(a.carried, b.carried, assumed, span) and \
                self._teq(a.cont, b.cont, assumed, span)
        if isinstance(a, (SendVal, RecvVal)):
            return self._feq(a.vtype, b.vtype, span) and self._teq(a.cont, b.cont, assumed, span)
        if isinstance(a, (PayPot, GetPot)):
            if not self._peq_soft(a.pot, b.pot, span):
                return False
            return self._teq(a.cont, b.cont, assumed, span)
        if isinstance(a, (Up, Down)):
            return self._teq(a.cont, b.cont, assumed, span)
        return False

    def _peq_soft(self, a, b, span) -> bool:
        la, lb = LinExpr.of(a), LinExpr.of(b)
        if la.is_const() and lb.is_const():
            return la.const == lb.const
        if not self.em.symbolic:
            return False
        self.em.eq(la, lb, span, "type annotation")
        return True

    def _meq_soft(self, a, b, span) -> bool:
        if self.modes is not None:
            self.modes.unify(a, b, span, "carried channel mode")
            return True
        return a == b

    def _feq(self, a, b, span) -> bool:
        if type(a) is not type(b):
            return False
        if isinstance(a, Base):
            return a.name == b.name
        if isinstance(a, Arrow):
            return (self._feq(a.arg, b.arg, span) and self._feq(a.res, b.res, span)
                    and self._peq_soft(a.call_pot, b.call_pot, span)
                    and self._peq_soft(a.ret_pot, b.ret_pot, span))
        if isinstance(a, (SumT, ProdT)):
            return self._feq(a.left, b.left, span) and self._feq(a.right, b.right, span)
        if isinstance(a, ListT):
            return self._peq_soft(a.pot, b.pot, span) and self._feq(a.elem, b.elem, span)
        if isinstance(a, MonadT):
            if len(a.shared) != len(b.shared) or len(a.linear) != len(b.linear):
                return False
            if not self._meq_soft(a.mode, b.mode, span):
                return False
            if not self._teq(a.offered, b.offered, set(), span):
                return False
            for x, y in zip(a.shared, b.shared):
                if not self._teq(x, y, set(), span):
                    return False
            for (x, mx), (y, my) in zip(a.linear, b.linear):
                if not (self._meq_soft(mx, my, span) and self._teq(x, y, set(), span)):
                    return False
            return True
        return False

    def ftype_eq(self, a, b, span, what="expression"):
        if not self._feq(a, b, span):
            from .parser import pp_ftype
            raise TypeMismatch(f"{what}: expected type {pp_ftype(b)}, found {pp_ftype(a)}", span)

    def potfree(self, t, span, what):
        for a in _annots(t):
            self.em.eq(LinExpr.of(a), LinExpr.of(0), span,
                       f"{what} must not carry stored potential in a process context")

    # -- grammar and esync
    def grammar(self, t, mode, span, what):
        m = self.mval(mode)
        if m is None:
            return
        seen = set()

        def visit(t, m):
            key = (t.name, m) if isinstance(t, Named) else None
            if key is not None:
                if key in seen:
                    return
                seen.add(key)
                t = self.unf(t)
            if m == Mode.S and not isinstance(t, Up):
                raise ModeViolation(f"{what}: a shared type must start with /\\", span, "S")
            if isinstance(t, Up):
                if m != Mode.S:
                    raise ModeViolation(f"{what}: /\\ only allowed at mode S, found {m}", span, str(m))
                visit(t.cont, Mode.L)
            elif isinstance(t, Down):
                if m != Mode.L:
                    raise ModeViolation(f"{what}: \\/ only allowed at mode L, found {m}", span, str(m))
                visit(t.cont, Mode.S)
            elif isinstance(t, One):
                if m == Mode.L:
                    raise ModeViolation(f"{what}: a linear-shared phase cannot terminate", span, "L")
            elif isinstance(t, (Internal, External)):
                for _, b in t.branches:
                    visit(b, m)
            elif isinstance(t, (Tensor, Lolli)):
                cm = self.mval(t.mode)
                if cm is not None:
                    visit(t.carried, cm)
                visit(t.cont, m)
            else:
                visit(t.cont, m)
        visit(t, m)

    def esync(self, t, span=None):
        root = t
        key = root.name if isinstance(root, Named) else None
        if key is not None and key in self._esync_ok:
            return
        top = self.unf(t)
        if not isinstance(top, Up):
            raise NotEquiSync(_short(t), [], span)
        seen = set()

        def visit(t, path):
            if isinstance(t, Named):
                if t.name in seen:
                    return
                seen.add(t.name)
                t = self.unf(t)
            if isinstance(t, Down):
                if not self._teq(t.cont, root, set(), span):
                    raise NotEquiSync(_short(root), path, span)
            elif isinstance(t, (Internal, External)):
                for l, b in t.branches:
                    visit(b, path + [l])
            elif isinstance(t, One) or isinstance(t, Up):
                raise NotEquiSync(_short(root), path, span)
            else:
                visit(t.cont, path)
        visit(top.cont, [])
        if key is not None:
            self._esync_ok.add(key)

    def purelin(self, delta: dict, span):
        for name, (_, m) in delta.items():
            if self.modes is not None:
                self.modes.unify(m, Mode.R, span, f"${name} in a purely linear context")
            elif m != Mode.R:
                raise NotPure(name, span)

    def invariants(self, ctx: Ctx, span):
        m = self.mval(ctx.off[2])
        if m == Mode.R:
            if ctx.gamma:
                raise ModeViolation("a process at mode R must have an empty shared context",
                                    span, "R(i)")
            for name, (_, cm) in ctx.delta.items():
                self._need_r(cm, name, span, "R(ii)")
        elif m == Mode.S:
            for name, (_, cm) in ctx.delta.items():
                self._need_r(cm, name, span, "S")

    def _need_r(self, cm, name, span, clause):
        if self.modes is not None:
            self.modes.unify(cm, Mode.R, span, f"${name} in the context of a mode-{clause[0]} process")
        elif cm != Mode.R:
            raise ModeViolation(f"${name} has mode {cm} but the offering process requires mode R",
                                span, clause)

    # -- channel lookup
    def chan(self, ctx: Ctx, c: ChanRef, span):
        if c.name == ctx.off[0]:
            self.meq(c.mode, ctx.off[2], c.span or span, f"channel ${c.name}")
            return "off", ctx.off[1], ctx.off[2]
        if c.name in ctx.delta:
            t, m = ctx.delta[c.name]
            self.meq(c.mode, m, c.span or span, f"channel ${c.name}")
            return "lin", t, m
        if c.name in ctx.gamma:
            self.meq(c.mode, Mode.S, c.span or span, f"channel #{c.name}")
            return "shr", ctx.gamma[c.name], Mode.S
        if c.name in ctx.consumed:
            raise LinearityViolation(c.name, f"linear channel ${c.name} used after it was consumed",
                                     c.span or span)
        raise UnknownName(f"unbound channel '{c.name}'", c.span or span)

    def take(self, ctx: Ctx, name: str):
        del ctx.delta[name]
        ctx.consumed.add(name)

    def bind_lin(self, ctx: Ctx, c: ChanRef, t, m, span):
        if c.name in ctx.delta:
            raise LinearityViolation(c.name, f"rebinding ${c.name} would drop a live linear channel",
                                     c.span or span)
        if c.name == ctx.off[0]:
            raise LinearityViolation(c.name, f"rebinding the offered channel ${c.name}",
                                     c.span or span)
        ctx.delta[c.name] = (t, m)
        ctx.consumed.discard(c.name)

    def leftover(self, ctx: Ctx, span, what):
        if ctx.delta:
            name = next(iter(ctx.delta))
            raise LinearityViolation(name, f"linear channel ${name} is never consumed before {what}",
                                     span)

    def note(self, p, ctx, rule):
        self.rules += 1
        if self.record:
            line = p.span.line if getattr(p, "span", None) else 0
            self.trace.append((line, rule, str(ctx.q)))

    # -- processes
    def proc(self, ctx: Ctx, p):
        em = self.em
        while True:
            span = getattr(p, "span", None)
            self.note(p, ctx, _form(p))
            self.invariants(ctx, span)
            name, A, m = ctx.off

            if isinstance(p, SendLabel):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = Internal if kind == "off" else External
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                b = u.branch(p.label)
                if b is None:
                    raise ProtocolMismatch(_short(t), f"label '{p.label}'", span)
                if kind == "off":
                    ctx.off = (name, b, m)
                else:
                    ctx.delta[p.chan.name] = (b, cm)
                p = p.cont

            elif isinstance(p, Case):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = External if kind == "off" else Internal
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                labels = [l for l, _ in u.branches]
                got = [l for l, _ in p.branches]
                missing = [l for l in labels if l not in got]
                extra = [l for l in got if l not in labels]
                if missing or extra:
                    raise ProtocolMismatch(f"branches {{{', '.join(labels)}}}",
                                           f"branches {{{', '.join(got)}}}", span)
                for l, body in p.branches:
                    sub = ctx.copy()
                    if kind == "off":
                        sub.off = (name, u.branch(l), m)
                    else:
                        sub.delta[p.chan.name] = (u.branch(l), cm)
                    self.proc(sub, body)
                return

            elif isinstance(p, SendChan):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = Tensor if kind == "off" else Lolli
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                akind, at, am = self.chan(ctx, p.arg, span)
                if akind != "lin":
                    raise ProtocolMismatch("a linear channel argument", f"#{p.arg.name}", span)
                self.type_eq(at, u.carried, span, f"sent channel ${p.arg.name}")
                self.meq(am, u.mode, span, f"sent channel ${p.arg.name}")
                self.take(ctx, p.arg.name)
                if kind == "off":
                    ctx.off = (name, u.cont, m)
                else:
                    ctx.delta[p.chan.name] = (u.cont, cm)
                p = p.cont

            elif isinstance(p, RecvChan):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = Lolli if kind == "off" else Tensor
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                if kind == "off":
                    ctx.off = (name, u.cont, m)
                else:
                    ctx.delta[p.chan.name] = (u.cont, cm)
                self.meq(p.bind.mode, u.mode, span, f"received channel ${p.bind.name}")
                if self.mval(u.mode) == Mode.S:
                    ctx.gamma[p.bind.name] = u.carried
                else:
                    self.bind_lin(ctx, p.bind, u.carried, u.mode, span)
                p = p.cont

            elif isinstance(p, SendValue):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = SendVal if kind == "off" else RecvVal
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                _, ctx.q, _ = self.expr(ctx.psi, ctx.q, p.expr, u.vtype)
                if kind == "off":
                    ctx.off = (name, u.cont, m)
                else:
                    ctx.delta[p.chan.name] = (u.cont, cm)
                p = p.cont

            elif isinstance(p, RecvValue):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                want = RecvVal if kind == "off" else SendVal
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                self.potfree(u.vtype, span, f"received value '{p.var}'")
                ctx.psi[p.var] = u.vtype
                if kind == "off":
                    ctx.off = (name, u.cont, m)
                else:
                    ctx.delta[p.chan.name] = (u.cont, cm)
                p = p.cont

            elif isinstance(p, Close):
                if p.chan.name != name:
                    raise ProtocolMismatch("close of the offered channel", f"close ${p.chan.name}", span)
                self.meq(p.chan.mode, m, span, "closed channel")
                if not isinstance(self.unf(A), One):
                    raise ProtocolMismatch(_short(A), "close", span)
                self.leftover(ctx, span, "close")
                # a transaction's leftover gas is refunded to its sender
                if self.mval(m) != Mode.T:
                    em.eq(ctx.q, 0, span, "close")
                return

            elif isinstance(p, Wait):
                kind, t, cm = self.chan(ctx, p.chan, span)
                if kind != "lin" or not isinstance(self.unf(t), One):
                    raise ProtocolMismatch(_short(t), "wait", span)
                self.take(ctx, p.chan.name)
                p = p.cont

            elif isinstance(p, Fwd):
                if p.dst.name != name:
                    raise ProtocolMismatch("forward onto the offered channel", f"${p.dst.name}", span)
                self.meq(p.dst.mode, m, span, "forward target")
                kind, t, cm = self.chan(ctx, p.src, span)
                if kind != "lin":
                    raise ProtocolMismatch("a linear channel", f"#{p.src.name}", span)
                self.type_eq(t, A, span, f"forwarded channel ${p.src.name}")
                self.meq(cm, m, span, "forwarded channel")
                if not self.messages:
                    self.min_(m, {Mode.R, Mode.T}, span, "forwarding", "fwd")
                self.take(ctx, p.src.name)
                self.leftover(ctx, span, "forward")
                em.eq(ctx.q, 0, span, "forward")
                return

            elif isinstance(p, (Spawn, TailCall)):
                ctype, cmode, cpot, shared_callee = self.call(ctx, p.callee, p.args, span)
                if isinstance(p, TailCall):
                    if p.chan.name != name:
                        raise ProtocolMismatch(f"a call providing ${name}", f"${p.chan.name}", span)
                    self.meq(p.chan.mode, m, span, "tail call")
                    self.meq(cmode, m, span, "tail call")
                    self.type_eq(ctype, A, span, "callee offering")
                    self.leftover(ctx, span, "tail call")
                    em.eq(ctx.q, cpot, span, "tail call")
                    return
                cm = self.mval(cmode)
                om = self.mval(m)
                if cm is not None and om is not None and om not in LEGAL_SPAWNS.get(cm, ()):
                    raise ModeViolation(f"cannot spawn a mode-{cm} process from mode {om}", span,
                                        "spawn")
                if cm is None and om is not None and self.modes is None:
                    raise ModeViolation("unresolved callee mode", span, "spawn")
                if cm == Mode.S:
                    self.esync(ctype, span)
                ctx.q = em.spend(ctx.q, cpot, span, "spawn")
                self.meq(p.bind.mode, cmode, span, "spawned channel")
                if cm == Mode.S:
                    ctx.gamma[p.bind.name] = ctype
                    ctx.consumed.discard(p.bind.name)
                else:
                    self.bind_lin(ctx, p.bind, ctype, cmode, span)
                p = p.cont

            elif isinstance(p, Work):
                ctx.q = em.spend(ctx.q, LinExpr.of(p.pot), span, "work")
                p = p.cont

            elif isinstance(p, (Pay, Get)):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                if isinstance(p, Pay):
                    want = PayPot if kind == "off" else GetPot
                else:
                    want = GetPot if kind == "off" else PayPot
                if kind == "shr" or not isinstance(u, want):
                    raise ProtocolMismatch(_short(t), _form(p), span)
                em.eq(LinExpr.of(p.pot), LinExpr.of(u.pot), span, f"{_form(p)} amount")
                if isinstance(p, Pay):
                    ctx.q = em.spend(ctx.q, LinExpr.of(u.pot), span, "pay")
                else:
                    ctx.q = ctx.q + LinExpr.of(u.pot)
                if kind == "off":
                    ctx.off = (name, u.cont, m)
                else:
                    ctx.delta[p.chan.name] = (u.cont, cm)
                p = p.cont

            elif isinstance(p, Accept):
                if p.shared.name != name:
                    raise ProtocolMismatch(f"accept on the offered channel #{name}",
                                           f"#{p.shared.name}", span)
                self.meq(m, Mode.S, span, "accept")
                self.meq(p.shared.mode, Mode.S, span, "accept")
                u = self.unf(A)
                if not isinstance(u, Up):
                    raise ProtocolMismatch(_short(A), "accept", span)
                self.purelin(ctx.delta, span)
                self.meq(p.bind.mode, Mode.L, span, "accepted channel")
                if p.bind.name in ctx.delta:
                    raise LinearityViolation(p.bind.name, f"rebinding ${p.bind.name}", span)
                ctx.off = (p.bind.name, u.cont, Mode.L)
                p = p.cont

            elif isinstance(p, Acquire):
                kind, t, _ = self.chan(ctx, p.shared, span)
                u = self.unf(t)
                if kind != "shr" or not isinstance(u, Up):
                    raise ProtocolMismatch(_short(t), "acquire", span)
                self.min_(m, {Mode.L, Mode.T}, span, "acquire", "acquire")
                self.meq(p.bind.mode, Mode.L, span, "acquired channel")
                self.bind_lin(ctx, p.bind, u.cont, Mode.L, span)
                p = p.cont

            elif isinstance(p, Detach):
                if p.chan.name != name:
                    raise ProtocolMismatch(f"detach of the offered channel ${name}",
                                           f"${p.chan.name}", span)
                self.meq(m, Mode.L, span, "detach")
                self.meq(p.chan.mode, Mode.L, span, "detach")
                u = self.unf(A)
                if not isinstance(u, Down):
                    raise ProtocolMismatch(_short(A), "detach", span)
                self.purelin(ctx.delta, span)
                self.meq(p.bind.mode, Mode.S, span, "detached channel")
                ctx.off = (p.bind.name, u.cont, Mode.S)
                p = p.cont

            elif isinstance(p, Release):
                kind, t, cm = self.chan(ctx, p.chan, span)
                u = self.unf(t)
                if kind != "lin" or not isinstance(u, Down):
                    raise ProtocolMismatch(_short(t), "release", span)
                self.meq(cm, Mode.L, span, "released channel")
                self.meq(p.bind.mode, Mode.S, span, "released channel")
                self.take(ctx, p.chan.name)
                if p.bind.name in ctx.gamma:
                    self.type_eq(u.cont, ctx.gamma[p.bind.name], span, f"released #{p.bind.name}")
                else:
                    ctx.gamma[p.bind.name] = u.cont
                p = p.cont

            elif isinstance(p, Let):
                t, ctx.q, _ = self.expr(ctx.psi, ctx.q, p.expr, None)
                self.potfree(t, span, f"let-bound '{p.var}'")
                ctx.psi[p.var] = t
                p = p.cont

            elif isinstance(p, If):
                _, ctx.q, _ = self.expr(ctx.psi, ctx.q, p.cond, BOOL)
                self.proc(ctx.copy(), p.then)
                self.proc(ctx, p.other)
                return

            else:
                raise TypeError(f"unknown process node {type(p).__name__}")

    def call(self, ctx: Ctx, callee, args, span):
        """Consume the arguments of a spawn or tail call; returns the callee's
        (offered type, mode, turnstile potential, is-declaration)."""
        if isinstance(callee, str) and callee in self.sig.proc_defs:
            d: ProcDecl = self.sig.proc_defs[callee]
            if len(args) != len(d.params):
                raise TypeMismatch(f"process '{callee}' expects {len(d.params)} arguments, "
                                   f"got {len(args)}", span)
            for prm, a in zip(d.params, args):
                if isinstance(prm, FunParam):
                    if isinstance(a, ChanRef):
                        raise TypeMismatch(f"argument for '{prm.name}' must be a value, "
                                           f"found channel {a.name}", a.span or span)
                    _, ctx.q, _ = self.expr(ctx.psi, ctx.q, a, prm.ftype)
                    continue
                if not isinstance(a, ChanRef):
                    raise TypeMismatch(f"argument for ${prm.chan.name} must be a channel", span)
                self._chan_arg(ctx, a, prm.chan, prm.stype, span)
            return d.offered.stype, d.offered.chan.mode, LinExpr.of(d.pot), True
        e = Var(callee, span=span) if isinstance(callee, str) else callee
        t, ctx.q, _ = self.expr(ctx.psi, ctx.q, e, None)
        if not isinstance(t, MonadT):
            raise TypeMismatch(f"spawned expression must be a process value", span)
        sh = [a for a in args if isinstance(a, ChanRef) and a.name in ctx.gamma]
        ln = [a for a in args if not (isinstance(a, ChanRef) and a.name in ctx.gamma)]
        if len(sh) != len(t.shared) or len(ln) != len(t.linear):
            raise TypeMismatch(f"process value expects {len(t.shared)} shared and "
                               f"{len(t.linear)} linear arguments", span)
        for a, st in zip(sh, t.shared):
            self._chan_arg(ctx, a, ChanRef(a.name, Mode.S, True), st, span)
        for a, (lt, lm) in zip(ln, t.linear):
            if not isinstance(a, ChanRef):
                raise TypeMismatch("process value arguments must be channels", span)
            self._chan_arg(ctx, a, ChanRef(a.name, lm), lt, span)
        return t.offered, t.mode, LinExpr.of(0), False

    def _chan_arg(self, ctx, a: ChanRef, param: ChanRef, ptype, span):
        shared = param.shared or self.mval(param.mode) == Mode.S
        kind, t, am = self.chan(ctx, a, span)
        if shared:
            if kind != "shr":
                raise ProtocolMismatch(f"shared channel for #{param.name}", f"${a.name}", span)
            self.type_eq(t, ptype, span, f"argument #{a.name}")
            return
        if kind != "lin":
            raise ProtocolMismatch(f"linear channel for ${param.name}", f"#{a.name}", span)
        self.type_eq(t, ptype, span, f"argument ${a.name}")
        self.meq(am, param.mode, span, f"argument ${a.name}")
        self.take(ctx, a.name)

    # -- expressions
    def expr(self, env: dict, q: LinExpr, e: Expr, exp):
        """Returns (type, residual potential, environment after potential splits)."""
        t, q, env = self._ex(env, LinExpr.of(q), e, exp)
        if exp is not None and t is not exp:
            self.ftype_eq(t, exp, getattr(e, "span", None))
        return t, q, env

    def _use(self, env, x, exp, span):
        t = env[x]
        ann = _annots(t)
        if not ann:
            return t, env
        if exp is not None:
            self.ftype_eq(_zeroed(t), _zeroed(exp), span, f"variable '{x}'")
            rest = [self.em.spend(LinExpr.of(a), LinExpr.of(b), span, f"sharing '{x}'").as_potential()
                    for a, b in zip(ann, _annots(exp))]
            return exp, {**env, x: _reannot(t, rest)}
        return t, {**env, x: _zeroed(t)}

    def _merge(self, ea: dict, eb: dict, span):
        for k in ea:
            if k in eb and ea[k] is not eb[k]:
                for a, b in zip(_annots(ea[k]), _annots(eb[k])):
                    self.em.eq(LinExpr.of(a), LinExpr.of(b), span, f"potential of '{k}' across branches")
        return ea

    def _drop(self, env: dict, x: str, saved, span):
        if x in env:
            for a in _annots(env[x]):
                self.em.eq(LinExpr.of(a), 0, span, f"leftover potential of '{x}'")
        env = dict(env)
        if saved is None:
            env.pop(x, None)
        else:
            env[x] = saved
        return env

    def _ex(self, env, q, e, exp):
        self.rules += 1
        span = getattr(e, "span", None)
        em = self.em
        if isinstance(e, IntLit):
            return INT, q, env
        if isinstance(e, BoolLit):
            return BOOL, q, env
        if isinstance(e, Var):
            if e.name in env:
                t, env = self._use(env, e.name, exp, span)
                return t, q, env
            if e.name in self.sig.fun_defs:
                return self.sig.fun_defs[e.name].ftype, q, env
            raise UnknownName(f"unbound variable '{e.name}'", span)
        if isinstance(e, BinOp):
            if e.op in ("+", "-", "*"):
                _, q, env = self.expr(env, q, e.left, INT)
                _, q, env = self.expr(env, q, e.right, INT)
                return INT, q, env
            if e.op in ("&&", "||"):
                _, q, env = self.expr(env, q, e.left, BOOL)
                _, q, env = self.expr(env, q, e.right, BOOL)
                return BOOL, q, env
            if e.op in ("=", "<>"):
                lt, q, env = self.expr(env, q, e.left, None)
                if not isinstance(lt, Base):
                    raise TypeMismatch("equality is only defined on int and bool", span)
                _, q, env = self.expr(env, q, e.right, lt)
                return BOOL, q, env
            _, q, env = self.expr(env, q, e.left, INT)
            _, q, env = self.expr(env, q, e.right, INT)
            return BOOL, q, env
        if isinstance(e, Not):
            _, q, env = self.expr(env, q, e.arg, BOOL)
            return BOOL, q, env
        if isinstance(e, IfE):
            _, q, env = self.expr(env, q, e.cond, BOOL)
            ta, qa, ea = self.expr(env, q, e.then, exp)
            tb, qb, eb = self.expr(env, q, e.other, exp or ta)
            em.eq(qa, qb, span, "potential across conditional branches")
            return ta, qa, self._merge(ea, eb, span)
        if isinstance(e, LetE):
            tb, q, env = self.expr(env, q, e.bound, None)
            saved = env.get(e.var)
            env2 = {**env, e.var: tb}
            t, q, env3 = self.expr(env2, q, e.body, exp)
            return t, q, self._drop(env3, e.var, saved, span)
        if isinstance(e, Lam):
            if not isinstance(exp, Arrow):
                raise TypeMismatch("cannot infer the type of a function; add an annotation", span)
            self.ftype_eq(e.vtype, exp.arg, span, f"parameter '{e.var}'")
            inner = {k: _zeroed(v) for k, v in env.items()}
            inner[e.var] = exp.arg
            _, r, after = self.expr(inner, LinExpr.of(exp.call_pot), e.body, exp.res)
            em.eq(r, LinExpr.of(exp.ret_pot), span, "function return potential")
            self._drop(after, e.var, None, span)
            return exp, q, env
        if isinstance(e, App):
            tf, q, env = self.expr(env, q, e.fn, None)
            if not isinstance(tf, Arrow):
                raise TypeMismatch("applied expression is not a function", span)
            _, q, env = self.expr(env, q, e.arg, tf.arg)
            q = em.spend(q, LinExpr.of(tf.call_pot), span, "function call")
            return tf.res, q + LinExpr.of(tf.ret_pot), env
        if isinstance(e, Pair):
            if exp is not None and not isinstance(exp, ProdT):
                raise TypeMismatch("a pair needs a product type", span)
            la, q, env = self.expr(env, q, e.left, exp.left if exp else None)
            lb, q, env = self.expr(env, q, e.right, exp.right if exp else None)
            return (exp or ProdT(la, lb)), q, env
        if isinstance(e, (Fst, Snd)):
            t, q, env = self.expr(env, q, e.arg, None)
            if not isinstance(t, ProdT):
                raise TypeMismatch("projection from a non-pair", span)
            keep, lose = (t.left, t.right) if isinstance(e, Fst) else (t.right, t.left)
            for a in _annots(lose):
                em.eq(LinExpr.of(a), 0, span, "potential of the discarded component")
            return keep, q, env
        if isinstance(e, (Inl, Inr)):
            if not isinstance(exp, SumT):
                raise TypeMismatch("cannot infer the type of an injection; add an annotation", span)
            _, q, env = self.expr(env, q, e.arg, exp.left if isinstance(e, Inl) else exp.right)
            return exp, q, env
        if isinstance(e, CaseE):
            t, q, env = self.expr(env, q, e.scrut, None)
            if not isinstance(t, SumT):
                raise TypeMismatch("case on a non-sum value", span)
            ta, qa, ea = self.expr({**env, e.lvar: t.left}, q, e.lbody, exp)
            ea = self._drop(ea, e.lvar, env.get(e.lvar), span)
            tb, qb, eb = self.expr({**env, e.rvar: t.right}, q, e.rbody, exp or ta)
            eb = self._drop(eb, e.rvar, env.get(e.rvar), span)
            em.eq(qa, qb, span, "potential across case branches")
            return ta, qa, self._merge(ea, eb, span)
        if isinstance(e, Nil):
            if not isinstance(exp, ListT):
                raise TypeMismatch("cannot infer the type of []; add an annotation", span)
            return exp, q, env
        if isinstance(e, Cons):
            if exp is not None:
                if not isinstance(exp, ListT):
                    raise TypeMismatch("a list needs a list type", span)
                lt = exp
                _, q, env = self.expr(env, q, e.head, lt.elem)
                _, q, env = self.expr(env, q, e.tail, lt)
            elif isinstance(e.tail, Nil):
                ht, q, env = self.expr(env, q, e.head, None)
                lt = ListT(ht, 0)
            else:
                lt, q, env = self.expr(env, q, e.tail, None)
                if not isinstance(lt, ListT):
                    raise TypeMismatch("cons onto a non-list", span)
                _, q, env = self.expr(env, q, e.head, lt.elem)
            q = em.spend(q, LinExpr.of(lt.pot), span, "list cell potential")
            return lt, q, env
        if isinstance(e, Match):
            t, q, env = self.expr(env, q, e.scrut, None)
            if not isinstance(t, ListT):
                raise TypeMismatch("match on a non-list value", span)
            ta, qa, ea = self.expr(env, q, e.nil_body, exp)
            inner = {**env, e.head: t.elem, e.tail: t}
            tb, qb, eb = self.expr(inner, q + LinExpr.of(t.pot), e.cons_body, exp or ta)
            eb = self._drop(eb, e.tail, env.get(e.tail), span)
            eb = self._drop(eb, e.head, env.get(e.head), span)
            em.eq(qa, qb, span, "potential across match branches")
            return ta, qa, self._merge(ea, eb, span)
        if isinstance(e, Tick):
            q = em.spend(q, LinExpr.of(e.cost), span, "tick")
            return self._ex(env, q, e.body, exp)
        if isinstance(e, Annot):
            _, q, env = self.expr(env, q, e.body, e.ftype)
            return e.ftype, q, env
        if isinstance(e, ProcVal):
            if not isinstance(exp, MonadT):
                raise TypeMismatch("cannot infer the type of a process value; add an annotation",
                                   span)
            self.procval(env, e, exp, span)
            return exp, q, env
        raise TypeError(f"unknown expression node {type(e).__name__}")

    def procval(self, env, e: ProcVal, t: MonadT, span):
        if len(e.args) != len(t.shared) + len(t.linear):
            raise TypeMismatch("process value arity does not match its type", span)
        gamma, delta = {}, {}
        for a, st in zip(e.args[:len(t.shared)], t.shared):
            self.meq(a.mode, Mode.S, span, "shared argument")
            gamma[a.name] = st
        for a, (lt, lm) in zip(e.args[len(t.shared):], t.linear):
            self.meq(a.mode, lm, span, "linear argument")
            delta[a.name] = (lt, lm)
        self.meq(e.chan.mode, t.mode, span, "process value channel")
        if self.mval(t.mode) == Mode.S:
            self.esync(t.offered, span)
        psi = {k: _zeroed(v) for k, v in env.items()}
        ctx = Ctx(psi, gamma, delta, LinExpr.of(0), (e.chan.name, t.offered, t.mode))
        self.proc(ctx, e.body)

    # -- declarations
    def decl(self, d: ProcDecl):
        span = d.span
        want = KIND_MODE.get(d.kind)
        self.meq(d.mode, want, span, f"offered channel of {d.kind} '{d.name}'")
        self.grammar(d.offered.stype, d.mode, span, f"offered type of '{d.name}'")
        psi, gamma, delta = {}, {}, {}
        for prm in d.params:
            if isinstance(prm, FunParam):
                self.potfree(prm.ftype, prm.span or span, f"parameter '{prm.name}'")
                psi[prm.name] = prm.ftype
                continue
            c = prm.chan
            if c.name in gamma or c.name in delta or c.name == d.offered.chan.name:
                raise LinearityViolation(c.name, f"duplicate channel parameter ${c.name}", span)
            if c.shared:
                self.meq(c.mode, Mode.S, span, f"shared parameter #{c.name}")
            if self.mval(c.mode) == Mode.S:
                self.grammar(prm.stype, Mode.S, span, f"parameter #{c.name}")
                gamma[c.name] = prm.stype
            else:
                self.grammar(prm.stype, c.mode, span, f"parameter ${c.name}")
                delta[c.name] = (prm.stype, c.mode)
        if self.mval(d.mode) == Mode.S:
            self.esync(d.offered.stype, span)
        ctx = Ctx(psi, gamma, delta, LinExpr.of(d.pot), (d.offered.chan.name, d.offered.stype, d.mode))
        self.proc(ctx, d.body)

    def fundecl(self, f: FunDecl):
        _, r, _ = self.expr({}, LinExpr.of(0), f.body, f.ftype)
        self.em.eq(r, 0, f.span, "function body")


# ---------------------------------------------------------------- public operations

def type_equal(sig: Signature, a, b) -> bool:
    return Checker(sig)._teq(a, b, set(), None)


def check_esync(sig: Signature, t, span=None) -> None:
    Checker(sig).esync(t, span)


def check_purelin(delta: dict) -> None:
    """delta maps channel name -> (type, mode) or -> mode."""
    for name, v in delta.items():
        m = v[1] if isinstance(v, tuple) else v
        if m != Mode.R:
            raise NotPure(name)


def check_mode_invariants(sig: Signature, mode: Mode, gamma: dict, delta: dict, offered) -> None:
    c = Checker(sig)
    c.invariants(Ctx({}, dict(gamma), dict(delta), LinExpr.of(0), ("_", offered, mode)), None)
    c.grammar(offered, mode, None, "offered type")


def split_context(psi: dict, need: dict) -> tuple:
    """Split stored potential: `need` gives the first half's type for some variables;
    every other variable goes entirely to the first half."""
    em = ConcreteEmitter()
    left, right = {}, {}
    for x, t in psi.items():
        if x not in need:
            left[x], right[x] = t, _zeroed(t)
            continue
        w = need[x]
        Checker(Signature()).ftype_eq(_zeroed(w), _zeroed(t), None, f"variable '{x}'")
        rest = [em.spend(LinExpr.of(a), LinExpr.of(b), None, f"sharing '{x}'").as_potential()
                for a, b in zip(_annots(t), _annots(w))]
        left[x], right[x] = w, _reannot(t, rest)
    return left, right


def check_expr(sig: Signature, psi: dict, p, m: Expr, expected=None):
    c = Checker(sig)
    t, r, _ = c.expr(dict(psi), LinExpr.of(p), m, expected)
    c.em.eq(r, 0, getattr(m, "span", None), "expression")
    return t


def check_process(sig: Signature, psi: dict, gamma: dict, delta: dict, q, p, offered,
                  messages: bool = False) -> CheckReport:
    """offered = (channel name, type, mode); delta maps name -> (type, mode)."""
    c = Checker(sig, messages=messages, record=True)
    rep = CheckReport(offered[0])
    try:
        c.proc(Ctx(dict(psi), dict(gamma), dict(delta), LinExpr.of(q), tuple(offered)), p)
    except NomError as err:
        rep.error = err
    rep.trace, rep.rules = c.trace, c.rules
    return rep


def check_decl(sig: Signature, d, record: bool = True) -> CheckReport:
    c = Checker(sig, record=record)
    rep = CheckReport(d.name)
    try:
        if isinstance(d, FunDecl):
            c.fundecl(d)
        else:
            c.decl(d)
    except NomError as err:
        rep.error = err
    rep.trace, rep.rules = c.trace, c.rules
    return rep


def shared_types_in_use(sig: Signature) -> list:
    """Shared types offered by S declarations or by S-mode process values in types."""
    out = []
    for d in sig.proc_defs.values():
        if d.mode == Mode.S:
            out.append((d.offered.stype, d.span))
    for n in walk((tuple(sig.proc_defs.values()), tuple(sig.fun_defs.values()))):
        if isinstance(n, MonadT) and n.mode == Mode.S:
            out.append((n.offered, n.span))
    return out


def check_program(sig: Signature) -> ProgramReport:
    rep = ProgramReport()
    c = Checker(sig)
    seen = set()
    for t, span in shared_types_in_use(sig):
        key = t.name if isinstance(t, Named) else id(t)
        if key in seen:
            continue
        seen.add(key)
        try:
            c.esync(t, span)
        except NomError as err:
            rep.esync_errors.append(err)
    for name, f in sig.fun_defs.items():
        rep.reports[name] = check_decl(sig, f)
    for name, d in sig.proc_defs.items():
        rep.reports[name] = check_decl(sig, d)
    return rep
