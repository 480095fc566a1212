"""Abstract syntax shared by every stage: modes, potentials, session types,
functional types and terms, process terms and signatures."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    col: int

    def __str__(self):
        return f"{self.file}:{self.line}:{self.col}"


def _span():
    return field(default=None, compare=False, repr=False, hash=False)


# ---------------------------------------------------------------- errors

class NomError(Exception):
    code = "Error"

    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def render(self, default_file: str = "<input>") -> str:
        where = str(self.span) if self.span else f"{default_file}:0:0"
        return f"{where}: {self.code}: {self.message}"


class UnknownTypeName(NomError):
    code = "UnknownTypeName"


class UnknownName(NomError):
    code = "UnknownName"


class DuplicateName(NomError):
    code = "DuplicateName"


class ContractivenessViolation(NomError):
    code = "ContractivenessViolation"

    def __init__(self, name: str, span: Optional[Span] = None):
        super().__init__(f"type definition '{name}' is not contractive", span)
        self.name = name


class NomSyntaxError(NomError):
    code = "SyntaxError"

    def __init__(self, span: Span, expected: list[str], found: str):
        exp = ", ".join(sorted(set(expected)))
        super().__init__(f"expected one of {{{exp}}} but found {found}", span)
        self.expected = sorted(set(expected))
        self.found = found


# ---------------------------------------------------------------- modes

class Mode(Enum):
    R = "R"  # pure linear
    S = "S"  # shared
    L = "L"  # shared, currently acquired
    T = "T"  # transaction

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ModeVar:
    id: str

    def __str__(self):
        return f"?{self.id}"


AnyMode = Union[Mode, ModeVar]


# ---------------------------------------------------------------- potentials

@dataclass(frozen=True)
class PotVar:
    id: str

    def __str__(self):
        return "*"


# a concrete potential is a plain nonnegative int
Potential = Union[int, PotVar]


# ---------------------------------------------------------------- session types

@dataclass(frozen=True)
class SessionType:
    pass


@dataclass(frozen=True)
class Internal(SessionType):
    branches: tuple  # of (label, SessionType)
    span: Optional[Span] = _span()

    def branch(self, label):
        return dict(self.branches).get(label)


@dataclass(frozen=True)
class External(SessionType):
    branches: tuple
    span: Optional[Span] = _span()

    def branch(self, label):
        return dict(self.branches).get(label)


@dataclass(frozen=True)
class Tensor(SessionType):
    carried: SessionType
    mode: AnyMode
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Lolli(SessionType):
    carried: SessionType
    mode: AnyMode
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class One(SessionType):
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SendVal(SessionType):
    vtype: "FuncType"
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RecvVal(SessionType):
    vtype: "FuncType"
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class PayPot(SessionType):
    """Provider pays potential to the client."""
    pot: Potential
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class GetPot(SessionType):
    """Provider receives potential from the client."""
    pot: Potential
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Up(SessionType):
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Down(SessionType):
    cont: SessionType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Named(SessionType):
    name: str
    span: Optional[Span] = _span()


# ---------------------------------------------------------------- functional types

@dataclass(frozen=True)
class FuncType:
    pass


@dataclass(frozen=True)
class Base(FuncType):
    name: str  # "int" or "bool"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Arrow(FuncType):
    arg: FuncType
    res: FuncType
    call_pot: Potential = 0
    ret_pot: Potential = 0
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SumT(FuncType):
    left: FuncType
    right: FuncType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ProdT(FuncType):
    left: FuncType
    right: FuncType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ListT(FuncType):
    elem: FuncType
    pot: Potential = 0
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class MonadT(FuncType):
    offered: SessionType
    mode: AnyMode
    shared: tuple = ()   # of SessionType
    linear: tuple = ()   # of (SessionType, mode)
    span: Optional[Span] = _span()


INT = Base("int")
BOOL = Base("bool")


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class IntLit(Expr):
    value: int
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * = <> < > <= >= && ||
    left: Expr
    right: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class IfE(Expr):
    cond: Expr
    then: Expr
    other: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class LetE(Expr):
    var: str
    bound: Expr
    body: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Lam(Expr):
    var: str
    vtype: FuncType
    body: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class App(Expr):
    fn: Expr
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Pair(Expr):
    left: Expr
    right: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Fst(Expr):
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Snd(Expr):
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Inl(Expr):
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Inr(Expr):
    arg: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class CaseE(Expr):
    scrut: Expr
    lvar: str
    lbody: Expr
    rvar: str
    rbody: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Nil(Expr):
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Cons(Expr):
    head: Expr
    tail: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Match(Expr):
    scrut: Expr
    nil_body: Expr
    head: str
    tail: str
    cons_body: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Tick(Expr):
    cost: int
    body: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Annot(Expr):
    body: Expr
    ftype: FuncType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ProcVal(Expr):
    """A runnable process value: offered channel, argument channels and body."""
    chan: "ChanRef"
    args: tuple  # of ChanRef
    body: "Proc"
    span: Optional[Span] = _span()


def is_value(e: Expr) -> bool:
    if isinstance(e, (IntLit, BoolLit, Nil, Lam, ProcVal)):
        return True
    if isinstance(e, (Pair, Cons)):
        a, b = (e.left, e.right) if isinstance(e, Pair) else (e.head, e.tail)
        return is_value(a) and is_value(b)
    if isinstance(e, (Inl, Inr)):
        return is_value(e.arg)
    return False


# ---------------------------------------------------------------- processes

@dataclass(frozen=True)
class ChanRef:
    name: str
    mode: AnyMode
    shared: bool = False  # written with '#'
    span: Optional[Span] = _span()

    def with_name(self, name: str) -> "ChanRef":
        return dataclasses.replace(self, name=name)


@dataclass(frozen=True)
class Proc:
    pass


@dataclass(frozen=True)
class SendLabel(Proc):
    chan: ChanRef
    label: str
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Case(Proc):
    chan: ChanRef
    branches: tuple  # of (label, Proc)
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SendChan(Proc):
    chan: ChanRef
    arg: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RecvChan(Proc):
    bind: ChanRef
    chan: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SendValue(Proc):
    chan: ChanRef
    expr: Expr
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RecvValue(Proc):
    var: str
    chan: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Close(Proc):
    chan: ChanRef
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Wait(Proc):
    chan: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Fwd(Proc):
    dst: ChanRef  # the offered channel
    src: ChanRef
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Spawn(Proc):
    """`$x <- f <- args ; P`; callee is a process name or an expression."""
    bind: ChanRef
    callee: Union[str, Expr]
    args: tuple  # of ChanRef | Expr
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class TailCall(Proc):
    chan: ChanRef
    callee: Union[str, Expr]
    args: tuple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Work(Proc):
    pot: Potential
    cont: Proc
    slack: bool = False  # written with an explicit brace group
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Pay(Proc):
    chan: ChanRef
    pot: Potential
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Get(Proc):
    chan: ChanRef
    pot: Potential
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Acquire(Proc):
    bind: ChanRef
    shared: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Accept(Proc):
    bind: ChanRef
    shared: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Release(Proc):
    bind: ChanRef  # shared name bound in the continuation
    chan: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Detach(Proc):
    bind: ChanRef
    chan: ChanRef
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Let(Proc):
    var: str
    expr: Expr
    cont: Proc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class If(Proc):
    cond: Expr
    then: Proc
    other: Proc
    span: Optional[Span] = _span()


# ---------------------------------------------------------------- declarations

@dataclass(frozen=True)
class FunParam:
    name: str
    ftype: FuncType
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ChanParam:
    chan: ChanRef
    stype: SessionType
    span: Optional[Span] = _span()


KIND_MODE = {"asset": Mode.R, "contract": Mode.S, "transaction": Mode.T}


@dataclass(frozen=True)
class TypeDecl:
    name: str
    body: SessionType
    keyword: str = "type"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class ProcDecl:
    name: str
    kind: str
    params: tuple  # of FunParam | ChanParam, declaration order
    pot: Potential
    offered: ChanParam
    body: Proc
    span: Optional[Span] = _span()

    @property
    def mode(self) -> AnyMode:
        return self.offered.chan.mode

    @property
    def fun_args(self) -> list:
        return [p for p in self.params if isinstance(p, FunParam)]

    @property
    def chan_args(self) -> list:
        return [p for p in self.params if isinstance(p, ChanParam)]


@dataclass(frozen=True)
class FunDecl:
    name: str
    ftype: FuncType
    body: Expr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class SourceProgram:
    decls: tuple
    file: str = field(default="<input>", compare=False)


@dataclass
class Signature:
    type_defs: dict = field(default_factory=dict)   # name -> SessionType
    proc_defs: dict = field(default_factory=dict)   # name -> ProcDecl
    fun_defs: dict = field(default_factory=dict)    # name -> FunDecl
    spans: dict = field(default_factory=dict)       # type name -> Span


# ---------------------------------------------------------------- operations

def unfold(sig: Signature, t: SessionType) -> SessionType:
    seen = set()
    while isinstance(t, Named):
        if t.name not in sig.type_defs:
            raise UnknownTypeName(f"undefined type '{t.name}'", t.span)
        if t.name in seen:
            raise ContractivenessViolation(t.name, t.span)
        seen.add(t.name)
        t = sig.type_defs[t.name]
    return t


def check_contractive(sig: Signature) -> None:
    for name in sig.type_defs:
        seen = [name]
        t = sig.type_defs[name]
        while isinstance(t, Named):
            if t.name in seen:
                raise ContractivenessViolation(name, sig.spans.get(name))
            if t.name not in sig.type_defs:
                break
            seen.append(t.name)
            t = sig.type_defs[t.name]


def _is_dc(x) -> bool:
    return dataclasses.is_dataclass(x) and not isinstance(x, type)


def map_nodes(node, fn):
    """Rebuild a tree bottom-up, applying fn to every dataclass node."""
    if isinstance(node, tuple):
        return tuple(map_nodes(x, fn) for x in node)
    if not _is_dc(node):
        return node
    changes = {}
    for f in dataclasses.fields(node):
        if f.name == "span":
            continue
        old = getattr(node, f.name)
        new = map_nodes(old, fn)
        if new is not old:
            changes[f.name] = new
    if changes:
        node = dataclasses.replace(node, **changes)
    return fn(node)


def walk(node) -> Iterator:
    if isinstance(node, tuple):
        for x in node:
            yield from walk(x)
        return
    if not _is_dc(node):
        return
    yield node
    for f in dataclasses.fields(node):
        if f.name != "span":
            yield from walk(getattr(node, f.name))


def rename_channel(p, frm: str, to: str):
    """Replace every occurrence of channel name `frm` by `to`.

    `to` must be fresh in p, which makes the uniform replacement
    alpha-equivalent to capture-avoiding substitution."""
    def fix(n):
        if isinstance(n, ChanRef) and n.name == frm:
            return n.with_name(to)
        return n
    return map_nodes(p, fix)


def channel_names(p) -> set:
    return {n.name for n in walk(p) if isinstance(n, ChanRef)}


# ---------------------------------------------------------------- substitution

_alpha = [0]


def _alpha_name(base: str) -> str:
    _alpha[0] += 1
    return f"{base.split('~')[0]}~{_alpha[0]}"


def _sc(c: ChanRef, chans: dict) -> ChanRef:
    new = chans.get(c.name)
    return c.with_name(new) if new is not None else c


def _bind_chan(b: ChanRef, chans: dict):
    """Enter the scope of channel binder b; returns (binder, mapping)."""
    inner = {k: v for k, v in chans.items() if k != b.name}
    if b.name in inner.values():
        fresh = _alpha_name(b.name)
        inner[b.name] = fresh
        return b.with_name(fresh), inner
    return b, inner


def _bind_var(x: str, vals: dict) -> dict:
    return {k: v for k, v in vals.items() if k != x} if x in vals else vals


def subst_expr(e: Expr, vals: dict, chans: Optional[dict] = None) -> Expr:
    """Substitute closed values for free functional variables."""
    chans = chans or {}
    if not vals and not chans:
        return e
    R = lambda x, v=vals: subst_expr(x, v, chans)
    r = dataclasses.replace
    if isinstance(e, Var):
        return vals.get(e.name, e)
    if isinstance(e, (IntLit, BoolLit, Nil)):
        return e
    if isinstance(e, BinOp):
        return r(e, left=R(e.left), right=R(e.right))
    if isinstance(e, Not):
        return r(e, arg=R(e.arg))
    if isinstance(e, IfE):
        return r(e, cond=R(e.cond), then=R(e.then), other=R(e.other))
    if isinstance(e, LetE):
        return r(e, bound=R(e.bound), body=R(e.body, _bind_var(e.var, vals)))
    if isinstance(e, Lam):
        return r(e, body=R(e.body, _bind_var(e.var, vals)))
    if isinstance(e, App):
        return r(e, fn=R(e.fn), arg=R(e.arg))
    if isinstance(e, Pair):
        return r(e, left=R(e.left), right=R(e.right))
    if isinstance(e, (Fst, Snd, Inl, Inr)):
        return r(e, arg=R(e.arg))
    if isinstance(e, CaseE):
        return r(e, scrut=R(e.scrut), lbody=R(e.lbody, _bind_var(e.lvar, vals)),
                 rbody=R(e.rbody, _bind_var(e.rvar, vals)))
    if isinstance(e, Cons):
        return r(e, head=R(e.head), tail=R(e.tail))
    if isinstance(e, Match):
        inner = _bind_var(e.tail, _bind_var(e.head, vals))
        return r(e, scrut=R(e.scrut), nil_body=R(e.nil_body), cons_body=R(e.cons_body, inner))
    if isinstance(e, Tick):
        return r(e, body=R(e.body))
    if isinstance(e, Annot):
        return r(e, body=R(e.body))
    if isinstance(e, ProcVal):
        ch, inner = _bind_chan(e.chan, chans)
        args = []
        for a in e.args:
            a2, inner = _bind_chan(a, inner)
            args.append(a2)
        return r(e, chan=ch, args=tuple(args), body=subst_proc(e.body, inner, vals))
    raise TypeError(f"unknown expression node {type(e).__name__}")


def _subst_arg(a, chans, vals):
    if isinstance(a, ChanRef):
        return _sc(a, chans)
    return subst_expr(a, vals, chans)


def subst_proc(p: Proc, chans: dict, vals: Optional[dict] = None) -> Proc:
    """Capture-avoiding simultaneous substitution of channel names and values."""
    vals = vals or {}
    if not chans and not vals:
        return p
    r = dataclasses.replace
    E = lambda e: subst_expr(e, vals, chans)
    if isinstance(p, SendLabel):
        return r(p, chan=_sc(p.chan, chans), cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, Case):
        return r(p, chan=_sc(p.chan, chans),
                 branches=tuple((l, subst_proc(q, chans, vals)) for l, q in p.branches))
    if isinstance(p, SendChan):
        return r(p, chan=_sc(p.chan, chans), arg=_sc(p.arg, chans),
                 cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, RecvChan):
        ch = _sc(p.chan, chans)
        b, inner = _bind_chan(p.bind, chans)
        return r(p, bind=b, chan=ch, cont=subst_proc(p.cont, inner, vals))
    if isinstance(p, SendValue):
        return r(p, chan=_sc(p.chan, chans), expr=E(p.expr), cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, RecvValue):
        return r(p, chan=_sc(p.chan, chans), cont=subst_proc(p.cont, chans, _bind_var(p.var, vals)))
    if isinstance(p, Close):
        return r(p, chan=_sc(p.chan, chans))
    if isinstance(p, Wait):
        return r(p, chan=_sc(p.chan, chans), cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, Fwd):
        return r(p, dst=_sc(p.dst, chans), src=_sc(p.src, chans))
    if isinstance(p, Spawn):
        callee = p.callee if isinstance(p.callee, str) else E(p.callee)
        args = tuple(_subst_arg(a, chans, vals) for a in p.args)
        b, inner = _bind_chan(p.bind, chans)
        return r(p, bind=b, callee=callee, args=args, cont=subst_proc(p.cont, inner, vals))
    if isinstance(p, TailCall):
        callee = p.callee if isinstance(p.callee, str) else E(p.callee)
        return r(p, chan=_sc(p.chan, chans), callee=callee,
                 args=tuple(_subst_arg(a, chans, vals) for a in p.args))
    if isinstance(p, Work):
        return r(p, cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, (Pay, Get)):
        return r(p, chan=_sc(p.chan, chans), cont=subst_proc(p.cont, chans, vals))
    if isinstance(p, (Acquire, Accept)):
        sh = _sc(p.shared, chans)
        b, inner = _bind_chan(p.bind, chans)
        return r(p, bind=b, shared=sh, cont=subst_proc(p.cont, inner, vals))
    if isinstance(p, (Release, Detach)):
        ch = _sc(p.chan, chans)
        b, inner = _bind_chan(p.bind, chans)
        return r(p, bind=b, chan=ch, cont=subst_proc(p.cont, inner, vals))
    if isinstance(p, Let):
        return r(p, expr=E(p.expr), cont=subst_proc(p.cont, chans, _bind_var(p.var, vals)))
    if isinstance(p, If):
        return r(p, cond=E(p.cond), then=subst_proc(p.then, chans, vals),
                 other=subst_proc(p.other, chans, vals))
    raise TypeError(f"unknown process node {type(p).__name__}")
