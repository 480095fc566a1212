"""Asynchronous cost semantics: a multiset of process and message objects with
continuation-channel messaging, synchronous acquire/accept and release/detach,
work/potential accounting, and optional per-step preservation and energy checks."""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    Acquire, Accept, Annot, App, BinOp, BoolLit, Case, CaseE, ChanRef, Close, Cons, Detach, Down,
    Fst, Fwd, Get, GetPot, If, IfE, Inl, Inr, IntLit, Lam, Let, LetE, Match, Mode, Nil, NomError,
    Not, Pair, Pay, PayPot, ProcDecl, ProcVal, Release, RecvChan, RecvValue, SendChan, SendLabel,
    SendValue, Signature, Snd, Spawn, TailCall, Tick, Up, Var, Wait, Work, channel_names, is_value,
    rename_channel, subst_expr, subst_proc, unfold,
)
from .typechecker import ModeViolation, check_process


class StuckIllTyped(NomError):
    code = "StuckIllTyped"


class InsufficientPotential(NomError):
    code = "InsufficientPotential"


class IllTyped(NomError):
    code = "IllTyped"

    def __init__(self, rule: str, message: str, chan: str = ""):
        super().__init__(f"{rule}: {message}")
        self.rule = rule
        self.chan = chan


class AssertionFailure(NomError):
    code = "AssertionFailure"

    def __init__(self, kind: str, step: int, message: str):
        super().__init__(f"{kind} violated at step {step}: {message}")
        self.kind = kind
        self.step = step


class ReplayDivergence(NomError):
    code = "ReplayDivergence"


# ---------------------------------------------------------------- configuration

@dataclass
class SemObject:
    kind: str            # "proc" | "msg"
    chan: str
    mode: Mode
    work: int
    body: object
    q: int               # potential held by the object
    stype: object        # type offered along chan
    addr: Optional[str] = None  # shared address while an acquired contract runs in mode L

    def __str__(self):
        return f"{self.kind}({self.chan}[{self.mode}], w={self.work}, q={self.q})"


@dataclass
class Configuration:
    objects: list = field(default_factory=list)
    directory: dict = field(default_factory=dict)  # address -> [Mode S|L, shared type]
    fresh: int = 0
    cursor: int = 0
    slack: int = 0            # executed `work {n}` slack
    acquires: list = field(default_factory=list)  # addresses in acquisition order
    replay: Optional[list] = None                  # forced acquisition order

    def state_key(self) -> tuple:
        """Structural identity of the persistent state."""
        objs = tuple((o.kind, o.chan, o.mode, o.work, o.body, o.q, o.stype, o.addr)
                     for o in self.objects)
        dirs = tuple(sorted((a, m, t) for a, (m, t) in self.directory.items()))
        return objs, dirs, self.fresh


@dataclass
class Stepped:
    config: Configuration
    rule: str
    subjects: tuple


@dataclass
class Poised:
    pass


@dataclass
class Blocked:
    acquirers: list


@dataclass
class FuelExhausted:
    pass


@dataclass
class TraceLine:
    index: int
    rule: str
    subjects: tuple
    work: int
    energy: int

    def __str__(self):
        return f"{self.index} {self.rule} {','.join(self.subjects) or '-'} {self.work} {self.energy}"


@dataclass
class RunResult:
    final: Configuration
    outcome: object
    trace: list
    steps: int
    work_used: int = 0        # work accumulated during the run across all objects
    slack: int = 0            # of which explicit slack
    deposited: int = 0        # net potential change of objects other than the root


def energy(c: Configuration) -> int:
    return sum(o.work + o.q for o in c.objects)


def total_work(c: Configuration) -> int:
    return sum(o.work for o in c.objects)


def gas_used(r: RunResult) -> int:
    """Runtime gas: non-slack work plus potential deposited into persistent objects."""
    return r.work_used - r.slack + r.deposited


# ---------------------------------------------------------------- expressions

def _lit(v):
    return BoolLit(v) if isinstance(v, bool) else IntLit(v)


def evaluate(sig: Signature, e):
    """Big-step evaluation by substitution; returns (value, number of ticks)."""
    cost = [0]

    def ev(e):
        if is_value(e):
            return e
        if isinstance(e, Var):
            if e.name in sig.fun_defs:
                return ev(sig.fun_defs[e.name].body)
            raise StuckIllTyped(f"free variable '{e.name}' at runtime")
        if isinstance(e, Tick):
            cost[0] += e.cost
            return ev(e.body)
        if isinstance(e, Annot):
            return ev(e.body)
        if isinstance(e, BinOp):
            a, b = ev(e.left), ev(e.right)
            x, y = a.value, b.value
            op = e.op
            if op == "+":
                return IntLit(x + y)
            if op == "-":
                return IntLit(x - y)
            if op == "*":
                return IntLit(x * y)
            if op == "&&":
                return BoolLit(x and y)
            if op == "||":
                return BoolLit(x or y)
            if op == "=":
                return BoolLit(x == y)
            if op == "<>":
                return BoolLit(x != y)
            if op == "<":
                return BoolLit(x < y)
            if op == ">":
                return BoolLit(x > y)
            if op == "<=":
                return BoolLit(x <= y)
            if op == ">=":
                return BoolLit(x >= y)
            raise StuckIllTyped(f"unknown operator {op}")
        if isinstance(e, Not):
            return BoolLit(not ev(e.arg).value)
        if isinstance(e, IfE):
            return ev(e.then if ev(e.cond).value else e.other)
        if isinstance(e, LetE):
            v = ev(e.bound)
            return ev(subst_expr(e.body, {e.var: v}))
        if isinstance(e, App):
            f = ev(e.fn)
            a = ev(e.arg)
            if not isinstance(f, Lam):
                raise StuckIllTyped("application of a non-function")
            return ev(subst_expr(f.body, {f.var: a}))
        if isinstance(e, Pair):
            return Pair(ev(e.left), ev(e.right))
        if isinstance(e, (Fst, Snd)):
            p = ev(e.arg)
            return p.left if isinstance(e, Fst) else p.right
        if isinstance(e, Inl):
            return Inl(ev(e.arg))
        if isinstance(e, Inr):
            return Inr(ev(e.arg))
        if isinstance(e, CaseE):
            s = ev(e.scrut)
            if isinstance(s, Inl):
                return ev(subst_expr(e.lbody, {e.lvar: s.arg}))
            return ev(subst_expr(e.rbody, {e.rvar: s.arg}))
        if isinstance(e, Cons):
            h = ev(e.head)
            return Cons(h, ev(e.tail))
        if isinstance(e, Match):
            s = ev(e.scrut)
            if isinstance(s, Nil):
                return ev(e.nil_body)
            return ev(subst_expr(e.cons_body, {e.head: s.head, e.tail: s.tail}))
        raise StuckIllTyped(f"cannot evaluate {type(e).__name__}")

    v = ev(e)
    return v, cost[0]


def to_value(x):
    """Python int/bool/list/pair -> value expression."""
    if isinstance(x, (bool, int)):
        return _lit(x)
    if isinstance(x, tuple) and len(x) == 2:
        return Pair(to_value(x[0]), to_value(x[1]))
    if isinstance(x, list):
        out = Nil()
        for v in reversed(x):
            out = Cons(to_value(v), out)
        return out
    if is_value(x):
        return x
    raise TypeError(f"not a value: {x!r}")


# ---------------------------------------------------------------- poised forms

_SENDS = (SendLabel, SendChan, SendValue, Pay)
_RECVS = (Case, RecvChan, RecvValue, Get)


def _head_chan(p) -> Optional[str]:
    if isinstance(p, (SendLabel, SendChan, SendValue, Pay, Get, Case, RecvChan, RecvValue,
                      Wait, Release)):
        return p.chan.name
    return None


def is_poised(o: SemObject) -> bool:
    p = o.body
    if o.kind == "msg":
        return isinstance(p, Close) or (isinstance(p, _SENDS) and p.chan.name == o.chan)
    if isinstance(p, (Fwd, Accept, Detach)):
        return True
    return isinstance(p, _RECVS) and p.chan.name == o.chan


# ---------------------------------------------------------------- engine

class Engine:
    def __init__(self, sig: Signature, seed: Optional[int] = None):
        self.sig = sig
        self.rng = random.Random(seed) if seed is not None else None

    # -- construction
    def fresh(self, c: Configuration, base: str) -> str:
        c.fresh += 1
        return f"{base.split('%')[0].split('~')[0]}%{c.fresh}"

    def instantiate(self, c: Configuration, d: ProcDecl, args, chan: str) -> SemObject:
        """Object running declaration d along chan; args are values or channel names."""
        if len(args) != len(d.params):
            raise StuckIllTyped(f"'{d.name}' expects {len(d.params)} arguments")
        chans, vals = {d.offered.chan.name: chan}, {}
        for prm, a in zip(d.params, args):
            if hasattr(prm, "ftype"):
                v = to_value(a)
                # keeps compound values checkable once they replace a typed variable
                vals[prm.name] = v if isinstance(v, (IntLit, BoolLit)) else Annot(v, prm.ftype)
            else:
                chans[prm.chan.name] = a.name if isinstance(a, ChanRef) else a
        body = subst_proc(d.body, chans, vals)
        return SemObject("proc", chan, d.mode, 0, body, int(d.pot), d.offered.stype)

    def spawn_root(self, c: Configuration, name: str, args=(), potential: Optional[int] = None,
                   chan: Optional[str] = None) -> SemObject:
        d = self.sig.proc_defs[name]
        if d.mode == Mode.S:
            chan = chan or self.fresh(c, d.offered.chan.name)
            c.directory[chan] = [Mode.S, d.offered.stype]
        else:
            chan = chan or self.fresh(c, d.offered.chan.name)
        o = self.instantiate(c, d, args, chan)
        if potential is not None:
            o.q = potential
        c.objects.append(o)
        return o

    # -- scheduling
    def step(self, c: Configuration):
        n = len(c.objects)
        if n == 0:
            return Poised()
        if self.rng is not None:
            order = list(range(n))
            self.rng.shuffle(order)
        else:
            start = c.cursor % n
            order = list(range(start, n)) + list(range(start))
        for i in order:
            o = c.objects[i]
            if o.kind != "proc":
                continue
            fired = self.fire(c, o)
            if fired is not None:
                rule, subjects = fired
                if o in c.objects:
                    c.cursor = c.objects.index(o) + 1
                else:
                    c.cursor = i
                return Stepped(c, rule, subjects)
        return self.stuck(c)

    def stuck(self, c: Configuration):
        waiting = [o for o in c.objects if not is_poised(o)]
        if not waiting:
            return Poised()
        live_l = {o.addr for o in c.objects if o.kind == "proc" and o.mode == Mode.L}
        blocked = [o.chan for o in waiting if isinstance(o.body, Acquire)
                   and o.body.shared.name in live_l]
        if blocked:
            return Blocked(blocked)
        if c.replay is not None and any(isinstance(o.body, Acquire) for o in waiting):
            raise ReplayDivergence("recorded acquisition order cannot be followed")
        raise StuckIllTyped("no rule applies to: " + ", ".join(str(o) for o in waiting))

    # -- helpers
    def _provider(self, c: Configuration, name: str) -> Optional[SemObject]:
        for o in c.objects:
            if o.chan == name:
                return o
        return None

    def _client_msg(self, c: Configuration, name: str, forms) -> Optional[SemObject]:
        for o in c.objects:
            if o.kind == "msg" and o.chan != name and isinstance(o.body, forms) \
                    and o.body.chan.name == name:
                return o
        return None

    def _unf(self, t):
        return unfold(self.sig, t)

    def _insert_before(self, c: Configuration, anchor: SemObject, o: SemObject):
        c.objects.insert(c.objects.index(anchor), o)

    def _charge(self, o: SemObject, mu: int):
        o.work += mu
        o.q -= mu

    def _eval_args(self, o: SemObject, args):
        out, mu = [], 0
        for a in args:
            if isinstance(a, ChanRef) or is_value(a):
                out.append(a)
                continue
            v, k = evaluate(self.sig, a)
            mu += k
            out.append(v)
        return tuple(out), mu

    # -- rules
    def fire(self, c: Configuration, o: SemObject):
        p = o.body
        sig = self.sig

        if isinstance(p, Work):
            self._charge(o, int(p.pot))
            if p.slack:
                c.slack += int(p.pot)
            o.body = p.cont
            return "work", (o.chan,)

        if isinstance(p, Let):
            v, mu = evaluate(sig, p.expr)
            self._charge(o, mu)
            o.body = subst_proc(p.cont, {}, {p.var: v})
            return "let", (o.chan,)

        if isinstance(p, If):
            v, mu = evaluate(sig, p.cond)
            self._charge(o, mu)
            o.body = p.then if v.value else p.other
            return "if", (o.chan,)

        if isinstance(p, SendValue) and not is_value(p.expr):
            v, mu = evaluate(sig, p.expr)
            self._charge(o, mu)
            o.body = dataclasses.replace(p, expr=v)
            return "internal", (o.chan,)

        if isinstance(p, (Spawn, TailCall)):
            args, mu = self._eval_args(o, p.args)
            callee = p.callee
            if not isinstance(callee, str) and not is_value(callee):
                callee, k = evaluate(sig, callee)
                mu += k
            if mu or args != p.args or callee is not p.callee:
                self._charge(o, mu)
                o.body = dataclasses.replace(p, args=args, callee=callee)
                return "internal", (o.chan,)
            return self._call(c, o, p)

        if isinstance(p, _SENDS):
            name = p.chan.name
            if name == o.chan:
                return self._send_offered(c, o, p)
            return self._send_client(c, o, p)

        if isinstance(p, _RECVS):
            name = p.chan.name
            if name == o.chan:
                forms = {Case: SendLabel, RecvChan: SendChan, RecvValue: SendValue, Get: Pay}
                m = self._client_msg(c, name, forms[type(p)])
                if m is None:
                    return None
                return self._recv_offered(c, o, p, m)
            m = self._provider(c, name)
            if m is None or m.kind != "msg" or not isinstance(m.body, _SENDS) \
                    or m.body.chan.name != name:
                return None
            return self._recv_client(c, o, p, m)

        if isinstance(p, Close):
            o.kind = "msg"
            return "close", (o.chan,)

        if isinstance(p, Wait):
            m = self._provider(c, p.chan.name)
            if m is None or m.kind != "msg" or not isinstance(m.body, Close):
                return None
            o.work += m.work
            o.q += m.q
            c.objects.remove(m)
            o.body = p.cont
            return "wait", (o.chan, p.chan.name)

        if isinstance(p, Fwd):
            d = p.src.name
            m = self._provider(c, d)
            if m is not None and m.kind == "msg":
                new = SemObject("msg", o.chan, o.mode, o.work + m.work,
                                rename_channel(m.body, d, o.chan), o.q + m.q, o.stype)
                c.objects[c.objects.index(o)] = new
                c.objects.remove(m)
                return "fwd+", (o.chan, d)
            m = self._client_msg(c, o.chan, _SENDS)
            if m is not None:
                m.body = rename_channel(m.body, o.chan, d)
                m.work += o.work
                m.q += o.q
                c.objects.remove(o)
                return "fwd-", (o.chan, d)
            return None

        if isinstance(p, Acquire):
            a = p.shared.name
            acc = self._provider(c, a)
            if acc is None or acc.kind != "proc" or not isinstance(acc.body, Accept):
                return None
            return self._acquire(c, acc, a)

        if isinstance(p, Accept):
            return self._acquire(c, o, o.chan)

        if isinstance(p, Release):
            prov = self._provider(c, p.chan.name)
            if prov is None or not isinstance(prov.body, Detach):
                return None
            return self._release(c, prov, o)

        if isinstance(p, Detach):
            for cl in c.objects:
                if cl.kind == "proc" and isinstance(cl.body, Release) \
                        and cl.body.chan.name == o.chan:
                    return self._release(c, o, cl)
            return None

        raise StuckIllTyped(f"unknown process form {type(p).__name__}")

    def _cont_type(self, t, p):
        u = self._unf(t)
        if isinstance(p, SendLabel):
            return u.branch(p.label)
        if isinstance(p, Case):
            raise AssertionError
        return u.cont

    def _send_offered(self, c, o, p):
        old = o.chan
        new = self.fresh(c, old)
        fwd = Fwd(ChanRef(old, o.mode), ChanRef(new, o.mode))
        q = int(p.pot) if isinstance(p, Pay) else 0
        msg = SemObject("msg", old, o.mode, 0, dataclasses.replace(p, cont=fwd), q, o.stype)
        o.q -= q
        o.stype = self._cont_type(o.stype, p)
        o.chan = new
        o.body = rename_channel(p.cont, old, new)
        c.objects.insert(c.objects.index(o) + 1, msg)
        return _rule_name(p, True), (old, new)

    def _send_client(self, c, o, p):
        name = p.chan.name
        prov = self._provider(c, name)
        if prov is None:
            raise StuckIllTyped(f"no provider for ${name}")
        new = self.fresh(c, name)
        fwd = Fwd(ChanRef(new, prov.mode), ChanRef(name, prov.mode))
        q = int(p.pot) if isinstance(p, Pay) else 0
        stype = self._cont_type(prov.stype, p)
        msg = SemObject("msg", new, prov.mode, 0, dataclasses.replace(p, cont=fwd), q, stype)
        o.q -= q
        o.body = rename_channel(p.cont, name, new)
        self._insert_before(c, o, msg)
        return _rule_name(p, False), (name, new)

    def _recv_offered(self, c, o, p, m):
        old = o.chan
        new = m.chan
        sent = m.body
        o.work += m.work
        o.q += m.q
        u = self._unf(o.stype)
        chans, vals = {old: new}, {}
        if isinstance(p, Case):
            body = dict(p.branches)[sent.label]
            o.stype = u.branch(sent.label)
        else:
            body = p.cont
            o.stype = u.cont
            if isinstance(p, RecvChan):
                chans[p.bind.name] = sent.arg.name
            elif isinstance(p, RecvValue):
                vals[p.var] = sent.expr
        o.chan = new
        o.body = subst_proc(body, chans, vals)
        c.objects.remove(m)
        return _rule_name(p, True), (old, new)

    def _recv_client(self, c, o, p, m):
        name = p.chan.name
        sent = m.body
        want = {Case: SendLabel, RecvChan: SendChan, RecvValue: SendValue, Get: Pay}[type(p)]
        if not isinstance(sent, want):
            raise StuckIllTyped(f"{type(p).__name__} on ${name} met a {type(sent).__name__}")
        new = sent.cont.src.name
        o.work += m.work
        o.q += m.q
        chans, vals = {name: new}, {}
        if isinstance(p, Case):
            body = dict(p.branches)[sent.label]
        else:
            body = p.cont
            if isinstance(p, RecvChan):
                chans[p.bind.name] = sent.arg.name
            elif isinstance(p, RecvValue):
                vals[p.var] = sent.expr
        o.body = subst_proc(body, chans, vals)
        c.objects.remove(m)
        return _rule_name(p, False), (name, new)

    def _call(self, c, o, p):
        callee = p.callee
        if isinstance(callee, str):
            d = self.sig.proc_defs[callee]
            mode, stype, pot = d.mode, d.offered.stype, int(d.pot)
        else:
            mode, stype, pot = callee.chan.mode, None, 0
        if isinstance(p, TailCall):
            if isinstance(callee, str):
                new = self.instantiate(c, d, p.args, o.chan)
                o.body, o.stype = new.body, stype
            else:
                o.body = self._procval_body(c, callee, p.args, o.chan)
            return "call", (o.chan,)
        name = self.fresh(c, p.bind.name)
        if isinstance(callee, str):
            child = self.instantiate(c, d, p.args, name)
        else:
            body = self._procval_body(c, callee, p.args, name)
            child = SemObject("proc", name, mode, 0, body, 0, _procval_type(callee))
        if mode == Mode.S:
            c.directory[name] = [Mode.S, child.stype]
        o.q -= pot
        o.body = subst_proc(p.cont, {p.bind.name: name})
        self._insert_before(c, o, child)
        return "spawn", (o.chan, name)

    def _procval_body(self, c, pv: ProcVal, args, chan):
        chans = {pv.chan.name: chan}
        for formal, actual in zip(pv.args, args):
            chans[formal.name] = actual.name
        return subst_proc(pv.body, chans)

    def _acquire(self, c, acc: SemObject, a: str):
        if c.replay is not None:
            k = len(c.acquires)
            if k >= len(c.replay) or c.replay[k] != a:
                return None
        acq = None
        for cl in c.objects:
            if cl.kind == "proc" and isinstance(cl.body, Acquire) and cl.body.shared.name == a:
                acq = cl
                break
        if acq is None:
            return None
        lname = self.fresh(c, a)
        u = self._unf(acc.stype)
        accept = acc.body
        acc.body = subst_proc(accept.cont, {accept.bind.name: lname})
        acc.chan, acc.mode, acc.addr, acc.stype = lname, Mode.L, a, u.cont
        acq.body = subst_proc(acq.body.cont, {acq.body.bind.name: lname})
        c.directory[a][0] = Mode.L
        c.acquires.append(a)
        return "acquire", (a, acq.chan, lname)

    def _release(self, c, prov: SemObject, cl: SemObject):
        a = prov.addr
        lname = prov.chan
        det = prov.body
        u = self._unf(prov.stype)
        prov.body = subst_proc(det.cont, {det.bind.name: a})
        prov.chan, prov.mode, prov.addr, prov.stype = a, Mode.S, None, u.cont
        rel = cl.body
        cl.body = subst_proc(rel.cont, {rel.bind.name: a})
        c.directory[a][0] = Mode.S
        return "release", (a, cl.chan, lname)

    # -- driving
    def run(self, c: Configuration, fuel: int = 100000, assertions: bool = False,
            check_energy: bool = True, root: Optional[SemObject] = None,
            on_step=None) -> RunResult:
        """root is the transaction object; its residual potential is not a deposit."""
        def rest_q():
            return sum(o.q for o in c.objects if o is not root)
        e0, w0, s0, rest0 = energy(c), total_work(c), c.slack, rest_q()
        trace, cache = [], {}
        if assertions:
            typecheck_config(self.sig, c, cache)
        outcome = None
        steps = 0
        while steps < fuel:
            r = self.step(c)
            if not isinstance(r, Stepped):
                outcome = r
                break
            steps += 1
            e = energy(c)
            line = TraceLine(steps, r.rule, r.subjects, total_work(c), e)
            trace.append(line)
            if on_step is not None:
                on_step(line, c)
            if (assertions or check_energy) and e != e0:
                raise AssertionFailure("energy", steps, f"energy {e} differs from {e0}")
            if assertions:
                try:
                    typecheck_config(self.sig, c, cache)
                except NomError as err:
                    raise AssertionFailure("preservation", steps, str(err)) from err
        res = RunResult(c, outcome or FuelExhausted(), trace, steps)
        res.work_used = total_work(c) - w0
        res.slack = c.slack - s0
        res.deposited = rest_q() - rest0
        return res


def _procval_type(pv: ProcVal):
    # TODO(runtime-procval): carry the monadic type through evaluation so spawned
    # process values can be typed in configurations
    raise StuckIllTyped("spawning a process value is not supported by the engine")


def _rule_name(p, offered: bool) -> str:
    base = {SendLabel: "label", SendChan: "chan", SendValue: "value", Pay: "pay",
            Case: "case", RecvChan: "chan", RecvValue: "value", Get: "get"}[type(p)]
    if isinstance(p, _SENDS):
        return f"{base}-send" if offered else f"{base}-csend"
    return f"{base}-crecv" if offered else f"{base}-recv"


# ---------------------------------------------------------------- configuration typing

def typecheck_config(sig: Signature, c: Configuration, cache: Optional[dict] = None) -> None:
    """Raise IllTyped unless every object is well typed against its providers."""
    providers = {}
    for o in c.objects:
        if o.chan in providers:
            raise IllTyped("well-formedness", f"two objects provide {o.chan}", o.chan)
        providers[o.chan] = o
    clients = {}
    uses = {}
    for o in c.objects:
        names = channel_names(o.body)
        mine = []
        for n in names:
            if n == o.chan or n not in providers:
                continue
            pv = providers[n]
            if pv.mode == Mode.S:
                continue
            mine.append(n)
            if n in clients:
                raise IllTyped("linearity", f"{n} has two clients", n)
            clients[n] = o
        uses[o.chan] = mine
    for o in c.objects:
        if o.mode in (Mode.R, Mode.L) and o.chan not in clients:
            raise IllTyped("linearity", f"no client for {o.chan}", o.chan)
    # acyclicity of the provider/client forest
    state = {}

    def visit(n):
        if state.get(n) == 1:
            raise IllTyped("order", f"cyclic channel dependency through {n}", n)
        if state.get(n) == 2:
            return
        state[n] = 1
        for m in uses.get(n, ()):
            visit(m)
        state[n] = 2
    for o in c.objects:
        visit(o.chan)
    for a, (m, t) in c.directory.items():
        pv = providers.get(a)
        if m == Mode.S and (pv is None or pv.mode != Mode.S):
            raise IllTyped("directory", f"shared address {a} has no mode-S provider", a)
        if m == Mode.L and not any(o.addr == a for o in c.objects):
            raise IllTyped("directory", f"acquired address {a} has no mode-L provider", a)

    for o in c.objects:
        if o.q < 0 or o.work < 0:
            raise IllTyped("potential", f"negative work or potential at {o.chan}", o.chan)
        delta = {n: (providers[n].stype, providers[n].mode) for n in uses[o.chan]}
        # an acquired address still types its later acquires by its shared type
        gamma = {n: c.directory[n][1] for n in channel_names(o.body) if n in c.directory
                 and n != o.chan}
        key = None
        if cache is not None:
            key = (o.kind, o.chan, o.mode, o.q, id(o.body), id(o.stype),
                   tuple(sorted((n, id(t), m) for n, (t, m) in delta.items())),
                   tuple(sorted(gamma)))
            if key in cache:
                continue
        rule = {Mode.R: "proc_R", Mode.S: "proc_S", Mode.L: "proc_L", Mode.T: "proc_T"}[o.mode]
        if o.kind == "msg":
            rule = "msg"
        rep = check_process(sig, {}, gamma, delta, o.q, o.body, (o.chan, o.stype, o.mode),
                            messages=(o.kind == "msg"))
        if not rep.ok:
            raise IllTyped(rule, f"{o}: {rep.error}", o.chan)
        if key is not None:
            cache[key] = (o.body, o.stype, tuple(t for t, _ in delta.values()))


# ---------------------------------------------------------------- entry points

def boot(sig: Signature, main: str, potential: int, args=(), seed: Optional[int] = None):
    """Configuration with one transaction process; its leftover supply is returned separately."""
    d = sig.proc_defs.get(main)
    if d is None:
        raise NomError(f"unknown process '{main}'")
    linear = [p for p in d.chan_args if p.chan.mode != Mode.S]
    if d.mode != Mode.T or linear:
        raise ModeViolation(f"'{main}' must be a transaction with no linear channel parameters")
    if potential < int(d.pot):
        raise InsufficientPotential(f"'{main}' needs {d.pot} units of potential, supplied {potential}")
    c = Configuration()
    Engine(sig, seed).spawn_root(c, main, args)
    return c


def step(sig: Signature, c: Configuration, seed: Optional[int] = None):
    return Engine(sig, seed).step(c)


def run(sig: Signature, c: Configuration, fuel: int = 100000, assertions: bool = False,
        seed: Optional[int] = None) -> RunResult:
    root = next((o for o in c.objects if o.mode == Mode.T), None)
    return Engine(sig, seed).run(c, fuel, assertions, root=root)
