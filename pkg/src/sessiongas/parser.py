"""Lexer, recursive-descent parser and pretty printer for the `.nom` surface syntax."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import (
    Accept, Acquire, Annot, App, Arrow, Base, BinOp, BoolLit, Case, CaseE, ChanParam, ChanRef,
    Close, Cons, Detach, DuplicateName, External, FunDecl, FunParam, Fst, Fwd, Get, GetPot, If, IfE,
    Inl, Inr, IntLit, Internal, KIND_MODE, Lam, Let, LetE, ListT, Lolli, Match, Mode, ModeVar,
    MonadT, Named, Nil, NomSyntaxError, Not, One, Pair, Pay, PayPot, PotVar, ProcDecl, ProcVal,
    ProdT, RecvChan, RecvValue, RecvVal, Release, SendChan, SendLabel, SendVal, SendValue,
    Signature, Snd, SourceProgram, Span, Spawn, SumT, TailCall, Tensor, Tick, TypeDecl, Down, Up,
    UnknownName, Var, Wait, Work, check_contractive, walk,
)

# ---------------------------------------------------------------- lexer

KEYWORDS = {
    "type", "stype", "proc", "fun", "asset", "contract", "transaction",
    "case", "send", "recv", "close", "wait", "work", "pay", "get",
    "accept", "acquire", "detach", "release", "let", "in", "if", "then", "else",
    "tick", "true", "false", "int", "bool", "list", "match", "with", "of",
    "not", "fst", "snd", "inl", "inr",
}

# longest operators first
_OPS = [
    "/\\", "\\/", "<|", "|>", "|-", "->", "-o", "<-", "=>", "::", "<=", ">=", "<>",
    "&&", "||", "+{", "&{",
    "(", ")", "[", "]", "{", "}", ",", ";", ":", ".", "|", "=", "+", "-", "*",
    "<", ">", "^", "/", "\\",
]

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lcomment>%[^\n]*)
  | (?P<getpot><\{\s*(?:\d+|\*)\s*\}\|)
  | (?P<paypot>\|\{\s*(?:\d+|\*)\s*\}>)
  | (?P<turn>\|\{\s*(?:\d+|\*)\s*\}-)
  | (?P<pot>\{\s*(?:\d+|\*)\s*\})
  | (?P<lin>\$[A-Za-z_][A-Za-z0-9_']*)
  | (?P<shr>\#[A-Za-z_][A-Za-z0-9_']*)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # getpot paypot turn pot lin shr int id op eof
    text: str
    span: Span

    @property
    def payload(self) -> str:
        return re.sub(r"[^0-9*]", "", self.text)

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(s):
        nonlocal line, col
        for ch in s:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        if text.startswith("(*", i):
            j = text.find("*)", i + 2)
            if j < 0:
                raise NomSyntaxError(Span(file, line, col), ["*)"], "end of input")
            advance(text[i:j + 2])
            i = j + 2
            continue
        m = _TOKEN_RE.match(text, i)
        if m is not None:
            kind = m.lastgroup
            s = m.group()
            if kind not in ("ws", "lcomment"):
                toks.append(Token(kind, s, Span(file, line, col)))
            advance(s)
            i = m.end()
            continue
        for op in _OPS:
            if text.startswith(op, i):
                # a lambda backslash never precedes '/'
                toks.append(Token("op", op, Span(file, line, col)))
                advance(op)
                i += len(op)
                break
        else:
            raise NomSyntaxError(Span(file, line, col), ["token"], repr(text[i]))
    toks.append(Token("eof", "", Span(file, line, col)))
    return toks


# ---------------------------------------------------------------- parser

_MODES = {"R": Mode.R, "S": Mode.S, "L": Mode.L, "T": Mode.T, "P": Mode.R}
_PROC_END = {")", "|", "}"}
_CMP_OPS = ("=", "<>", "<", ">", "<=", ">=")


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str, file: str = "<input>"):
        self.file = file
        self.toks = tokenize(text, file)
        self.i = 0
        self.npot = 0
        self.nmode = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def is_op(self, s: str, tok: Optional[Token] = None) -> bool:
        t = tok or self.tok
        return t.kind == "op" and t.text == s

    def is_kw(self, s: str, tok: Optional[Token] = None) -> bool:
        t = tok or self.tok
        return t.kind == "id" and t.text == s

    def fail(self, expected):
        raise NomSyntaxError(self.tok.span, list(expected), self.tok.describe())

    def next(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def expect_op(self, s: str) -> Token:
        if not self.is_op(s):
            self.fail([repr(s)])
        return self.next()

    def expect_kw(self, s: str) -> Token:
        if not self.is_kw(s):
            self.fail([repr(s)])
        return self.next()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "id" or self.tok.text in KEYWORDS:
            self.fail([what])
        return self.next()

    def label(self) -> Token:
        if self.tok.kind != "id":
            self.fail(["label"])
        return self.next()

    def fresh_pot(self) -> PotVar:
        self.npot += 1
        return PotVar(f"p{self.npot}")

    def fresh_mode(self) -> ModeVar:
        self.nmode += 1
        return ModeVar(f"m{self.nmode}")

    def pot_of(self, tok: Token):
        s = tok.payload
        return self.fresh_pot() if s == "*" else int(s)

    # -- program
    def program(self) -> SourceProgram:
        decls = []
        seen = {"type": {}, "proc": {}}
        while self.tok.kind != "eof":
            d = self.decl()
            ns = "type" if isinstance(d, TypeDecl) else "proc"
            if d.name in seen[ns]:
                raise DuplicateName(f"duplicate definition of '{d.name}'", d.span)
            seen[ns][d.name] = d
            decls.append(d)
        return SourceProgram(tuple(decls), self.file)

    def decl(self):
        t = self.tok
        if self.is_kw("type") or self.is_kw("stype"):
            self.next()
            name = self.ident("type name")
            self.expect_op("=")
            return TypeDecl(name.text, self.stype(), t.text, span=name.span)
        if self.is_kw("proc"):
            self.next()
            kind = self.tok
            if kind.text not in KIND_MODE:
                self.fail(["asset", "contract", "transaction"])
            self.next()
            name = self.ident("process name")
            self.expect_op(":")
            params = self.context()
            if self.is_op("|-"):
                self.next()
                pot = 0
            elif self.tok.kind == "turn":
                pot = self.pot_of(self.next())
            else:
                self.fail(["|-", "|{q}-"])
            self.expect_op("(")
            offered = self.chan_param_body()
            self.expect_op(")")
            self.expect_op("=")
            body = self.proc()
            return ProcDecl(name.text, kind.text, tuple(params), pot, offered, body, span=name.span)
        if self.is_kw("fun"):
            self.next()
            name = self.ident("function name")
            self.expect_op(":")
            ft = self.ftype()
            self.expect_op("=")
            return FunDecl(name.text, ft, self.expr(), span=name.span)
        self.fail(["type", "stype", "proc", "fun"])

    def context(self) -> list:
        if self.is_op("."):
            self.next()
            return []
        params = []
        while True:
            start = self.expect_op("(")
            if self.tok.kind in ("lin", "shr"):
                params.append(self.chan_param_body())
            else:
                name = self.ident("parameter")
                self.expect_op(":")
                params.append(FunParam(name.text, self.ftype(), span=start.span))
            self.expect_op(")")
            if not self.is_op(","):
                return params
            self.next()

    def chan_param_body(self) -> ChanParam:
        c = self.chanref()
        self.expect_op(":")
        return ChanParam(c, self.stype(), span=c.span)

    def mode_ann(self):
        if not self.is_op("["):
            return self.fresh_mode()
        self.next()
        t = self.tok
        if t.kind != "id" or t.text not in _MODES:
            self.fail(["R", "S", "L", "T", "P"])
        self.next()
        self.expect_op("]")
        return _MODES[t.text]

    def chanref(self) -> ChanRef:
        t = self.tok
        if t.kind not in ("lin", "shr"):
            self.fail(["channel"])
        self.next()
        return ChanRef(t.text[1:], self.mode_ann(), t.kind == "shr", span=t.span)

    # -- session types
    def stype(self):
        t = self.tok
        sp = t.span
        if self.is_op("/\\"):
            self.next()
            return Up(self.stype(), span=sp)
        if self.is_op("\\/"):
            self.next()
            return Down(self.stype(), span=sp)
        if t.kind == "getpot":
            self.next()
            return GetPot(self.pot_of(t), self.stype(), span=sp)
        if t.kind == "paypot":
            self.next()
            return PayPot(self.pot_of(t), self.stype(), span=sp)
        if self.is_op("<|"):
            self.next()
            return GetPot(1, self.stype(), span=sp)
        if self.is_op("|>"):
            self.next()
            return PayPot(1, self.stype(), span=sp)
        ft = self.try_value_prefix()
        if ft is not None:
            ctor = RecvVal if self.next().text == "->" else SendVal
            return ctor(ft, self.stype(), span=sp)
        left = self.satom()
        if self.is_op("*") or self.is_op("-o"):
            ctor = Tensor if self.next().text == "*" else Lolli
            m = self.mode_ann()
            return ctor(left, m, self.stype(), span=sp)
        return left

    def try_value_prefix(self):
        """Parse `ftype ->` or `ftype ^` if present; otherwise restore position."""
        t = self.tok
        starts = self.is_kw("int") or self.is_kw("bool") or self.is_kw("list") or self.is_op("{") \
            or self.is_op("(")
        if not starts:
            return None
        save = (self.i, self.npot, self.nmode)
        try:
            ft = self.fatom()
        except NomSyntaxError:
            if t.kind == "op" and t.text == "(":
                self.i, self.npot, self.nmode = save
                return None
            raise
        if self.is_op("->") or self.is_op("^"):
            return ft
        if t.kind == "op" and t.text == "(":
            self.i, self.npot, self.nmode = save
            return None
        self.fail(["->", "^"])

    def satom(self):
        t = self.tok
        if t.kind == "int" and t.text == "1":
            self.next()
            return One(span=t.span)
        if self.is_op("+{") or self.is_op("&{"):
            self.next()
            branches = []
            seen = set()
            while True:
                lab = self.label()
                if lab.text in seen:
                    raise DuplicateName(f"duplicate label '{lab.text}'", lab.span)
                seen.add(lab.text)
                self.expect_op(":")
                branches.append((lab.text, self.stype()))
                if not self.is_op(","):
                    break
                self.next()
            self.expect_op("}")
            ctor = Internal if t.text == "+{" else External
            return ctor(tuple(branches), span=t.span)
        if self.is_op("("):
            self.next()
            s = self.stype()
            self.expect_op(")")
            return s
        if t.kind == "id" and t.text not in KEYWORDS:
            self.next()
            return Named(t.text, span=t.span)
        self.fail(["session type"])

    # -- functional types
    def ftype(self):
        sp = self.tok.span
        left = self.fsum()
        if self.is_op("->"):
            self.next()
            cp, rp = 0, 0
            if self.is_op("{"):
                self.next()
                cp = self.pot_value()
                self.expect_op("/")
                rp = self.pot_value()
                self.expect_op("}")
            return Arrow(left, self.ftype(), cp, rp, span=sp)
        return left

    def pot_value(self):
        t = self.tok
        if t.kind == "int":
            self.next()
            return int(t.text)
        if self.is_op("*"):
            self.next()
            return self.fresh_pot()
        self.fail(["potential"])

    def fsum(self):
        sp = self.tok.span
        left = self.fprod()
        if self.is_op("+"):
            self.next()
            return SumT(left, self.fsum(), span=sp)
        return left

    def fprod(self):
        sp = self.tok.span
        left = self.fatom()
        if self.is_op("*"):
            self.next()
            return ProdT(left, self.fprod(), span=sp)
        return left

    def fatom(self):
        t = self.tok
        if self.is_kw("int") or self.is_kw("bool"):
            self.next()
            return Base(t.text, span=t.span)
        if self.is_kw("list"):
            self.next()
            pot = 0
            if self.tok.kind == "pot":
                pot = self.pot_of(self.next())
            return ListT(self.fatom(), pot, span=t.span)
        if self.is_op("("):
            self.next()
            ft = self.ftype()
            self.expect_op(")")
            return ft
        if self.is_op("{"):
            self.next()
            offered = self.stype()
            mode = self.mode_ann()
            self.expect_op("<-")
            shared, linear = [], []
            if not self.is_op("}"):
                while True:
                    u = self.stype()
                    m = self.mode_ann()
                    if m == Mode.S:
                        shared.append(u)
                    else:
                        linear.append((u, m))
                    if not self.is_op(","):
                        break
                    self.next()
            self.expect_op("}")
            return MonadT(offered, mode, tuple(shared), tuple(linear), span=t.span)
        self.fail(["functional type"])

    # -- processes
    def proc(self):
        t = self.tok
        sp = t.span
        if self.is_op("{"):
            self.next()
            p = self.proc()
            self.expect_op("}")
            return p
        if self.is_op("("):
            self.next()
            p = self.proc()
            self.expect_op(")")
            return p
        if t.kind in ("lin", "shr"):
            c = self.chanref()
            if self.is_op("."):
                self.next()
                lab = self.label()
                return SendLabel(c, lab.text, self.seq(), span=sp)
            self.expect_op("<-")
            if self.is_kw("accept") or self.is_kw("acquire"):
                ctor = Accept if self.next().text == "accept" else Acquire
                return ctor(c, self.chanref(), self.seq(), span=sp)
            if self.is_kw("detach") or self.is_kw("release"):
                ctor = Detach if self.next().text == "detach" else Release
                return ctor(c, self.chanref(), self.seq(), span=sp)
            if self.is_kw("recv"):
                self.next()
                return RecvChan(c, self.chanref(), self.seq(), span=sp)
            if self.tok.kind in ("lin", "shr"):
                return Fwd(c, self.chanref(), span=sp)
            callee = self.callee()
            self.expect_op("<-")
            args = []
            while self.tok.kind in ("lin", "shr") or self.starts_atom():
                args.append(self.chanref() if self.tok.kind in ("lin", "shr") else self.atom())
            if self.is_op(";"):
                self.next()
                return Spawn(c, callee, tuple(args), self.proc(), span=sp)
            return TailCall(c, callee, tuple(args), span=sp)
        if t.kind == "id" and t.text not in KEYWORDS and self.is_op("=", self.peek()):
            self.next()
            self.next()
            self.expect_kw("recv")
            return RecvValue(t.text, self.chanref(), self.seq(), span=sp)
        if self.is_kw("case"):
            self.next()
            c = self.chanref()
            self.expect_op("(")
            branches = []
            seen = set()
            while True:
                lab = self.label()
                if lab.text in seen:
                    raise DuplicateName(f"duplicate branch '{lab.text}'", lab.span)
                seen.add(lab.text)
                self.expect_op("=>")
                branches.append((lab.text, self.proc()))
                if not self.is_op("|"):
                    break
                self.next()
            self.expect_op(")")
            return Case(c, tuple(branches), span=sp)
        if self.is_kw("send"):
            self.next()
            c = self.chanref()
            if self.tok.kind in ("lin", "shr"):
                return SendChan(c, self.chanref(), self.seq(), span=sp)
            return SendValue(c, self.expr(), self.seq(), span=sp)
        if self.is_kw("close"):
            self.next()
            return Close(self.chanref(), span=sp)
        if self.is_kw("wait"):
            self.next()
            return Wait(self.chanref(), self.seq(), span=sp)
        if self.is_kw("work"):
            self.next()
            if self.tok.kind == "pot":
                pot = self.pot_of(self.next())
                return Work(pot, self.seq(), True, span=sp)
            return Work(1, self.seq(), False, span=sp)
        if self.is_kw("pay") or self.is_kw("get"):
            ctor = Pay if self.next().text == "pay" else Get
            c = self.chanref()
            pot = self.pot_of(self.next()) if self.tok.kind == "pot" else 1
            return ctor(c, pot, self.seq(), span=sp)
        if self.is_kw("let"):
            self.next()
            x = self.ident("variable")
            self.expect_op("=")
            e = self.expr()
            return Let(x.text, e, self.seq(), span=sp)
        if self.is_kw("if"):
            self.next()
            cond = self.expr()
            self.expect_kw("then")
            a = self.proc()
            self.expect_kw("else")
            return If(cond, a, self.proc(), span=sp)
        self.fail(["process"])

    def seq(self):
        self.expect_op(";")
        return self.proc()

    def callee(self):
        t = self.tok
        if t.kind == "id" and t.text not in KEYWORDS:
            self.next()
            return t.text
        if self.is_op("(") or self.is_op("{"):
            return self.atom()
        self.fail(["process name", "expression"])

    # -- expressions
    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "int":
            return True
        if t.kind == "id":
            return t.text not in KEYWORDS or t.text in ("true", "false")
        return self.is_op("(") or self.is_op("[") or self.is_op("{")

    def expr(self):
        t = self.tok
        sp = t.span
        if self.is_kw("if"):
            self.next()
            c = self.expr()
            self.expect_kw("then")
            a = self.expr()
            self.expect_kw("else")
            return IfE(c, a, self.expr(), span=sp)
        if self.is_kw("let"):
            self.next()
            x = self.ident("variable")
            self.expect_op("=")
            b = self.expr()
            self.expect_kw("in")
            return LetE(x.text, b, self.expr(), span=sp)
        if self.is_op("\\"):
            self.next()
            x = self.ident("variable")
            self.expect_op(":")
            ft = self.ftype()
            self.expect_op("=>")
            return Lam(x.text, ft, self.expr(), span=sp)
        if self.is_kw("match"):
            self.next()
            s = self.expr()
            self.expect_kw("with")
            self.expect_op("[")
            self.expect_op("]")
            self.expect_op("=>")
            nb = self.expr()
            self.expect_op("|")
            h = self.ident("variable")
            self.expect_op("::")
            tl = self.ident("variable")
            self.expect_op("=>")
            return Match(s, nb, h.text, tl.text, self.expr(), span=sp)
        if self.is_kw("case"):
            self.next()
            s = self.expr()
            self.expect_kw("of")
            self.expect_kw("inl")
            lv = self.ident("variable")
            self.expect_op("=>")
            lb = self.expr()
            self.expect_op("|")
            self.expect_kw("inr")
            rv = self.ident("variable")
            self.expect_op("=>")
            return CaseE(s, lv.text, lb, rv.text, self.expr(), span=sp)
        return self.e_or()

    def _binary(self, sub, ops):
        sp = self.tok.span
        left = sub()
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.next().text
            left = BinOp(op, left, sub(), span=sp)
        return left

    def e_or(self):
        return self._binary(self.e_and, ("||",))

    def e_and(self):
        return self._binary(self.e_cmp, ("&&",))

    def e_cmp(self):
        sp = self.tok.span
        left = self.e_cons()
        if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
            op = self.next().text
            return BinOp(op, left, self.e_cons(), span=sp)
        return left

    def e_cons(self):
        sp = self.tok.span
        head = self.e_add()
        if self.is_op("::"):
            self.next()
            return Cons(head, self.e_cons(), span=sp)
        return head

    def e_add(self):
        return self._binary(self.e_mul, ("+", "-"))

    def e_mul(self):
        return self._binary(self.e_unary, ("*",))

    def e_unary(self):
        t = self.tok
        for kw, ctor in (("not", Not), ("fst", Fst), ("snd", Snd), ("inl", Inl), ("inr", Inr)):
            if self.is_kw(kw):
                self.next()
                return ctor(self.e_unary(), span=t.span)
        e = self.atom()
        while self.starts_atom():
            e = App(e, self.atom(), span=t.span)
        return e

    def atom(self):
        t = self.tok
        sp = t.span
        if t.kind == "int":
            self.next()
            return IntLit(int(t.text), span=sp)
        if self.is_kw("true") or self.is_kw("false"):
            self.next()
            return BoolLit(t.text == "true", span=sp)
        if t.kind == "id" and t.text not in KEYWORDS:
            self.next()
            return Var(t.text, span=sp)
        if self.is_op("["):
            self.next()
            items = []
            if not self.is_op("]"):
                items.append(self.expr())
                while self.is_op(","):
                    self.next()
                    items.append(self.expr())
            self.expect_op("]")
            e = Nil(span=sp)
            for x in reversed(items):
                e = Cons(x, e, span=sp)
            return e
        if self.is_op("{"):
            self.next()
            c = self.chanref()
            self.expect_op("<-")
            args = []
            while self.tok.kind in ("lin", "shr"):
                args.append(self.chanref())
            self.expect_op("=>")
            body = self.proc()
            self.expect_op("}")
            return ProcVal(c, tuple(args), body, span=sp)
        if self.is_op("("):
            self.next()
            if self.is_kw("tick"):
                self.next()
                cost = 1
                if self.tok.kind == "pot":
                    pt = self.next()
                    if pt.payload == "*":
                        raise NomSyntaxError(pt.span, ["integer cost"], "'*'")
                    cost = int(pt.payload)
                self.expect_op(";")
                e = self.expr()
                self.expect_op(")")
                return Tick(cost, e, span=sp)
            e = self.expr()
            if self.is_op(","):
                self.next()
                r = self.expr()
                self.expect_op(")")
                return Pair(e, r, span=sp)
            if self.is_op(":"):
                self.next()
                ft = self.ftype()
                self.expect_op(")")
                return Annot(e, ft, span=sp)
            self.expect_op(")")
            return e
        self.fail(["expression"])

    def finish(self):
        if self.tok.kind != "eof":
            self.fail(["end of input"])


def parse_program(text: str, file: str = "<input>") -> SourceProgram:
    return Parser(text, file).program()


def _parse_with(method: str, text: str):
    p = Parser(text)
    r = getattr(p, method)()
    p.finish()
    return r


def parse_stype(text: str):
    return _parse_with("stype", text)


def parse_ftype(text: str):
    return _parse_with("ftype", text)


def parse_expr(text: str):
    return _parse_with("expr", text)


def parse_proc(text: str):
    return _parse_with("proc", text)


# ---------------------------------------------------------------- signatures

def _fun_binders(d: ProcDecl) -> set:
    names = {p.name for p in d.fun_args}
    for n in walk(d.body):
        if isinstance(n, (RecvValue, Let)):
            names.add(n.var)
    return names


def merge_programs(progs) -> SourceProgram:
    decls = []
    seen = {"type": {}, "proc": {}}
    for prog in progs:
        for d in prog.decls:
            ns = "type" if isinstance(d, TypeDecl) else "proc"
            if d.name in seen[ns]:
                raise DuplicateName(f"duplicate definition of '{d.name}'", d.span)
            seen[ns][d.name] = d
            decls.append(d)
    return SourceProgram(tuple(decls), progs[0].file if progs else "<input>")


def load_signature(p: SourceProgram) -> Signature:
    sig = Signature()
    for d in p.decls:
        if isinstance(d, TypeDecl):
            table = sig.type_defs
        elif isinstance(d, ProcDecl):
            table = sig.proc_defs
        else:
            table = sig.fun_defs
        if d.name in table or (not isinstance(d, TypeDecl)
                               and d.name in (sig.proc_defs.keys() | sig.fun_defs.keys())):
            raise DuplicateName(f"duplicate definition of '{d.name}'", d.span)
        table[d.name] = d.body if isinstance(d, TypeDecl) else d
        if isinstance(d, TypeDecl):
            sig.spans[d.name] = d.span
    for n in walk(p.decls):
        if isinstance(n, Named) and n.name not in sig.type_defs:
            raise UnknownName(f"undefined type '{n.name}'", n.span)
    for d in sig.proc_defs.values():
        local = None
        for n in walk(d.body):
            if isinstance(n, (Spawn, TailCall)) and isinstance(n.callee, str):
                if n.callee in sig.proc_defs or n.callee in sig.fun_defs:
                    continue
                local = _fun_binders(d) if local is None else local
                if n.callee not in local:
                    raise UnknownName(f"undefined process '{n.callee}'", n.span)
    check_contractive(sig)
    return sig


def load_text(text: str, file: str = "<input>") -> Signature:
    return load_signature(parse_program(text, file))


def load_files(paths) -> tuple[SourceProgram, Signature]:
    progs = []
    for path in paths:
        with open(path, encoding="utf-8") as f:
            progs.append(parse_program(f.read(), str(path)))
    prog = merge_programs(progs)
    return prog, load_signature(prog)


# ---------------------------------------------------------------- pretty printer

def _pot(p) -> str:
    return "*" if isinstance(p, PotVar) else str(p)


def _mode(m) -> str:
    return f"[{m.value}]" if isinstance(m, Mode) else ""


def _chan(c: ChanRef) -> str:
    return ("#" if c.shared else "$") + c.name + _mode(c.mode)


def pp_ftype(t) -> str:
    if isinstance(t, Base):
        return t.name
    if isinstance(t, Arrow):
        pots = "" if t.call_pot == 0 and t.ret_pot == 0 else f"{{{_pot(t.call_pot)}/{_pot(t.ret_pot)}}}"
        return f"{_fat(t.arg)} ->{pots} {pp_ftype(t.res)}"
    if isinstance(t, SumT):
        return f"{_fat(t.left)} + {_fat(t.right)}"
    if isinstance(t, ProdT):
        return f"{_fat(t.left)} * {_fat(t.right)}"
    if isinstance(t, ListT):
        pot = "" if t.pot == 0 else f"{{{_pot(t.pot)}}}"
        return f"list{pot} {_fat(t.elem)}"
    if isinstance(t, MonadT):
        uses = [f"{_sat(u)}[S]" for u in t.shared] + [f"{_sat(u)}{_mode(m)}" for u, m in t.linear]
        return f"{{ {_sat(t.offered)}{_mode(t.mode)} <- {', '.join(uses)} }}"
    raise TypeError(type(t).__name__)


def _fat(t) -> str:
    s = pp_ftype(t)
    return s if isinstance(t, (Base, MonadT)) else f"({s})"


def pp_stype(t, indent: int = 0) -> str:
    if isinstance(t, One):
        return "1"
    if isinstance(t, Named):
        return t.name
    if isinstance(t, (Internal, External)):
        opener = "+{" if isinstance(t, Internal) else "&{"
        pad = " " * (indent + 3)
        parts = [f"{l} : {pp_stype(a, indent + 3 + len(l) + 3)}" for l, a in t.branches]
        return opener + " " + (",\n" + pad).join(parts) + " }"
    if isinstance(t, (Tensor, Lolli)):
        op = "*" if isinstance(t, Tensor) else "-o"
        return f"{_sat(t.carried)} {op}{_mode(t.mode)} {pp_stype(t.cont, indent)}"
    if isinstance(t, (SendVal, RecvVal)):
        op = "^" if isinstance(t, SendVal) else "->"
        return f"{_fat(t.vtype)} {op} {pp_stype(t.cont, indent)}"
    if isinstance(t, GetPot):
        return f"<{{{_pot(t.pot)}}}| {pp_stype(t.cont, indent)}"
    if isinstance(t, PayPot):
        return f"|{{{_pot(t.pot)}}}> {pp_stype(t.cont, indent)}"
    if isinstance(t, Up):
        return f"/\\ {pp_stype(t.cont, indent)}"
    if isinstance(t, Down):
        return f"\\/ {pp_stype(t.cont, indent)}"
    raise TypeError(type(t).__name__)


def _sat(t) -> str:
    s = pp_stype(t)
    return s if isinstance(t, (One, Named, Internal, External)) else f"({s})"


_PREC = {"||": 1, "&&": 2, "=": 3, "<>": 3, "<": 3, ">": 3, "<=": 3, ">=": 3,
         "::": 4, "+": 5, "-": 5, "*": 6}


def pp_expr(e) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Nil):
        return "[]"
    if isinstance(e, BinOp):
        return f"{pp_atom(e.left)} {e.op} {pp_atom(e.right)}"
    if isinstance(e, Cons):
        return f"{pp_atom(e.head)} :: {pp_atom(e.tail)}"
    if isinstance(e, (Not, Fst, Snd, Inl, Inr)):
        kw = {Not: "not", Fst: "fst", Snd: "snd", Inl: "inl", Inr: "inr"}[type(e)]
        return f"{kw} {pp_atom(e.arg)}"
    if isinstance(e, IfE):
        return f"if {pp_expr(e.cond)} then {pp_expr(e.then)} else {pp_expr(e.other)}"
    if isinstance(e, LetE):
        return f"let {e.var} = {pp_expr(e.bound)} in {pp_expr(e.body)}"
    if isinstance(e, Lam):
        return f"\\{e.var} : {pp_ftype(e.vtype)} => {pp_expr(e.body)}"
    if isinstance(e, App):
        return f"{pp_atom(e.fn)} {pp_atom(e.arg)}"
    if isinstance(e, Pair):
        return f"({pp_expr(e.left)}, {pp_expr(e.right)})"
    if isinstance(e, CaseE):
        return (f"case {pp_expr(e.scrut)} of inl {e.lvar} => {pp_atom(e.lbody)} "
                f"| inr {e.rvar} => {pp_atom(e.rbody)}")
    if isinstance(e, Match):
        return (f"match {pp_expr(e.scrut)} with [] => {pp_atom(e.nil_body)} "
                f"| {e.head} :: {e.tail} => {pp_atom(e.cons_body)}")
    if isinstance(e, Tick):
        cost = "" if e.cost == 1 else f" {{{e.cost}}}"
        return f"(tick{cost} ; {pp_expr(e.body)})"
    if isinstance(e, Annot):
        return f"({pp_expr(e.body)} : {pp_ftype(e.ftype)})"
    if isinstance(e, ProcVal):
        args = "".join(" " + _chan(a) for a in e.args)
        body = pp_proc(e.body, 2)
        return f"{{ {_chan(e.chan)} <-{args} =>\n{body} }}"
    raise TypeError(type(e).__name__)


def pp_atom(e) -> str:
    s = pp_expr(e)
    if isinstance(e, (IntLit, BoolLit, Var, Nil, Pair, Tick, Annot, ProcVal)):
        return s
    return f"({s})"


def _arg(a) -> str:
    return _chan(a) if isinstance(a, ChanRef) else pp_atom(a)


def _callee(c) -> str:
    if isinstance(c, str):
        return c
    if isinstance(c, Var):
        return c.name
    return pp_atom(c)


def pp_proc(p, indent: int = 0) -> str:
    return "\n".join(_proc_lines(p, indent))


def _proc_lines(p, ind: int) -> list:
    pad = " " * ind
    out = []
    while True:
        if isinstance(p, SendLabel):
            out.append(f"{pad}{_chan(p.chan)}.{p.label} ;")
        elif isinstance(p, SendChan):
            out.append(f"{pad}send {_chan(p.chan)} {_chan(p.arg)} ;")
        elif isinstance(p, SendValue):
            out.append(f"{pad}send {_chan(p.chan)} {pp_atom(p.expr)} ;")
        elif isinstance(p, RecvChan):
            out.append(f"{pad}{_chan(p.bind)} <- recv {_chan(p.chan)} ;")
        elif isinstance(p, RecvValue):
            out.append(f"{pad}{p.var} = recv {_chan(p.chan)} ;")
        elif isinstance(p, Wait):
            out.append(f"{pad}wait {_chan(p.chan)} ;")
        elif isinstance(p, Work):
            out.append(f"{pad}work {{{_pot(p.pot)}}} ;" if p.slack else f"{pad}work ;")
        elif isinstance(p, (Pay, Get)):
            kw = "pay" if isinstance(p, Pay) else "get"
            out.append(f"{pad}{kw} {_chan(p.chan)} {{{_pot(p.pot)}}} ;")
        elif isinstance(p, (Accept, Acquire, Detach, Release)):
            kw = {Accept: "accept", Acquire: "acquire", Detach: "detach", Release: "release"}[type(p)]
            src = p.shared if isinstance(p, (Accept, Acquire)) else p.chan
            out.append(f"{pad}{_chan(p.bind)} <- {kw} {_chan(src)} ;")
        elif isinstance(p, Let):
            out.append(f"{pad}let {p.var} = {pp_expr(p.expr)} ;")
        elif isinstance(p, Spawn):
            args = "".join(" " + _arg(a) for a in p.args)
            out.append(f"{pad}{_chan(p.bind)} <- {_callee(p.callee)} <-{args} ;")
        elif isinstance(p, Close):
            out.append(f"{pad}close {_chan(p.chan)}")
            return out
        elif isinstance(p, Fwd):
            out.append(f"{pad}{_chan(p.dst)} <- {_chan(p.src)}")
            return out
        elif isinstance(p, TailCall):
            args = "".join(" " + _arg(a) for a in p.args)
            out.append(f"{pad}{_chan(p.chan)} <- {_callee(p.callee)} <-{args}")
            return out
        elif isinstance(p, If):
            out.append(f"{pad}if {pp_expr(p.cond)}")
            out.append(f"{pad}then")
            out.extend(_proc_lines(p.then, ind + 2))
            out.append(f"{pad}else")
            out.extend(_proc_lines(p.other, ind + 2))
            return out
        elif isinstance(p, Case):
            out.append(f"{pad}case {_chan(p.chan)}")
            for k, (lab, q) in enumerate(p.branches):
                out.append(f"{pad}{'(' if k == 0 else '|'} {lab} =>")
                out.extend(_proc_lines(q, ind + 4))
            out.append(f"{pad})")
            return out
        else:
            raise TypeError(type(p).__name__)
        p = p.cont


def _param(prm) -> str:
    if isinstance(prm, FunParam):
        return f"({prm.name} : {pp_ftype(prm.ftype)})"
    return f"({_chan(prm.chan)} : {pp_stype(prm.stype)})"


def pp_decl(d) -> str:
    if isinstance(d, TypeDecl):
        head = f"{d.keyword} {d.name} = "
        return head + pp_stype(d.body, len(head))
    if isinstance(d, FunDecl):
        return f"fun {d.name} : {pp_ftype(d.ftype)} =\n  {pp_expr(d.body)}"
    ctx = ", ".join(_param(x) for x in d.params) if d.params else "."
    turn = "|-" if d.pot == 0 else f"|{{{_pot(d.pot)}}}-"
    head = f"proc {d.kind} {d.name} : {ctx} {turn} {_param(d.offered)} ="
    return head + "\n{\n" + pp_proc(d.body, 2) + "\n}"


def pretty_print(p: SourceProgram) -> str:
    return "\n\n".join(pp_decl(d) for d in p.decls) + ("\n" if p.decls else "")
