"""Sequential transaction processing over a directory of deployed contracts:
typecheck, boot with the supplied gas, run, then commit or revert atomically."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .core import Mode, NomError, Signature, channel_names
from .runtime import (
    AssertionFailure, Blocked, Configuration, Engine, FuelExhausted, Poised, ReplayDivergence,
    SemObject, gas_used,
)
from .typechecker import ModeViolation, check_decl, check_esync, type_equal


class TypecheckRejected(NomError):
    code = "TypecheckRejected"


class LedgerHalted(NomError):
    code = "LedgerHalted"


@dataclass(frozen=True)
class AssetArg:
    """Deploy-time argument that boots an asset process and passes its channel."""
    proc: str
    args: tuple = ()


@dataclass(frozen=True)
class SharedArg:
    address: str


@dataclass
class Transaction:
    proc: str
    args: tuple = ()
    gas: int = 0
    sender: str = ""


@dataclass
class TxOutcome:
    tx_id: int
    status: str               # Committed | Reverted | Rejected
    reason: str = ""          # OutOfGas | Deadlock | FuelExhausted | checker message
    gas_supplied: int = 0
    gas_used: int = 0
    refund: int = 0
    bound: int = 0            # potential the transaction handed over on this path
    gap: int = 0
    acquire_trace: list = field(default_factory=list)
    steps: int = 0
    trace: list = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"{self.status}({self.reason})" if self.status == "Reverted" else self.status

    def line(self) -> str:
        acq = ",".join(self.acquire_trace) or "-"
        return f"{self.tx_id} {self.label} {self.gas_supplied} {self.gas_used} {acq}"


@dataclass
class ContractRecord:
    address: str
    stype: object
    objects: list
    stored_potential: int


def snapshot(c: Configuration) -> Configuration:
    # bodies and types are immutable, so copying the objects suffices
    return Configuration([dataclasses.replace(o) for o in c.objects],
                         {a: list(v) for a, v in c.directory.items()},
                         c.fresh, c.cursor, c.slack, list(c.acquires), None)


def state_hash(c: Configuration) -> str:
    return hashlib.sha256(repr(c.state_key()).encode()).hexdigest()


class Ledger:
    def __init__(self, sig: Signature, fuel: int = 100000, seed: Optional[int] = None,
                 assertions: bool = False):
        self.sig = sig
        self.fuel = fuel
        self.seed = seed
        self.assertions = assertions
        self.state = Configuration()
        self.deployed: dict = {}        # address -> declared shared type
        self.genesis: list = []         # (proc, args, address)
        self.queue: list = []
        self.txns: list = []            # (Transaction, TxOutcome)
        self.halted = False
        self._next_id = 0
        self._checked: dict = {}

    # -- deployment
    def deploy(self, proc: str, args=(), address: Optional[str] = None) -> str:
        d = self.sig.proc_defs.get(proc)
        if d is None:
            raise NomError(f"unknown process '{proc}'")
        if d.mode != Mode.S:
            raise ModeViolation(f"only mode-S contracts can be deployed; '{proc}' has mode {d.mode}")
        check_esync(self.sig, d.offered.stype, d.span)
        rep = self._check(proc)
        if not rep.ok:
            raise TypecheckRejected(rep.render())
        eng = Engine(self.sig, self.seed)
        c = self.state
        if address is None:
            address = d.offered.chan.name
            k = 1
            while address in c.directory:
                k += 1
                address = f"{d.offered.chan.name}{k}"
        if address in c.directory:
            raise NomError(f"address #{address} is already deployed")
        actual = tuple(self._materialize(eng, a) for a in args)
        eng.spawn_root(c, proc, actual, chan=address)
        res = eng.run(c, self.fuel, self.assertions)
        if not isinstance(res.outcome, Poised):
            raise NomError(f"deploying '{proc}' did not settle: {res.outcome}")
        self.deployed[address] = d.offered.stype
        self.genesis.append((proc, tuple(args), address))
        return address

    def _materialize(self, eng: Engine, a):
        if isinstance(a, AssetArg):
            d = self.sig.proc_defs.get(a.proc)
            if d is None:
                raise NomError(f"unknown process '{a.proc}'")
            inner = tuple(self._materialize(eng, x) for x in a.args)
            return eng.spawn_root(self.state, a.proc, inner).chan
        if isinstance(a, SharedArg):
            if a.address not in self.state.directory:
                raise NomError(f"unknown address #{a.address}")
            return a.address
        return a

    def _check(self, proc: str):
        if proc not in self._checked:
            self._checked[proc] = check_decl(self.sig, self.sig.proc_defs[proc], record=False)
        return self._checked[proc]

    # -- transactions
    def submit(self, tx: Transaction) -> int:
        if self.halted:
            raise LedgerHalted("the ledger no longer accepts transactions")
        tid = self._next_id
        self._next_id += 1
        self.queue.append((tid, tx))
        return tid

    def halt(self):
        self.halted = True

    def execute_next(self, replay: Optional[list] = None) -> TxOutcome:
        tid, tx = self.queue.pop(0)
        out = self._execute(tid, tx, replay)
        self.txns.append((tx, out))
        return out

    def run_all(self) -> list:
        out = []
        while self.queue:
            out.append(self.execute_next())
        return out

    def _resolve(self, tx: Transaction):
        d = self.sig.proc_defs.get(tx.proc)
        if d is None:
            raise TypecheckRejected(f"unknown transaction '{tx.proc}'")
        if d.mode != Mode.T:
            raise TypecheckRejected(f"'{tx.proc}' is not a transaction")
        if len(tx.args) != len(d.params):
            raise TypecheckRejected(f"'{tx.proc}' expects {len(d.params)} arguments")
        rep = self._check(tx.proc)
        if not rep.ok:
            raise TypecheckRejected(rep.render())
        args = []
        for prm, a in zip(d.params, tx.args):
            if hasattr(prm, "ftype"):
                if isinstance(a, (SharedArg, AssetArg)):
                    raise TypecheckRejected(f"argument for '{prm.name}' must be a value")
                args.append(a)
                continue
            addr = a.address if isinstance(a, SharedArg) else a
            if prm.chan.mode != Mode.S:
                raise TypecheckRejected(f"transaction parameter ${prm.chan.name} must be shared")
            if addr not in self.deployed:
                raise TypecheckRejected(f"unknown address #{addr}")
            if not type_equal(self.sig, self.deployed[addr], prm.stype):
                raise TypecheckRejected(f"#{addr} does not offer the type of #{prm.chan.name}")
            args.append(addr)
        return d, tuple(args)

    def _execute(self, tid: int, tx: Transaction, replay) -> TxOutcome:
        out = TxOutcome(tid, "Committed", gas_supplied=tx.gas)
        try:
            d, args = self._resolve(tx)
        except TypecheckRejected as err:
            out.status, out.reason = "Rejected", str(err)
            out.refund = tx.gas
            return out
        declared = int(d.pot)
        if tx.gas < declared:
            # the miner keeps the supplied gas
            out.status, out.reason, out.gas_used = "Reverted", "OutOfGas", tx.gas
            return out
        before = snapshot(self.state)
        c = self.state
        c.acquires = []
        c.replay = list(replay) if replay is not None else None
        eng = Engine(self.sig, self.seed)
        root = eng.spawn_root(c, tx.proc, args)
        try:
            res = eng.run(c, self.fuel, self.assertions, root=root)
        except (AssertionFailure, ReplayDivergence):
            self.state = before
            raise
        out.steps, out.trace = res.steps, res.trace
        out.acquire_trace = list(c.acquires)
        c.replay = None
        closed = root in c.objects and root.kind == "msg"
        if isinstance(res.outcome, Poised) and closed:
            c.objects.remove(root)
            out.gas_used = gas_used(res)
            out.bound = declared - root.q
            out.gap = out.bound - out.gas_used
            out.refund = tx.gas - out.gas_used
            self._check_at_rest()
            if replay is not None and list(replay) != out.acquire_trace:
                self.state = before
                raise ReplayDivergence(f"transaction {tid} acquired {out.acquire_trace}, "
                                       f"recorded {list(replay)}")
            return out
        self.state = before
        out.status = "Reverted"
        if isinstance(res.outcome, Blocked):
            out.reason = "Deadlock"
        elif isinstance(res.outcome, FuelExhausted):
            out.reason = "FuelExhausted"
        else:
            out.reason = "Stuck"
        out.gas_used = tx.gas
        return out

    def _check_at_rest(self):
        for a, (m, t) in self.state.directory.items():
            if m != Mode.S:
                raise AssertionFailure("esync", 0, f"#{a} is still acquired after commit")
            if a in self.deployed and not type_equal(self.sig, t, self.deployed[a]):
                raise AssertionFailure("esync", 0, f"#{a} offers a different type after commit")

    # -- inspection
    def contracts(self) -> dict:
        c = self.state
        by_chan = {o.chan: o for o in c.objects}
        out = {}
        for a in c.directory:
            root = by_chan.get(a)
            seen, stack = [], [root] if root is not None else []
            while stack:
                o = stack.pop()
                if o in seen:
                    continue
                seen.append(o)
                for n in channel_names(o.body):
                    p = by_chan.get(n)
                    if p is not None and p is not o and p.mode != Mode.S:
                        stack.append(p)
            out[a] = ContractRecord(a, c.directory[a][1], seen, sum(o.q for o in seen))
        return out

    def state_hash(self) -> str:
        return state_hash(self.state)

    def ledger_lines(self) -> list:
        return [out.line() for _, out in self.txns]

    def replay(self) -> Configuration:
        """Re-execute genesis and every committed transaction along its recorded acquisitions."""
        fresh = Ledger(self.sig, self.fuel, self.seed, self.assertions)
        for proc, args, address in self.genesis:
            fresh.deploy(proc, args, address)
        for tx, out in self.txns:
            if out.status != "Committed":
                continue
            tid = fresh.submit(tx)
            got = fresh.execute_next(replay=out.acquire_trace)
            if got.status != "Committed" or got.gas_used != out.gas_used:
                raise ReplayDivergence(f"transaction {tid} replayed as {got.label}")
        if fresh.state.state_key() != self.state.state_key():
            raise ReplayDivergence("replayed state differs from the live state")
        return fresh.state
