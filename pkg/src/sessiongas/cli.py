"""Command-line front end: check, infer, run and bench."""
from __future__ import annotations

import argparse
import re
import sys
import time
from pathlib import Path

from .core import NomError, NomSyntaxError
from .inference import Infeasible, NonIntegral, count_unknowns, dump_lp, generate_constraints, \
    elaborate_unknowns, infer, solve, star_program
from .ledger import AssetArg, Ledger, SharedArg, Transaction
from .parser import load_files, load_signature, merge_programs, parse_program, pretty_print
from .runtime import AssertionFailure, StuckIllTyped
from .typechecker import check_program

EXIT_OK, EXIT_REJECT, EXIT_PARSE = 0, 1, 2


def _groups(paths, merge: bool) -> list:
    return [list(paths)] if merge else [[p] for p in paths]


def _load(paths, out):
    """(program, signature) or an exit code after reporting the problem."""
    try:
        return load_files(paths)
    except NomSyntaxError as err:
        print(err.render(), file=out)
        return EXIT_PARSE
    except NomError as err:
        print(err.render(), file=out)
        return EXIT_REJECT
    except OSError as err:
        print(f"error: {err}", file=out)
        return EXIT_PARSE


# ---------------------------------------------------------------- check

def cmd_check(paths, merge: bool = False, out=None) -> int:
    out = out or sys.stdout
    code = EXIT_OK
    for group in _groups(paths, merge):
        name = "+".join(group)
        t0 = time.perf_counter()
        loaded = _load(group, out)
        if isinstance(loaded, int):
            code = max(code, loaded)
            continue
        prog, sig = loaded
        rep = check_program(sig)
        ms = (time.perf_counter() - t0) * 1000
        for err in rep.esync_errors:
            print(err.render(), file=out)
        for r in rep.reports.values():
            if not r.ok:
                print(r.render(name), file=out)
        status = "ok" if rep.ok else "rejected"
        print(f"{name}: {status} ({len(rep.reports)} definitions, {ms:.2f} ms)", file=out)
        if not rep.ok:
            code = max(code, EXIT_REJECT)
    return code


# ---------------------------------------------------------------- infer

def cmd_infer(paths, merge: bool = False, star: bool = False, dump_path=None, output=None,
              out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    code = EXIT_OK
    texts, dumps = [], []
    for group in _groups(paths, merge):
        name = "+".join(group)
        loaded = _load(group, err)
        if isinstance(loaded, int):
            code = max(code, loaded)
            continue
        prog, _ = loaded
        if star:
            prog = star_program(prog)
        try:
            res = infer(prog)
        except (Infeasible, NonIntegral) as e:
            print(f"{name}: {e.render()}", file=err)
            for r in getattr(e, "rows", []):
                print(f"  {r.span} {r.why}: {r.expr} {r.op} 0", file=err)
            code = max(code, EXIT_REJECT)
            continue
        except NomError as e:
            print(e.render(), file=err)
            code = max(code, EXIT_REJECT)
            continue
        cs = res.constraints
        print(f"{name}: {len(cs.variables())} variables, {len(cs.rows)} constraints, "
              f"{res.elapsed * 1000:.2f} ms", file=err)
        texts.append(pretty_print(res.program))
        dumps.append(f"# {name}\n" + dump_lp(cs))
    text = "\n".join(texts)
    if output:
        Path(output).write_text(text)
    else:
        out.write(text)
    if dump_path:
        Path(dump_path).write_text("\n".join(dumps))
    return code


# ---------------------------------------------------------------- scenarios

_TOK = re.compile(r"\s*(?:(#?[A-Za-z_][\w']*)|(-?\d+)|([()\[\],=]))")


def _tokens(s: str) -> list:
    pos, out = 0, []
    s = s.rstrip()
    while pos < len(s):
        m = _TOK.match(s, pos)
        if not m or m.end() == pos:
            raise ValueError(f"unexpected text {s[pos:]!r}")
        out.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    return out


def _parse_call(toks: list, i: int = 0):
    """NAME ( args ) -> (name, args, next index); args may nest calls for assets."""
    name = toks[i]
    i += 1
    args = []
    if i < len(toks) and toks[i] == "(":
        i += 1
        while toks[i] != ")":
            a, i = _parse_arg(toks, i)
            args.append(a)
            if toks[i] == ",":
                i += 1
        i += 1
    return name, tuple(args), i


def _parse_arg(toks: list, i: int):
    t = toks[i]
    if t == "[":
        i += 1
        items = []
        while toks[i] != "]":
            a, i = _parse_arg(toks, i)
            items.append(a)
            if toks[i] == ",":
                i += 1
        return items, i + 1
    if t == "(":
        left, i = _parse_arg(toks, i + 1)
        if toks[i] != ",":
            raise ValueError("expected ',' in pair")
        right, i = _parse_arg(toks, i + 1)
        if toks[i] != ")":
            raise ValueError("expected ')' after pair")
        return (left, right), i + 1
    if re.fullmatch(r"-?\d+", t):
        return int(t), i + 1
    if t in ("true", "false"):
        return t == "true", i + 1
    if t.startswith("#"):
        return SharedArg(t[1:]), i + 1
    name, args, i = _parse_call(toks, i)
    return AssetArg(name, args), i


def parse_scenario(text: str) -> list:
    """Commands: ('deploy', proc, args, address|None), ('tx', gas, proc, args),
    ('expect', label, gap|None)."""
    cmds = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        try:
            toks = _tokens(line)
            kw = toks[0]
            if kw == "deploy":
                proc, args, i = _parse_call(toks, 1)
                addr = None
                if i < len(toks):
                    if toks[i] != "as" or not toks[i + 1].startswith("#"):
                        raise ValueError("expected 'as #address'")
                    addr = toks[i + 1][1:]
                cmds.append(("deploy", proc, args, addr))
            elif kw == "tx":
                gas = int(toks[1])
                proc, args, _ = _parse_call(toks, 2)
                cmds.append(("tx", gas, proc, args))
            elif kw == "expect":
                m = re.fullmatch(r"expect\s+(\S+)(?:\s+gap\s*=\s*(\d+))?", line)
                if not m:
                    raise ValueError("expected 'expect STATUS [gap=N]'")
                cmds.append(("expect", m.group(1), int(m.group(2)) if m.group(2) else None))
            else:
                raise ValueError(f"unknown command {kw!r}")
        except (ValueError, IndexError) as e:
            raise NomError(f"scenario line {n}: {e}") from None
    return cmds


def execute_scenario(sig, cmds, fuel=100000, seed=None, assertions=False):
    """Returns (ledger, outcomes, failed expectations)."""
    led = Ledger(sig, fuel=fuel, seed=seed, assertions=assertions)
    outcomes, failures = [], []
    for cmd in cmds:
        if cmd[0] == "deploy":
            led.deploy(cmd[1], cmd[2], cmd[3])
        elif cmd[0] == "tx":
            led.submit(Transaction(cmd[2], cmd[3], cmd[1]))
            outcomes.append((cmd[2], led.execute_next()))
        elif cmd[0] == "expect":
            if not outcomes:
                failures.append(f"expect {cmd[1]} before any transaction")
                continue
            name, o = outcomes[-1]
            if o.label != cmd[1]:
                failures.append(f"tx {o.tx_id} ({name}): expected {cmd[1]}, got {o.label}")
            if cmd[2] is not None and o.gap != cmd[2]:
                failures.append(f"tx {o.tx_id} ({name}): expected gap {cmd[2]}, got {o.gap}")
    return led, outcomes, failures


def cmd_run(programs, scenario, seed=None, fuel=100000, assertions=False, trace_path=None,
            ledger_path=None, out=None) -> int:
    out = out or sys.stdout
    loaded = _load(programs, out)
    if isinstance(loaded, int):
        return loaded
    prog, sig = loaded
    rep = check_program(sig)
    if not rep.ok:
        for e in rep.errors():
            print(e.render() if hasattr(e, "render") else str(e), file=out)
        return EXIT_REJECT
    try:
        cmds = parse_scenario(Path(scenario).read_text())
        led, outcomes, failures = execute_scenario(sig, cmds, fuel, seed, assertions)
    except AssertionFailure as e:
        print(e.render(), file=out)
        return EXIT_REJECT
    except StuckIllTyped as e:
        print(e.render(), file=out)
        return EXIT_REJECT
    except NomError as e:
        print(e.render(), file=out)
        return EXIT_PARSE
    print("tx name status bound used gap refund", file=out)
    for name, o in outcomes:
        print(f"{o.tx_id} {name} {o.label} {o.bound} {o.gas_used} {o.gap} {o.refund}", file=out)
    lines = led.ledger_lines()
    if ledger_path:
        Path(ledger_path).write_text("\n".join(lines) + "\n")
    else:
        print("ledger:", file=out)
        for l in lines:
            print(l, file=out)
    if trace_path:
        with open(trace_path, "w") as f:
            for name, o in outcomes:
                f.write(f"# tx {o.tx_id} {name}\n")
                for t in o.trace:
                    f.write(f"{t}\n")
    for msg in failures:
        print(f"assertion failed: {msg}", file=out)
    return EXIT_REJECT if failures else EXIT_OK


# ---------------------------------------------------------------- bench

def bench_row(paths) -> dict:
    prog, sig = load_files(paths)
    loc = sum(1 for p in paths for l in Path(p).read_text().splitlines() if l.strip())
    t0 = time.perf_counter()
    rep = check_program(sig)
    tc = (time.perf_counter() - t0) * 1000
    res = infer(star_program(prog))
    return {"program": Path(paths[0]).stem, "loc": loc, "check_ms": tc, "ok": rep.ok,
            "vars": len(res.constraints.variables()), "cons": len(res.constraints.rows),
            "infer_ms": res.elapsed * 1000}


def synthesize(k: int) -> str:
    """A well-typed program whose size grows linearly with k."""
    parts = ["type counter = &{ inc : <{2}| counter, get : <{1}| int ^ counter }"]
    for i in range(k):
        parts.append(f"""proc asset c{i} : (n : int) |- ($c[R] : counter) =
  {{
    case $c[R] ( inc => get $c[R] {{2}};
                        work ;
                        let n = (tick ; n + 1) ;
                        $c[R] <- c{i} <- n
               | get => get $c[R] {{1}};
                        send $c[R] ((tick ; n)) ;
                        $c[R] <- c{i} <- n )
  }}""")
    return "\n".join(parts) + "\n"


def _expand(paths) -> list:
    out = []
    for p in paths:
        out.extend(sorted(str(x) for x in Path(p).glob("*.nom")) if Path(p).is_dir() else [p])
    return out


def cmd_bench(paths, out=None, scaling: int = 0) -> int:
    out = out or sys.stdout
    paths = _expand(paths)
    print(f"{'program':<14}{'LOC':>6}{'T (ms)':>10}{'Vars':>7}{'Cons':>7}{'I (ms)':>10}", file=out)
    for p in paths:
        try:
            r = bench_row([p])
        except NomError as e:
            print(f"{Path(p).stem:<14} error: {e}", file=out)
            continue
        print(f"{r['program']:<14}{r['loc']:>6}{r['check_ms']:>10.2f}{r['vars']:>7}"
              f"{r['cons']:>7}{r['infer_ms']:>10.2f}", file=out)
    if scaling:
        print("size  check_ms", file=out)
        for n in (scaling, 2 * scaling, 4 * scaling):
            sig = load_signature(parse_program(synthesize(n)))
            t0 = time.perf_counter()
            check_program(sig)
            print(f"{n:<6}{(time.perf_counter() - t0) * 1000:.2f}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sessiongas",
                                 description="Resource-aware session-typed contract language")
    sub = ap.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", help="typecheck programs")
    c.add_argument("paths", nargs="+")
    c.add_argument("--merge", action="store_true", help="treat all files as one program")
    i = sub.add_parser("infer", help="infer starred potentials and modes")
    i.add_argument("paths", nargs="+")
    i.add_argument("--merge", action="store_true")
    i.add_argument("--star", action="store_true", help="star every potential annotation first")
    i.add_argument("--dump-lp", dest="dump_lp", metavar="PATH")
    i.add_argument("-o", "--output", metavar="PATH")
    r = sub.add_parser("run", help="execute a scenario through the ledger")
    r.add_argument("programs", nargs="+")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--fuel", type=int, default=100000)
    r.add_argument("--assert", dest="assertions", action="store_true")
    r.add_argument("--trace", metavar="PATH")
    r.add_argument("--ledger", metavar="PATH")
    b = sub.add_parser("bench", help="timing table")
    b.add_argument("paths", nargs="+")
    b.add_argument("--scaling", type=int, default=0, metavar="N",
                   help="also time generated programs of size N, 2N, 4N")
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    if a.command == "check":
        return cmd_check(a.paths, a.merge)
    if a.command == "infer":
        return cmd_infer(a.paths, a.merge, a.star, a.dump_lp, a.output)
    if a.command == "run":
        return cmd_run(a.programs, a.scenario, a.seed, a.fuel, a.assertions, a.trace, a.ledger)
    return cmd_bench(a.paths, scaling=a.scaling)


if __name__ == "__main__":
    sys.exit(main())
