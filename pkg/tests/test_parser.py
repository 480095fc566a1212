import pytest

from sessiongas.core import (
    DuplicateName, External, GetPot, Mode, NomSyntaxError, PayPot, PotVar, ProcDecl, Signature,
    UnknownName, UnknownTypeName, Up, Work,
)
from sessiongas.parser import (
    load_signature, load_text, parse_expr, parse_program, parse_proc, parse_stype, pp_stype,
    pretty_print,
)

from conftest import PROGRAMS, load, program_path


def test_erc20token_shape():
    t = parse_stype("/\\ <{11}| &{ totalSupply : int ^ |{9}> \\/ erc20token }")
    assert isinstance(t, Up)
    assert isinstance(t.cont, GetPot) and t.cont.pot == 11
    assert isinstance(t.cont.cont, External)


def test_emp_declaration():
    prog = parse_program("proc asset emp : . |{1}- ($l[R] : lcoin) = { work ; close $l[R] }")
    (d,) = prog.decls
    assert isinstance(d, ProcDecl)
    assert d.mode == Mode.R and d.pot == 1 and d.params == ()


def test_star_parses_to_var():
    t = parse_stype("|{*}> 1")
    assert isinstance(t, PayPot) and isinstance(t.pot, PotVar)


def test_bare_shift_potentials_default_to_one():
    assert parse_stype("<| 1").pot == 1
    assert parse_stype("|> 1").pot == 1


def test_p_mode_is_pure():
    (d,) = parse_program("proc asset f : . |- ($c[P] : 1) = { close $c[P] }").decls
    assert d.offered.chan.mode == Mode.R


def test_work_forms():
    assert parse_proc("work ; close $c[R]") == Work(1, parse_proc("close $c[R]"), False)
    p = parse_proc("work {3} ; close $c[R]")
    assert p.pot == 3 and p.slack


def test_comments_both_styles():
    prog = parse_program("% line\n(* block\n comment *) type t = 1\n")
    assert len(prog.decls) == 1


@pytest.mark.parametrize("name", PROGRAMS)
def test_pretty_print_round_trip(name):
    prog = parse_program(program_path(name).read_text())
    again = parse_program(pretty_print(prog))
    assert again == prog


def test_pretty_print_var_and_get():
    assert pp_stype(parse_stype("<{*}| 1")) == "<{*}| 1"
    assert pp_stype(parse_stype("<{22}| 1")) == "<{22}| 1"


def test_auction_signature_names():
    _, sig = load("auction")
    assert set(sig.type_defs) == {"money", "lcoin", "dictionary", "lot", "auction"}
    assert set(sig.proc_defs) == {"run", "check", "addbid", "removebid", "end_lot", "end_nolot",
                                  "wallet", "emp", "empty_wallet", "dummy"}


def test_empty_file():
    sig = load_text("")
    assert sig == Signature()


def test_unknown_type():
    with pytest.raises((UnknownName, UnknownTypeName)):
        load_text("proc asset f : . |- ($c[R] : foo) = { close $c[R] }")


def test_duplicate_definition():
    with pytest.raises(DuplicateName):
        load_text("type t = 1\ntype t = 1\n")


def test_syntax_error_has_span_and_expected():
    with pytest.raises(NomSyntaxError) as info:
        parse_program("type t = \n  &{ a : }")
    err = info.value
    assert err.span.line == 2
    assert err.expected


def test_tick_with_cost():
    e = parse_expr("(tick {7} ; 1)")
    assert e.cost == 7
