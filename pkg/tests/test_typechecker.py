import pytest

from sessiongas.core import (
    Base, External, GetPot, INT, IntLit, ListT, Mode, Named, One, Signature, Tick, Up, Down,
)
from sessiongas.parser import load_text, parse_expr, parse_proc, parse_program, parse_stype, \
    load_signature
from sessiongas.typechecker import (
    LinearityViolation, ModeViolation, NotEquiSync, NotPure, PotentialMismatch, check_decl,
    check_esync, check_expr, check_mode_invariants, check_process, check_program,
    check_purelin, split_context, type_equal,
)

from conftest import PROGRAMS, CORPUS, load, program_path
from oracles import bisimilar

R, S, L, T = Mode.R, Mode.S, Mode.L, Mode.T


def test_auction_run_accepts():
    _, sig = load("auction")
    assert check_decl(sig, sig.proc_defs["run"]).ok


def test_fwd_needs_zero_potential():
    rep = check_process(Signature(), {}, {}, {"y": (One(), R)}, 1, parse_proc("$x[R] <- $y[R]"),
                        ("x", One(), R))
    assert isinstance(rep.error, PotentialMismatch)
    assert check_process(Signature(), {}, {}, {"y": (One(), R)}, 0,
                         parse_proc("$x[R] <- $y[R]"), ("x", One(), R)).ok


def test_hkg_mutation_is_a_linearity_violation():
    sig = load_text((CORPUS / "mutants" / "erc20_hkg.nom").read_text())
    rep = check_program(sig)
    assert not rep.ok
    (err,) = rep.errors()
    assert isinstance(err, LinearityViolation)
    assert err.chan == "m1"


def test_apply_interest():
    sig = load_text("""
fun applyInterest : list{1} int -> list int =
  \\l : list{1} int => match l with [] => []
                                 | h :: t => (tick ; h + 1) :: applyInterest t
""")
    assert check_program(sig).ok


def test_apply_interest_without_element_potential_fails():
    sig = load_text("""
fun applyInterest : list int -> list int =
  \\l : list int => match l with [] => []
                              | h :: t => (tick ; h + 1) :: applyInterest t
""")
    (err,) = check_program(sig).errors()
    assert isinstance(err, PotentialMismatch)


def test_literal_zero_is_int():
    assert check_expr(Signature(), {}, 0, IntLit(0)) == INT


def test_tick_without_potential():
    with pytest.raises(PotentialMismatch):
        check_expr(Signature(), {}, 0, parse_expr("(tick ; 1)"))
    assert check_expr(Signature(), {}, 1, parse_expr("(tick ; 1)")) == INT


def test_split_list_potential():
    l2, l1 = ListT(INT, 2), ListT(INT, 1)
    left, right = split_context({"x": l2}, {"x": l1})
    assert left["x"] == l1 and right["x"] == l1


def test_split_base_copies():
    left, right = split_context({"n": INT}, {"n": INT})
    assert left["n"] == INT and right["n"] == INT


def test_split_overdraw_rejected():
    with pytest.raises(PotentialMismatch):
        split_context({"x": ListT(INT, 1)}, {"x": ListT(INT, 2)})


def test_type_equal_named_vs_unfolded():
    _, sig = load("auction")
    assert type_equal(sig, Named("auction"), sig.type_defs["auction"])


def test_type_equal_list_potentials_differ():
    sig = Signature()
    a = parse_stype("list{1} int ^ 1")
    b = parse_stype("list int ^ 1")
    assert not type_equal(sig, a, b)


ISO = """
type a1 = +{ x : int ^ a2, stop : 1 }
type a2 = &{ y : <{2}| a1 }
type b1 = +{ stop : 1, x : int ^ &{ y : <{2}| b1 } }
type c1 = +{ x : int ^ &{ y : <{3}| c1 }, stop : 1 }
"""


@pytest.mark.parametrize("left,right", [("a1", "b1"), ("a1", "c1"), ("b1", "c1"), ("a2", "a2")])
def test_type_equal_agrees_with_bisimulation(left, right):
    sig = load_text(ISO)
    expected = bisimilar(sig.type_defs, Named(left), Named(right))
    assert type_equal(sig, Named(left), Named(right)) == expected


def test_isomorphic_definitions_equal():
    # frozen from the bisimulation oracle
    sig = load_text(ISO)
    assert bisimilar(sig.type_defs, Named("a1"), Named("b1"))
    assert type_equal(sig, Named("a1"), Named("b1"))
    assert not type_equal(sig, Named("a1"), Named("c1"))


def test_esync_auction():
    _, sig = load("auction")
    check_esync(sig, Named("auction"))


def test_esync_wallet_money():
    _, sig = load("wallet")
    check_esync(sig, Named("money"))


def test_esync_rejects_foreign_release():
    sig = load_text("type other = /\\ 1 \ntype t = /\\ +{ a : \\/ other }")
    with pytest.raises(NotEquiSync) as info:
        check_esync(sig, Named("t"))
    assert info.value.path == ["a"]


def test_mode_invariant_r_with_shared():
    with pytest.raises(ModeViolation) as info:
        check_mode_invariants(Signature(), R, {"s": parse_stype("/\\ 1")}, {}, One())
    assert info.value.clause == "R(i)"


def test_mode_invariant_s_with_l_channel():
    with pytest.raises(ModeViolation) as info:
        check_mode_invariants(Signature(), S, {}, {"x": (One(), L)}, parse_stype("/\\ \\/ 1"))
    assert info.value.clause == "S"


def test_mode_invariant_l_arbitrary():
    sig = load_text("type s = /\\ \\/ s")
    check_mode_invariants(sig, L, {}, {"a": (One(), R), "b": (One(), L), "c": (One(), T)},
                          parse_stype("\\/ s"))


def test_purelin():
    _, sig = load("auction")
    check_purelin({"b": (Named("dictionary"), R), "l": (Named("lot"), R)})
    check_purelin({})
    with pytest.raises(NotPure) as info:
        check_purelin({"x": (One(), L)})
    assert info.value.chan == "x"


@pytest.mark.parametrize("name", PROGRAMS)
def test_corpus_typechecks(name):
    _, sig = load(name)
    rep = check_program(sig)
    assert rep.ok, [e.render() for e in rep.errors()]


def test_auction_all_processes_accept():
    _, sig = load("auction")
    rep = check_program(sig)
    assert all(r.ok for r in rep.reports.values())
    assert len(rep.reports) == 10


def test_perturbed_annotation_is_localized():
    src = program_path("auction").read_text()
    lines = src.splitlines()
    run_at = next(i for i, l in enumerate(lines) if l.startswith("proc contract run"))
    idx = next(i for i in range(run_at, len(lines)) if "get $la[L] {22}" in lines[i])
    lines[idx] = lines[idx].replace("{22}", "{21}")
    sig = load_text("\n".join(lines), "auction.nom")
    rep = check_program(sig)
    bad = [r for r in rep.reports.values() if not r.ok]
    assert [r.name for r in bad] == ["run"]
    err = bad[0].error
    assert isinstance(err, PotentialMismatch)
    # the first consumer downstream of the perturbed get is in the same definition
    assert run_at + 1 <= err.span.line <= run_at + 30


def test_unconsumed_channel():
    p = parse_proc("close $c[R]")
    rep = check_process(Signature(), {}, {}, {"y": (One(), R)}, 0, p, ("c", One(), R))
    assert isinstance(rep.error, LinearityViolation) and rep.error.chan == "y"


def test_report_render_format():
    p = parse_program("proc asset f : . |{1}- ($c[R] : 1) = { close $c[R] }", "f.nom")
    rep = check_program(load_signature(p))
    (err,) = rep.errors()
    assert err.render().startswith("f.nom:1:")
    assert "PotentialMismatch" in err.render()


def test_check_time_linear_in_rules():
    # rule applications grow proportionally to the program
    from sessiongas.cli import synthesize
    counts = []
    for n in (5, 10, 20):
        sig = load_text(synthesize(n))
        rep = check_program(sig)
        assert rep.ok
        counts.append(sum(r.rules for r in rep.reports.values()))
    assert counts[1] == 2 * counts[0] and counts[2] == 2 * counts[1]
