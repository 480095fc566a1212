import pytest

from sessiongas.cli import execute_scenario, parse_scenario
from sessiongas.core import Close, Mode, One
from sessiongas.ledger import AssetArg, Ledger, Transaction
from sessiongas.parser import load_text, parse_proc
from sessiongas.runtime import (
    Blocked, Configuration, Engine, InsufficientPotential, IllTyped, Poised, SemObject,
    Stepped, boot, energy, gas_used, is_poised, run, step, typecheck_config,
)
from sessiongas.typechecker import ModeViolation

from conftest import load_with_tx, scenario_files

SMALL = """
type bit = +{ b0 : 1, b1 : 1 }

proc transaction zero : . |- ($t[T] : 1) = { close $t[T] }

proc transaction sum3 : . |{3}- ($t[T] : 1) =
  { let x = (tick ; (tick ; 1) + (tick ; 2)) ; close $t[T] }

proc transaction lazy : . |{4}- ($t[T] : 1) = { work {4} ; close $t[T] }

proc asset one : . |- ($b[R] : bit) = { $b[R].b1 ; close $b[R] }

proc transaction pick : . |- ($t[T] : 1) =
  { $x[R] <- one <- ; case $x[R] ( b0 => wait $x[R] ; close $t[T]
                                  | b1 => wait $x[R] ; close $t[T] ) }
"""


@pytest.fixture(scope="module")
def small():
    return load_text(SMALL)


def test_boot_gives_a_single_transaction_object(small):
    c = boot(small, "sum3", 3)
    (o,) = c.objects
    assert (o.kind, o.mode, o.work, o.q) == ("proc", Mode.T, 0, 3)


def test_boot_zero_potential(small):
    c = boot(small, "zero", 0)
    assert len(c.objects) == 1


def test_boot_rejects_insufficient_supply(small):
    with pytest.raises(InsufficientPotential):
        boot(small, "sum3", 2)


def test_boot_rejects_non_transaction(small):
    with pytest.raises(ModeViolation):
        boot(small, "one", 0)


def test_empty_configuration_is_poised(small):
    assert isinstance(step(small, Configuration()), Poised)


def test_ticks_move_potential_into_work(small):
    c = boot(small, "sum3", 3)
    r = step(small, c)
    assert isinstance(r, Stepped)
    (o,) = c.objects
    assert (o.work, o.q) == (3, 0)


def test_label_send_spawns_a_message(small):
    c = boot(small, "pick", 0)
    res = run(small, c, assertions=True)
    assert isinstance(res.outcome, Poised)
    rules = [t.rule for t in res.trace]
    assert any("label" in r for r in rules)
    (o,) = res.final.objects
    assert o.kind == "msg" and isinstance(o.body, Close)


def test_energy_of_configurations():
    assert energy(Configuration()) == 0
    objs = [SemObject("proc", "a", Mode.R, 3, None, 2, One()),
            SemObject("proc", "b", Mode.R, 1, None, 0, One())]
    assert energy(Configuration(objs)) == 6


def test_two_providers_of_one_channel_are_ill_typed():
    body = parse_proc("close $a[R]")
    objs = [SemObject("proc", "a", Mode.T, 0, body, 0, One()),
            SemObject("proc", "a", Mode.T, 0, body, 0, One())]
    with pytest.raises(IllTyped) as e:
        typecheck_config(load_text(""), Configuration(objs))
    assert e.value.rule == "well-formedness"


def test_is_poised():
    close = parse_proc("close $a[R]")
    assert is_poised(SemObject("msg", "a", Mode.R, 0, close, 0, One()))
    assert not is_poised(SemObject("proc", "a", Mode.R, 0, close, 0, One()))
    wait = parse_proc("wait $b[R] ; close $a[R]")
    assert not is_poised(SemObject("proc", "a", Mode.R, 0, wait, 0, One()))


def test_gas_used_counts_work_and_excludes_slack(small):
    res = run(small, boot(small, "sum3", 3))
    assert gas_used(res) == 3
    res = run(small, boot(small, "lazy", 4))
    assert (res.slack, gas_used(res)) == (4, 0)
    assert gas_used(run(small, boot(small, "zero", 0))) == 0


def _ledger(name):
    _, scn = scenario_files(name)
    _, sig = load_with_tx(name)
    return sig, parse_scenario(scn.read_text())


def test_wallet_value_uses_two_units():
    sig, cmds = _ledger("wallet")
    led, outs, fails = execute_scenario(sig, cmds, assertions=True)
    assert not fails
    value = [o for n, o in outs if n == "value_tx"]
    assert value and all(o.gas_used == 2 for o in value)


def test_erc20_runs_with_assertions():
    sig, cmds = _ledger("erc20")
    _, outs, fails = execute_scenario(sig, cmds, assertions=True)
    assert not fails and outs


def _two_auctions(sig):
    led = Ledger(sig)
    for a in ("sa", "sb"):
        led.deploy("run", (2, 0, 0, AssetArg("dummy", (0,)), AssetArg("emp")), a)
    return led


def test_sequential_acquires_follow_release(auction):
    _, sig = auction
    led = _two_auctions(sig)
    c = led.state
    eng = Engine(sig)
    eng.spawn_root(c, "bid_tx", ("sa", 1, 5), potential=23)
    eng.spawn_root(c, "bid_tx", ("sa", 2, 7), potential=23)
    res = eng.run(c, assertions=True)
    assert isinstance(res.outcome, Poised)
    events = [t.rule for t in res.trace if t.rule in ("acquire", "release")]
    assert events == ["acquire", "release", "acquire", "release"]
    assert c.acquires == ["sa", "sa"]


def test_opposite_order_acquires_block(auction):
    _, sig = auction
    led = _two_auctions(sig)
    c = led.state
    eng = Engine(sig)
    eng.spawn_root(c, "reenter_tx", ("sa", "sb"), potential=44)
    eng.spawn_root(c, "reenter_tx", ("sb", "sa"), potential=44)
    res = eng.run(c, assertions=True)
    assert isinstance(res.outcome, Blocked)
    assert len(res.outcome.acquirers) == 2


def test_self_reentry_is_a_deadlock(auction):
    _, sig = auction
    led = _two_auctions(sig)
    led.submit(Transaction("reenter_tx", ("sa", "sa"), 44))
    out = led.execute_next()
    assert out.label == "Reverted(Deadlock)"
