from hypothesis import HealthCheck, given, settings, strategies as st

from sessiongas.core import (
    BOOL, INT, Down, External, GetPot, Internal, ListT, Lolli, Mode, Named, One, PayPot, ProcDecl,
    RecvVal, SendVal, Tensor, Up, channel_names, rename_channel, unfold,
)
from sessiongas.ledger import AssetArg, Ledger
from sessiongas.parser import load_text, parse_stype, pp_stype
from sessiongas.runtime import Configuration, Engine, Poised
from sessiongas.typechecker import type_equal

from conftest import PROGRAMS, load, load_with_tx
from oracles import bisimilar

NAMES = ["p", "q"]
LABELS = ["a", "b", "c"]

vtypes = st.one_of(st.just(INT), st.just(BOOL),
                   st.builds(ListT, st.just(INT), st.integers(0, 5)))


def _branches(child):
    return st.lists(st.tuples(st.sampled_from(LABELS), child), min_size=1, max_size=3,
                    unique_by=lambda b: b[0]).map(tuple)


def _linear(child):
    pot = st.integers(0, 30)
    return st.one_of(
        st.builds(Internal, _branches(child)),
        st.builds(External, _branches(child)),
        st.builds(Tensor, child, st.just(Mode.R), child),
        st.builds(Lolli, child, st.just(Mode.R), child),
        st.builds(SendVal, vtypes, child),
        st.builds(RecvVal, vtypes, child),
        st.builds(PayPot, pot, child),
        st.builds(GetPot, pot, child),
        st.builds(Up, child),
        st.builds(Down, child),
    )


stypes = st.recursive(st.one_of(st.builds(One), st.sampled_from([Named(n) for n in NAMES])),
                      _linear, max_leaves=12)
# definitions guarded by a constructor, so every name is contractive
guarded = _linear(stypes)


@st.composite
def signatures(draw):
    sig = load_text("")
    for n in NAMES:
        sig.type_defs[n] = draw(guarded)
    return sig


@given(stypes)
def test_pretty_print_parse_round_trip(t):
    assert parse_stype(pp_stype(t)) == t


@given(signatures(), stypes)
def test_type_equality_is_reflexive(sig, t):
    assert type_equal(sig, t, t)


@settings(max_examples=150)
@given(signatures(), stypes, stypes)
def test_type_equality_is_symmetric_and_matches_bisimulation(sig, a, b):
    eq = type_equal(sig, a, b)
    assert eq == type_equal(sig, b, a)
    assert eq == bisimilar(sig.type_defs, a, b)


@given(signatures(), st.sampled_from(NAMES))
def test_one_unfolding_is_equal(sig, n):
    assert type_equal(sig, Named(n), sig.type_defs[n])
    assert bisimilar(sig.type_defs, Named(n), sig.type_defs[n])


@given(signatures(), st.sampled_from([Named(n) for n in NAMES]))
def test_unfold_is_idempotent(sig, t):
    once = unfold(sig, t)
    assert unfold(sig, once) == once
    assert not isinstance(once, Named)


def _bodies():
    out = []
    for name in PROGRAMS:
        prog, _ = load(name)
        out.extend(d.body for d in prog.decls if isinstance(d, ProcDecl))
    return out


BODIES = _bodies()


@given(st.integers(0, len(BODIES) - 1), st.data())
def test_rename_round_trip(i, data):
    body = BODIES[i]
    names = sorted(channel_names(body))
    if not names:
        return
    x = data.draw(st.sampled_from(names))
    fresh = "fresh%0"
    renamed = rename_channel(body, x, fresh)
    assert x not in channel_names(renamed)
    assert rename_channel(renamed, fresh, x) == body


ORDER = """
type st = +{ more : int ^ st, done : 1 }
type out = list int ^ 1

proc asset src : (n : int) |- ($c[R] : st) =
  {
    if n = 0
    then $c[R].done ; close $c[R]
    else $c[R].more ; send $c[R] n ; $c[R] <- src <- (n - 1)
  }

proc asset sink : (acc : list int), ($c[R] : st) |- ($o[R] : out) =
  {
    case $c[R] ( more => v = recv $c[R] ;
                         $o[R] <- sink <- (v :: acc) $c[R]
               | done => wait $c[R] ;
                         send $o[R] acc ;
                         close $o[R] )
  }
"""
ORDER_SIG = load_text(ORDER)


def _list_values(e):
    out = []
    while hasattr(e, "head"):
        out.append(e.head.value)
        e = e.tail
    return out


@settings(max_examples=60)
@given(st.integers(0, 8), st.integers(0, 10 ** 6))
def test_messages_arrive_in_send_order(n, seed):
    c = Configuration()
    eng = Engine(ORDER_SIG, seed)
    src = eng.spawn_root(c, "src", (n,))
    eng.spawn_root(c, "sink", ([], src.chan))
    assert isinstance(eng.run(c).outcome, Poised)
    (sent,) = [o for o in c.objects if o.kind == "msg" and hasattr(o.body, "expr")]
    # the sink conses, so the last value received is at the head
    assert _list_values(sent.body.expr) == list(range(1, n + 1))


AUCTION_SIG = load_with_tx("auction")[1]


@settings(max_examples=40, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(st.integers(0, 10 ** 6), st.lists(st.tuples(st.integers(1, 4), st.integers(0, 9)),
                                          min_size=1, max_size=3))
def test_concurrent_bids_conserve_energy(seed, bids):
    led = Ledger(AUCTION_SIG)
    led.deploy("run", (5, 0, 0, AssetArg("dummy", (0,)), AssetArg("emp")), "sa")
    c = led.state
    eng = Engine(AUCTION_SIG, seed)
    for r, amt in bids:
        eng.spawn_root(c, "bid_tx", ("sa", r, amt), potential=23)
    e0 = sum(o.work + o.q for o in c.objects)
    seen = []
    eng.run(c, check_energy=False,
            on_step=lambda line, cfg: seen.append(sum(o.work + o.q for o in cfg.objects)))
    assert seen and set(seen) == {e0}
