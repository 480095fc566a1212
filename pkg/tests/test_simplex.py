import random
from fractions import Fraction

from hypothesis import given, settings, strategies as st

from sessiongas.simplex import solve_lp

from lp_gen import difference_system, general_system
from oracles import lattice_minimum, vertex_minimum


def test_lower_bound():
    r = solve_lp({"x": 1}, [({"x": 1}, ">=", 3)])
    assert r.status == "optimal" and r.x["x"] == 3


def test_equality_and_bound():
    r = solve_lp({"x": 1, "y": 1}, [({"x": 1, "y": -1}, "=", 2), ({"y": 1}, ">=", 1)])
    assert (r.x["x"], r.x["y"]) == (3, 1)


def test_infeasible_has_conflict():
    r = solve_lp({"x": 1}, [({"x": 1}, ">=", 1), ({"x": 1}, "=", 0)])
    assert r.status == "infeasible"
    assert r.conflict == {0, 1}


def test_unbounded():
    r = solve_lp({"x": -1}, [({"x": 1}, ">=", 0)])
    assert r.status == "unbounded"


def test_fractional_optimum_is_exact():
    r = solve_lp({"x": 1, "y": 1}, [({"x": 2, "y": 1}, ">=", 1), ({"x": 1, "y": 2}, ">=", 1)])
    assert r.value == Fraction(2, 3)


def test_degenerate_cycle_terminates():
    # a classic cycling example under the largest-coefficient rule
    obj = {"x1": Fraction(-3, 4), "x2": 150, "x3": Fraction(-1, 50), "x4": 6}
    rows = [({"x1": Fraction(1, 4), "x2": -60, "x3": Fraction(-1, 25), "x4": 9}, "<=", 0),
            ({"x1": Fraction(1, 2), "x2": -90, "x3": Fraction(-1, 50), "x4": 3}, "<=", 0),
            ({"x3": 1}, "<=", 1)]
    r = solve_lp(obj, rows)
    assert r.status == "optimal" and r.value == Fraction(-1, 20)


def test_lattice_agreement_sample():
    rng = random.Random(7)
    for _ in range(40):
        obj, rows, names = difference_system(rng)
        r = solve_lp(obj, rows, names)
        b = lattice_minimum(obj, rows, names)
        assert (r.status == "optimal") == (b is not None)
        if b is not None:
            assert r.value == b[0]


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vertex_enumeration_agreement(seed):
    obj, rows, names = general_system(random.Random(seed))
    r = solve_lp(obj, rows, names)
    best = vertex_minimum(obj, rows, names)
    assert (r.status == "optimal") == (best is not None)
    if best is not None:
        assert r.value == best
        for coeffs, op, rhs in rows:
            lhs = sum(c * r.x.get(v, 0) for v, c in coeffs.items())
            assert lhs == rhs if op == "=" else lhs >= rhs if op == ">=" else lhs <= rhs
