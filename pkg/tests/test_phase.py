from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from utils.phase import Phase, PhaseExpr, parse_phases

fractions = st.fractions(min_value=-8, max_value=8, max_denominator=12)


def test_phases_reduce_mod_two():
    assert Phase(5) == Phase(1)
    assert Phase.parse("-1/4") == Phase(Fraction(7, 4))
    assert str(Phase.parse("9/4")) == "1/4"


def test_phase_classification():
    assert Phase(0).is_zero and not Phase(1).is_zero
    assert Phase.parse("3/4").is_clifford_t and Phase(1).is_clifford_t
    assert not Phase.parse("1/3").is_clifford_t
    assert Phase.parse("3/4").eighths == 3
    with pytest.raises(ValueError):
        Phase.parse("1/3").eighths


def test_bad_phase_text():
    with pytest.raises(ValueError):
        Phase.parse("pi/2")


def test_expression_parsing_and_printing():
    e = PhaseExpr.parse("a+b-1/2")
    assert e.variables == ("a", "b")
    assert str(e) == "a+b+3/2"
    assert str(PhaseExpr.parse("-a")) == "-a"
    assert PhaseExpr.parse("3/4").is_constant
    with pytest.raises(ValueError):
        PhaseExpr.parse("a b")


def test_evaluate_needs_every_variable():
    e = PhaseExpr.parse("a+1")
    assert e.evaluate({"a": Phase.parse("1/2")}) == Phase.parse("3/2")
    with pytest.raises(KeyError):
        e.evaluate({})


def test_unify_solves_single_variable():
    e = PhaseExpr.parse("a+1/2")
    assert e.unify(Phase.parse("1/4"), {}) == {"a": Phase.parse("-1/4")}
    assert PhaseExpr.parse("-a").unify(Phase.parse("1/4"), {}) == {"a": Phase.parse("7/4")}


def test_unify_respects_existing_bindings():
    e = PhaseExpr.parse("a")
    assert e.unify(Phase(1), {"a": Phase(1)}) == {"a": Phase(1)}
    assert e.unify(Phase(0), {"a": Phase(1)}) is None


def test_unify_refuses_two_unknowns():
    assert PhaseExpr.parse("a+b").unify(Phase(0), {}) is None
    assert PhaseExpr.parse("a+b").unify(Phase(0), {"b": Phase(1)}) == {"a": Phase(1), "b": Phase(1)}


def test_parse_phases():
    assert parse_phases(["0", "1/2", 1]) == (Phase(0), Phase.parse("1/2"), Phase(1))


@given(fractions, fractions)
def test_addition_is_modular(x, y):
    assert Phase(x) + Phase(y) == Phase(x + y)
    assert Phase(x) - Phase(x) == Phase(0)
    assert -Phase(x) + Phase(x) == Phase(0)


@given(fractions, fractions)
def test_unified_value_evaluates_back(constant, target):
    e = PhaseExpr(constant, {"a": -1})
    solved = e.unify(Phase(target), {})
    assert solved is not None
    assert e.evaluate(solved) == Phase(target)
