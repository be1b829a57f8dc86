"""Condition/expression fragment: parsing, printing, evaluation, negation."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from covdb import conditions as C
from covdb.values import OMEGA


def ev(text, **row):
    return C.eval_condition(C.parse_condition(text), row)


def test_comparisons():
    assert ev("a < 5", a=3)
    assert not ev("a < 5", a=7)
    assert ev("a = 'x'", a="x")
    assert ev("a != 'x'", a="y")
    assert ev("a >= 2 AND b = 1", a=2, b=1)
    assert ev("a = 1 OR b = 1", a=0, b=1)
    assert ev("NOT a = 1", a=2)


def test_omega_fails_every_comparison_except_equality_with_itself():
    assert ev("a = NULL", a=OMEGA)
    assert not ev("a = NULL", a=1)
    assert ev("a != NULL", a=1)
    assert not ev("a < 5", a=OMEGA)
    assert not ev("a >= 5", a=OMEGA)
    assert not ev("a = 5", a=OMEGA)
    # != is the negation of =, so omega != 5 holds
    assert ev("a != 5", a=OMEGA)


def test_cross_type_comparison_is_false_not_an_error():
    assert not ev("a < 'x'", a=1)
    assert not ev("a = 'x'", a=1)
    assert ev("a != 'x'", a=1)


def test_expression_evaluation():
    e = C.parse_expression("prio + 1")
    assert C.eval_expression(e, {"prio": 2}) == 3
    assert C.eval_expression(e, {"prio": OMEGA}) is OMEGA  # omega poisons arithmetic
    assert C.eval_expression(C.parse_expression("-a * 2"), {"a": 3}) == -6


conditions = st.recursive(
    st.one_of(
        st.builds(
            C.Cmp,
            st.builds(C.Col, st.sampled_from("abc")),
            st.sampled_from(["=", "!=", "<", "<=", ">", ">="]),
            st.one_of(
                st.builds(C.Col, st.sampled_from("abc")),
                st.builds(C.Lit, st.integers(-9, 9)),
                st.builds(C.Lit, st.sampled_from(["x", "y"])),
                st.just(C.Lit(OMEGA)),
            ),
        ),
        st.builds(C.BoolConst, st.booleans()),
    ),
    lambda inner: st.one_of(
        st.builds(C.Not, inner),
        st.builds(lambda a, b: C.And((a, b)), inner, inner),
        st.builds(lambda a, b: C.Or((a, b)), inner, inner),
    ),
    max_leaves=8,
)

rows = st.fixed_dictionaries(
    {k: st.one_of(st.integers(-9, 9), st.sampled_from(["x", "y"]), st.just(OMEGA))
     for k in "abc"}
)


@given(conditions)
def test_print_parse_roundtrip(cond):
    text = C.print_condition(cond)
    assert C.parse_condition(text) == cond


@given(conditions, rows)
def test_negate_is_complement(cond, row):
    assert C.eval_condition(C.negate(cond), row) != C.eval_condition(cond, row)


def test_rename_columns():
    cond = C.parse_condition("prio = 1 AND author != NULL")
    renamed = C.rename_columns(cond, {"prio": "p2"})
    assert C.condition_columns(renamed) == frozenset({"p2", "author"})


def test_parse_error():
    from covdb.lex import ParseError

    with pytest.raises(ParseError):
        C.parse_condition("a = ")
