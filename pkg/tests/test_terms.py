import random

import pytest
from hypothesis import given, settings, strategies as st

from af2.terms import (
    Abs,
    App,
    Free,
    Var,
    format_term,
    free_vars,
    lam,
    parse_term,
    substitute,
    term_size,
)
from conftest import random_term
from oracles import n_alpha_eq, n_fv, n_subst, named_of


def test_free_vars_closed_identity():
    assert free_vars(parse_term(r"\x. x")) == set()


def test_free_vars_abstraction_drops_binder():
    assert free_vars(parse_term(r"\x. x y")) == {"y"}


def test_free_vars_application_union():
    # union law, checked against the structural-recursion oracle
    t = parse_term(r"(\x. x y) z")
    assert free_vars(t) == {"y", "z"}
    assert n_fv(named_of(t)) == {"y", "z"}


def test_substitute_variable():
    assert substitute(Free("x"), "x", Free("y")) == Free("y")


def test_substitute_capture_avoided():
    # (\y. x y)[y/x] must not capture: the binder is nameless internally, so
    # the result applies the free y under a distinct binder.
    t = parse_term(r"\y. x y")
    r = substitute(t, "x", Free("y"))
    assert r == Abs(App(Free("y"), Var(0)))
    assert format_term(r) != r"\y. y y"  # printer renames the binder


def test_substitute_duplicates():
    delta_body = parse_term("x x")
    delta = parse_term(r"\z. z z")
    assert substitute(delta_body, "x", delta) == App(delta, delta)


def test_parse_print_round_trip_examples():
    for text in [
        r"\x. x",
        r"\x. \f. f (f x)",
        r"(\x. x x) (\x. x x)",
        r"x (y z)",
        r"\x. x y",
    ]:
        t = parse_term(text)
        assert parse_term(format_term(t)) == t


def test_alpha_equivalence_structural():
    assert parse_term(r"\x. x") == parse_term(r"\y. y")
    assert parse_term(r"\x. \y. x") != parse_term(r"\x. \y. y")


def test_alpha_congruence_under_substitution():
    # substituting alpha-equal terms yields alpha-equal results
    rng = random.Random(7)
    for _ in range(100):
        t = random_term(rng, rng.randrange(2, 12))
        u1 = parse_term(r"\a. \b. a")
        u2 = parse_term(r"\c. \d. c")
        assert u1 == u2
        assert substitute(t, "a", u1) == substitute(t, "a", u2)


@given(st.integers(min_value=0, max_value=2**31), st.integers(min_value=2, max_value=14))
@settings(max_examples=150, deadline=None)
def test_substitute_agrees_with_named_oracle(seed, size):
    rng = random.Random(seed)
    t = random_term(rng, size)
    u = random_term(rng, rng.randrange(1, 6))
    mine = substitute(t, "a", u)
    oracle = n_subst(named_of(t), "a", named_of(u))
    assert n_alpha_eq(named_of(mine), oracle)


def test_term_size():
    assert term_size(parse_term(r"\x. x x")) == 4


def test_parser_rejects_garbage():
    with pytest.raises(Exception):
        parse_term(r"(\x. x")
    with pytest.raises(Exception):
        parse_term("")
