import random

import pytest
from hypothesis import given, settings, strategies as st

from af2.bounds import Bounds
from af2.datatypes import church, iterate_app
from af2.reduction import (
    Equivalent,
    InvalidTrace,
    NoRedex,
    Normal,
    NotEquivalentWithinBounds,
    ReductionTrace,
    StepBoundExceeded,
    TraceStep,
    beta_eta_equiv,
    beta_reducts,
    beta_step,
    eta_reducts,
    eta_step,
    normalize,
    postpone_eta,
    replay,
)
from af2.terms import App, Free, format_term, free_vars, parse_term
from conftest import random_term
from oracles import n_alpha_eq, n_normalize, named_of

DELTA_DELTA = parse_term(r"(\x. x x) (\x. x x)")


def test_beta_step_identity_redex():
    assert beta_step(parse_term(r"(\x. x) y")) == Free("y")


def test_beta_step_delta_delta_loops():
    # one step of the divergent self-application yields the same term
    assert beta_step(DELTA_DELTA) == DELTA_DELTA


def test_beta_step_normal_form():
    assert isinstance(beta_step(parse_term(r"\x. x")), NoRedex)


def test_normalize_succ_two_is_three(bounds):
    succ = parse_term(r"\n. \x. \f. f (n x f)")
    res = normalize(App(succ, church(2)), bounds)
    assert isinstance(res, Normal)
    assert res.term == church(3)
    # hand beta-reduction oracle agrees
    oracle = n_normalize(named_of(App(succ, church(2))))
    assert n_alpha_eq(oracle, named_of(church(3)))


def test_normalize_delta_delta_exceeds_any_bound():
    for max_steps in (1, 10, 200):
        res = normalize(DELTA_DELTA, Bounds(max_steps=max_steps))
        assert isinstance(res, StepBoundExceeded)


def test_numeral_iterates_its_function(bounds):
    # k applied to a, g normalizes to g^k a for k <= 5 (unfolding the numeral)
    for k in range(6):
        applied = App(App(church(k), Free("a")), Free("g"))
        res = normalize(applied, bounds)
        assert isinstance(res, Normal)
        assert res.term == iterate_app(Free("g"), k, Free("a"))


def test_eta_step_basic():
    assert eta_step(parse_term(r"\x. y x")) == Free("y")


def test_eta_step_blocked_when_bound_var_used():
    assert isinstance(eta_step(parse_term(r"\x. x x")), NoRedex)


def test_eta_step_leftmost_outermost():
    # \x. \y. ((z) x) y: the outer abstraction is not an eta redex (its body
    # head uses x), the inner one is; enumeration of redexes confirms there is
    # exactly one.
    t = parse_term(r"\x. \y. z x y")
    redexes = eta_reducts(t)
    assert len(redexes) == 1
    assert eta_step(t) == parse_term(r"\x. z x")


def test_beta_eta_equiv_eta_collapse(bounds):
    assert isinstance(beta_eta_equiv(parse_term(r"\x. y x"), Free("y"), bounds), Equivalent)


def test_beta_eta_equiv_distinct_numerals(bounds):
    res = beta_eta_equiv(church(2), church(3), bounds)
    assert isinstance(res, NotEquivalentWithinBounds)
    assert res.reason == "distinct-normal-forms"


def test_beta_eta_equiv_mixed(bounds):
    t = parse_term(r"\x. ((\z. z) y) x")
    assert isinstance(beta_eta_equiv(t, Free("y"), bounds), Equivalent)


def test_normalize_idempotent_on_normals(bounds):
    rng = random.Random(3)
    for _ in range(80):
        t = random_term(rng, rng.randrange(2, 12))
        res = normalize(t, Bounds(max_steps=200, max_term_size=400))
        if isinstance(res, Normal):
            again = normalize(res.term, bounds)
            assert isinstance(again, Normal) and again.term == res.term and again.steps == 0


def test_fv_laws_under_reduction():
    # beta steps can only shrink the free variables; eta steps preserve them
    rng = random.Random(11)
    checked_beta = checked_eta = 0
    while checked_beta < 120 or checked_eta < 40:
        t = random_term(rng, rng.randrange(3, 15))
        for _, red in beta_reducts(t):
            assert free_vars(red) <= free_vars(t)
            checked_beta += 1
        for _, red in eta_reducts(t):
            assert free_vars(red) == free_vars(t)
            checked_eta += 1


# --- traces and eta postponement -------------------------------------------------


def _random_trace(rng: random.Random, max_steps: int = 6):
    """A random mixed beta/eta trace from a random start term."""
    while True:
        start = random_term(rng, rng.randrange(3, 13))
        steps = []
        cur = start
        for _ in range(rng.randrange(0, max_steps + 1)):
            options = [("beta", p, r) for p, r in beta_reducts(cur)]
            options += [("eta", p, r) for p, r in eta_reducts(cur)]
            options = [o for o in options if len(format_term(o[2])) < 400]
            if not options:
                break
            kind, path, red = rng.choice(options)
            steps.append(TraceStep(kind, path))
            cur = red
        return ReductionTrace(start, tuple(steps), cur)


def test_postpone_eta_spec_example(bounds):
    # eta-then-beta reordered into beta-then-eta with the same endpoints
    start = parse_term(r"\x. ((\y. y) z) x")
    t1 = eta_step(start)
    trace = ReductionTrace(
        start,
        (TraceStep("eta", ()), TraceStep("beta", ())),
        beta_step(t1),
    )
    assert replay(trace) == Free("z")
    out = postpone_eta(trace, bounds)
    assert out.start == start and out.end == Free("z")
    kinds = [s.kind for s in out.steps]
    assert kinds == sorted(kinds, key=lambda k: 0 if k == "beta" else 1)
    replay(out)


def test_postpone_eta_all_beta_unchanged(bounds):
    t = parse_term(r"(\x. x) y")
    trace = ReductionTrace(t, (TraceStep("beta", ()),), Free("y"))
    assert postpone_eta(trace, bounds) == trace


def test_postpone_eta_empty_unchanged(bounds):
    trace = ReductionTrace(Free("y"), (), Free("y"))
    assert postpone_eta(trace, bounds) == trace


def test_postpone_eta_rejects_invalid_traces(bounds):
    bad = ReductionTrace(Free("y"), (TraceStep("beta", ()),), Free("y"))
    with pytest.raises(InvalidTrace):
        postpone_eta(bad, bounds)


def test_postpone_eta_random_traces(bounds):
    rng = random.Random(2024)
    reordered = 0
    for _ in range(200):
        trace = _random_trace(rng)
        out = postpone_eta(trace, bounds)
        assert out.start == trace.start and out.end == trace.end
        kinds = [s.kind for s in out.steps]
        assert kinds == sorted(kinds, key=lambda k: 0 if k == "beta" else 1)
        replay(out)
        if kinds != [s.kind for s in trace.steps]:
            reordered += 1
    assert reordered > 0
