import random

import pytest

from af2.bounds import Bounds
from af2.equations import Equal, NotEqualWithinBounds, approx_e, eq_instance, is_equal, term_replace_at
from af2.logic import (
    ArityError,
    Atom,
    Arrow,
    ForallFo,
    ForallRel,
    FoApp,
    FoVar,
    RelVar,
    Signature,
    Theory,
    alpha_eq,
    closure,
    fo_subst,
    format_formula,
    format_fo_term,
    format_theory,
    free_fo_vars,
    parse_formula,
    parse_fo_term,
    parse_theory,
    rel_subst,
    rename_apart,
)
from oracles import cc_equal, naive_rel_subst


def test_fo_subst_atom():
    f = parse_formula("X(x)")
    assert alpha_eq(fo_subst(f, [("x", FoApp("0"))]), parse_formula("X(0)"))


def test_fo_subst_bound_variable_untouched():
    f = parse_formula("forall x. X(x)")
    assert alpha_eq(fo_subst(f, [("x", FoApp("0"))]), f)


def test_fo_subst_nat_type_instance(nat_theory):
    n = parse_formula("forall X/1. X(0) -> ((forall y. X(y) -> X(s(y))) -> X(x))", nat_theory.sig)
    inst = fo_subst(n, [("x", parse_fo_term("s(0)", nat_theory.sig))])
    expected = parse_formula(
        "forall X/1. X(0) -> ((forall y. X(y) -> X(s(y))) -> X(s(0)))", nat_theory.sig
    )
    assert alpha_eq(inst, expected)


def test_fo_subst_capture_avoided():
    # (forall y. X(x, y))[y/x]: the binder must be renamed
    f = parse_formula("forall y. X(x, y)")
    out = fo_subst(f, [("x", FoVar("y"))])
    assert isinstance(out, ForallFo)
    assert out.var != "y"
    assert alpha_eq(out, parse_formula("forall z. X(y, z)"))


def test_rel_subst_propositional():
    f = parse_formula("X -> X")
    sub = parse_formula("Y -> (Y -> Y)")
    out = rel_subst(f, "X", (), sub)
    assert alpha_eq(out, parse_formula("(Y -> (Y -> Y)) -> (Y -> (Y -> Y))"))


def test_rel_subst_bound_untouched():
    f = parse_formula("forall X/0. X -> X")
    out = rel_subst(f, "X", (), parse_formula("Y"))
    assert alpha_eq(out, f)


def test_rel_subst_with_parameters_matches_naive_oracle():
    # X(s(y)) with X(z) := forall W/0. W -> Z(z) becomes forall W. W -> Z(s(y))
    f = parse_formula("X(s(y))")
    sub = parse_formula("forall W/0. W -> Z(z)")
    out = rel_subst(f, "X", ("z",), sub)
    expected = parse_formula("forall W/0. W -> Z(s(y))")
    assert alpha_eq(out, expected)
    assert alpha_eq(out, naive_rel_subst(f, "X", ("z",), sub))


def test_rel_subst_arity_mismatch():
    with pytest.raises(ArityError):
        rel_subst(parse_formula("X(x, y)"), "X", ("z",), parse_formula("Y(z)"))


def test_rel_subst_random_cross_check(nat_theory):
    rng = random.Random(5)
    pool = [
        "X(x)",
        "X(x) -> Y(0)",
        "forall z. X(z) -> X(s(z))",
        "(X(0) -> Y(x)) -> X(s(x))",
        "forall W/1. W(x) -> X(x)",
    ]
    subs = ["Z(z) -> Z(z)", "forall v. Z(v) -> W0(z)", "Z(s(z))"]
    for f_text in pool:
        for s_text in subs:
            f = rename_apart(parse_formula(f_text, nat_theory.sig))
            sub = rename_apart(parse_formula(s_text, nat_theory.sig))
            out = rel_subst(f, "X", ("z",), sub)
            assert alpha_eq(out, naive_rel_subst(f, "X", ("z",), sub))


def test_closure_orders_quantifiers():
    assert format_formula(closure(parse_formula("X(0)"))) == "forall X/1. X(0)"
    assert format_formula(closure(parse_formula("X(x)"))) == "forall x. forall X/1. X(x)"
    closed = parse_formula("forall X/0. X -> X")
    assert closure(closed) == closed


def test_signature_rejects_overlap():
    with pytest.raises(ArityError):
        Signature((("f", 1),), (("f", 2),))


def test_theory_round_trip(pred_theory):
    text = format_theory(pred_theory)
    again = parse_theory(text)
    assert again == pred_theory


def test_one_sided_equation_flagged():
    th = parse_theory("fun f/1.\nfun 0/0.\neq f(x) = 0.\n")
    assert th.one_sided_equations()
    pred = parse_theory("fun 0/0.\nfun s/1.\nfun p/1.\neq p(s x) = x.\n")
    assert not pred.one_sided_equations()


# --- instances and the congruence ----------------------------------------------


def test_eq_instance_pred_examples(pred_theory):
    sig = pred_theory.sig
    assert eq_instance(parse_fo_term("p(s(y))", sig), FoVar("y"), pred_theory)
    assert eq_instance(parse_fo_term("p(0)", sig), FoApp("0"), pred_theory)
    assert eq_instance(FoApp("0"), parse_fo_term("p(0)", sig), pred_theory)  # symmetric
    assert not eq_instance(parse_fo_term("s(0)", sig), FoApp("0"), pred_theory)


def test_approx_e_examples(pred_theory, bounds):
    sig = pred_theory.sig
    a = parse_fo_term("p(s(s(0)))", sig)
    b = parse_fo_term("s(0)", sig)
    res = approx_e(a, b, pred_theory, bounds)
    assert isinstance(res, Equal) and len(res.path) == 1
    assert isinstance(approx_e(a, a, pred_theory, bounds), Equal)
    assert isinstance(
        approx_e(parse_fo_term("s(0)", sig), FoApp("0"), pred_theory, bounds),
        NotEqualWithinBounds,
    )
    # the congruence-closure oracle agrees on all three
    assert cc_equal(a, b, pred_theory)
    assert not cc_equal(parse_fo_term("s(0)", sig), FoApp("0"), pred_theory)


def test_approx_e_congruence_inside_context(pred_theory, bounds):
    sig = pred_theory.sig
    a = parse_fo_term("s(p(s(0)))", sig)
    b = parse_fo_term("s(0)", sig)
    assert is_equal(a, b, pred_theory, bounds)
    assert cc_equal(a, b, pred_theory)


def test_approx_e_path_replays(pred_theory, bounds):
    sig = pred_theory.sig
    a = parse_fo_term("p(s(p(s(0))))", sig)
    b = FoApp("0")
    res = approx_e(a, b, pred_theory, bounds)
    assert isinstance(res, Equal)
    cur = a
    for src, step in res.path:
        assert src == cur
        assert eq_instance(step.lhs, step.rhs, pred_theory)
        cur = term_replace_at(src, step.path, step.rhs)
    assert cur == b


def test_approx_e_equivalence_properties(pred_theory, bounds):
    sig = pred_theory.sig
    terms = [
        parse_fo_term(t, sig)
        for t in ["0", "s(0)", "p(0)", "p(s(0))", "s(p(0))", "p(s(s(0)))", "x", "p(s(x))"]
    ]
    for t in terms:
        assert is_equal(t, t, pred_theory, bounds)  # reflexive
    for t in terms:
        for u in terms:
            assert is_equal(t, u, pred_theory, bounds) == is_equal(u, t, pred_theory, bounds)
            assert is_equal(t, u, pred_theory, bounds) == cc_equal(t, u, pred_theory)
    # transitivity within summed bounds on a concrete chain
    big = Bounds(max_congr_depth=12)
    a = parse_fo_term("p(s(p(s(0))))", sig)
    m = parse_fo_term("p(s(0))", sig)
    b = FoApp("0")
    assert is_equal(a, m, pred_theory, bounds) and is_equal(m, b, pred_theory, bounds)
    assert is_equal(a, b, pred_theory, big)
    # congruence for declared symbols
    assert is_equal(FoApp("s", (a,)), FoApp("s", (b,)), pred_theory, big)


def test_eq_instance_implies_approx_at_depth_one(pred_theory):
    sig = pred_theory.sig
    shallow = Bounds(max_congr_depth=1)
    pairs = [("p(0)", "0"), ("p(s(x))", "x"), ("p(s(s(0)))", "s(0)")]
    for lt, rt in pairs:
        a, b = parse_fo_term(lt, sig), parse_fo_term(rt, sig)
        assert eq_instance(a, b, pred_theory)
        assert is_equal(a, b, pred_theory, shallow)


def test_formula_parse_print_round_trip(nat_theory):
    texts = [
        "forall X/1. X(0) -> ((forall y. X(y) -> X(s(y))) -> X(x))",
        "forall X/0. (forall Y/0. Y -> X) -> X",
        "X(s(0)) -> (X(0) -> X(x))",
    ]
    for text in texts:
        f = parse_formula(text, nat_theory.sig)
        assert alpha_eq(parse_formula(format_formula(f), nat_theory.sig), f)
