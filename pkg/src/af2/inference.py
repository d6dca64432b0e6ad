"""Bounded inverse typing of beta-normal subjects and generation-lemma
decompositions, syntax-directed on the subject."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bounds import Bounds
from .judgments import Context, Derivation
from .logic import (
    Arrow,
    Atom,
    Formula,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    RelVar,
    Theory,
    all_names,
    alpha_eq,
    canon,
    fo_subst,
    fo_subterms,
    free_fo_vars,
    free_rel_vars,
    rel_subst,
    strip_forall_prefix,
)
from .orders import (
    ChainStep,
    EqStep,
    FoInst,
    InstChain,
    NotFoundWithinBounds,
    RelInst,
    SearchStats,
    apply_chain_step,
    leq,
    sim,
    sim_ball,
)
from .terms import Abs, App, Free, Term, free_vars, fresh_name, open_term, term_size


@dataclass(frozen=True)
class Typable:
    derivation: Derivation


@dataclass(frozen=True)
class NotTypableWithinBounds:
    exhaustive: bool
    detail: str = ""


MODES = ("AF2_0", "AF2Bounded")


# --- derivation assembly -----------------------------------------------------


def _apply_steps(d: Derivation, source: Formula, steps: tuple[ChainStep, ...], th: Theory) -> Derivation:
    """Extend a derivation with R5/R7/R70/R8 nodes realizing chain steps."""
    cur_type = source
    for step in steps:
        new_type = apply_chain_step(cur_type, step, th)
        if isinstance(step, FoInst):
            d = Derivation("R5", d.ctx, d.term, new_type, {"term": step.term}, (d,))
        elif isinstance(step, RelInst):
            if _is_pure_atomic(step):
                head = step.formula.head  # type: ignore[union-attr]
                d = Derivation("R70", d.ctx, d.term, new_type, {"rel": head.name}, (d,))
            else:
                d = Derivation(
                    "R7", d.ctx, d.term, new_type, {"params": step.params, "formula": step.formula}, (d,)
                )
        else:
            d = Derivation(
                "R8",
                d.ctx,
                d.term,
                new_type,
                {"template": step.template, "var": step.var, "lhs": step.lhs, "rhs": step.rhs},
                (d,),
            )
        cur_type = new_type
    return d


def _is_pure_atomic(step: RelInst) -> bool:
    f = step.formula
    return (
        isinstance(f, Atom)
        and len(f.args) == len(step.params)
        and all(isinstance(a, FoVar) and a.name == p for a, p in zip(f.args, step.params))
    )


def _generalize(d: Derivation, binders: list[tuple[str, Optional[int]]]) -> Derivation:
    """Wrap R4/R6 nodes for the given binders, innermost last."""
    for name, arity in reversed(binders):
        if arity is None:
            d = Derivation("R4", d.ctx, d.term, ForallFo(name, d.type), None, (d,))
        else:
            d = Derivation("R6", d.ctx, d.term, ForallRel(name, arity, d.type), None, (d,))
    return d


def _strip_fresh(goal: Formula, k: int, avoid: set[str]) -> tuple[list[tuple[str, Optional[int]]], Formula]:
    """Strip the first k binders of the goal, renamed fresh against `avoid`."""
    binders: list[tuple[str, Optional[int]]] = []
    cur = goal
    taken = set(avoid)
    for _ in range(k):
        if isinstance(cur, ForallFo):
            name = fresh_name(cur.var, taken | all_names(cur.body))
            taken.add(name)
            binders.append((name, None))
            cur = fo_subst(cur.body, [(cur.var, FoVar(name))]) if name != cur.var else cur.body
        elif isinstance(cur, ForallRel):
            name = fresh_name(cur.var, taken | all_names(cur.body))
            taken.add(name)
            binders.append((name, cur.arity))
            if name != cur.var:
                from .logic import rel_rename

                cur = rel_rename(cur.body, cur.var, name, cur.arity)
            else:
                cur = cur.body
        else:
            raise ValueError("not enough quantifiers to strip")
    return binders, cur


# --- candidate pools -----------------------------------------------------------


def _term_pool(ctx: Context, goal: Formula, th: Theory, bounds: Bounds, stats: SearchStats) -> list[FoTerm]:
    from .logic import FoApp, fo_size

    pool: list[FoTerm] = []
    seen: set[FoTerm] = set()

    def add(t: FoTerm) -> bool:
        if t not in seen:
            seen.add(t)
            pool.append(t)
        return len(pool) < 48

    def harvest(f: Formula) -> None:
        if isinstance(f, Atom):
            for a in f.args:
                for s in fo_subterms(a):
                    add(s)
        elif isinstance(f, Arrow):
            harvest(f.left)
            harvest(f.right)
        else:
            harvest(f.body)

    harvest(goal)
    for _, f in ctx.bindings:
        harvest(f)
    for name, arity in th.sig.fun_symbols:
        if arity == 0:
            add(FoApp(name))
    # One round of closure under unary declared symbols keeps succ-style
    # instantiations reachable without blowing the pool up.
    for name, arity in th.sig.fun_symbols:
        if arity == 1:
            for t in list(pool):
                if fo_size(t) <= bounds.max_inst_depth:
                    if not add(FoApp(name, (t,))):
                        stats.tripped = True
                        break
    taken = {t.name for t in pool if isinstance(t, FoVar)} | ctx.names()
    fresh = FoVar(fresh_name("w", taken | set(free_fo_vars(goal))))
    add(fresh)
    if len(pool) >= 48:
        stats.tripped = True
    return pool


def _rel_formula_candidates(
    arity: int, ctx: Context, goal: Formula, th: Theory, mode: str, stats: SearchStats
) -> list[Formula]:
    params = tuple(f"_z{i}" for i in range(arity))
    args = tuple(FoVar(p) for p in params)
    scope: dict[str, int] = dict(free_rel_vars(goal))
    for _, f in ctx.bindings:
        scope.update(free_rel_vars(f))
    out: list[Formula] = []
    for name in sorted(scope):
        if scope[name] == arity:
            out.append(Atom(RelVar(name, arity), args))
    from .logic import RelSym

    for name, a in th.sig.rel_symbols:
        if a == arity:
            out.append(Atom(RelSym(name), args))
    fresh = fresh_name("Z", set(scope) | {n for n, _ in th.sig.rel_symbols})
    out.append(Atom(RelVar(fresh, arity), args))
    if mode == "AF2Bounded":
        # Non-atomic instantiations exist beyond this candidate set.
        stats.tripped = True
    return out


# --- the syntax-directed search --------------------------------------------------


def spine_of(t: Term) -> Optional[tuple[str, list[Term]]]:
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    if isinstance(t, Free):
        return t.name, list(reversed(args))
    return None


def is_beta_normal(t: Term) -> bool:
    from .reduction import find_redex

    return find_redex(t, "beta") is None


def infer_normal(
    ctx: Context,
    t: Term,
    goal: Formula,
    th: Theory,
    mode: str = "AF2Bounded",
    bounds: Bounds = None,  # type: ignore[assignment]
) -> Typable | NotTypableWithinBounds:
    """Search for a derivation of ctx |- t : goal for a beta-normal subject.

    The refutation is flagged exhaustive when the theory has no equations and
    no incomplete candidate set or bound was hit during the search."""
    from .bounds import DEFAULT_BOUNDS

    bounds = bounds or DEFAULT_BOUNDS
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not is_beta_normal(t):
        raise ValueError("subject must be beta-normal")
    stats = SearchStats()
    d = _prove(ctx, t, goal, th, mode, bounds, stats, depth=2 * term_size(t) + 8)
    if d is None:
        exhaustive = not stats.tripped and not th.equations
        return NotTypableWithinBounds(exhaustive=exhaustive)
    return Typable(d)


def _prove(
    ctx: Context,
    t: Term,
    goal: Formula,
    th: Theory,
    mode: str,
    bounds: Bounds,
    stats: SearchStats,
    depth: int,
) -> Optional[Derivation]:
    if depth <= 0:
        stats.tripped = True
        return None
    prefix, _ = strip_forall_prefix(goal)
    avoid = ctx.free_fo() | ctx.free_rel() | set(free_fo_vars(goal)) | set(free_rel_vars(goal))
    for k in range(len(prefix) + 1):
        binders, body = _strip_fresh(goal, k, avoid)
        d = _prove_shape(ctx, t, body, th, mode, bounds, stats, depth)
        if d is not None:
            return _generalize(d, binders)
    return None


def _prove_shape(
    ctx: Context,
    t: Term,
    body: Formula,
    th: Theory,
    mode: str,
    bounds: Bounds,
    stats: SearchStats,
    depth: int,
) -> Optional[Derivation]:
    if isinstance(t, Free):
        declared = ctx.lookup(t.name)
        if declared is None:
            return None
        for m, eqsteps in sim_ball(body, th, bounds):
            chain = leq(declared, m, th, bounds, stats)
            if isinstance(chain, InstChain):
                d = Derivation("R1", ctx, t, declared, None, ())
                d = _apply_steps(d, declared, chain.steps, th)
                return _apply_steps(d, m, eqsteps, th)
        return None

    if isinstance(t, Abs):
        if not isinstance(body, Arrow):
            return None
        dom, cod = body.left, body.right
        for bv, bsteps in sim_ball(dom, th, bounds):
            for cv, csteps in sim_ball(cod, th, bounds):
                x = fresh_name(t.hint or "x", ctx.names() | free_vars(t))
                sub = _prove(
                    ctx.extend(x, bv), open_term(t.body, Free(x)), cv, th, mode, bounds, stats, depth - 1
                )
                if sub is None:
                    continue
                sub = _apply_steps(sub, cv, csteps, th)  # cv ~> cod
                d = Derivation("R2", ctx, t, Arrow(bv, cod), None, (sub,))
                lift: tuple[ChainStep, ...] = tuple(
                    EqStep(Arrow(s.template, cod), s.var, s.lhs, s.rhs) for s in bsteps
                )
                return _apply_steps(d, Arrow(bv, cod), lift, th)
        return None

    sp = spine_of(t)
    if sp is None:
        return None
    head, args = sp
    declared = ctx.lookup(head)
    if declared is None:
        return None
    d0 = Derivation("R1", ctx, Free(head), declared, None, ())
    return _spine(ctx, d0, declared, args, body, th, mode, bounds, stats, depth)


def _spine(
    ctx: Context,
    d: Derivation,
    current: Formula,
    args: list[Term],
    body: Formula,
    th: Theory,
    mode: str,
    bounds: Bounds,
    stats: SearchStats,
    depth: int,
) -> Optional[Derivation]:
    if not args:
        for m, eqsteps in sim_ball(body, th, bounds):
            chain = leq(current, m, th, bounds, stats)
            if isinstance(chain, InstChain):
                out = _apply_steps(d, current, chain.steps, th)
                return _apply_steps(out, m, eqsteps, th)
        return None
    arg, rest = args[0], args[1:]
    for steps, arrow in _arrow_instances(ctx, current, body, th, mode, bounds, stats):
        arg_d = _prove(ctx, arg, arrow.left, th, mode, bounds, stats, depth - 1)
        if arg_d is None:
            continue
        fn_d = _apply_steps(d, current, steps, th)
        app_d = Derivation("R3", ctx, App(fn_d.term, arg_d.term), arrow.right, None, (fn_d, arg_d))
        for nxt, eqsteps in _sim_ball_from(arrow.right, th, bounds):
            stepped = _apply_steps(app_d, arrow.right, eqsteps, th)
            out = _spine(ctx, stepped, nxt, rest, body, th, mode, bounds, stats, depth)
            if out is not None:
                return out
    return None


def _sim_ball_from(A: Formula, th: Theory, bounds: Bounds) -> list[tuple[Formula, tuple[EqStep, ...]]]:
    """Formulas M with a ~ chain A -> M, paired with that forward chain."""
    out = [(A, ())]
    for m, steps_to_a in sim_ball(A, th, bounds):
        if alpha_eq(m, A):
            continue
        forward = tuple(EqStep(s.template, s.var, s.rhs, s.lhs) for s in reversed(steps_to_a))
        out.append((m, forward))
    return out


def _arrow_instances(
    ctx: Context,
    current: Formula,
    goal: Formula,
    th: Theory,
    mode: str,
    bounds: Bounds,
    stats: SearchStats,
):
    """Enumerate chains current <= C -> D exposing an arrow at the head."""
    results: list[tuple[tuple[ChainStep, ...], Arrow]] = []
    seen: set = set()

    def go(cur: Formula, steps: tuple[ChainStep, ...], budget: int) -> None:
        if isinstance(cur, Arrow):
            key = canon(cur)
            if key not in seen:
                seen.add(key)
                results.append((steps, cur))
            return
        if isinstance(cur, Atom):
            return
        if budget <= 0:
            stats.tripped = True
            return
        if isinstance(cur, ForallFo):
            for u in _term_pool(ctx, goal, th, bounds, stats):
                go(fo_subst(cur.body, [(cur.var, u)]), steps + (FoInst(u),), budget - 1)
            return
        params = tuple(f"_z{i}" for i in range(cur.arity))
        for F in _rel_formula_candidates(cur.arity, ctx, goal, th, mode, stats):
            go(rel_subst(cur.body, cur.var, params, F), steps + (RelInst(params, F),), budget - 1)

    prefix, _ = strip_forall_prefix(current)
    go(current, (), len(prefix) + bounds.max_inst_depth)
    return results


# --- generation-lemma decompositions ----------------------------------------------


@dataclass(frozen=True)
class VarDecomposition:
    xi: tuple[tuple[str, Optional[int]], ...]
    c_prime: Formula
    c: Formula
    declared: Formula
    leq_chain: InstChain
    sim_chain: InstChain


@dataclass(frozen=True)
class AbsDecomposition:
    xi: tuple[tuple[str, Optional[int]], ...]
    b_prime: Formula
    c_prime: Formula
    b: Formula
    c: Formula
    premise: Derivation


@dataclass(frozen=True)
class SpineEntry:
    c_i: Formula
    b_i: Formula
    b_prime_i: Formula
    arg_derivation: Derivation


@dataclass(frozen=True)
class SpineDecomposition:
    xi: tuple[tuple[str, Optional[int]], ...]
    head: str
    entries: tuple[SpineEntry, ...]
    final: Formula


Decomposition = VarDecomposition | AbsDecomposition | SpineDecomposition


def generation(
    ctx: Context,
    t: Term,
    goal: Formula,
    th: Theory,
    bounds: Bounds,
    mode: str = "AF2Bounded",
) -> Decomposition | NotTypableWithinBounds:
    """Invert a (would-be) judgment by the shape of the subject, returning the
    decomposition data of the matching generation clause."""
    stats = SearchStats()
    prefix, _ = strip_forall_prefix(goal)
    avoid = ctx.free_fo() | ctx.free_rel() | set(free_fo_vars(goal)) | set(free_rel_vars(goal))

    if isinstance(t, Free):
        declared = ctx.lookup(t.name)
        if declared is None:
            return NotTypableWithinBounds(exhaustive=True, detail="variable not declared")
        for k in range(len(prefix) + 1):
            binders, c_prime = _strip_fresh(goal, k, avoid)
            for c, eqsteps in sim_ball(c_prime, th, bounds):
                chain = leq(declared, c, th, bounds, stats)
                if isinstance(chain, InstChain):
                    return VarDecomposition(
                        tuple(binders), c_prime, c, declared, chain, InstChain(c, eqsteps, c_prime)
                    )
        return NotTypableWithinBounds(exhaustive=not stats.tripped and not th.equations)

    if isinstance(t, Abs):
        for k in range(len(prefix) + 1):
            binders, body = _strip_fresh(goal, k, avoid)
            if not isinstance(body, Arrow):
                continue
            for bv, _ in sim_ball(body.left, th, bounds):
                for cv, _ in sim_ball(body.right, th, bounds):
                    x = fresh_name(t.hint or "x", ctx.names() | free_vars(t))
                    sub = _prove(
                        ctx.extend(x, bv),
                        open_term(t.body, Free(x)),
                        cv,
                        th,
                        mode,
                        bounds,
                        stats,
                        depth=2 * term_size(t) + 8,
                    )
                    if sub is not None:
                        return AbsDecomposition(tuple(binders), body.left, body.right, bv, cv, sub)
        return NotTypableWithinBounds(exhaustive=not stats.tripped and not th.equations)

    sp = spine_of(t)
    if sp is None:
        return NotTypableWithinBounds(exhaustive=False, detail="application head is not a variable")
    res = infer_normal(ctx, t, goal, th, mode, bounds) if is_beta_normal(t) else None
    if res is None or isinstance(res, NotTypableWithinBounds):
        if res is None:
            return NotTypableWithinBounds(exhaustive=False, detail="subject not beta-normal")
        return res
    head, args = sp
    entries = _spine_entries(res.derivation, len(args))
    for k in range(len(prefix) + 1):
        binders, body = _strip_fresh(goal, k, avoid)
        if entries is not None:
            return SpineDecomposition(tuple(binders), head, entries, body)
    return NotTypableWithinBounds(exhaustive=False)


def _spine_entries(d: Derivation, n: int) -> Optional[tuple[SpineEntry, ...]]:
    """Read the per-argument data back off a derivation built by _spine."""
    entries: list[SpineEntry] = []

    def walk(node: Derivation) -> Optional[Derivation]:
        while node.rule in ("R5", "R7", "R70", "R8", "R4", "R6"):
            node = node.premises[0]
        if node.rule == "R3":
            fn = walk(node.premises[0])
            if fn is None:
                return None
            arg = node.premises[1]
            entries.append(SpineEntry(arg.type, node.type, node.type, arg))
            return node
        if node.rule == "R1":
            return node
        return None

    if walk(d) is None or len(entries) != n:
        return None
    return tuple(entries)
