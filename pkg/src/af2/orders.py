"""The instantiation order on types and equational variance: chains of
head-quantifier instantiations (<') and single-variable equational rewrites
(~'), with replayable witnesses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .bounds import Bounds
from .equations import eq_instance
from .logic import (
    Arrow,
    Atom,
    Formula,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    RelSym,
    RelVar,
    Theory,
    all_names,
    alpha_eq,
    canon,
    fo_size,
    fo_subst,
    fo_subterms,
    format_formula,
    free_fo_vars,
    free_rel_vars,
    rel_subst,
    strip_forall_prefix,
)
from .terms import fresh_name


@dataclass(frozen=True)
class FoInst:
    term: FoTerm


@dataclass(frozen=True)
class RelInst:
    params: tuple[str, ...]
    formula: Formula


@dataclass(frozen=True)
class EqStep:
    template: Formula
    var: str
    lhs: FoTerm
    rhs: FoTerm


ChainStep = Union[FoInst, RelInst, EqStep]


@dataclass(frozen=True)
class InstChain:
    source: Formula
    steps: tuple[ChainStep, ...]
    target: Formula


class ChainError(ValueError):
    pass


def apply_chain_step(f: Formula, step: ChainStep, th: Optional[Theory] = None) -> Formula:
    if isinstance(step, FoInst):
        if not isinstance(f, ForallFo):
            raise ChainError("first-order instantiation needs a first-order quantifier head")
        return fo_subst(f.body, [(f.var, step.term)])
    if isinstance(step, RelInst):
        if not isinstance(f, ForallRel):
            raise ChainError("second-order instantiation needs a second-order quantifier head")
        if len(step.params) != f.arity:
            raise ChainError("instantiation parameter count differs from the arity")
        return rel_subst(f.body, f.var, step.params, step.formula)
    if not alpha_eq(f, fo_subst(step.template, [(step.var, step.lhs)])):
        raise ChainError("equational step lhs does not match")
    if th is not None and not eq_instance(step.lhs, step.rhs, th):
        raise ChainError("equational step is not an equation instance")
    return fo_subst(step.template, [(step.var, step.rhs)])


def replay_chain(chain: InstChain, th: Optional[Theory] = None) -> Formula:
    cur = chain.source
    for step in chain.steps:
        cur = apply_chain_step(cur, step, th)
    if not alpha_eq(cur, chain.target):
        raise ChainError(
            f"chain replays to {format_formula(cur)}, recorded target {format_formula(chain.target)}"
        )
    return cur


@dataclass(frozen=True)
class NotFoundWithinBounds:
    exhaustive: bool = False


@dataclass
class SearchStats:
    """Tracks whether any bound or incomplete candidate set cut the search."""

    tripped: bool = False


# --- the instantiation order <= -------------------------------------------------


def _fo_candidate_pool(target: Formula, th: Theory, extra: tuple[FoTerm, ...] = ()) -> list[FoTerm]:
    """Candidate instantiation terms: subterms of the target plus declared
    constants plus a fresh variable. Complete for pure first-order chains
    into a fixed target."""
    pool: list[FoTerm] = []
    seen = set()

    def add(t: FoTerm) -> None:
        if t not in seen:
            seen.add(t)
            pool.append(t)

    for t in _formula_terms(target):
        for s in fo_subterms(t):
            add(s)
    for t in extra:
        add(t)
    for name, arity in th.sig.fun_symbols:
        if arity == 0:
            add(_const(name))
    taken = free_fo_vars(target) | all_names(target)
    add(FoVar(fresh_name("w", taken)))
    return pool


def _const(name: str) -> FoTerm:
    from .logic import FoApp

    return FoApp(name)


def _formula_terms(f: Formula) -> Iterator[FoTerm]:
    if isinstance(f, Atom):
        yield from f.args
    elif isinstance(f, Arrow):
        yield from _formula_terms(f.left)
        yield from _formula_terms(f.right)
    else:
        yield from _formula_terms(f.body)


def _atomic_rel_candidates(arity: int, scope: Formula, th: Theory) -> list[Formula]:
    params = tuple(f"_z{i}" for i in range(arity))
    args = tuple(FoVar(p) for p in params)
    out: list[Formula] = []
    for name, a in sorted(free_rel_vars(scope).items()):
        if a == arity:
            out.append(Atom(RelVar(name, arity), args))
    for name, a in th.sig.rel_symbols:
        if a == arity:
            out.append(Atom(RelSym(name), args))
    fresh = fresh_name("Z", set(free_rel_vars(scope)) | all_names(scope))
    out.append(Atom(RelVar(fresh, arity), args))
    return out


def leq(
    A: Formula,
    B: Formula,
    th: Theory,
    bounds: Bounds,
    stats: Optional[SearchStats] = None,
) -> InstChain | NotFoundWithinBounds:
    """Search for a chain of head-quantifier instantiations from A to B."""
    stats = stats if stats is not None else SearchStats()
    prefix, _ = strip_forall_prefix(A)
    max_len = len(prefix) + bounds.max_inst_depth
    steps = _leq_steps(A, B, th, bounds, max_len, stats)
    if steps is None:
        return NotFoundWithinBounds(exhaustive=not stats.tripped)
    return InstChain(A, tuple(steps), B)


def _leq_steps(
    A: Formula,
    B: Formula,
    th: Theory,
    bounds: Bounds,
    budget: int,
    stats: SearchStats,
) -> Optional[list[ChainStep]]:
    if alpha_eq(A, B):
        return []
    if budget <= 0:
        if isinstance(A, (ForallFo, ForallRel)):
            stats.tripped = True
        return None
    if isinstance(A, ForallFo):
        tried = set()
        for u in _fo_candidate_pool(B, th):
            inst = fo_subst(A.body, [(A.var, u)])
            key = canon(inst)
            if key in tried:
                continue
            tried.add(key)
            rest = _leq_steps(inst, B, th, bounds, budget - 1, stats)
            if rest is not None:
                return [FoInst(u)] + rest
        return None
    if isinstance(A, ForallRel):
        cands = _atomic_rel_candidates(A.arity, B, th)
        inv = _invert_rel(A, B)
        if inv is not None:
            cands = [inv] + cands
        params = tuple(f"_z{i}" for i in range(A.arity))
        tried = set()
        for F in cands:
            inst = rel_subst(A.body, A.var, params, F)
            key = canon(inst)
            if key in tried:
                continue
            tried.add(key)
            rest = _leq_steps(inst, B, th, bounds, budget - 1, stats)
            if rest is not None:
                return [RelInst(params, F)] + rest
        if inv is None:
            # A non-atomic instantiation could exist beyond the candidates.
            stats.tripped = True
        return None
    return None


def _invert_rel(A: ForallRel, B: Formula) -> Optional[Formula]:
    """Guess a full-formula instantiation by aligning A's body against B when
    the remaining prefix is exactly this one quantifier."""
    if isinstance(A.body, (ForallFo, ForallRel)):
        return None
    params = tuple(f"_z{i}" for i in range(A.arity))
    sol: dict[str, Formula] = {}
    if _match_formula(A.body, B, {A.var: params}, sol, {}):
        return sol.get(A.var)
    return None


def _match_formula(
    pattern: Formula,
    target: Formula,
    rel_mvars: dict[str, tuple[str, ...]],
    sol: dict[str, Formula],
    env: dict[str, str],
) -> bool:
    """Match second-order metavariables by inversion; first-order parts must
    agree literally (modulo bound-variable correspondence in env)."""
    if isinstance(pattern, Atom) and isinstance(pattern.head, RelVar) and pattern.head.name in rel_mvars:
        params = rel_mvars[pattern.head.name]
        args = tuple(_env_term(t, env) for t in pattern.args)
        candidate = _abstract(target, args, params)
        if candidate is None:
            return False
        bound = sol.get(pattern.head.name)
        if bound is None:
            sol[pattern.head.name] = candidate
            return True
        return alpha_eq(bound, candidate)
    if isinstance(pattern, Atom) and isinstance(target, Atom):
        if isinstance(pattern.head, RelVar):
            name = env.get(pattern.head.name, pattern.head.name)
            if not (isinstance(target.head, RelVar) and target.head.name == name):
                return False
        elif pattern.head != target.head:
            return False
        if len(pattern.args) != len(target.args):
            return False
        return all(_env_term(p, env) == q for p, q in zip(pattern.args, target.args))
    if isinstance(pattern, Arrow) and isinstance(target, Arrow):
        return _match_formula(pattern.left, target.left, rel_mvars, sol, env) and _match_formula(
            pattern.right, target.right, rel_mvars, sol, env
        )
    if isinstance(pattern, ForallFo) and isinstance(target, ForallFo):
        return _match_formula(pattern.body, target.body, rel_mvars, sol, {**env, pattern.var: target.var})
    if isinstance(pattern, ForallRel) and isinstance(target, ForallRel):
        if pattern.arity != target.arity:
            return False
        return _match_formula(pattern.body, target.body, rel_mvars, sol, {**env, pattern.var: target.var})
    return False


def _env_term(t: FoTerm, env: dict[str, str]) -> FoTerm:
    if isinstance(t, FoVar):
        return FoVar(env.get(t.name, t.name))
    from .logic import FoApp

    return FoApp(t.sym, tuple(_env_term(a, env) for a in t.args))


def _abstract(target: Formula, args: tuple[FoTerm, ...], params: tuple[str, ...]) -> Optional[Formula]:
    """Invert a substitution: replace every occurrence of args[i] in the
    target's atom arguments by params[i] (largest terms first)."""
    order = sorted(range(len(args)), key=lambda i: -fo_size(args[i]))

    def abstract_term(t: FoTerm) -> FoTerm:
        for i in order:
            if t == args[i]:
                return FoVar(params[i])
        if isinstance(t, FoVar):
            return t
        from .logic import FoApp

        return FoApp(t.sym, tuple(abstract_term(a) for a in t.args))

    def go(f: Formula) -> Formula:
        if isinstance(f, Atom):
            return Atom(f.head, tuple(abstract_term(a) for a in f.args))
        if isinstance(f, Arrow):
            return Arrow(go(f.left), go(f.right))
        if isinstance(f, ForallFo):
            return ForallFo(f.var, go(f.body))
        return ForallRel(f.var, f.arity, go(f.body))

    if any(p in free_fo_vars(target) | all_names(target) for p in params):
        return None  # parameter names would be captured
    return go(target)


# --- the equational variance ~ ---------------------------------------------------


def _zip_template(a: Formula, b: Formula, u: FoTerm, v: FoTerm, hole: str) -> Optional[Formula]:
    """Common template C with C[u/hole] = a and C[v/hole] = b, replacing at
    exactly the positions where a holds u and b holds v."""

    def zip_term(s: FoTerm, t: FoTerm) -> Optional[FoTerm]:
        if s == u and t == v:
            return FoVar(hole)
        if s == t:
            return s
        if isinstance(s, FoVar) or isinstance(t, FoVar):
            return None
        if s.sym != t.sym or len(s.args) != len(t.args):
            return None
        from .logic import FoApp

        args = []
        for x, y in zip(s.args, t.args):
            z = zip_term(x, y)
            if z is None:
                return None
            args.append(z)
        return FoApp(s.sym, tuple(args))

    def go(x: Formula, y: Formula) -> Optional[Formula]:
        if isinstance(x, Atom) and isinstance(y, Atom):
            if x.head != y.head or len(x.args) != len(y.args):
                return None
            args = []
            for s, t in zip(x.args, y.args):
                z = zip_term(s, t)
                if z is None:
                    return None
                args.append(z)
            return Atom(x.head, tuple(args))
        if isinstance(x, Arrow) and isinstance(y, Arrow):
            left = go(x.left, y.left)
            right = go(x.right, y.right)
            if left is None or right is None:
                return None
            return Arrow(left, right)
        if isinstance(x, ForallFo) and isinstance(y, ForallFo):
            if x.var != y.var or x.var == hole:
                return None
            body = go(x.body, y.body)
            return None if body is None else ForallFo(x.var, body)
        if isinstance(x, ForallRel) and isinstance(y, ForallRel):
            if x.var != y.var or x.arity != y.arity:
                return None
            body = go(x.body, y.body)
            return None if body is None else ForallRel(x.var, x.arity, body)
        return None

    return go(a, b)


def _contains(t: FoTerm, sub: FoTerm) -> bool:
    return any(s == sub for s in fo_subterms(t))


def sim_step(a: Formula, b: Formula, th: Theory) -> Optional[EqStep]:
    """A single ~'-step from a to b, if one exists."""
    pairs = _diff_pairs(a, b)
    if pairs is None or not pairs:
        return None
    hole = fresh_name("_h", all_names(a) | all_names(b))
    seen = set()
    first = pairs[0]
    for u, v in _ancestor_pairs(a, b, first):
        if (u, v) in seen or u == v:
            continue
        seen.add((u, v))
        if not eq_instance(u, v, th):
            continue
        template = _zip_template(a, b, u, v, hole)
        if template is not None:
            return EqStep(template, hole, u, v)
    return None


def _diff_pairs(a: Formula, b: Formula) -> Optional[list[tuple[FoTerm, FoTerm]]]:
    """Aligned differing term pairs; None on structural mismatch. Bound
    variables must already agree by name (callers align with rename_apart
    or use formulas from a common origin)."""
    out: list[tuple[FoTerm, FoTerm]] = []

    def zip_term(s: FoTerm, t: FoTerm) -> bool:
        if s == t:
            return True
        if (
            not isinstance(s, FoVar)
            and not isinstance(t, FoVar)
            and s.sym == t.sym
            and len(s.args) == len(t.args)
        ):
            return all(zip_term(x, y) for x, y in zip(s.args, t.args))
        out.append((s, t))
        return True

    def go(x: Formula, y: Formula) -> bool:
        if isinstance(x, Atom) and isinstance(y, Atom):
            if x.head != y.head or len(x.args) != len(y.args):
                return False
            return all(zip_term(s, t) for s, t in zip(x.args, y.args))
        if isinstance(x, Arrow) and isinstance(y, Arrow):
            return go(x.left, y.left) and go(x.right, y.right)
        if isinstance(x, ForallFo) and isinstance(y, ForallFo):
            return x.var == y.var and go(x.body, y.body)
        if isinstance(x, ForallRel) and isinstance(y, ForallRel):
            return x.var == y.var and x.arity == y.arity and go(x.body, y.body)
        return False

    if not go(a, b):
        return None
    return out


def _ancestor_pairs(a: Formula, b: Formula, seed: tuple[FoTerm, FoTerm]) -> list[tuple[FoTerm, FoTerm]]:
    """Candidate (u, v) pairs: the differing pair and its aligned ancestors
    inside the atom arguments, innermost first."""
    su, sv = seed
    found: list[tuple[FoTerm, FoTerm]] = []

    def walk(s: FoTerm, t: FoTerm, acc: list[tuple[FoTerm, FoTerm]]) -> None:
        here = acc + [(s, t)]
        if s == su and t == sv:
            for pair in reversed(here):
                if pair not in found:
                    found.append(pair)
            return
        if isinstance(s, FoVar) or isinstance(t, FoVar):
            return
        if s.sym == t.sym and len(s.args) == len(t.args):
            for x, y in zip(s.args, t.args):
                walk(x, y, here)

    def scan(x: Formula, y: Formula) -> None:
        if isinstance(x, Atom) and isinstance(y, Atom):
            for s, t in zip(x.args, y.args):
                walk(s, t, [])
        elif isinstance(x, Arrow) and isinstance(y, Arrow):
            scan(x.left, y.left)
            scan(x.right, y.right)
        elif isinstance(x, (ForallFo, ForallRel)) and type(x) is type(y):
            scan(x.body, y.body)

    scan(a, b)
    return found


def sim(
    A: Formula,
    B: Formula,
    th: Theory,
    bounds: Bounds,
    stats: Optional[SearchStats] = None,
) -> InstChain | NotFoundWithinBounds:
    """Search for a chain of ~'-steps from A to B (equational variance)."""
    stats = stats if stats is not None else SearchStats()
    if alpha_eq(A, B):
        return InstChain(A, (), B)
    if not th.equations:
        return NotFoundWithinBounds(exhaustive=True)
    frontier: list[tuple[Formula, list[EqStep]]] = [(A, [])]
    seen = {canon(A)}
    for _ in range(bounds.max_congr_depth):
        nxt: list[tuple[Formula, list[EqStep]]] = []
        for f, steps in frontier:
            step = sim_step(f, B, th)
            if step is not None:
                full = steps + [step]
                chain = InstChain(A, tuple(full), B)
                replay_chain(chain, th)
                return chain
            for g, st in _sim_neighbors(f, th):
                key = canon(g)
                if key in seen:
                    continue
                seen.add(key)
                nxt.append((g, steps + [st]))
            if len(seen) > 200 * bounds.max_congr_depth:
                stats.tripped = True
                return NotFoundWithinBounds(exhaustive=False)
        frontier = nxt
        if not frontier:
            break
    if frontier:
        stats.tripped = True
    return NotFoundWithinBounds(exhaustive=not stats.tripped)


def _sim_neighbors(f: Formula, th: Theory) -> list[tuple[Formula, EqStep]]:
    """One-step ~' rewrites of f: pick a subterm u occurring in f, an equation
    instance u = v, and replace u by v at every occurrence."""
    hole = fresh_name("_h", all_names(f))
    out: list[tuple[Formula, EqStep]] = []
    seen_terms = set()
    for t in _formula_terms(f):
        for u in fo_subterms(t):
            if u in seen_terms:
                continue
            seen_terms.add(u)
            for v in _eq_images(u, th):
                if v == u:
                    continue
                template = _replace_everywhere(f, u, hole)
                g = fo_subst(template, [(hole, v)])
                out.append((g, EqStep(template, hole, u, v)))
    return out


def _eq_images(u: FoTerm, th: Theory) -> list[FoTerm]:
    from .equations import rewrite_neighbors

    out = []
    for step, _ in rewrite_neighbors(u, th, fo_size(u) * 3 + 6):
        if step.path == ():
            out.append(step.rhs)
    return out


def _replace_everywhere(f: Formula, u: FoTerm, hole: str) -> Formula:
    def rep_term(t: FoTerm) -> FoTerm:
        if t == u:
            return FoVar(hole)
        if isinstance(t, FoVar):
            return t
        from .logic import FoApp

        return FoApp(t.sym, tuple(rep_term(a) for a in t.args))

    def go(g: Formula) -> Formula:
        if isinstance(g, Atom):
            return Atom(g.head, tuple(rep_term(a) for a in g.args))
        if isinstance(g, Arrow):
            return Arrow(go(g.left), go(g.right))
        if isinstance(g, ForallFo):
            return ForallFo(g.var, go(g.body))
        return ForallRel(g.var, g.arity, go(g.body))

    return go(f)


def sim_ball(
    A: Formula, th: Theory, bounds: Bounds, radius: Optional[int] = None
) -> list[tuple[Formula, tuple[EqStep, ...]]]:
    """Formulas M with a ~ chain M -> A, paired with that chain; includes A
    itself with the empty chain."""
    if radius is None:
        radius = bounds.max_congr_depth
    out: list[tuple[Formula, tuple[EqStep, ...]]] = [(A, ())]
    if not th.equations:
        return out
    seen = {canon(A)}
    frontier: list[tuple[Formula, tuple[EqStep, ...]]] = [(A, ())]
    for _ in range(radius):
        nxt: list[tuple[Formula, tuple[EqStep, ...]]] = []
        for f, steps in frontier:
            for g, st in _sim_neighbors(f, th):
                key = canon(g)
                if key in seen:
                    continue
                seen.add(key)
                reverse = EqStep(st.template, st.var, st.rhs, st.lhs)
                chain = (reverse,) + steps
                nxt.append((g, chain))
                out.append((g, chain))
                if len(out) > 40 * bounds.max_congr_depth:
                    return out
        frontier = nxt
    return out
