"""Independent oracles for cross-checking the kernel.

Deliberately different algorithms from the package: a named-variable lambda
engine with explicit renaming, a union-find congruence closure, and a naive
second-order substitution. These compute expected values; they never share
code with the implementation paths they check.
"""

from __future__ import annotations

import itertools
from typing import Optional

from af2.logic import (
    Atom,
    Arrow,
    Formula,
    FoApp,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    RelVar,
    Theory,
)
from af2.terms import Abs, App, Free, Term, Var

# --- named-variable lambda engine ------------------------------------------------

# terms: ("var", name) | ("abs", name, body) | ("app", fn, arg)

_counter = itertools.count()


def named_of(t: Term, env: Optional[list[str]] = None):
    env = env or []
    if isinstance(t, Var):
        return ("var", env[-1 - t.index])
    if isinstance(t, Free):
        return ("var", t.name)
    if isinstance(t, Abs):
        name = f"_b{next(_counter)}"
        return ("abs", name, named_of(t.body, env + [name]))
    return ("app", named_of(t.fn, env), named_of(t.arg, env))


def n_fv(t) -> set:
    if t[0] == "var":
        return {t[1]}
    if t[0] == "abs":
        return n_fv(t[2]) - {t[1]}
    return n_fv(t[1]) | n_fv(t[2])


def n_subst(t, x: str, u):
    if t[0] == "var":
        return u if t[1] == x else t
    if t[0] == "app":
        return ("app", n_subst(t[1], x, u), n_subst(t[2], x, u))
    _, y, body = t
    if y == x:
        return t
    if y in n_fv(u) and x in n_fv(body):
        fresh = f"_r{next(_counter)}"
        body = n_subst(body, y, ("var", fresh))
        y = fresh
    return ("abs", y, n_subst(body, x, u))


def n_beta_step(t):
    """Leftmost-outermost beta step, or None."""
    if t[0] == "app" and t[1][0] == "abs":
        return n_subst(t[1][2], t[1][1], t[2])
    if t[0] == "abs":
        s = n_beta_step(t[2])
        return None if s is None else ("abs", t[1], s)
    if t[0] == "app":
        s = n_beta_step(t[1])
        if s is not None:
            return ("app", s, t[2])
        s = n_beta_step(t[2])
        return None if s is None else ("app", t[1], s)
    return None


def n_normalize(t, fuel: int = 4000):
    for _ in range(fuel):
        s = n_beta_step(t)
        if s is None:
            return t
        t = s
    return None


def n_alpha_eq(a, b, env_a=None, env_b=None) -> bool:
    env_a, env_b = env_a or {}, env_b or {}
    if a[0] != b[0]:
        return False
    if a[0] == "var":
        return env_a.get(a[1], a[1]) == env_b.get(b[1], b[1])
    if a[0] == "app":
        return n_alpha_eq(a[1], b[1], env_a, env_b) and n_alpha_eq(a[2], b[2], env_a, env_b)
    mark = f"_m{next(_counter)}"
    return n_alpha_eq(a[2], b[2], {**env_a, a[1]: mark}, {**env_b, b[1]: mark})


# --- congruence closure oracle -----------------------------------------------------


def _match(pattern: FoTerm, target: FoTerm, subst: dict) -> Optional[dict]:
    if isinstance(pattern, FoVar):
        if pattern.name in subst:
            return subst if subst[pattern.name] == target else None
        out = dict(subst)
        out[pattern.name] = target
        return out
    if isinstance(target, FoApp) and pattern.sym == target.sym and len(pattern.args) == len(target.args):
        for p, t in zip(pattern.args, target.args):
            subst = _match(p, t, subst)
            if subst is None:
                return None
        return subst
    return None


def _apply(t: FoTerm, subst: dict) -> FoTerm:
    if isinstance(t, FoVar):
        return subst.get(t.name, t)
    return FoApp(t.sym, tuple(_apply(a, subst) for a in t.args))


def _subterms(t: FoTerm):
    yield t
    if isinstance(t, FoApp):
        for a in t.args:
            yield from _subterms(a)


def cc_equal(a: FoTerm, b: FoTerm, th: Theory, rounds: int = 4, size_cap: int = 24, member_cap: int = 150) -> bool:
    """Union-find congruence closure over the query subterm universe extended
    by bounded equation-instance images."""
    universe: set[FoTerm] = set(_subterms(a)) | set(_subterms(b))
    parent: dict[FoTerm, FoTerm] = {}

    def find(x: FoTerm) -> FoTerm:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent.setdefault(parent[x], parent[x])
            x = parent[x]
        return x

    def union(x: FoTerm, y: FoTerm) -> None:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    def term_size(t: FoTerm) -> int:
        return 1 if isinstance(t, FoVar) else 1 + sum(term_size(x) for x in t.args)

    for _ in range(rounds):
        for t in list(universe):
            for lhs, rhs in th.equations:
                for l, r in ((lhs, rhs), (rhs, lhs)):
                    subst = _match(l, t, {})
                    if subst is None:
                        continue
                    leftover = {v for v in _vars(r)} - set(subst)
                    if leftover:
                        continue
                    img = _apply(r, subst)
                    if term_size(img) > size_cap:
                        continue
                    if img in universe:
                        union(t, img)
                        continue
                    # Only grow the universe from non-trivial patterns; a bare
                    # variable pattern matches everything and merges nothing
                    # new once its images stop landing inside the universe.
                    if not isinstance(l, FoVar) and len(universe) < member_cap:
                        for s in _subterms(img):
                            universe.add(s)
                        union(t, img)
        # congruence: identical symbols with pairwise-equal argument classes
        for t in list(universe):
            for s in list(universe):
                if (
                    isinstance(t, FoApp)
                    and isinstance(s, FoApp)
                    and t is not s
                    and t.sym == s.sym
                    and len(t.args) == len(s.args)
                    and all(find(x) == find(y) for x, y in zip(t.args, s.args))
                ):
                    union(t, s)
    return find(a) == find(b)


def _vars(t: FoTerm):
    if isinstance(t, FoVar):
        yield t.name
    else:
        for a in t.args:
            yield from _vars(a)


# --- independent second-order substitution ------------------------------------------


def naive_rel_subst(f: Formula, x_name: str, params: tuple[str, ...], sub: Formula) -> Formula:
    """Replace atoms X(t...) by sub[t.../params]; assumes the inputs have been
    renamed apart already (the caller guarantees no capture)."""

    def sub_term(t: FoTerm, env: dict) -> FoTerm:
        if isinstance(t, FoVar):
            return env.get(t.name, t)
        return FoApp(t.sym, tuple(sub_term(a, env) for a in t.args))

    def inst(args) -> Formula:
        env = dict(zip(params, args))

        def go(g: Formula) -> Formula:
            if isinstance(g, Atom):
                return Atom(g.head, tuple(sub_term(a, env) for a in g.args))
            if isinstance(g, Arrow):
                return Arrow(go(g.left), go(g.right))
            if isinstance(g, ForallFo):
                return ForallFo(g.var, go(g.body))
            return ForallRel(g.var, g.arity, go(g.body))

        return go(sub)

    def go(g: Formula) -> Formula:
        if isinstance(g, Atom):
            if isinstance(g.head, RelVar) and g.head.name == x_name:
                return inst(g.args)
            return g
        if isinstance(g, Arrow):
            return Arrow(go(g.left), go(g.right))
        if isinstance(g, ForallFo):
            return ForallFo(g.var, go(g.body))
        if g.var == x_name:
            return g
        return ForallRel(g.var, g.arity, go(g.body))

    return go(f)
