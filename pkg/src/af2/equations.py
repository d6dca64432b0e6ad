"""The congruence generated by an equation system: instance recognition and
bounded equality with explicit rewrite paths."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

from .bounds import Bounds
from .logic import FoApp, FoTerm, FoVar, Theory, fo_match, fo_size, fo_substitute

TermPath = tuple[int, ...]


def eq_instance(a: FoTerm, b: FoTerm, th: Theory) -> bool:
    """True iff a = b (or b = a) arises from some equation of the theory by a
    simultaneous first-order substitution."""
    return instance_of(a, b, th) is not None


def instance_of(a: FoTerm, b: FoTerm, th: Theory) -> Optional[int]:
    """Index of a witnessing equation, trying both orientations."""
    for i, (lhs, rhs) in enumerate(th.equations):
        for l, r in ((lhs, rhs), (rhs, lhs)):
            subst: dict[str, FoTerm] = {}
            if fo_match(l, a, subst) and fo_match(r, b, subst):
                return i
    return None


def term_at(t: FoTerm, path: TermPath) -> FoTerm:
    for i in path:
        assert isinstance(t, FoApp)
        t = t.args[i]
    return t


def term_replace_at(t: FoTerm, path: TermPath, new: FoTerm) -> FoTerm:
    if not path:
        return new
    assert isinstance(t, FoApp)
    i = path[0]
    args = list(t.args)
    args[i] = term_replace_at(args[i], path[1:], new)
    return FoApp(t.sym, tuple(args))


def term_positions(t: FoTerm, path: TermPath = ()) -> Iterator[tuple[TermPath, FoTerm]]:
    yield path, t
    if isinstance(t, FoApp):
        for i, a in enumerate(t.args):
            yield from term_positions(a, path + (i,))


@dataclass(frozen=True)
class RewriteStep:
    """One equation-instance rewrite at a subterm position."""

    path: TermPath
    lhs: FoTerm  # instantiated redex
    rhs: FoTerm  # instantiated contractum


def rewrite_neighbors(
    t: FoTerm, th: Theory, size_cap: int, pool: tuple[FoTerm, ...] = ()
) -> Iterator[tuple[RewriteStep, FoTerm]]:
    for path, sub in term_positions(t):
        for lhs, rhs in th.equations:
            for l, r in ((lhs, rhs), (rhs, lhs)):
                subst: dict[str, FoTerm] = {}
                if not fo_match(l, sub, subst):
                    continue
                leftover = sorted(set(fo_vars_of(r)) - set(subst))
                if len(leftover) > 2:
                    continue  # instantiation blowup; bound-relative miss
                for combo in _combos(leftover, pool):
                    new_sub = fo_substitute(r, {**subst, **combo})
                    out = term_replace_at(t, path, new_sub)
                    if fo_size(out) <= size_cap:
                        yield RewriteStep(path, sub, new_sub), out


def _combos(names: list[str], pool: tuple[FoTerm, ...]) -> Iterator[dict[str, FoTerm]]:
    if not names:
        yield {}
        return
    head, rest = names[0], names[1:]
    for t in pool:
        for tail in _combos(rest, pool):
            yield {head: t, **tail}


def fo_vars_of(t: FoTerm) -> set[str]:
    if isinstance(t, FoVar):
        return {t.name}
    out: set[str] = set()
    for a in t.args:
        out |= fo_vars_of(a)
    return out


@dataclass(frozen=True)
class Equal:
    path: tuple[tuple[FoTerm, RewriteStep], ...]  # (source term, step) pairs


@dataclass(frozen=True)
class NotEqualWithinBounds:
    explored: int


def approx_e(a: FoTerm, b: FoTerm, th: Theory, bounds: Bounds):
    """Bounded decision of the congruence: breadth-first search over single
    equation-instance rewrites, up to max_congr_depth steps from each side.

    Searches forward from `a` only; the rewrite relation is symmetric because
    instances are used in both orientations.
    """
    if a == b:
        return Equal(())
    size_cap = max(fo_size(a), fo_size(b)) * 2 + bounds.max_term_size // 100 + 4
    pool = tuple({t for side in (a, b) for t in term_positions_terms(side)})
    seen: dict[FoTerm, tuple[FoTerm, RewriteStep] | None] = {a: None}
    queue: deque[tuple[FoTerm, int]] = deque([(a, 0)])
    explored = 0
    while queue:
        t, depth = queue.popleft()
        if depth >= bounds.max_congr_depth:
            continue
        for step, out in rewrite_neighbors(t, th, size_cap, pool):
            if out in seen:
                continue
            seen[out] = (t, step)
            explored += 1
            if out == b:
                return Equal(_backtrace(seen, b))
            if explored > 50 * bounds.max_steps:
                return NotEqualWithinBounds(explored)
            queue.append((out, depth + 1))
    return NotEqualWithinBounds(explored)


def _backtrace(seen: dict, end: FoTerm) -> tuple[tuple[FoTerm, RewriteStep], ...]:
    path: list[tuple[FoTerm, RewriteStep]] = []
    cur = end
    while seen[cur] is not None:
        prev, step = seen[cur]
        path.append((prev, step))
        cur = prev
    return tuple(reversed(path))


def term_positions_terms(t: FoTerm) -> Iterator[FoTerm]:
    for _, sub in term_positions(t):
        yield sub


def is_equal(a: FoTerm, b: FoTerm, th: Theory, bounds: Bounds) -> bool:
    return isinstance(approx_e(a, b, th, bounds), Equal)
