"""Beta/eta reduction: leftmost-outermost steps, bounded normalization,
beta-eta equivalence, reduction traces and eta-postponement."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .bounds import Bounds
from .terms import Abs, App, Term, Var, drop_index, open_term, term_size

Path = tuple[int, ...]

# Path components: App -> 0 = fn, 1 = arg; Abs -> 0 = body.


class NoRedex:
    """Normal return for step functions on normal forms."""

    def __repr__(self) -> str:  # pragma: no cover
        return "NoRedex"


NO_REDEX = NoRedex()


@dataclass(frozen=True)
class TraceStep:
    kind: str  # "beta" | "eta"
    path: Path


@dataclass(frozen=True)
class ReductionTrace:
    start: Term
    steps: tuple[TraceStep, ...]
    end: Term


class InvalidTrace(ValueError):
    pass


def is_beta_redex(t: Term) -> bool:
    return isinstance(t, App) and isinstance(t.fn, Abs)


def is_eta_redex(t: Term) -> bool:
    return (
        isinstance(t, Abs)
        and isinstance(t.body, App)
        and t.body.arg == Var(0)
        and not _fn_uses_binder(t.body.fn)
    )


def _fn_uses_binder(fn: Term) -> bool:
    from .terms import uses_index

    return uses_index(fn, 0)


def contract_beta(t: Term) -> Term:
    assert isinstance(t, App) and isinstance(t.fn, Abs)
    return open_term(t.fn.body, t.arg)


def contract_eta(t: Term) -> Term:
    assert is_eta_redex(t)
    assert isinstance(t, Abs) and isinstance(t.body, App)
    return drop_index(t.body.fn)


def find_redex(t: Term, kind: str, path: Path = ()) -> Optional[Path]:
    """Leftmost-outermost redex position of the given kind, if any."""
    pred = is_beta_redex if kind == "beta" else is_eta_redex
    if pred(t):
        return path
    if isinstance(t, Abs):
        return find_redex(t.body, kind, path + (0,))
    if isinstance(t, App):
        found = find_redex(t.fn, kind, path + (0,))
        if found is not None:
            return found
        return find_redex(t.arg, kind, path + (1,))
    return None


def subterm_at(t: Term, path: Path) -> Term:
    for i in path:
        if isinstance(t, Abs):
            t = t.body
        elif isinstance(t, App):
            t = t.fn if i == 0 else t.arg
        else:
            raise InvalidTrace(f"no subterm at path {path}")
    return t


def replace_at(t: Term, path: Path, new: Term) -> Term:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(t, Abs):
        return Abs(replace_at(t.body, rest, new), hint=t.hint)
    if isinstance(t, App):
        if i == 0:
            return App(replace_at(t.fn, rest, new), t.arg)
        return App(t.fn, replace_at(t.arg, rest, new))
    raise InvalidTrace(f"no subterm at path {path}")


def apply_step(t: Term, step: TraceStep) -> Term:
    sub = subterm_at(t, step.path)
    if step.kind == "beta":
        if not is_beta_redex(sub):
            raise InvalidTrace(f"no beta redex at {step.path}")
        return replace_at(t, step.path, contract_beta(sub))
    if step.kind == "eta":
        if not is_eta_redex(sub):
            raise InvalidTrace(f"no eta redex at {step.path}")
        return replace_at(t, step.path, contract_eta(sub))
    raise InvalidTrace(f"unknown step kind {step.kind!r}")


def replay(trace: ReductionTrace) -> Term:
    t = trace.start
    for step in trace.steps:
        t = apply_step(t, step)
    if t != trace.end:
        raise InvalidTrace("trace does not reach its recorded end")
    return t


def beta_step(t: Term):
    """Contract the leftmost-outermost beta redex; NoRedex on normal forms."""
    path = find_redex(t, "beta")
    if path is None:
        return NO_REDEX
    return replace_at(t, path, contract_beta(subterm_at(t, path)))


def eta_step(t: Term):
    path = find_redex(t, "eta")
    if path is None:
        return NO_REDEX
    return replace_at(t, path, contract_eta(subterm_at(t, path)))


@dataclass(frozen=True)
class Normal:
    term: Term
    steps: int


@dataclass(frozen=True)
class StepBoundExceeded:
    last: Term
    steps: int


@dataclass(frozen=True)
class SizeBoundExceeded:
    last: Term
    steps: int


NormalizeResult = Normal | StepBoundExceeded | SizeBoundExceeded


def normalize(t: Term, bounds: Bounds) -> NormalizeResult:
    """Leftmost-outermost beta normalization under step and size caps."""
    steps = 0
    while True:
        if term_size(t) > bounds.max_term_size:
            return SizeBoundExceeded(t, steps)
        nxt = beta_step(t)
        if isinstance(nxt, NoRedex):
            return Normal(t, steps)
        if steps >= bounds.max_steps:
            return StepBoundExceeded(t, steps)
        t = nxt
        steps += 1


def eta_normalize(t: Term, bounds: Bounds) -> NormalizeResult:
    """Eta-normalize; terminates since eta strictly shrinks the term."""
    steps = 0
    while True:
        nxt = eta_step(t)
        if isinstance(nxt, NoRedex):
            return Normal(t, steps)
        t = nxt
        steps += 1
        if steps > bounds.max_steps:  # unreachable for sane bounds
            return StepBoundExceeded(t, steps)


def beta_eta_normal_form(t: Term, bounds: Bounds) -> NormalizeResult:
    """Beta-normalize then eta-normalize; eta on a beta-normal form cannot
    create beta redexes, so the result is beta-eta-normal."""
    res = normalize(t, bounds)
    if not isinstance(res, Normal):
        return res
    eta = eta_normalize(res.term, bounds)
    if isinstance(eta, Normal):
        return Normal(eta.term, res.steps + eta.steps)
    return eta


@dataclass(frozen=True)
class Equivalent:
    normal_form: Term


@dataclass(frozen=True)
class NotEquivalentWithinBounds:
    reason: str  # "distinct-normal-forms" | "bound-exhausted"


def beta_eta_equiv(t: Term, u: Term, bounds: Bounds):
    nt = beta_eta_normal_form(t, bounds)
    nu = beta_eta_normal_form(u, bounds)
    if isinstance(nt, Normal) and isinstance(nu, Normal):
        if nt.term == nu.term:
            return Equivalent(nt.term)
        return NotEquivalentWithinBounds("distinct-normal-forms")
    return NotEquivalentWithinBounds("bound-exhausted")


def beta_reducts(t: Term) -> list[tuple[Path, Term]]:
    """All one-step beta reducts with their redex paths."""
    out: list[tuple[Path, Term]] = []

    def go(u: Term, path: Path) -> None:
        if is_beta_redex(u):
            out.append((path, replace_at(t, path, contract_beta(u))))
        if isinstance(u, Abs):
            go(u.body, path + (0,))
        elif isinstance(u, App):
            go(u.fn, path + (0,))
            go(u.arg, path + (1,))

    go(t, ())
    return out


def eta_reducts(t: Term) -> list[tuple[Path, Term]]:
    out: list[tuple[Path, Term]] = []

    def go(u: Term, path: Path) -> None:
        if is_eta_redex(u):
            out.append((path, replace_at(t, path, contract_eta(u))))
        if isinstance(u, Abs):
            go(u.body, path + (0,))
        elif isinstance(u, App):
            go(u.fn, path + (0,))
            go(u.arg, path + (1,))

    go(t, ())
    return out


def _eta_path(t: Term, goal: Term) -> Optional[list[TraceStep]]:
    """Eta-reduction path from t to goal, if one exists (eta shrinks terms,
    so the search space is finite)."""
    if t == goal:
        return []
    if term_size(t) <= term_size(goal):
        return None
    for path, red in eta_reducts(t):
        tail = _eta_path(red, goal)
        if tail is not None:
            return [TraceStep("eta", path)] + tail
    return None


def postpone_eta(trace: ReductionTrace, bounds: Bounds) -> ReductionTrace:
    """Reorder a mixed beta/eta trace into beta-steps-then-eta-steps with the
    same endpoints (eta-postponement). Searches breadth-first over beta
    reducts of the start for a term that eta-reduces to the end."""
    replay(trace)  # rejects invalid traces
    kinds = [s.kind for s in trace.steps]
    if "eta" not in kinds or "beta" not in kinds[kinds.index("eta") :]:
        return trace  # already sorted (covers all-beta, all-eta, empty)

    start, goal = trace.start, trace.end
    seen = {start}
    queue: deque[tuple[Term, list[TraceStep]]] = deque([(start, [])])
    explored = 0
    while queue:
        term, beta_steps = queue.popleft()
        eta_tail = _eta_path(term, goal)
        if eta_tail is not None:
            return ReductionTrace(start, tuple(beta_steps) + tuple(eta_tail), goal)
        explored += 1
        if explored > bounds.max_steps:
            break
        for path, red in beta_reducts(term):
            if red in seen or term_size(red) > bounds.max_term_size:
                continue
            seen.add(red)
            queue.append((red, beta_steps + [TraceStep("beta", path)]))
    raise InvalidTrace("no beta-then-eta reordering found within bounds")
