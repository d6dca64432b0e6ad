"""Finite-scale realizability: a finite term universe, truth-value families
of saturated term sets, the arrow/intersection valuation of formulas, and
executable adequacy spot checks.

The arrow of two sets tests each application by its reduction behavior: the
application is reduced leftmost until it lands in the universe and membership
is read off there; applications that never resolve into the universe
disqualify the applicand (conservative under-approximation rather than
assumed-in). Results are beta-expansion-closed inside the universe."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

from .bounds import Bounds
from .judgments import Derivation, check_derivation, Ok
from .logic import (
    Arrow,
    Atom,
    Formula,
    FoApp,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    RelSym,
    RelVar,
    Theory,
    free_fo_vars,
    free_rel_vars,
    parse_theory,
)
from .reduction import Normal, beta_eta_normal_form, beta_reducts, eta_reducts, normalize
from .terms import App, Term, format_term, parse_term, term_size, Var, Abs, Free


def locally_closed(t: Term, depth: int = 0) -> bool:
    if isinstance(t, Var):
        return t.index < depth
    if isinstance(t, Free):
        return True
    if isinstance(t, Abs):
        return locally_closed(t.body, depth + 1)
    return locally_closed(t.fn, depth) and locally_closed(t.arg, depth)


def _subterms_closed(t: Term) -> list[Term]:
    out = []

    def go(u: Term, depth: int) -> None:
        if locally_closed(u):
            out.append(u)
        if isinstance(u, Abs):
            go(u.body, depth + 1)
        elif isinstance(u, App):
            go(u.fn, depth)
            go(u.arg, depth)

    go(t, 0)
    return out


class UniverseOverflow(RuntimeError):
    pass


@dataclass
class TermUniverse:
    seeds: tuple[Term, ...]
    size_bound: int
    step_bound: int
    members: frozenset[Term] = field(default_factory=frozenset)
    member_cap: int = 4000

    def __post_init__(self) -> None:
        if not self.members:
            self.members = self._build()

    def _build(self) -> frozenset[Term]:
        members: set[Term] = set()
        frontier = [t for t in self.seeds]
        steps_left: dict[Term, int] = {t: self.step_bound for t in frontier}

        def add(t: Term, steps: int) -> None:
            if term_size(t) > self.size_bound and t not in self.seeds:
                return
            if t not in members:
                members.add(t)
                frontier.append(t)
                steps_left[t] = steps
            else:
                steps_left[t] = max(steps_left.get(t, 0), steps)

        for t in self.seeds:
            if t not in members:
                members.add(t)
        while True:
            changed = False
            for t in list(members):
                for s in _subterms_closed(t):
                    if s not in members:
                        add(s, self.step_bound)
                        changed = True
                budget = steps_left.get(t, self.step_bound)
                if budget > 0:
                    for _, red in beta_reducts(t):
                        if term_size(red) <= self.size_bound and red not in members:
                            add(red, budget - 1)
                            changed = True
            snapshot = sorted(members, key=term_size)
            for u in snapshot:
                for v in snapshot:
                    app = App(u, v)
                    if term_size(app) <= self.size_bound and app not in members:
                        add(app, self.step_bound)
                        changed = True
            if len(members) > self.member_cap:
                raise UniverseOverflow(f"universe exceeds {self.member_cap} members")
            if not changed:
                return frozenset(members)

    def beta_edges(self) -> dict[Term, set[Term]]:
        edges: dict[Term, set[Term]] = {}
        for t in self.members:
            outs = {red for _, red in beta_reducts(t) if red in self.members}
            if outs:
                edges[t] = outs
        return edges

    def eta_edges(self) -> dict[Term, set[Term]]:
        edges: dict[Term, set[Term]] = {}
        for t in self.members:
            outs = {red for _, red in eta_reducts(t) if red in self.members}
            if outs:
                edges[t] = outs
        return edges


@dataclass
class SandboxModel:
    universe: TermUniverse
    base: tuple[str, ...]
    family: dict[str, frozenset[Term]]
    fun_interp: dict[str, dict[tuple[str, ...], str]]
    rel_interp: dict[str, dict[tuple[str, ...], str]]
    variant: str = "beta"  # "beta" | "betaeta"
    saturation: str = "full"  # "full" | "weak" (head expansion only)
    closure_complete: bool = True
    _expansion: Optional[dict[Term, set[Term]]] = None
    _equiv_class: Optional[dict[Term, int]] = None

    def sets(self) -> list[frozenset[Term]]:
        return list(dict.fromkeys(self.family.values()))

    # -- saturation ------------------------------------------------------------

    def _expansion_edges(self) -> dict[Term, set[Term]]:
        """t -> reducts(t) within the universe, per the saturation flavor."""
        if self._expansion is None:
            if self.saturation == "full":
                self._expansion = self.universe.beta_edges()
            else:
                # Weak variant: expansions of head redexes only, i.e. along
                # the application spine.
                edges: dict[Term, set[Term]] = {}
                for t in self.universe.members:
                    outs = {
                        red
                        for p, red in beta_reducts(t)
                        if all(x == 0 for x in p) and red in self.universe.members
                    }
                    if outs:
                        edges[t] = outs
                self._expansion = edges
        return self._expansion

    def saturate(self, s: frozenset[Term]) -> frozenset[Term]:
        members = set(s) & self.universe.members
        if self.variant == "betaeta":
            classes = self._equiv_classes()
            keys = {classes[t] for t in members if t in classes}
            members |= {t for t in self.universe.members if classes.get(t) in keys}
        edges = self._expansion_edges()
        changed = True
        while changed:
            changed = False
            for t, outs in edges.items():
                if t not in members and outs & members:
                    members.add(t)
                    changed = True
        return frozenset(members)

    def _equiv_classes(self) -> dict[Term, int]:
        """Approximate beta-eta equivalence inside the universe: connected
        components of one-step beta/eta edges plus shared normal forms."""
        if self._equiv_class is not None:
            return self._equiv_class
        parent: dict[Term, Term] = {t: t for t in self.universe.members}

        def find(x: Term) -> Term:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: Term, b: Term) -> None:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb

        for t, outs in self.universe.beta_edges().items():
            for u in outs:
                union(t, u)
        for t, outs in self.universe.eta_edges().items():
            for u in outs:
                union(t, u)
        by_nf: dict[Term, Term] = {}
        nf_bounds = Bounds(max_steps=max(4 * self.universe.step_bound, 32),
                           max_term_size=max(4 * self.universe.size_bound, 64))
        for t in self.universe.members:
            res = beta_eta_normal_form(t, nf_bounds)
            if isinstance(res, Normal):
                if res.term in by_nf:
                    union(t, by_nf[res.term])
                else:
                    by_nf[res.term] = t
        roots = {}
        out = {}
        for t in self.universe.members:
            r = find(t)
            out[t] = roots.setdefault(r, len(roots))
        self._equiv_class = out
        return out

    # -- the arrow operation -----------------------------------------------------

    def resolve(self, t: Term) -> Optional[Term]:
        """Reduce leftmost until the term lands in the universe; None when it
        never does within the step budget."""
        from .reduction import NoRedex, beta_step

        size_cap = 4 * self.universe.size_bound + 16
        cur = t
        for _ in range(2 * self.universe.step_bound + 2):
            if cur in self.universe.members:
                return cur
            nxt = beta_step(cur)
            if isinstance(nxt, NoRedex) or term_size(nxt) > size_cap:
                return None
            cur = nxt
        return cur if cur in self.universe.members else None

    def arrow(self, g: frozenset[Term], h: frozenset[Term]) -> frozenset[Term]:
        if h == self.universe.members:
            # The top truth value stands for the set of all terms, so every
            # application trivially lands in it.
            return h
        members = set()
        for u in self.universe.members:
            ok = True
            for t in g:
                resolved = self.resolve(App(u, t))
                if resolved is None or resolved not in h:
                    ok = False
                    break
            if ok:
                members.add(u)
        return self.saturate(frozenset(members))


def intersect_all(sets: list[frozenset[Term]], universe: frozenset[Term]) -> frozenset[Term]:
    out = universe
    for s in sets:
        out = out & s
    return out


# --- valuation --------------------------------------------------------------------


@dataclass(frozen=True)
class Interpretation:
    fo: tuple[tuple[str, str], ...] = ()  # variable -> base element
    rel: tuple[tuple[str, tuple[tuple[tuple[str, ...], str], ...]], ...] = ()
    # relation variable -> graph of a function base^n -> family set name

    def fo_get(self, name: str) -> str:
        for n, v in self.fo:
            if n == name:
                return v
        raise KeyError(f"first-order variable {name!r} uninterpreted")

    def rel_get(self, name: str) -> dict[tuple[str, ...], str]:
        for n, graph in self.rel:
            if n == name:
                return dict(graph)
        raise KeyError(f"relation variable {name!r} uninterpreted")

    def set_fo(self, name: str, val: str) -> "Interpretation":
        rest = tuple((n, v) for n, v in self.fo if n != name)
        return Interpretation(rest + ((name, val),), self.rel)

    def set_rel(self, name: str, graph: dict[tuple[str, ...], str]) -> "Interpretation":
        rest = tuple((n, g) for n, g in self.rel if n != name)
        return Interpretation(self.fo, rest + ((name, tuple(sorted(graph.items()))),))


def eval_fo_term(model: SandboxModel, interp: Interpretation, t: FoTerm) -> str:
    if isinstance(t, FoVar):
        return interp.fo_get(t.name)
    table = model.fun_interp.get(t.sym)
    if table is None:
        raise KeyError(f"function symbol {t.sym!r} uninterpreted")
    args = tuple(eval_fo_term(model, interp, a) for a in t.args)
    if args not in table:
        raise KeyError(f"function {t.sym!r} has no value on {args}")
    return table[args]


def all_rel_functions(model: SandboxModel, arity: int) -> list[dict[tuple[str, ...], str]]:
    """Every function base^arity -> family (finite second-order range)."""
    points = list(product(model.base, repeat=arity))
    names = list(model.family)
    out = []
    for values in product(names, repeat=len(points)):
        out.append({pt: nm for pt, nm in zip(points, values)})
    return out


def eval_formula(model: SandboxModel, interp: Interpretation, f: Formula) -> frozenset[Term]:
    universe = model.universe.members
    if isinstance(f, Atom):
        args = tuple(eval_fo_term(model, interp, a) for a in f.args)
        if isinstance(f.head, RelSym):
            table = model.rel_interp.get(f.head.name)
            if table is None:
                raise KeyError(f"relation symbol {f.head.name!r} uninterpreted")
            name = table.get(args)
            if name is None:
                raise KeyError(f"relation {f.head.name!r} has no value on {args}")
            return model.family[name]
        graph = interp.rel_get(f.head.name)
        if args not in graph:
            raise ValueError(f"relation {f.head.name!r} has no value on {args}")
        return model.family[graph[args]]
    if isinstance(f, Arrow):
        return model.arrow(
            eval_formula(model, interp, f.left), eval_formula(model, interp, f.right)
        )
    if isinstance(f, ForallFo):
        parts = [
            eval_formula(model, interp.set_fo(f.var, a), f.body) for a in model.base
        ]
        return intersect_all(parts, universe)
    parts = []
    for graph in all_rel_functions(model, f.arity):
        parts.append(eval_formula(model, interp.set_rel(f.var, graph), f.body))
    return intersect_all(parts, universe)


# --- lemma checks --------------------------------------------------------------------


def check_substitution_lemma_fo(
    model: SandboxModel, interp: Interpretation, f: Formula, x: str, t: FoTerm
) -> bool:
    """Value of f[t/x] equals the value of f at x := value(t)."""
    from .logic import fo_subst

    lhs = eval_formula(model, interp, fo_subst(f, [(x, t)]))
    rhs = eval_formula(model, interp.set_fo(x, eval_fo_term(model, interp, t)), f)
    return lhs == rhs


def check_substitution_lemma_rel(
    model: SandboxModel,
    interp: Interpretation,
    f: Formula,
    x_name: str,
    params: tuple[str, ...],
    sub: Formula,
) -> Optional[bool]:
    """Value of f[sub/X(params)] equals the value of f at X := the function
    induced by sub. Returns None (skip) when that function leaves the family."""
    from .logic import rel_subst

    graph: dict[tuple[str, ...], str] = {}
    by_set = {s: n for n, s in model.family.items()}
    for point in product(model.base, repeat=len(params)):
        i2 = interp
        for p, a in zip(params, point):
            i2 = i2.set_fo(p, a)
        value = eval_formula(model, i2, sub)
        name = by_set.get(value)
        if name is None:
            return None
        graph[point] = name
    lhs = eval_formula(model, interp, rel_subst(f, x_name, params, sub))
    rhs = eval_formula(model, interp.set_rel(x_name, graph), f)
    return lhs == rhs


def satisfies_theory(model: SandboxModel, th: Theory) -> bool:
    """Every equation holds pointwise over the base under every assignment."""
    for lhs, rhs in th.equations:
        vars_ = sorted(free_fo_vars_of_eq(lhs, rhs))
        for assignment in product(model.base, repeat=len(vars_)):
            interp = Interpretation()
            for v, a in zip(vars_, assignment):
                interp = interp.set_fo(v, a)
            if eval_fo_term(model, interp, lhs) != eval_fo_term(model, interp, rhs):
                return False
    return True


def free_fo_vars_of_eq(lhs: FoTerm, rhs: FoTerm) -> set[str]:
    from .logic import fo_vars

    return fo_vars(lhs) | fo_vars(rhs)


@dataclass(frozen=True)
class Pass:
    pass


@dataclass(frozen=True)
class Fail:
    detail: str


@dataclass(frozen=True)
class OutOfUniverse:
    detail: str


def adequacy_spot(model: SandboxModel, d: Derivation, th: Theory):
    """Spot check of the adequation property: a checked closed judgment's
    subject must belong to the valuation of its type."""
    chk = check_derivation(d, th)
    if not isinstance(chk, Ok):
        raise ValueError(f"derivation does not check: {chk}")
    if d.ctx.bindings:
        raise ValueError("adequacy spot checks need a closed judgment")
    if free_fo_vars(d.type) or free_rel_vars(d.type):
        raise ValueError("adequacy spot checks need a closed type")
    if not satisfies_theory(model, th):
        raise ValueError("model does not satisfy the theory")
    subject = d.term
    if subject not in model.universe.members:
        return OutOfUniverse("subject not in the universe")
    value = eval_formula(model, Interpretation(), d.type)
    if subject in value:
        return Pass()
    for t in model.universe.members:
        if model.resolve(App(subject, t)) is None:
            return OutOfUniverse(
                f"application to {format_term(t)} does not resolve in the universe"
            )
    return Fail("subject not in the valuation of its type")


# --- configuration -------------------------------------------------------------------


PRED_LIBRARY = ("normal-within-bound", "no-normal-within-bound", "reduces-to-variable")


@dataclass(frozen=True)
class SandboxLimits:
    max_base: int = 3
    max_family: int = 8
    max_rel_arity: int = 1


def _pred_set(universe: TermUniverse, pred: str, bounds: Bounds) -> frozenset[Term]:
    loc = Bounds(max_steps=max(2 * universe.step_bound, 16),
                 max_term_size=max(4 * universe.size_bound, 64))
    out = set()
    for t in universe.members:
        res = normalize(t, loc)
        if pred == "normal-within-bound":
            if isinstance(res, Normal):
                out.add(t)
        elif pred == "no-normal-within-bound":
            if not isinstance(res, Normal):
                out.add(t)
        elif pred == "reduces-to-variable":
            if isinstance(res, Normal) and isinstance(res.term, Free):
                out.add(t)
        else:
            raise ValueError(f"unknown set predicate {pred!r}; known: {PRED_LIBRARY}")
    return frozenset(out)


def build_model(config: dict, bounds: Bounds, limits: SandboxLimits = SandboxLimits()) -> tuple[SandboxModel, Theory]:
    seeds = tuple(parse_term(s) for s in config.get("seeds", []))
    size_bound = int(config.get("size_bound", 8))
    step_bound = int(config.get("step_bound", 8))
    universe = TermUniverse(seeds, size_bound, step_bound)

    base = tuple(config.get("base", ["a"]))
    if len(base) > limits.max_base:
        raise ValueError(f"base larger than {limits.max_base}")
    variant = config.get("variant", "beta")
    if variant not in ("beta", "betaeta"):
        raise ValueError("variant must be beta or betaeta")
    saturation = config.get("saturation", "full")

    from .logic import Signature

    theory_text = config.get("theory", "")
    th = parse_theory(theory_text) if theory_text else Theory(Signature())

    model = SandboxModel(
        universe=universe,
        base=base,
        family={},
        fun_interp={},
        rel_interp={},
        variant=variant,
        saturation=saturation,
    )

    named: dict[str, frozenset[Term]] = {}
    for name, spec in config.get("sets", {}).items():
        if "terms" in spec:
            raw = frozenset(parse_term(s) for s in spec["terms"])
            missing = raw - universe.members
            if missing:
                raise ValueError(
                    f"set {name!r} lists terms outside the universe: "
                    + ", ".join(format_term(t) for t in missing)
                )
            named[name] = model.saturate(raw)
        elif "pred" in spec:
            named[name] = model.saturate(_pred_set(universe, spec["pred"], bounds))
        else:
            raise ValueError(f"set {name!r} must give terms or pred")

    family: dict[str, frozenset[Term]] = {"U": universe.members}
    family.update(named)
    model.family = family
    closure_rounds = int(config.get("closure_rounds", 2))
    model.closure_complete = _close_family(model, closure_rounds, limits.max_family)

    for sym, table in config.get("fun", {}).items():
        parsed: dict[tuple[str, ...], str] = {}
        for key, val in table.items():
            args = tuple(a for a in key.split(",") if a) if key else ()
            parsed[args] = val
        model.fun_interp[sym] = parsed
    for sym, table in config.get("rel", {}).items():
        parsed = {}
        for key, val in table.items():
            args = tuple(a for a in key.split(",") if a) if key else ()
            parsed[args] = val
        model.rel_interp[sym] = parsed
    return model, th


def _close_family(model: SandboxModel, rounds: int, cap: int) -> bool:
    """Close the family under pairwise arrow and intersection; True when a
    fixpoint was reached within the given rounds and cap."""
    for _ in range(rounds):
        current = list(model.family.items())
        sets = {s for _, s in current}
        added = False
        for (n1, s1) in current:
            for (n2, s2) in current:
                for cand, label in (
                    (model.arrow(s1, s2), f"({n1}->{n2})"),
                    (model.saturate(s1 & s2), f"({n1}&{n2})"),
                ):
                    if cand not in sets:
                        if len(model.family) >= cap:
                            return False
                        model.family[label] = cand
                        sets.add(cand)
                        added = True
        if not added:
            return True
    # One more scan to detect an unreached fixpoint.
    current = list(model.family.values())
    for s1 in current:
        for s2 in current:
            if model.arrow(s1, s2) not in set(current):
                return False
            if model.saturate(s1 & s2) not in set(current):
                return False
    return True


def load_model(path: str, bounds: Bounds, limits: SandboxLimits = SandboxLimits()):
    with open(path, "r", encoding="utf-8") as fh:
        return build_model(json.load(fh), bounds, limits)
