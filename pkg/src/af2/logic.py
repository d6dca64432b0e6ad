"""Second-order language: first-order terms, formulas, signatures, equational
theories, substitutions and the closure operation.

Formulas use named binders. Structural equality is name-sensitive; use
alpha_eq / canon for alpha-insensitive comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .terms import ParseError, _Scanner, fresh_name


# --- first-order terms -------------------------------------------------------


@dataclass(frozen=True)
class FoVar:
    name: str


@dataclass(frozen=True)
class FoApp:
    sym: str
    args: tuple["FoTerm", ...] = ()


FoTerm = Union[FoVar, FoApp]


def fo_vars(t: FoTerm) -> set[str]:
    if isinstance(t, FoVar):
        return {t.name}
    out: set[str] = set()
    for a in t.args:
        out |= fo_vars(a)
    return out


def fo_size(t: FoTerm) -> int:
    if isinstance(t, FoVar):
        return 1
    return 1 + sum(fo_size(a) for a in t.args)


def fo_subterms(t: FoTerm) -> Iterator[FoTerm]:
    yield t
    if isinstance(t, FoApp):
        for a in t.args:
            yield from fo_subterms(a)


def fo_substitute(t: FoTerm, subst: dict[str, FoTerm]) -> FoTerm:
    if isinstance(t, FoVar):
        return subst.get(t.name, t)
    return FoApp(t.sym, tuple(fo_substitute(a, subst) for a in t.args))


def fo_match(pattern: FoTerm, target: FoTerm, subst: dict[str, FoTerm]) -> bool:
    """Extend subst so that pattern[subst] == target; variables in the
    pattern are match variables, the target is rigid."""
    if isinstance(pattern, FoVar):
        bound = subst.get(pattern.name)
        if bound is None:
            subst[pattern.name] = target
            return True
        return bound == target
    if isinstance(target, FoApp) and target.sym == pattern.sym and len(target.args) == len(pattern.args):
        return all(fo_match(p, a, subst) for p, a in zip(pattern.args, target.args))
    return False


# --- formulas ----------------------------------------------------------------


@dataclass(frozen=True)
class RelVar:
    name: str
    arity: int


@dataclass(frozen=True)
class RelSym:
    name: str


RelHead = Union[RelVar, RelSym]


@dataclass(frozen=True)
class Atom:
    head: RelHead
    args: tuple[FoTerm, ...] = ()


@dataclass(frozen=True)
class Arrow:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class ForallFo:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForallRel:
    var: str
    arity: int
    body: "Formula"


Formula = Union[Atom, Arrow, ForallFo, ForallRel]


def formula_size(f: Formula) -> int:
    if isinstance(f, Atom):
        return 1 + sum(fo_size(a) for a in f.args)
    if isinstance(f, Arrow):
        return 1 + formula_size(f.left) + formula_size(f.right)
    return 1 + formula_size(f.body)


def free_fo_vars(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        out: set[str] = set()
        for a in f.args:
            out |= fo_vars(a)
        return out
    if isinstance(f, Arrow):
        return free_fo_vars(f.left) | free_fo_vars(f.right)
    if isinstance(f, ForallFo):
        return free_fo_vars(f.body) - {f.var}
    return free_fo_vars(f.body)


def free_rel_vars(f: Formula) -> dict[str, int]:
    """Free relation variables with their arities."""
    if isinstance(f, Atom):
        if isinstance(f.head, RelVar):
            return {f.head.name: f.head.arity}
        return {}
    if isinstance(f, Arrow):
        out = dict(free_rel_vars(f.left))
        out.update(free_rel_vars(f.right))
        return out
    if isinstance(f, ForallFo):
        return free_rel_vars(f.body)
    out = dict(free_rel_vars(f.body))
    out.pop(f.var, None)
    return out


def first_occurrence_fo_vars(f: Formula) -> list[str]:
    seen: list[str] = []

    def go_term(t: FoTerm, bound: frozenset[str]) -> None:
        if isinstance(t, FoVar):
            if t.name not in bound and t.name not in seen:
                seen.append(t.name)
        else:
            for a in t.args:
                go_term(a, bound)

    def go(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Atom):
            for a in g.args:
                go_term(a, bound)
        elif isinstance(g, Arrow):
            go(g.left, bound)
            go(g.right, bound)
        elif isinstance(g, ForallFo):
            go(g.body, bound | {g.var})
        else:
            go(g.body, bound)

    go(f, frozenset())
    return seen


def first_occurrence_rel_vars(f: Formula) -> list[tuple[str, int]]:
    seen: list[tuple[str, int]] = []

    def go(g: Formula, bound: frozenset[str]) -> None:
        if isinstance(g, Atom):
            if isinstance(g.head, RelVar) and g.head.name not in bound:
                if all(n != g.head.name for n, _ in seen):
                    seen.append((g.head.name, g.head.arity))
        elif isinstance(g, Arrow):
            go(g.left, bound)
            go(g.right, bound)
        elif isinstance(g, ForallFo):
            go(g.body, bound)
        else:
            go(g.body, bound | {g.var})

    go(f, frozenset())
    return seen


def all_names(f: Formula) -> set[str]:
    """Every variable name occurring in f, bound or free (for freshening)."""
    out: set[str] = set()

    def go_term(t: FoTerm) -> None:
        if isinstance(t, FoVar):
            out.add(t.name)
        else:
            for a in t.args:
                go_term(a)

    def go(g: Formula) -> None:
        if isinstance(g, Atom):
            if isinstance(g.head, RelVar):
                out.add(g.head.name)
            for a in g.args:
                go_term(a)
        elif isinstance(g, Arrow):
            go(g.left)
            go(g.right)
        elif isinstance(g, ForallFo):
            out.add(g.var)
            go(g.body)
        else:
            out.add(g.var)
            go(g.body)

    go(f)
    return out


def rename_bound_fo(f: ForallFo, avoid: set[str]) -> ForallFo:
    new = fresh_name(f.var, avoid | all_names(f.body))
    if new == f.var:
        return f
    return ForallFo(new, fo_subst(f.body, [(f.var, FoVar(new))]))


def rename_bound_rel(f: ForallRel, avoid: set[str]) -> ForallRel:
    new = fresh_name(f.var, avoid | all_names(f.body))
    if new == f.var:
        return f
    return ForallRel(new, f.arity, rel_rename(f.body, f.var, new, f.arity))


def rel_rename(f: Formula, old: str, new: str, arity: int) -> Formula:
    """Rename the free relation variable old to new."""
    if isinstance(f, Atom):
        if isinstance(f.head, RelVar) and f.head.name == old:
            return Atom(RelVar(new, f.head.arity), f.args)
        return f
    if isinstance(f, Arrow):
        return Arrow(rel_rename(f.left, old, new, arity), rel_rename(f.right, old, new, arity))
    if isinstance(f, ForallFo):
        return ForallFo(f.var, rel_rename(f.body, old, new, arity))
    if f.var == old:
        return f
    if f.var == new:
        f = rename_bound_rel(f, {old, new})
    return ForallRel(f.var, f.arity, rel_rename(f.body, old, new, arity))


def fo_subst(f: Formula, pairs: list[tuple[str, FoTerm]]) -> Formula:
    """Simultaneous capture-avoiding first-order substitution in a formula."""
    subst = {x: u for x, u in pairs}
    if not subst:
        return f
    clash = set()
    for u in subst.values():
        clash |= fo_vars(u)

    def go(g: Formula, sub: dict[str, FoTerm]) -> Formula:
        if not sub:
            return g
        if isinstance(g, Atom):
            return Atom(g.head, tuple(fo_substitute(a, sub) for a in g.args))
        if isinstance(g, Arrow):
            return Arrow(go(g.left, sub), go(g.right, sub))
        if isinstance(g, ForallFo):
            inner = {x: u for x, u in sub.items() if x != g.var}
            if not inner:
                return g
            if g.var in clash and any(x in free_fo_vars(g.body) for x in inner):
                g = rename_bound_fo(g, clash | set(inner))
                inner = {x: u for x, u in sub.items() if x != g.var}
            return ForallFo(g.var, go(g.body, inner))
        return ForallRel(g.var, g.arity, go(g.body, sub))

    return go(f, subst)


def rel_subst(f: Formula, x_name: str, params: tuple[str, ...], sub_formula: Formula) -> Formula:
    """Replace each atom X(t1..tn) by sub_formula[t1/params1,...], capture-
    avoiding; bound occurrences of X are untouched."""
    fvs_new = free_fo_vars(sub_formula)
    rels_new = free_rel_vars(sub_formula)

    def go(g: Formula) -> Formula:
        if isinstance(g, Atom):
            if isinstance(g.head, RelVar) and g.head.name == x_name:
                if len(g.args) != len(params):
                    raise ArityError(
                        f"relation substitution arity mismatch for {x_name}: "
                        f"{len(g.args)} args vs {len(params)} parameters"
                    )
                return fo_subst(sub_formula, list(zip(params, g.args)))
            return g
        if isinstance(g, Arrow):
            return Arrow(go(g.left), go(g.right))
        if isinstance(g, ForallFo):
            if g.var in fvs_new and x_name in free_rel_vars(g.body):
                g = rename_bound_fo(g, fvs_new)
            return ForallFo(g.var, go(g.body))
        if g.var == x_name:
            return g
        if g.var in rels_new and x_name in free_rel_vars(g.body):
            g = rename_bound_rel(g, set(rels_new))
        return ForallRel(g.var, g.arity, go(g.body))

    return go(f)


def closure(f: Formula) -> Formula:
    """Universally quantify all free variables: first-order quantifiers first,
    then second-order, each in first-occurrence order."""
    out = f
    for name, arity in reversed(first_occurrence_rel_vars(f)):
        out = ForallRel(name, arity, out)
    for name in reversed(first_occurrence_fo_vars(f)):
        out = ForallFo(name, out)
    return out


# --- alpha-equivalence -------------------------------------------------------


def alpha_eq(a: Formula, b: Formula) -> bool:
    def go(x: Formula, y: Formula, env_fo: dict[str, str], env_rel: dict[str, str]) -> bool:
        if isinstance(x, Atom) and isinstance(y, Atom):
            if len(x.args) != len(y.args):
                return False
            if isinstance(x.head, RelSym) or isinstance(y.head, RelSym):
                if x.head != y.head:
                    return False
            else:
                xn = env_rel.get(x.head.name, x.head.name)
                if xn != y.head.name or x.head.arity != y.head.arity:
                    return False
            return all(
                term_eq(p, q, env_fo) for p, q in zip(x.args, y.args)
            )
        if isinstance(x, Arrow) and isinstance(y, Arrow):
            return go(x.left, y.left, env_fo, env_rel) and go(x.right, y.right, env_fo, env_rel)
        if isinstance(x, ForallFo) and isinstance(y, ForallFo):
            return go(x.body, y.body, {**env_fo, x.var: y.var}, env_rel)
        if isinstance(x, ForallRel) and isinstance(y, ForallRel):
            if x.arity != y.arity:
                return False
            return go(x.body, y.body, env_fo, {**env_rel, x.var: y.var})
        return False

    def term_eq(p: FoTerm, q: FoTerm, env_fo: dict[str, str]) -> bool:
        if isinstance(p, FoVar):
            return isinstance(q, FoVar) and env_fo.get(p.name, p.name) == q.name
        return (
            isinstance(q, FoApp)
            and p.sym == q.sym
            and len(p.args) == len(q.args)
            and all(term_eq(a, b2, env_fo) for a, b2 in zip(p.args, q.args))
        )

    return go(a, b, {}, {})


def canon(f: Formula) -> Formula:
    """Canonical alpha-representative: bound names _v0, _v1, ... in traversal
    order. Usable as a dict/set key via structural equality."""
    counter = [0]

    def go(g: Formula, env_fo: dict[str, str], env_rel: dict[str, str]) -> Formula:
        if isinstance(g, Atom):
            head: RelHead = g.head
            if isinstance(head, RelVar) and head.name in env_rel:
                head = RelVar(env_rel[head.name], head.arity)
            return Atom(head, tuple(go_term(a, env_fo) for a in g.args))
        if isinstance(g, Arrow):
            return Arrow(go(g.left, env_fo, env_rel), go(g.right, env_fo, env_rel))
        if isinstance(g, ForallFo):
            name = f"_v{counter[0]}"
            counter[0] += 1
            return ForallFo(name, go(g.body, {**env_fo, g.var: name}, env_rel))
        name = f"_v{counter[0]}"
        counter[0] += 1
        return ForallRel(name, g.arity, go(g.body, env_fo, {**env_rel, g.var: name}))

    def go_term(t: FoTerm, env_fo: dict[str, str]) -> FoTerm:
        if isinstance(t, FoVar):
            return FoVar(env_fo.get(t.name, t.name))
        return FoApp(t.sym, tuple(go_term(a, env_fo) for a in t.args))

    return go(f, {}, {})


def strip_forall_prefix(f: Formula) -> tuple[list[tuple[str, Optional[int]]], Formula]:
    """Leading quantifier block as (name, arity-or-None-for-fo) pairs."""
    prefix: list[tuple[str, Optional[int]]] = []
    while True:
        if isinstance(f, ForallFo):
            prefix.append((f.var, None))
            f = f.body
        elif isinstance(f, ForallRel):
            prefix.append((f.var, f.arity))
            f = f.body
        else:
            return prefix, f


def rename_apart(f: Formula, avoid: Optional[set[str]] = None) -> Formula:
    """Rename so that all bound variables are pairwise distinct and distinct
    from every free variable; original names kept when already unique."""
    taken = set(avoid or set()) | free_fo_vars(f) | set(free_rel_vars(f))

    def go(g: Formula, env_fo: dict[str, str], env_rel: dict[str, str]) -> Formula:
        if isinstance(g, Atom):
            head: RelHead = g.head
            if isinstance(head, RelVar) and head.name in env_rel:
                head = RelVar(env_rel[head.name], head.arity)
            return Atom(head, tuple(go_term(a, env_fo) for a in g.args))
        if isinstance(g, Arrow):
            return Arrow(go(g.left, env_fo, env_rel), go(g.right, env_fo, env_rel))
        if isinstance(g, ForallFo):
            name = fresh_name(g.var, taken)
            taken.add(name)
            return ForallFo(name, go(g.body, {**env_fo, g.var: name}, env_rel))
        name = fresh_name(g.var, taken)
        taken.add(name)
        return ForallRel(name, g.arity, go(g.body, env_fo, {**env_rel, g.var: name}))

    def go_term(t: FoTerm, env_fo: dict[str, str]) -> FoTerm:
        if isinstance(t, FoVar):
            return FoVar(env_fo.get(t.name, t.name))
        return FoApp(t.sym, tuple(go_term(a, env_fo) for a in t.args))

    return go(f, {}, {})


# --- signature and theory ----------------------------------------------------


class ArityError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    fun_symbols: tuple[tuple[str, int], ...] = ()
    rel_symbols: tuple[tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        funs = dict(self.fun_symbols)
        rels = dict(self.rel_symbols)
        if any(a < 0 for a in funs.values()) or any(a < 0 for a in rels.values()):
            raise ArityError("arities must be >= 0")
        overlap = set(funs) & set(rels)
        if overlap:
            raise ArityError(f"names declared both as function and relation: {sorted(overlap)}")

    @property
    def funs(self) -> dict[str, int]:
        return dict(self.fun_symbols)

    @property
    def rels(self) -> dict[str, int]:
        return dict(self.rel_symbols)

    def check_term(self, t: FoTerm) -> None:
        if isinstance(t, FoVar):
            return
        arity = self.funs.get(t.sym)
        if arity is None:
            raise ArityError(f"undeclared function symbol {t.sym!r}")
        if arity != len(t.args):
            raise ArityError(f"{t.sym!r} declared /{arity} but applied to {len(t.args)} args")
        for a in t.args:
            self.check_term(a)

    def check_formula(self, f: Formula) -> None:
        if isinstance(f, Atom):
            if isinstance(f.head, RelSym):
                arity = self.rels.get(f.head.name)
                if arity is None:
                    raise ArityError(f"undeclared relation symbol {f.head.name!r}")
            else:
                arity = f.head.arity
            if arity != len(f.args):
                raise ArityError(f"atom {f.head} applied to {len(f.args)} args, expected {arity}")
            for a in f.args:
                self.check_term(a)
        elif isinstance(f, Arrow):
            self.check_formula(f.left)
            self.check_formula(f.right)
        else:
            self.check_formula(f.body)


@dataclass(frozen=True)
class Theory:
    sig: Signature
    equations: tuple[tuple[FoTerm, FoTerm], ...] = ()

    def __post_init__(self) -> None:
        for lhs, rhs in self.equations:
            self.sig.check_term(lhs)
            self.sig.check_term(rhs)

    def one_sided_equations(self) -> list[tuple[FoTerm, FoTerm]]:
        """Equations with a variable on only one side; accepted but flagged."""
        flagged = []
        for lhs, rhs in self.equations:
            lv, rv = fo_vars(lhs), fo_vars(rhs)
            if lv != rv and (lv - rv or rv - lv):
                flagged.append((lhs, rhs))
        return flagged


EMPTY_THEORY = Theory(Signature())


def equation_formula(lhs: FoTerm, rhs: FoTerm) -> Formula:
    """t = t' rendered as the second-order formula forall X (Xt -> Xt')."""
    return ForallRel("X", 1, Arrow(Atom(RelVar("X", 1), (lhs,)), Atom(RelVar("X", 1), (rhs,))))


# --- printing ----------------------------------------------------------------


def format_fo_term(t: FoTerm) -> str:
    if isinstance(t, FoVar):
        return t.name
    if not t.args:
        return t.sym
    return f"{t.sym}({', '.join(format_fo_term(a) for a in t.args)})"


def format_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        name = f.head.name
        if not f.args:
            return name
        return f"{name}({', '.join(format_fo_term(a) for a in f.args)})"
    if isinstance(f, Arrow):
        left = format_formula(f.left)
        if isinstance(f.left, (Arrow, ForallFo, ForallRel)):
            left = f"({left})"
        return f"{left} -> {format_formula(f.right)}"
    if isinstance(f, ForallFo):
        return f"forall {f.var}. {format_formula(f.body)}"
    return f"forall {f.var}/{f.arity}. {format_formula(f.body)}"


# --- parsing -----------------------------------------------------------------


def _is_rel_name(name: str) -> bool:
    return name[0].isupper()


def parse_fo_term(text: str, sig: Optional[Signature] = None) -> FoTerm:
    sc = _Scanner(text)
    t = _parse_fo_term(sc, sig)
    if not sc.done():
        raise sc.error("trailing input")
    return t


def _parse_fo_primary(sc: _Scanner, sig: Optional[Signature]) -> FoTerm:
    if sc.peek() == "(":
        sc.eat("(")
        t = _parse_fo_term(sc, sig)
        sc.eat(")")
        return t
    name = sc.ident()
    if _is_rel_name(name):
        raise sc.error(f"relation name {name!r} in first-order term")
    if sc.peek() == "(":
        sc.eat("(")
        args = [_parse_fo_term(sc, sig)]
        while sc.peek() == ",":
            sc.eat(",")
            args.append(_parse_fo_term(sc, sig))
        sc.eat(")")
        return FoApp(name, tuple(args))
    if sig is not None and name in sig.funs:
        return FoApp(name)  # bare symbol; unary chains resolved by caller
    if name.isdigit():
        return FoApp(name)
    return FoVar(name)


def _parse_fo_term(sc: _Scanner, sig: Optional[Signature]) -> FoTerm:
    head = _parse_fo_primary(sc, sig)
    # Juxtaposition for unary chains: `s x` means s(x).
    while True:
        ch = sc.peek()
        if ch and (ch.isalnum() or ch in "_'") :
            arg = _parse_fo_primary(sc, sig)
            if isinstance(head, FoApp) and not head.args:
                head = FoApp(head.sym, (arg,))
            elif isinstance(head, FoVar):
                head = FoApp(head.name, (arg,))
            else:
                raise sc.error("cannot apply a saturated term")
        else:
            return head


def parse_formula(text: str, sig: Optional[Signature] = None) -> Formula:
    sc = _Scanner(text)
    f = _parse_formula(sc, sig, {})
    if not sc.done():
        raise sc.error("trailing input")
    return f


def _parse_formula(sc: _Scanner, sig: Optional[Signature], rel_arity: dict[str, int]) -> Formula:
    if sc.peek() == "f":
        save = (sc.pos, sc.line, sc.col)
        word = sc.ident()
        if word == "forall":
            binders: list[tuple[str, Optional[int]]] = []
            while sc.peek() != ".":
                name = sc.ident()
                if _is_rel_name(name):
                    arity = 0
                    if sc.peek() == "/":
                        sc.eat("/")
                        arity = int(sc.ident())
                    binders.append((name, arity))
                else:
                    binders.append((name, None))
            sc.eat(".")
            inner_arity = dict(rel_arity)
            for name, arity in binders:
                if arity is not None:
                    inner_arity[name] = arity
            body = _parse_formula(sc, sig, inner_arity)
            for name, arity in reversed(binders):
                if arity is None:
                    body = ForallFo(name, body)
                else:
                    body = ForallRel(name, arity, body)
            return body
        sc.pos, sc.line, sc.col = save  # plain identifier starting with f
    left = _parse_arrow_operand(sc, sig, rel_arity)
    sc.skip_ws()
    if sc.text[sc.pos : sc.pos + 2] == "->":
        sc._advance(2)
        right = _parse_formula(sc, sig, rel_arity)
        return Arrow(left, right)
    return left


def _parse_arrow_operand(sc: _Scanner, sig: Optional[Signature], rel_arity: dict[str, int]) -> Formula:
    if sc.peek() == "(":
        sc.eat("(")
        f = _parse_formula(sc, sig, rel_arity)
        sc.eat(")")
        return f
    name = sc.ident()
    if name == "forall":
        raise sc.error("quantifier must be parenthesized here")
    if not _is_rel_name(name):
        raise sc.error(f"expected atom, got first-order name {name!r}")
    args: list[FoTerm] = []
    if sc.peek() == "(":
        sc.eat("(")
        if sc.peek() != ")":
            args.append(_parse_fo_term(sc, sig))
            while sc.peek() == ",":
                sc.eat(",")
                args.append(_parse_fo_term(sc, sig))
        sc.eat(")")
    if sig is not None and name in sig.rels:
        declared = sig.rels[name]
        if declared != len(args):
            raise sc.error(f"relation symbol {name!r} declared /{declared}, got {len(args)} args")
        return Atom(RelSym(name), tuple(args))
    arity = rel_arity.get(name, len(args))
    if arity != len(args):
        raise sc.error(f"relation variable {name!r} bound with arity {arity}, got {len(args)} args")
    return Atom(RelVar(name, arity), tuple(args))


def parse_theory(text: str) -> Theory:
    """Theory declarations, one per statement ending in '.':
    `fun s/1.` `rel Null/1.` `eq p(s x) = x.`"""
    funs: list[tuple[str, int]] = []
    rels: list[tuple[str, int]] = []
    raw_eqs: list[tuple[str, str]] = []
    cleaned = "\n".join(raw.split("#", 1)[0] for raw in text.splitlines())
    for lineno, chunk in enumerate(cleaned.split("."), start=1):
        line = chunk.strip()
        if not line:
            continue
        if line.startswith("fun "):
            name, _, arity = line[4:].strip().partition("/")
            funs.append((name.strip(), int(arity)))
        elif line.startswith("rel "):
            name, _, arity = line[4:].strip().partition("/")
            rels.append((name.strip(), int(arity)))
        elif line.startswith("eq "):
            lhs, _, rhs = line[3:].partition("=")
            raw_eqs.append((lhs.strip(), rhs.strip()))
        else:
            raise ParseError(f"unrecognized declaration {line!r}", lineno, 1)
    sig = Signature(tuple(funs), tuple(rels))
    eqs = tuple(
        (parse_fo_term(lhs, sig), parse_fo_term(rhs, sig)) for lhs, rhs in raw_eqs
    )
    return Theory(sig, eqs)


def format_theory(th: Theory) -> str:
    lines = [f"fun {n}/{a}." for n, a in th.sig.fun_symbols]
    lines += [f"rel {n}/{a}." for n, a in th.sig.rel_symbols]
    lines += [
        f"eq {format_fo_term(l)} = {format_fo_term(r)}." for l, r in th.equations
    ]
    return "\n".join(lines) + "\n"
