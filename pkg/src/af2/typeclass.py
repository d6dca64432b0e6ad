"""Type classifiers: second-order-positive/negative quantifier classes, the
stricter positive/negative classes, proper types, polarized subtype families
with substitution, the exclusion condition on subtype interactions, and the
good-positive-type verdict."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from .bounds import Bounds
from .logic import (
    Arrow,
    Atom,
    Formula,
    FoApp,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    Theory,
    all_names,
    alpha_eq,
    canon,
    fo_size,
    fo_subst,
    format_formula,
    free_fo_vars,
    free_rel_vars,
    rename_apart,
    strip_forall_prefix,
)
from .orders import EqStep, FoInst, InstChain, NotFoundWithinBounds, SearchStats, leq, sim_ball
from .terms import fresh_name

POS = "pos"
NEG = "neg"
BOTH = "both"
NEITHER = "neither"


def _verdict(pos: bool, neg: bool) -> str:
    if pos and neg:
        return BOTH
    if pos:
        return POS
    if neg:
        return NEG
    return NEITHER


def classify_quant2(f: Formula) -> str:
    """Second-order quantifier polarity classes (active second-order
    quantifiers only positive, resp. only negative)."""

    def go(g: Formula) -> tuple[bool, bool]:
        if isinstance(g, Atom):
            return True, True
        if isinstance(g, Arrow):
            lp, ln = go(g.left)
            rp, rn = go(g.right)
            return ln and rp, lp and rn
        if isinstance(g, ForallFo):
            return go(g.body)
        bp, bn = go(g.body)
        return bp, bn and g.var not in free_rel_vars(g.body)

    return _verdict(*go(f))


def classify_quant(f: Formula) -> str:
    """The stricter positive/negative classes: first-order quantifiers only
    negative and never directly behind an arrow, quantified second-order
    variables must occur, quantified first-order variables must occur (the
    properness of these classes forces the last requirement)."""

    def go(g: Formula) -> tuple[bool, bool]:
        if isinstance(g, Atom):
            return True, True
        if isinstance(g, Arrow):
            lp, ln = go(g.left)
            rp, rn = go(g.right)
            pos = ln and rp
            neg = lp and rn and not isinstance(g.right, ForallFo)
            return pos, neg
        if isinstance(g, ForallFo):
            _, bn = go(g.body)
            return False, bn and g.var in free_fo_vars(g.body)
        bp, _ = go(g.body)
        return bp and g.var in free_rel_vars(g.body), False

    return _verdict(*go(f))


def is_proper(f: Formula) -> bool:
    if isinstance(f, Atom):
        return True
    if isinstance(f, Arrow):
        return is_proper(f.left) and is_proper(f.right)
    if isinstance(f, ForallFo):
        return f.var in free_fo_vars(f.body) and is_proper(f.body)
    return f.var in free_rel_vars(f.body) and is_proper(f.body)


# --- polarized subtype occurrences ---------------------------------------------


@dataclass(frozen=True)
class SchematicSubtype:
    formula: Formula
    polarity: str
    path: tuple[int, ...]
    fresh_families: tuple[tuple[str, str], ...]  # binder name in source -> exposed name
    substitution_slots: tuple[str, ...]  # free first-order variables


def subtype_occurrences(f: Formula) -> list[SchematicSubtype]:
    """All polarized subtype occurrences of f, pre-order. Bound variables are
    renamed apart first, so occurrences from a shared prefix share the
    exposed names. Bodies along the root's outermost quantifier prefix are
    not emitted separately (they are redundant with the root)."""
    renamed = rename_apart(f)
    out: list[SchematicSubtype] = []

    def emit(g: Formula, pol: str, path: tuple[int, ...], families: tuple[tuple[str, str], ...]) -> None:
        slots = tuple(sorted(free_fo_vars(g)))
        out.append(SchematicSubtype(g, pol, path, families, slots))

    def visit(
        g: Formula,
        pol: str,
        path: tuple[int, ...],
        families: tuple[tuple[str, str], ...],
        in_root_prefix: bool,
        suppressed: bool,
    ) -> None:
        if not suppressed:
            emit(g, pol, path, families)
        if isinstance(g, (ForallFo, ForallRel)):
            fam = families + ((g.var, g.var),)
            visit(g.body, pol, path + (0,), fam, in_root_prefix, in_root_prefix)
        elif isinstance(g, Arrow):
            visit(g.left, _flip(pol), path + (0,), families, False, False)
            visit(g.right, pol, path + (1,), families, False, False)

    visit(renamed, POS, (), (), True, False)
    return out


def _flip(pol: str) -> str:
    return NEG if pol == POS else POS


def subtypes(f: Formula, polarity: str, bounds: Bounds) -> list[SchematicSubtype]:
    """The positive (resp. negative) subtype family of f. An atomic root
    belongs to both families."""
    occs = subtype_occurrences(f)
    picked = [o for o in occs if o.polarity == polarity]
    if isinstance(f, Atom) and polarity == NEG and not any(o.path == () for o in picked):
        picked.insert(0, SchematicSubtype(f, NEG, (), (), tuple(sorted(free_fo_vars(f)))))
    return picked


# --- condition (*) ----------------------------------------------------------------


@dataclass(frozen=True)
class StarWitness:
    b_schematic: Formula
    b_subst: tuple[tuple[str, FoTerm], ...]
    b: Formula
    c_schematic: Formula
    c_subst: tuple[tuple[str, FoTerm], ...]
    c: Formula
    g: Formula
    n: int
    c_parts: tuple[Formula, ...]
    d: Formula
    b_chain: InstChain
    g_sim_chain: InstChain
    c_chain: InstChain
    cloned_pair: bool


@dataclass(frozen=True)
class Violated:
    witness: StarWitness


@dataclass(frozen=True)
class ClearWithinBounds:
    bounds: Bounds


def _ground_pool(th: Theory, bounds: Bounds) -> list[FoTerm]:
    """Small ground substitution terms: constants, then unary stacks."""
    pool: list[FoTerm] = [FoApp(n) for n, a in th.sig.fun_symbols if a == 0]
    layer = list(pool)
    for _ in range(bounds.max_inst_depth - 1):
        nxt = []
        for name, arity in th.sig.fun_symbols:
            if arity == 1:
                nxt += [FoApp(name, (t,)) for t in layer]
        pool += nxt
        layer = nxt
        if len(pool) > 24:
            break
    return pool[:24]


def _substitutions(slots: tuple[str, ...], pool: list[FoTerm]) -> Iterator[tuple[tuple[str, FoTerm], ...]]:
    """Identity first, then single-slot then multi-slot ground instances."""
    yield ()
    if not slots or not pool:
        return
    options: list[list[Optional[FoTerm]]] = [[None] + list(pool) for _ in slots]
    combos = itertools.product(*options)
    next(combos)  # identity already yielded
    emitted = 0
    for combo in combos:
        subst = tuple((s, t) for s, t in zip(slots, combo) if t is not None)
        yield subst
        emitted += 1
        if emitted >= 64:
            return


def _clone_apart(s: SchematicSubtype, avoid: set[str]) -> SchematicSubtype:
    """Rename every name of a schematic subtype (free and bound) apart."""
    g = s.formula
    mapping_fo = {}
    mapping_rel = {}
    taken = set(avoid) | all_names(g)
    for v in sorted(free_fo_vars(g)):
        mapping_fo[v] = fresh_name(v, taken)
        taken.add(mapping_fo[v])
    for v in sorted(free_rel_vars(g)):
        mapping_rel[v] = fresh_name(v, taken)
        taken.add(mapping_rel[v])
    out = fo_subst(g, [(v, FoVar(n)) for v, n in mapping_fo.items()])
    from .logic import rel_rename

    rels = free_rel_vars(g)
    for v, n in mapping_rel.items():
        out = rel_rename(out, v, n, rels[v])
    out = rename_apart(out, avoid=taken)
    return SchematicSubtype(out, s.polarity, s.path, s.fresh_families, tuple(sorted(free_fo_vars(out))))


def _strip_candidates(g: Formula, th: Theory, pool: list[FoTerm]) -> list[FoTerm]:
    """Instantiation candidates for one first-order strip: the binder's own
    name first (schematic instantiation), then ground terms."""
    assert isinstance(g, ForallFo)
    return [FoVar(g.var)] + pool


def _arrow_decompositions(w: Formula) -> list[tuple[int, tuple[Formula, ...], Formula]]:
    """(n, (C_1..C_n), D) decompositions of an arrow-shaped formula, deepest
    first."""
    parts: list[Formula] = []
    cur = w
    while isinstance(cur, Arrow):
        parts.append(cur.left)
        cur = cur.right
    out = []
    for n in range(len(parts), 0, -1):
        d: Formula = cur
        for left in reversed(parts[n:]):
            d = Arrow(left, d)
        out.append((n, tuple(parts[:n]), d))
    return out


def _c_chains(
    c: Formula, th: Theory, bounds: Bounds, pool: list[FoTerm]
) -> Iterator[tuple[tuple, Formula]]:
    """Chains (possibly empty) from c to an arrow-shaped instance; first-order
    strips use the binder's own name first, second-order strips are atomic."""

    def go(cur: Formula, steps: tuple, budget: int) -> Iterator[tuple[tuple, Formula]]:
        if isinstance(cur, Arrow):
            yield steps, cur
            return
        if isinstance(cur, Atom) or budget <= 0:
            return
        if isinstance(cur, ForallFo):
            seen = set()
            for u in _strip_candidates(cur, th, pool):
                inst = fo_subst(cur.body, [(cur.var, u)])
                key = canon(inst)
                if key in seen:
                    continue
                seen.add(key)
                yield from go(inst, steps + (FoInst(u),), budget - 1)
            return
        # Second-order strip, atomic instances only (see design notes).
        from .orders import RelInst, _atomic_rel_candidates

        params = tuple(f"_z{i}" for i in range(cur.arity))
        seen = set()
        for F in _atomic_rel_candidates(cur.arity, cur.body, th):
            from .logic import rel_subst

            inst = rel_subst(cur.body, cur.var, params, F)
            key = canon(inst)
            if key in seen:
                continue
            seen.add(key)
            yield from go(inst, steps + (RelInst(params, F),), budget - 1)

    prefix, _ = strip_forall_prefix(c)
    yield from go(c, (), len(prefix) + bounds.max_inst_depth)


def check_condition_star(
    A: Formula, th: Theory, bounds: Bounds, polarity: Optional[str] = None
) -> Violated | ClearWithinBounds:
    """Scan pairs of same-polarity subtype occurrences with substitution for
    the forbidden interaction: B strictly below some G, G equationally
    equivalent to the last argument of an arrow decomposition of an instance
    of C. Pairs are distinct non-overlapping occurrences, plus independently
    renamed clones of a single occurrence (flagged)."""
    if polarity is None:
        polarity = POS if classify_quant(A) == NEG else NEG
    occs = subtypes(A, polarity, bounds)
    pool = _ground_pool(th, bounds)
    for b_occ in occs:
        if not isinstance(b_occ.formula, (ForallFo, ForallRel)):
            continue  # only quantified formulas admit strict chains
        for c_occ in occs:
            cloned = c_occ.path == b_occ.path
            if not cloned and _overlap(b_occ.path, c_occ.path):
                continue
            c_eff = _clone_apart(c_occ, all_names(b_occ.formula) | all_names(A)) if cloned else c_occ
            w = _scan_pair(A, b_occ, c_eff, cloned, th, bounds, pool)
            if w is not None:
                return Violated(w)
    return ClearWithinBounds(bounds)


def _overlap(p: tuple[int, ...], q: tuple[int, ...]) -> bool:
    k = min(len(p), len(q))
    return p[:k] == q[:k]


def _scan_pair(
    A: Formula,
    b_occ: SchematicSubtype,
    c_occ: SchematicSubtype,
    cloned: bool,
    th: Theory,
    bounds: Bounds,
    pool: list[FoTerm],
) -> Optional[StarWitness]:
    for b_subst in _substitutions(b_occ.substitution_slots, pool):
        b_inst = fo_subst(b_occ.formula, list(b_subst)) if b_subst else b_occ.formula
        for c_subst in _substitutions(c_occ.substitution_slots, pool):
            c_inst = fo_subst(c_occ.formula, list(c_subst)) if c_subst else c_occ.formula
            for c_steps, w in _c_chains(c_inst, th, bounds, pool):
                for n, parts, d in _arrow_decompositions(w):
                    target = parts[-1]
                    for g, gsteps in sim_ball(target, th, bounds):
                        stats = SearchStats()
                        chain = leq(b_inst, g, th, bounds, stats)
                        if not isinstance(chain, InstChain) or not chain.steps:
                            continue
                        c_arrow = _rebuild_arrow(parts, d)
                        return StarWitness(
                            b_schematic=b_occ.formula,
                            b_subst=b_subst,
                            b=b_inst,
                            c_schematic=c_occ.formula,
                            c_subst=c_subst,
                            c=c_inst,
                            g=g,
                            n=n,
                            c_parts=parts,
                            d=d,
                            b_chain=chain,
                            g_sim_chain=InstChain(g, gsteps, target),
                            c_chain=InstChain(c_inst, c_steps, c_arrow),
                            cloned_pair=cloned,
                        )
    return None


def _rebuild_arrow(parts: tuple[Formula, ...], d: Formula) -> Formula:
    out = d
    for left in reversed(parts):
        out = Arrow(left, out)
    return out


# --- assembled classification -------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    forall2: str
    forall: str
    proper: bool
    star: Violated | ClearWithinBounds
    b_plus: str  # "yes" | "no" | "unknown"
    b_plus_reason: str = ""


def classify(A: Formula, th: Theory, bounds: Bounds) -> Classification:
    q2 = classify_quant2(A)
    q = classify_quant(A)
    proper = is_proper(A)
    star = check_condition_star(A, th, bounds)
    if q in (POS, BOTH):
        if isinstance(star, ClearWithinBounds):
            b_plus, reason = "yes", ""
        else:
            b_plus, reason = "no", "condition (*) violated"
    else:
        b_plus, reason = "no", "not a positive type"
    return Classification(q2, q, proper, star, b_plus, reason)


def format_witness(w: StarWitness) -> str:
    def fmt_subst(subst: tuple[tuple[str, FoTerm], ...]) -> str:
        from .logic import format_fo_term

        if not subst:
            return ""
        inside = ", ".join(f"{format_fo_term(t)}/{v}" for v, t in subst)
        return f"[{inside}]"

    lines = [
        f"B = {format_formula(prettify(w.b_schematic))}{fmt_subst(w.b_subst)}",
        f"C = {format_formula(prettify(w.c_schematic))}{fmt_subst(w.c_subst)}",
        f"B < G: {format_formula(prettify(w.b))} < {format_formula(prettify(w.g))}",
        f"G ~ C_{w.n}: {format_formula(prettify(w.g))} ~ {format_formula(prettify(w.c_parts[-1]))}",
        f"C <= C_1 -> ... -> (C_{w.n} -> D): {format_formula(prettify(w.c))} <= "
        + format_formula(prettify(_rebuild_arrow(w.c_parts, w.d))),
    ]
    if w.cloned_pair:
        lines.append("note: B and C are clones of the same subtype occurrence")
    return "\n".join(lines)


def prettify(f: Formula) -> Formula:
    """Alpha-rename bound variables back to un-indexed base names where that
    causes no collision inside the formula (display only)."""
    taken = set(free_fo_vars(f)) | set(free_rel_vars(f))

    def base(name: str) -> str:
        stripped = name.rstrip("0123456789")
        return stripped or name

    def go(g: Formula) -> Formula:
        if isinstance(g, Atom):
            return g
        if isinstance(g, Arrow):
            return Arrow(go(g.left), go(g.right))
        if isinstance(g, ForallFo):
            want = base(g.var)
            if want != g.var and want not in taken and want not in all_names(g.body):
                taken.add(want)
                return ForallFo(want, go(fo_subst(g.body, [(g.var, FoVar(want))])))
            taken.add(g.var)
            return ForallFo(g.var, go(g.body))
        want = base(g.var)
        if want != g.var and want not in taken and want not in all_names(g.body):
            from .logic import rel_rename

            taken.add(want)
            return ForallRel(want, g.arity, go(rel_rename(g.body, g.var, want, g.arity)))
        taken.add(g.var)
        return ForallRel(g.var, g.arity, go(g.body))

    return go(f)
