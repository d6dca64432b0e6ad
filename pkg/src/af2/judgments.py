"""Typing judgments: contexts, explicit derivation trees over rules (1)-(8)
and (7_0), node-by-node checking, weakening/strengthening, equational
transport, and derivation-level beta-reduction of subjects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .bounds import Bounds
from .equations import Equal, approx_e, eq_instance, term_replace_at
from .logic import (
    ArityError,
    Arrow,
    Atom,
    FoApp,
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
    fo_subst,
    fo_substitute,
    format_fo_term,
    format_formula,
    free_fo_vars,
    free_rel_vars,
    parse_formula,
    parse_fo_term,
    rel_subst,
)
from .terms import (
    Abs,
    App,
    Free,
    Term,
    format_term,
    free_vars,
    fresh_name,
    lam,
    open_term,
    parse_term,
    substitute,
)


@dataclass(frozen=True)
class Context:
    bindings: tuple[tuple[str, Formula], ...] = ()

    def __post_init__(self) -> None:
        names = [n for n, _ in self.bindings]
        if len(names) != len(set(names)):
            raise ValueError("context variables must be pairwise distinct")

    def lookup(self, name: str) -> Optional[Formula]:
        for n, f in self.bindings:
            if n == name:
                return f
        return None

    def names(self) -> set[str]:
        return {n for n, _ in self.bindings}

    def extend(self, name: str, f: Formula) -> "Context":
        return Context(self.bindings + ((name, f),))

    def restrict(self, keep: set[str]) -> "Context":
        return Context(tuple((n, f) for n, f in self.bindings if n in keep))

    def free_fo(self) -> set[str]:
        out: set[str] = set()
        for _, f in self.bindings:
            out |= free_fo_vars(f)
        return out

    def free_rel(self) -> set[str]:
        out: set[str] = set()
        for _, f in self.bindings:
            out |= set(free_rel_vars(f))
        return out


EMPTY_CONTEXT = Context()

RULES = ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R70", "R8")


@dataclass(frozen=True)
class Derivation:
    rule: str
    ctx: Context
    term: Term
    type: Formula
    payload: Optional[dict] = field(default=None, compare=False)
    premises: tuple["Derivation", ...] = ()


@dataclass(frozen=True)
class Ok:
    pass


@dataclass(frozen=True)
class Rejected:
    path: tuple[int, ...]
    reason: str


OK = Ok()


class DerivationError(ValueError):
    pass


def check_derivation(d: Derivation, th: Theory, mode: str = "AF2") -> Ok | Rejected:
    """Validate every node locally, including the freshness (*), formation
    (**) and equational (***) side conditions. In AF2_0 mode rule R7 is
    rejected; R70 is accepted in both modes."""
    if mode not in ("AF2", "AF2_0"):
        raise ValueError(f"unknown mode {mode!r}")
    return _check(d, th, mode, ())


def _reject(path: tuple[int, ...], reason: str) -> Rejected:
    return Rejected(path, reason)


def _check(d: Derivation, th: Theory, mode: str, path: tuple[int, ...]) -> Ok | Rejected:
    try:
        for _, f in d.ctx.bindings:
            th.sig.check_formula(f)
        th.sig.check_formula(d.type)
    except ArityError as e:
        return _reject(path, f"side condition (**): {e}")

    r = d.rule
    if r not in RULES:
        return _reject(path, f"unknown rule {r!r}")

    if r == "R1":
        if d.premises:
            return _reject(path, "R1 takes no premises")
        if not isinstance(d.term, Free):
            return _reject(path, "R1 subject must be a variable")
        declared = d.ctx.lookup(d.term.name)
        if declared is None:
            return _reject(path, f"variable {d.term.name!r} not declared")
        if not alpha_eq(declared, d.type):
            return _reject(path, "R1 type differs from declaration")
        return OK

    if r == "R2":
        if len(d.premises) != 1:
            return _reject(path, "R2 takes one premise")
        (p,) = d.premises
        if not isinstance(d.type, Arrow):
            return _reject(path, "R2 conclusion must be an arrow")
        if not isinstance(d.term, Abs):
            return _reject(path, "R2 subject must be an abstraction")
        if len(p.ctx.bindings) != len(d.ctx.bindings) + 1 or p.ctx.bindings[:-1] != d.ctx.bindings:
            return _reject(path, "R2 premise context must extend the conclusion context")
        x, declared = p.ctx.bindings[-1]
        if not alpha_eq(declared, d.type.left):
            return _reject(path, "R2 bound variable type differs from the arrow domain")
        if p.term != open_term(d.term.body, Free(x)):
            return _reject(path, "R2 premise subject must be the opened body")
        if not alpha_eq(p.type, d.type.right):
            return _reject(path, "R2 premise type differs from the arrow codomain")
        return _check(p, th, mode, path + (0,))

    if r == "R3":
        if len(d.premises) != 2:
            return _reject(path, "R3 takes two premises")
        pf, pa = d.premises
        if not isinstance(d.term, App):
            return _reject(path, "R3 subject must be an application")
        if pf.ctx != d.ctx or pa.ctx != d.ctx:
            return _reject(path, "R3 premises must share the conclusion context")
        if pf.term != d.term.fn or pa.term != d.term.arg:
            return _reject(path, "R3 premise subjects must be the application parts")
        if not isinstance(pf.type, Arrow):
            return _reject(path, "R3 function premise must have an arrow type")
        if not alpha_eq(pf.type.left, pa.type):
            return _reject(path, "R3 argument type differs from the arrow domain")
        if not alpha_eq(pf.type.right, d.type):
            return _reject(path, "R3 conclusion differs from the arrow codomain")
        res = _check(pf, th, mode, path + (0,))
        if isinstance(res, Rejected):
            return res
        return _check(pa, th, mode, path + (1,))

    # Remaining rules share subject and context with their single premise.
    if len(d.premises) != 1:
        return _reject(path, f"{r} takes one premise")
    (p,) = d.premises
    if p.ctx != d.ctx:
        return _reject(path, f"{r} premise context must equal the conclusion context")
    if p.term != d.term:
        return _reject(path, f"{r} premise subject must equal the conclusion subject")

    if r == "R4":
        if not isinstance(d.type, ForallFo):
            return _reject(path, "R4 conclusion must be a first-order quantification")
        if not alpha_eq(p.type, d.type.body):
            return _reject(path, "R4 premise type differs from the quantifier body")
        if d.type.var in d.ctx.free_fo():
            return _reject(path, "side condition (*): quantified variable free in context")
        return _check(p, th, mode, path + (0,))

    if r == "R5":
        if not isinstance(p.type, ForallFo):
            return _reject(path, "R5 premise must be a first-order quantification")
        u = _payload_term(d, "term")
        if u is None:
            return _reject(path, "R5 payload must carry the instantiation term")
        try:
            th.sig.check_term(u)
        except ArityError as e:
            return _reject(path, f"side condition (**): {e}")
        if not alpha_eq(d.type, fo_subst(p.type.body, [(p.type.var, u)])):
            return _reject(path, "R5 conclusion is not the payload instance of the premise")
        return _check(p, th, mode, path + (0,))

    if r == "R6":
        if not isinstance(d.type, ForallRel):
            return _reject(path, "R6 conclusion must be a second-order quantification")
        if not alpha_eq(p.type, d.type.body):
            return _reject(path, "R6 premise type differs from the quantifier body")
        if d.type.var in d.ctx.free_rel():
            return _reject(path, "side condition (*): quantified relation variable free in context")
        return _check(p, th, mode, path + (0,))

    if r == "R7":
        if mode == "AF2_0":
            return _reject(path, "R7 is not available in AF2_0 mode")
        if not isinstance(p.type, ForallRel):
            return _reject(path, "R7 premise must be a second-order quantification")
        payload = d.payload or {}
        params = tuple(payload.get("params", ()))
        formula = payload.get("formula")
        if formula is None or len(params) != p.type.arity:
            return _reject(path, "R7 payload must carry parameters matching the arity and a formula")
        if len(set(params)) != len(params):
            return _reject(path, "R7 parameters must be distinct")
        try:
            th.sig.check_formula(formula)
        except ArityError as e:
            return _reject(path, f"side condition (**): {e}")
        expected = rel_subst(p.type.body, p.type.var, params, formula)
        if not alpha_eq(d.type, expected):
            return _reject(path, "R7 conclusion is not the payload instance of the premise")
        return _check(p, th, mode, path + (0,))

    if r == "R70":
        if not isinstance(p.type, ForallRel):
            return _reject(path, "R70 premise must be a second-order quantification")
        payload = d.payload or {}
        rel = payload.get("rel")
        if not isinstance(rel, str):
            return _reject(path, "R70 payload must carry a relation name")
        n = p.type.arity
        declared = th.sig.rels.get(rel)
        if declared is not None and declared != n:
            return _reject(path, f"relation symbol {rel!r} has arity {declared}, expected {n}")
        params = tuple(f"_z{i}" for i in range(n))
        head = RelSym(rel) if declared is not None else RelVar(rel, n)
        atom = Atom(head, tuple(FoVar(x) for x in params))
        expected = rel_subst(p.type.body, p.type.var, params, atom)
        if not alpha_eq(d.type, expected):
            return _reject(path, "R70 conclusion is not the atomic instance of the premise")
        return _check(p, th, mode, path + (0,))

    # R8
    payload = d.payload or {}
    template = payload.get("template")
    var = payload.get("var")
    lhs = payload.get("lhs")
    rhs = payload.get("rhs")
    if template is None or var is None or lhs is None or rhs is None:
        return _reject(path, "R8 payload must carry template, var, lhs, rhs")
    try:
        th.sig.check_formula(template)
        th.sig.check_term(lhs)
        th.sig.check_term(rhs)
    except ArityError as e:
        return _reject(path, f"side condition (**): {e}")
    if not eq_instance(lhs, rhs, th):
        return _reject(path, "side condition (***): not an instance of an equation")
    if not alpha_eq(p.type, fo_subst(template, [(var, lhs)])):
        return _reject(path, "R8 premise type is not the lhs instance of the template")
    if not alpha_eq(d.type, fo_subst(template, [(var, rhs)])):
        return _reject(path, "R8 conclusion type is not the rhs instance of the template")
    return _check(p, th, mode, path + (0,))


def _payload_term(d: Derivation, key: str) -> Optional[FoTerm]:
    if not d.payload:
        return None
    return d.payload.get(key)


# --- weakening / strengthening ------------------------------------------------


def weaken(d: Derivation, extra: Context) -> Derivation:
    """Enlarge every context by `extra`, renaming generalized variables and
    colliding lambda binders as needed (statement (i) of the context lemma)."""
    if not extra.bindings:
        return d
    overlap = d.ctx.names() & extra.names()
    if overlap:
        raise DerivationError(f"weakening context redeclares {sorted(overlap)}")
    extra_fo: set[str] = set()
    extra_rel: set[str] = set()
    for _, f in extra.bindings:
        extra_fo |= free_fo_vars(f)
        extra_rel |= set(free_rel_vars(f))
    base_len = len(d.ctx.bindings)

    def go(node: Derivation) -> Derivation:
        node = _freshen_for(node, extra_fo, extra_rel, extra.names())
        # Insert after the root context so locally bound variables stay last.
        bindings = node.ctx.bindings
        new_ctx = Context(bindings[:base_len] + extra.bindings + bindings[base_len:])
        premises = tuple(go(p) for p in node.premises)
        return Derivation(node.rule, new_ctx, node.term, node.type, node.payload, premises)

    return go(d)


def _freshen_for(node: Derivation, fo: set[str], rel: set[str], lam_names: set[str]) -> Derivation:
    if node.rule == "R4" and isinstance(node.type, ForallFo) and node.type.var in fo:
        taken = fo | node.ctx.free_fo() | all_names(node.type)
        new = fresh_name(node.type.var, taken)
        prem = subst_fo_derivation(node.premises[0], node.type.var, FoVar(new))
        return Derivation("R4", node.ctx, node.term, ForallFo(new, fo_subst(node.type.body, [(node.type.var, FoVar(new))])), None, (prem,))
    if node.rule == "R6" and isinstance(node.type, ForallRel) and node.type.var in rel:
        taken = rel | node.ctx.free_rel() | all_names(node.type)
        new = fresh_name(node.type.var, taken)
        prem = rename_rel_derivation(node.premises[0], node.type.var, new, node.type.arity)
        from .logic import rel_rename

        return Derivation("R6", node.ctx, node.term, ForallRel(new, node.type.arity, rel_rename(node.type.body, node.type.var, new, node.type.arity)), None, (prem,))
    if node.rule == "R2" and node.premises:
        bound = node.premises[0].ctx.bindings[-1][0]
        if bound in lam_names:
            taken = lam_names | node.ctx.names() | free_vars(node.term) | {bound}
            new = fresh_name(bound, taken)
            prem = rename_lambda_var(node.premises[0], bound, new)
            return Derivation("R2", node.ctx, node.term, node.type, node.payload, (prem,))
    return node


def strengthen(d: Derivation) -> Derivation:
    """Restrict the context to declarations of the subject's free variables
    (statement (ii) of the context lemma)."""
    target = d.ctx.restrict(free_vars(d.term))

    def rebuild(node: Derivation, ctx: Context) -> Derivation:
        if node.rule == "R2":
            x, a = node.premises[0].ctx.bindings[-1]
            prem = rebuild(node.premises[0], ctx.extend(x, a))
            return Derivation(node.rule, ctx, node.term, node.type, node.payload, (prem,))
        premises = tuple(rebuild(p, ctx) for p in node.premises)
        return Derivation(node.rule, ctx, node.term, node.type, node.payload, premises)

    return rebuild(d, target)


# --- derivation-level substitutions -------------------------------------------


def rename_lambda_var(d: Derivation, old: str, new: str) -> Derivation:
    """Rename a lambda variable in contexts and subjects; types untouched."""
    ctx = Context(tuple((new if n == old else n, f) for n, f in d.ctx.bindings))
    term = substitute(d.term, old, Free(new))
    return Derivation(d.rule, ctx, term, d.type, d.payload, tuple(rename_lambda_var(p, old, new) for p in d.premises))


def subst_fo_derivation(d: Derivation, x: str, u: FoTerm) -> Derivation:
    """First-order substitution lemma on derivations: replace the free
    first-order variable x by u in every type, context and payload."""
    if d.rule == "R4" and isinstance(d.type, ForallFo):
        clash = fo_vars_of_term(u) | {x}
        if d.type.var in clash:
            taken = clash | d.ctx.free_fo() | all_names(d.type)
            new = fresh_name(d.type.var, taken)
            prem = subst_fo_derivation(d.premises[0], d.type.var, FoVar(new))
            d = Derivation("R4", d.ctx, d.term, ForallFo(new, fo_subst(d.type.body, [(d.type.var, FoVar(new))])), None, (prem,))

    ctx = Context(tuple((n, fo_subst(f, [(x, u)])) for n, f in d.ctx.bindings))
    typ = fo_subst(d.type, [(x, u)])
    payload = _subst_fo_payload(d.payload, x, u)
    premises = tuple(subst_fo_derivation(p, x, u) for p in d.premises)
    return Derivation(d.rule, ctx, d.term, typ, payload, premises)


def fo_vars_of_term(t: FoTerm) -> set[str]:
    from .logic import fo_vars

    return fo_vars(t)


def _subst_fo_payload(payload: Optional[dict], x: str, u: FoTerm) -> Optional[dict]:
    if not payload:
        return payload
    out = dict(payload)
    if "term" in out:
        out["term"] = fo_substitute(out["term"], {x: u})
    if "template" in out:
        var = out["var"]
        if var == x or var in fo_vars_of_term(u):
            # Template hole must stay disjoint from the substitution.
            fresh = fresh_name(var, fo_vars_of_term(u) | {x} | free_fo_vars(out["template"]))
            out["template"] = fo_subst(out["template"], [(var, FoVar(fresh))])
            out["var"] = fresh
        out["template"] = fo_subst(out["template"], [(x, u)])
        out["lhs"] = fo_substitute(out["lhs"], {x: u})
        out["rhs"] = fo_substitute(out["rhs"], {x: u})
    if "formula" in out:
        params = tuple(out.get("params", ()))
        if x not in params:
            clash = fo_vars_of_term(u) & set(params)
            if clash:
                renaming = {}
                taken = fo_vars_of_term(u) | set(params) | {x} | free_fo_vars(out["formula"])
                for p in params:
                    if p in clash:
                        renaming[p] = fresh_name(p, taken)
                        taken.add(renaming[p])
                out["formula"] = fo_subst(out["formula"], [(p, FoVar(n)) for p, n in renaming.items()])
                out["params"] = tuple(renaming.get(p, p) for p in params)
            out["formula"] = fo_subst(out["formula"], [(x, u)])
    return out


def rename_rel_derivation(d: Derivation, old: str, new: str, arity: int) -> Derivation:
    """Rename a free relation variable throughout a derivation."""
    from .logic import rel_rename

    if d.rule == "R6" and isinstance(d.type, ForallRel) and d.type.var == new:
        taken = {old, new} | d.ctx.free_rel() | all_names(d.type)
        fresh = fresh_name(d.type.var, taken)
        prem = rename_rel_derivation(d.premises[0], d.type.var, fresh, d.type.arity)
        d = Derivation("R6", d.ctx, d.term, ForallRel(fresh, d.type.arity, rel_rename(d.type.body, d.type.var, fresh, d.type.arity)), None, (prem,))

    ctx = Context(tuple((n, rel_rename(f, old, new, arity)) for n, f in d.ctx.bindings))
    typ = rel_rename(d.type, old, new, arity)
    payload = dict(d.payload) if d.payload else d.payload
    if payload:
        if payload.get("rel") == old:
            payload["rel"] = new
        if "formula" in payload:
            payload["formula"] = rel_rename(payload["formula"], old, new, arity)
        if "template" in payload:
            payload["template"] = rel_rename(payload["template"], old, new, arity)
    premises = tuple(rename_rel_derivation(p, old, new, arity) for p in d.premises)
    return Derivation(d.rule, ctx, d.term, typ, payload, premises)


# --- equational transport (generalized rule 8) ---------------------------------


@dataclass(frozen=True)
class NotDerivableWithinBounds:
    reason: str


def transport_eq(
    d: Derivation,
    template: Formula,
    x: str,
    a: FoTerm,
    b: FoTerm,
    th: Theory,
    bounds: Bounds,
) -> Derivation | NotDerivableWithinBounds:
    """From a derivation of B[a/x] and a ~ b in the congruence, build a
    derivation of B[b/x] as a chain of R8 nodes along the rewrite path."""
    if not alpha_eq(d.type, fo_subst(template, [(x, a)])):
        raise DerivationError("derivation does not conclude the template's lhs instance")
    if a == b:
        return d
    res = approx_e(a, b, th, bounds)
    if not isinstance(res, Equal):
        return NotDerivableWithinBounds("equality not derivable within bounds")
    cur = d
    for src, step in res.path:
        nxt_term = term_replace_at(src, step.path, step.rhs)
        hole = fresh_name("_h", all_names(template) | fo_vars_of_term(src) | {x})
        t_with_hole = term_replace_at(src, step.path, FoVar(hole))
        node_template = fo_subst(template, [(x, t_with_hole)])
        new_type = fo_subst(template, [(x, nxt_term)])
        payload = {"template": node_template, "var": hole, "lhs": step.lhs, "rhs": step.rhs}
        cur = Derivation("R8", cur.ctx, cur.term, new_type, payload, (cur,))
    return cur


# --- beta reduction of subjects (subject reduction) -----------------------------


class UnsupportedDerivationShape(DerivationError):
    pass


def beta_reduce_derivation(d: Derivation, path: tuple[int, ...], th: Theory, bounds: Bounds) -> Derivation:
    """Contract the beta redex at `path` in the subject and rebuild a
    derivation of the reduct at the same type."""
    from .reduction import TraceStep, apply_step

    if not path:
        return _contract_redex_derivation(d, th, bounds)
    new_subject = apply_step(d.term, TraceStep("beta", path))
    head, rest = path[0], path[1:]
    if d.rule == "R3":
        idx = 0 if head == 0 else 1
        prem = beta_reduce_derivation(d.premises[idx], rest, th, bounds)
        premises = list(d.premises)
        premises[idx] = prem
        return Derivation("R3", d.ctx, new_subject, d.type, d.payload, tuple(premises))
    if d.rule == "R2":
        prem = beta_reduce_derivation(d.premises[0], rest, th, bounds)
        return Derivation("R2", d.ctx, new_subject, d.type, d.payload, (prem,))
    if d.rule in ("R4", "R5", "R6", "R7", "R70", "R8"):
        prem = beta_reduce_derivation(d.premises[0], path, th, bounds)
        return Derivation(d.rule, d.ctx, new_subject, d.type, d.payload, (prem,))
    raise UnsupportedDerivationShape(f"cannot descend rule {d.rule} along {path}")


def _contract_redex_derivation(d: Derivation, th: Theory, bounds: Bounds) -> Derivation:
    if d.rule != "R3":
        # Peel type-only wrappers sitting on the redex itself.
        if d.rule in ("R4", "R5", "R6", "R7", "R70", "R8"):
            prem = _contract_redex_derivation(d.premises[0], th, bounds)
            return Derivation(d.rule, d.ctx, prem.term, d.type, d.payload, (prem,))
        raise UnsupportedDerivationShape(f"redex node has rule {d.rule}")
    fn_d, arg_d = d.premises
    if not isinstance(fn_d.term, Abs):
        raise UnsupportedDerivationShape("function part is not an abstraction")
    r2, transforms = _peel_to_r2(fn_d, th, bounds)
    if r2.rule != "R2" or not r2.premises:
        raise UnsupportedDerivationShape("no R2 node under the redex function")
    body_d = r2.premises[0]
    x, dom = body_d.ctx.bindings[-1]
    arg_for_subst = arg_d
    # Transport the argument backwards through collected R8 domain rewrites
    # (transforms are listed topmost first).
    for kind, info in transforms:
        if kind == "r8-left":
            template, var, lhs, rhs = info
            out = transport_eq(arg_for_subst, template, var, rhs, lhs, th, bounds)
            if isinstance(out, NotDerivableWithinBounds):
                raise UnsupportedDerivationShape("argument transport failed")
            arg_for_subst = out
    if not alpha_eq(arg_for_subst.type, dom):
        raise UnsupportedDerivationShape("argument type does not match the abstraction domain")
    result = substitute_derivation(body_d, x, arg_for_subst)
    # Re-apply codomain rewrites forward, innermost first.
    for kind, info in reversed(transforms):
        if kind == "r8-right":
            template, var, lhs, rhs = info
            out = transport_eq(result, template, var, lhs, rhs, th, bounds)
            if isinstance(out, NotDerivableWithinBounds):
                raise UnsupportedDerivationShape("result transport failed")
            result = out
    if not alpha_eq(result.type, d.type):
        raise UnsupportedDerivationShape("reduced derivation type mismatch")
    return result


def _peel_to_r2(fn_d: Derivation, th: Theory, bounds: Bounds):
    """Walk from the R3 function premise down to its R2 node, normalizing
    R5-over-R4 pairs into first-order substitutions and splitting R8 arrow
    rewrites into domain/codomain transports."""
    from .logic import Arrow

    transforms: list[tuple[str, tuple]] = []
    node = fn_d
    while True:
        if node.rule == "R2":
            return node, transforms
        if node.rule == "R8":
            template = node.payload["template"]
            var = node.payload["var"]
            lhs, rhs = node.payload["lhs"], node.payload["rhs"]
            if not isinstance(template, Arrow):
                raise UnsupportedDerivationShape("R8 template on a redex is not an arrow")
            transforms.append(("r8-left", (template.left, var, lhs, rhs)))
            transforms.append(("r8-right", (template.right, var, lhs, rhs)))
            node = node.premises[0]
            continue
        if node.rule == "R5":
            inner = node.premises[0]
            if inner.rule == "R4" and isinstance(inner.type, ForallFo):
                u = node.payload["term"]
                node = subst_fo_derivation(inner.premises[0], inner.type.var, u)
                continue
            raise UnsupportedDerivationShape("R5 premise is not a generalization")
        if node.rule in ("R7", "R70"):
            inner = node.premises[0]
            if inner.rule == "R6" and isinstance(inner.type, ForallRel):
                if node.rule == "R70":
                    n = inner.type.arity
                    params = tuple(f"_z{i}" for i in range(n))
                    rel = node.payload["rel"]
                    declared = th.sig.rels.get(rel)
                    head = RelSym(rel) if declared is not None else RelVar(rel, n)
                    formula: Formula = Atom(head, tuple(FoVar(p) for p in params))
                else:
                    params = tuple(node.payload["params"])
                    formula = node.payload["formula"]
                node = subst_rel_derivation(inner.premises[0], inner.type.var, params, formula)
                continue
            raise UnsupportedDerivationShape("instantiation premise is not a generalization")
        raise UnsupportedDerivationShape(f"cannot peel rule {node.rule}")


def subst_rel_derivation(d: Derivation, x_name: str, params: tuple[str, ...], formula: Formula) -> Derivation:
    """Second-order substitution lemma on derivations."""
    if d.rule == "R6" and isinstance(d.type, ForallRel):
        clash = set(free_rel_vars(formula)) | {x_name}
        if d.type.var in clash:
            from .logic import rel_rename

            taken = clash | d.ctx.free_rel() | all_names(d.type)
            new = fresh_name(d.type.var, taken)
            prem = rename_rel_derivation(d.premises[0], d.type.var, new, d.type.arity)
            d = Derivation("R6", d.ctx, d.term, ForallRel(new, d.type.arity, rel_rename(d.type.body, d.type.var, new, d.type.arity)), None, (prem,))

    ctx = Context(tuple((n, rel_subst(f, x_name, params, formula)) for n, f in d.ctx.bindings))
    typ = rel_subst(d.type, x_name, params, formula)
    rule = d.rule
    payload = dict(d.payload) if d.payload else d.payload
    if payload:
        if rule == "R70" and payload.get("rel") == x_name:
            # The atomic instance targets the substituted variable; fold it
            # into a full second-order instantiation.
            rule = "R7"
            payload = {"params": params, "formula": formula}
        else:
            if "formula" in payload:
                payload["formula"] = rel_subst(payload["formula"], x_name, params, formula)
            if "template" in payload:
                payload["template"] = rel_subst(payload["template"], x_name, params, formula)
    premises = tuple(subst_rel_derivation(p, x_name, params, formula) for p in d.premises)
    return Derivation(rule, ctx, d.term, typ, payload, premises)


def substitute_derivation(body_d: Derivation, x: str, arg_d: Derivation) -> Derivation:
    """Substitution lemma: from Gamma, x:A |- w : B and Gamma |- a : A build
    Gamma |- w[a/x] : B."""
    arg_term = arg_d.term
    arg_free = free_vars(arg_term)

    def go(node: Derivation, extra: tuple[tuple[str, Formula], ...]) -> Derivation:
        ctx = Context(tuple((n, f) for n, f in node.ctx.bindings if n != x))
        term = substitute(node.term, x, arg_term)
        if node.rule == "R1" and isinstance(node.term, Free) and node.term.name == x:
            planted = weaken(arg_d, Context(extra)) if extra else arg_d
            if planted.ctx != ctx:
                # Context order may differ; rebuild via restriction-free rebase.
                planted = _rebase(planted, ctx)
            return planted
        if node.rule == "R2":
            bound = node.premises[0].ctx.bindings[-1][0]
            prem_node = node.premises[0]
            if bound in arg_free or bound == x:
                new = fresh_name(bound, arg_free | {x} | node.ctx.names() | free_vars(node.term))
                prem_node = rename_lambda_var(prem_node, bound, new)
                bound = new
            bound_ty = prem_node.ctx.bindings[-1][1]
            prem = go(prem_node, extra + ((bound, bound_ty),))
            return Derivation("R2", ctx, term, node.type, node.payload, (prem,))
        premises = tuple(go(p, extra) for p in node.premises)
        return Derivation(node.rule, ctx, term, node.type, node.payload, premises)

    return go(body_d, ())


def _rebase(d: Derivation, ctx: Context) -> Derivation:
    """Rewrite the context of a derivation to an equivalent reordering."""
    if set(d.ctx.bindings) != set(ctx.bindings):
        raise DerivationError("rebase requires the same declarations")

    def go(node: Derivation, local: Context) -> Derivation:
        if node.rule == "R2":
            x, a = node.premises[0].ctx.bindings[-1]
            prem = go(node.premises[0], local.extend(x, a))
            return Derivation(node.rule, local, node.term, node.type, node.payload, (prem,))
        premises = tuple(go(p, local) for p in node.premises)
        return Derivation(node.rule, local, node.term, node.type, node.payload, premises)

    return go(d, ctx)


# --- serialization --------------------------------------------------------------


def derivation_to_obj(d: Derivation) -> dict:
    payload = None
    if d.payload is not None:
        payload = {}
        for k, v in d.payload.items():
            if k in ("lhs", "rhs", "term"):
                payload[k] = format_fo_term(v)
            elif k in ("formula", "template"):
                payload[k] = format_formula(v)
            elif k == "params":
                payload[k] = list(v)
            else:
                payload[k] = v
    return {
        "rule": d.rule,
        "ctx": [[n, format_formula(f)] for n, f in d.ctx.bindings],
        "term": format_term(d.term),
        "type": format_formula(d.type),
        "payload": payload,
        "premises": [derivation_to_obj(p) for p in d.premises],
    }


def derivation_from_obj(obj: dict, th: Theory) -> Derivation:
    sig = th.sig
    ctx = Context(tuple((n, parse_formula(f, sig)) for n, f in obj["ctx"]))
    payload_obj = obj.get("payload")
    payload = None
    if payload_obj is not None:
        payload = dict(payload_obj)
        for k in ("lhs", "rhs", "term"):
            if k in payload:
                payload[k] = parse_fo_term(payload[k], sig)
        for k in ("formula", "template"):
            if k in payload:
                payload[k] = parse_formula(payload[k], sig)
        if "params" in payload:
            payload["params"] = tuple(payload["params"])
    return Derivation(
        obj["rule"],
        ctx,
        parse_term(obj["term"]),
        parse_formula(obj["type"], sig),
        payload,
        tuple(derivation_from_obj(p, th) for p in obj.get("premises", [])),
    )


def dump_derivation(d: Derivation) -> str:
    return json.dumps(derivation_to_obj(d), indent=2) + "\n"


def load_derivation(text: str, th: Theory) -> Derivation:
    return derivation_from_obj(json.loads(text), th)
