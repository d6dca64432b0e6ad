"""Church-style data types: numerals, the naturals/booleans/lists type
schemes, adequacy of equation systems, equational function definitions,
representation checking, and the programming-theorem harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bounds import Bounds
from .equations import is_equal
from .judgments import (
    Context,
    Derivation,
    EMPTY_CONTEXT,
    Ok,
    check_derivation,
)
from .logic import (
    Arrow,
    Atom,
    Formula,
    FoApp,
    FoTerm,
    FoVar,
    ForallFo,
    ForallRel,
    RelVar,
    Theory,
    alpha_eq,
    fo_subst,
    format_fo_term,
    parse_fo_term,
    parse_theory,
)
from .reduction import Normal, NormalizeResult, normalize
from .terms import Abs, App, Free, Term, Var, lam, parse_term


# --- Church numerals -----------------------------------------------------------


def church(k: int) -> Term:
    """The numeral \\x. \\f. f^k x (data first, step function second)."""
    if k < 0:
        raise ValueError("numerals are non-negative")
    body: Term = Var(1)
    for _ in range(k):
        body = App(Var(0), body)
    return Abs(Abs(body, hint="f"), hint="x")


class NotANumeral(ValueError):
    pass


def decode(t: Term) -> int:
    """Inverse of church() on beta-normal forms; anything else raises."""
    if not isinstance(t, Abs) or not isinstance(t.body, Abs):
        raise NotANumeral(f"not a numeral shape")
    body = t.body.body
    k = 0
    while isinstance(body, App):
        if body.fn != Var(0):
            raise NotANumeral("step function position is not the bound function")
        body = body.arg
        k += 1
    if body != Var(1):
        raise NotANumeral("spine does not end at the bound data variable")
    return k


def iterate_app(fn: Term, k: int, seed: Term) -> Term:
    """(fn)^k seed."""
    out = seed
    for _ in range(k):
        out = App(fn, out)
    return out


# --- data type schemes -----------------------------------------------------------


def nat_type(x: FoTerm) -> Formula:
    """forall X { X0 -> [ forall y (Xy -> Xsy) -> Xx ] }."""
    X = RelVar("X", 1)
    step = ForallFo("y", Arrow(Atom(X, (FoVar("y"),)), Atom(X, (FoApp("s", (FoVar("y"),)),))))
    return ForallRel("X", 1, Arrow(Atom(X, (FoApp("0"),)), Arrow(step, Atom(X, (x,)))))


def bool_type(x: FoTerm) -> Formula:
    """forall X { X0 -> (X1 -> Xx) }."""
    X = RelVar("X", 1)
    return ForallRel("X", 1, Arrow(Atom(X, (FoApp("0"),)), Arrow(Atom(X, (FoApp("1"),)), Atom(X, (x,)))))


def list_type(elem: Formula, elem_var: str, x: FoTerm) -> Formula:
    """forall X { Xnil -> [ forall y forall z (U[y] -> (Xz -> Xcons(y,z))) -> Xx ] }.

    `elem` is the element type scheme with distinguished free variable
    `elem_var`; it is instantiated at y."""
    X = RelVar("X", 1)
    u_y = fo_subst(elem, [(elem_var, FoVar("y"))])
    cons = FoApp("cons", (FoVar("y"), FoVar("z")))
    step = ForallFo(
        "y",
        ForallFo("z", Arrow(u_y, Arrow(Atom(X, (FoVar("z"),)), Atom(X, (cons,))))),
    )
    return ForallRel("X", 1, Arrow(Atom(X, (FoApp("nil"),)), Arrow(step, Atom(X, (x,)))))


NAT_THEORY = parse_theory("fun 0/0.\nfun s/1.\n")
BOOL_THEORY = parse_theory("fun 0/0.\nfun 1/0.\n")
LIST_THEORY = parse_theory("fun nil/0.\nfun cons/2.\nfun 0/0.\nfun s/1.\n")
PRED_THEORY = parse_theory("fun 0/0.\nfun s/1.\nfun p/1.\neq p(0) = 0.\neq p(s x) = x.\n")


def numeral_term(n: int) -> FoTerm:
    out: FoTerm = FoApp("0")
    for _ in range(n):
        out = FoApp("s", (out,))
    return out


# --- adequacy and function definition ----------------------------------------------


@dataclass(frozen=True)
class Adequate:
    checked_up_to: int


@dataclass(frozen=True)
class Inadequate:
    witness: tuple[FoTerm, FoTerm]
    reason: str


@dataclass(frozen=True)
class UnknownWithinBounds:
    reason: str


def is_adequate(th: Theory, bounds: Bounds):
    """Bounded check of the numeral-adequacy conditions: no successor term
    collapses to zero, and the successor is injective modulo the congruence.
    Sound for Inadequate; Adequate is relative to the checked fragment."""
    if "0" not in th.sig.funs or "s" not in th.sig.funs:
        raise ValueError("adequacy requires the symbols 0 and s")
    depth = max(2, bounds.max_inst_depth)
    probes = [numeral_term(i) for i in range(depth + 1)]
    probes += _derived_ground_terms(th, 2)
    seen = set()
    probes = [p for p in probes if not (p in seen or seen.add(p))]
    zero = FoApp("0")
    for a in probes:
        if is_equal(FoApp("s", (a,)), zero, th, bounds):
            return Inadequate((FoApp("s", (a,)), zero), "a successor equals zero")
    for i, a in enumerate(probes):
        for b in probes[i + 1 :]:
            if is_equal(FoApp("s", (a,)), FoApp("s", (b,)), th, bounds) and not is_equal(
                a, b, th, bounds
            ):
                return Inadequate(
                    (FoApp("s", (a,)), FoApp("s", (b,))), "successor is not injective"
                )
    return Adequate(checked_up_to=depth)


def _derived_ground_terms(th: Theory, depth: int) -> list[FoTerm]:
    layers: list[list[FoTerm]] = [[FoApp(n) for n, a in th.sig.fun_symbols if a == 0]]
    out = list(layers[0])
    for _ in range(depth):
        prev = layers[-1]
        layer = []
        for name, arity in th.sig.fun_symbols:
            if arity == 1:
                layer += [FoApp(name, (t,)) for t in prev]
        layers.append(layer)
        out += layer
        if len(out) > 64:
            break
    return out[:64]


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    arity: int
    theory: Theory
    table: tuple[tuple[tuple[int, ...], int], ...]

    def __post_init__(self) -> None:
        funs = self.theory.sig.funs
        for sym in ("0", "s", self.name):
            if sym not in funs:
                raise ValueError(f"theory must declare {sym!r}")
        if funs[self.name] != self.arity:
            raise ValueError(f"{self.name!r} declared with arity {funs[self.name]}")


@dataclass(frozen=True)
class DefinesOk:
    rows: int


@dataclass(frozen=True)
class DefinesMismatch:
    failing: tuple[tuple[int, ...], ...]


def defines_function(spec: FunctionSpec, bounds: Bounds):
    """Check f(s^n1(0), ...) ~ s^f(n)(0) for every table row."""
    failing = []
    for args, value in spec.table:
        lhs = FoApp(spec.name, tuple(numeral_term(n) for n in args))
        rhs = numeral_term(value)
        if not is_equal(lhs, rhs, spec.theory, bounds):
            failing.append(args)
    if failing:
        return DefinesMismatch(tuple(failing))
    return DefinesOk(len(spec.table))


# --- representation ------------------------------------------------------------------


@dataclass(frozen=True)
class RowResult:
    args: tuple[int, ...]
    expected: int
    outcome: str  # "pass" | "fail" | "step-bound" | "size-bound"
    decoded: Optional[int] = None
    steps: Optional[int] = None


@dataclass(frozen=True)
class RepresentsReport:
    rows: tuple[RowResult, ...]

    @property
    def all_pass(self) -> bool:
        return all(r.outcome == "pass" for r in self.rows)


def represents(program: Term, spec: FunctionSpec, bounds: Bounds) -> RepresentsReport:
    """Run the program on the numerals of every table row, normalize, decode
    and compare; failures are data, not errors."""
    rows = []
    for args, value in spec.table:
        applied = program
        for n in args:
            applied = App(applied, church(n))
        res = normalize(applied, bounds)
        if isinstance(res, Normal):
            try:
                got = decode(res.term)
            except NotANumeral:
                rows.append(RowResult(args, value, "fail", None, res.steps))
                continue
            outcome = "pass" if got == value else "fail"
            rows.append(RowResult(args, value, outcome, got, res.steps))
        else:
            kind = "step-bound" if type(res).__name__ == "StepBoundExceeded" else "size-bound"
            rows.append(RowResult(args, value, kind))
    return RepresentsReport(tuple(rows))


# --- the programming theorem ----------------------------------------------------------


@dataclass(frozen=True)
class ProgThmReport:
    preconditions: tuple[tuple[str, bool, str], ...]
    rows: Optional[RepresentsReport]

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.preconditions) and (
            self.rows is not None and self.rows.all_pass
        )


def totality_statement(spec: FunctionSpec) -> Formula:
    """forall x1..xm { N[x1] -> (... -> (N[xm] -> N[f(x1..xm)]) ...) }."""
    names = [f"x{i+1}" for i in range(spec.arity)]
    result = nat_type(FoApp(spec.name, tuple(FoVar(n) for n in names)))
    for n in reversed(names):
        result = Arrow(nat_type(FoVar(n)), result)
    for n in reversed(names):
        result = ForallFo(n, result)
    return result


def programming_theorem_check(d: Derivation, spec: FunctionSpec, bounds: Bounds) -> ProgThmReport:
    """Validate the theorem's hypotheses and then run the representation
    check; with the hypotheses established, any failing row is a kernel bug."""
    pre: list[tuple[str, bool, str]] = []

    chk = check_derivation(d, spec.theory, "AF2")
    pre.append(("derivation checks", isinstance(chk, Ok), str(chk)))

    goal = totality_statement(spec)
    types_match = alpha_eq(d.type, goal) and d.ctx == EMPTY_CONTEXT
    pre.append(("concludes the totality statement in the empty context", types_match, ""))

    adequate = is_adequate(spec.theory, bounds)
    pre.append(("equation system adequate", isinstance(adequate, Adequate), str(adequate)))

    defines = defines_function(spec, bounds)
    pre.append(("equations define the function on the table", isinstance(defines, DefinesOk), str(defines)))

    if not all(passed for _, passed, _ in pre):
        return ProgThmReport(tuple(pre), None)
    return ProgThmReport(tuple(pre), represents(d.term, spec, bounds))


# --- spec files -------------------------------------------------------------------------


def parse_function_spec(text: str) -> FunctionSpec:
    """Theory declarations plus `table f(2) = 1.` rows in one file."""
    theory_lines = []
    rows: list[tuple[str, tuple[int, ...], int]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("table "):
            body = line[len("table ") :].rstrip(".").strip()
            lhs, _, rhs = body.partition("=")
            lhs = lhs.strip()
            name, _, argpart = lhs.partition("(")
            args = tuple(int(a.strip()) for a in argpart.rstrip(")").split(",")) if argpart else ()
            rows.append((name.strip(), args, int(rhs.strip())))
        else:
            theory_lines.append(raw)
    th = parse_theory("\n".join(theory_lines))
    if not rows:
        raise ValueError("spec file has no table rows")
    names = {n for n, _, _ in rows}
    if len(names) != 1:
        raise ValueError(f"table rows name several functions: {sorted(names)}")
    name = rows[0][0]
    arity = len(rows[0][1])
    return FunctionSpec(name, arity, th, tuple((args, v) for _, args, v in rows))


# --- bundled derivations ------------------------------------------------------------------


def zero_derivation() -> Derivation:
    """|- \\x. \\f. x : N[0] via R1, R2 twice, R6."""
    X = RelVar("X", 1)
    x0 = Atom(X, (FoApp("0"),))
    step = ForallFo("y", Arrow(Atom(X, (FoVar("y"),)), Atom(X, (FoApp("s", (FoVar("y"),)),))))
    ctx2 = Context((("x", x0), ("f", step)))
    d = Derivation("R1", ctx2, Free("x"), x0, None, ())
    d = Derivation("R2", Context((("x", x0),)), lam("f", Free("x")), Arrow(step, x0), None, (d,))
    d = Derivation("R2", EMPTY_CONTEXT, lam("x", lam("f", Free("x"))), Arrow(x0, Arrow(step, x0)), None, (d,))
    return Derivation("R6", EMPTY_CONTEXT, d.term, nat_type(FoApp("0")), None, (d,))


def succ_term() -> Term:
    return parse_term(r"\n. \a. \f. f (n a f)")


def succ_derivation() -> Derivation:
    """|- \\n. \\a. \\f. f (n a f) : forall x { N[x] -> N[s(x)] }."""
    X = RelVar("X", 1)
    x = FoVar("x")
    sx = FoApp("s", (x,))
    x0 = Atom(X, (FoApp("0"),))
    xx = Atom(X, (x,))
    xsx = Atom(X, (sx,))
    q = ForallFo("y", Arrow(Atom(X, (FoVar("y"),)), Atom(X, (FoApp("s", (FoVar("y"),)),))))
    n_x = nat_type(x)

    gamma = Context((("n", n_x), ("a", x0), ("f", q)))

    # f : X(x) -> X(s(x))
    d_f = Derivation("R1", gamma, Free("f"), q, None, ())
    d_f = Derivation("R5", gamma, Free("f"), Arrow(xx, xsx), {"term": x}, (d_f,))

    # n : X0 -> (Q -> X(x)) by atomic instantiation of its quantifier
    d_n = Derivation("R1", gamma, Free("n"), n_x, None, ())
    inst = Arrow(x0, Arrow(q, xx))
    d_n = Derivation("R70", gamma, Free("n"), inst, {"rel": "X"}, (d_n,))

    d_a = Derivation("R1", gamma, Free("a"), x0, None, ())
    d_na = Derivation("R3", gamma, App(Free("n"), Free("a")), Arrow(q, xx), None, (d_n, d_a))
    d_f2 = Derivation("R1", gamma, Free("f"), q, None, ())
    d_naf = Derivation("R3", gamma, App(App(Free("n"), Free("a")), Free("f")), xx, None, (d_na, d_f2))
    d_body = Derivation("R3", gamma, App(Free("f"), d_naf.term), xsx, None, (d_f, d_naf))

    ctx_na = Context((("n", n_x), ("a", x0)))
    d = Derivation("R2", ctx_na, lam("f", d_body.term), Arrow(q, xsx), None, (d_body,))
    ctx_n = Context((("n", n_x),))
    d = Derivation("R2", ctx_n, lam("a", d.term), Arrow(x0, Arrow(q, xsx)), None, (d,))
    d = Derivation("R6", ctx_n, d.term, nat_type(sx), None, (d,))
    d = Derivation("R2", EMPTY_CONTEXT, lam("n", d.term), Arrow(n_x, nat_type(sx)), None, (d,))
    return Derivation("R4", EMPTY_CONTEXT, d.term, ForallFo("x", Arrow(n_x, nat_type(sx))), None, (d,))


def identity_application_derivation() -> Derivation:
    """{y : X0} |- (\\z. z) y : X0 — a redex-bearing corpus derivation."""
    X = RelVar("X", 1)
    x0 = Atom(X, (FoApp("0"),))
    ctx = Context((("y", x0),))
    ctx_z = Context((("y", x0), ("z", x0)))
    d_z = Derivation("R1", ctx_z, Free("z"), x0, None, ())
    d_i = Derivation("R2", ctx, lam("z", Free("z")), Arrow(x0, x0), None, (d_z,))
    d_y = Derivation("R1", ctx, Free("y"), x0, None, ())
    return Derivation("R3", ctx, App(d_i.term, Free("y")), x0, None, (d_i, d_y))


def succ_zero_derivation() -> Derivation:
    """|- (succ) 0_church : N[s(0)] — instantiation of the succ derivation."""
    sd = succ_derivation()
    zero = FoApp("0")
    inst_type = Arrow(nat_type(zero), nat_type(FoApp("s", (zero,))))
    d_s = Derivation("R5", EMPTY_CONTEXT, sd.term, inst_type, {"term": zero}, (sd,))
    zd = zero_derivation()
    return Derivation("R3", EMPTY_CONTEXT, App(sd.term, zd.term), nat_type(FoApp("s", (zero,))), None, (d_s, zd))
