"""The counterexample and cross-check corpus as an executable regression
suite: every syntactic verdict, refutation witness and finite-scale semantic
membership in one deterministic run."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

from .bounds import Bounds, DEFAULT_BOUNDS
from .datatypes import (
    identity_application_derivation,
    succ_derivation,
    succ_zero_derivation,
    zero_derivation,
)
from .inference import NotTypableWithinBounds, Typable, infer_normal
from .judgments import Context, Derivation, Ok, check_derivation
from .logic import Formula, Theory, parse_formula, parse_theory, format_formula
from .reduction import Normal, StepBoundExceeded, normalize
from .sandbox import Interpretation, Pass, adequacy_spot, build_model, eval_formula
from .terms import Term, format_term, free_vars, parse_term
from .typeclass import (
    POS,
    BOTH,
    ClearWithinBounds,
    Violated,
    check_condition_star,
    classify,
    classify_quant,
    classify_quant2,
    format_witness,
    is_proper,
    prettify,
)

DERIVATION_BUILDERS: dict[str, Callable[[], Derivation]] = {
    "zero-numeral": zero_derivation,
    "successor-program": succ_derivation,
    "identity-application": identity_application_derivation,
    "successor-of-zero": succ_zero_derivation,
}


@dataclass(frozen=True)
class SuiteCase:
    id: str
    provenance: str
    theory: Theory
    type: Optional[Formula]
    term: Optional[Term]
    expectations: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class ExpectationResult:
    case_id: str
    expectation: str
    passed: bool
    actual: str
    note: str = ""


@dataclass(frozen=True)
class SuiteReport:
    results: tuple[ExpectationResult, ...]
    bounds: Bounds

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[ExpectationResult]:
        return [r for r in self.results if not r.passed]


def load_cases(text: Optional[str] = None) -> list[SuiteCase]:
    if text is None:
        text = resources.files("af2").joinpath("data/suite.cases").read_text(encoding="utf-8")
    cases: list[SuiteCase] = []
    block: list[str] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line.strip().startswith("case "):
            block = [line.strip()]
        elif line.strip() == "end":
            cases.append(_parse_case(block))
            block = []
        else:
            block.append(line.strip())
    return cases


def _parse_case(block: list[str]) -> SuiteCase:
    case_id = block[0][len("case ") :].strip()
    provenance = ""
    theory_lines: list[str] = []
    type_text: Optional[str] = None
    term_text: Optional[str] = None
    expectations: list[tuple[str, str]] = []
    for line in block[1:]:
        if line.startswith("provenance:"):
            provenance = line.partition(":")[2].strip()
        elif line.startswith("theory:"):
            decls = line.partition(":")[2].strip()
            theory_lines += [d.strip() + "." for d in decls.split(".") if d.strip()]
        elif line.startswith("type:"):
            type_text = line.partition(":")[2].strip()
        elif line.startswith("term:"):
            term_text = line.partition(":")[2].strip()
        elif line.startswith("expect "):
            body = line[len("expect ") :].strip()
            op, _, arg = body.partition(" ")
            expectations.append((op, arg.strip()))
        else:
            raise ValueError(f"unrecognized suite line {line!r} in case {case_id}")
    theory = parse_theory("\n".join(theory_lines))
    typ = parse_formula(type_text, theory.sig) if type_text else None
    term = parse_term(term_text) if term_text else None
    return SuiteCase(case_id, provenance, theory, typ, term, tuple(expectations))


def _sandbox_configs() -> dict[str, dict]:
    text = resources.files("af2").joinpath("data/sandboxes.json").read_text(encoding="utf-8")
    return json.loads(text)


def run_suite(bounds: Bounds = DEFAULT_BOUNDS, cases: Optional[list[SuiteCase]] = None) -> SuiteReport:
    if cases is None:
        cases = load_cases()
    results: list[ExpectationResult] = []
    trivial_star = bounds.max_inst_depth == 0
    models: dict[str, tuple] = {}

    def model_for(config_id: str):
        if config_id not in models:
            configs = _sandbox_configs()
            models[config_id] = build_model(configs[config_id], bounds)
        return models[config_id]

    for case in cases:
        star_cache = None
        for op, arg in case.expectations:
            desc = f"{op} {arg}".strip()
            try:
                if op in ("forall", "forall2"):
                    fn = classify_quant if op == "forall" else classify_quant2
                    actual = fn(case.type)
                    if arg.startswith("not-"):
                        want = arg[4:]
                        passed = actual not in (want, BOTH)
                    else:
                        passed = actual == arg
                elif op == "proper":
                    actual = str(is_proper(case.type)).lower()
                    passed = actual == arg
                elif op == "star":
                    star_cache = star_cache or check_condition_star(case.type, case.theory, bounds)
                    actual = "violated" if isinstance(star_cache, Violated) else "clear"
                    passed = actual == arg
                    if trivial_star and arg == "violated":
                        passed = False
                        actual += " (trivial bound; weaker than the claimed verdict)"
                elif op in ("star-witness-b", "star-witness-g", "star-witness-c"):
                    star_cache = star_cache or check_condition_star(case.type, case.theory, bounds)
                    if not isinstance(star_cache, Violated):
                        actual, passed = "no witness", False
                    else:
                        w = star_cache.witness
                        from .logic import format_fo_term

                        if op == "star-witness-b":
                            subst = "".join(
                                f"[{format_fo_term(t)}/{v}]" for v, t in w.b_subst
                            )
                            actual = format_formula(prettify(w.b_schematic)) + subst
                        elif op == "star-witness-g":
                            actual = format_formula(prettify(w.g))
                        else:
                            actual = format_formula(prettify(w.c_schematic))
                        passed = actual == arg
                elif op == "bplus":
                    c = classify(case.type, case.theory, bounds)
                    actual = c.b_plus
                    passed = actual == arg
                    if trivial_star and arg == "yes":
                        actual += " (trivial bound)"
                elif op == "infer":
                    r = infer_normal(Context(), case.term, case.type, case.theory, "AF2Bounded", bounds)
                    if isinstance(r, Typable):
                        actual = "typable"
                        chk = check_derivation(r.derivation, case.theory)
                        if not isinstance(chk, Ok):
                            actual = f"typable-but-derivation-rejected: {chk}"
                    else:
                        actual = "not-typable-exhaustive" if r.exhaustive else "not-typable"
                    passed = actual == arg or (arg == "not-typable" and actual.startswith("not-typable"))
                elif op == "normalize":
                    res = normalize(case.term, bounds)
                    if isinstance(res, Normal):
                        actual = "normal"
                    elif isinstance(res, StepBoundExceeded):
                        actual = "step-bound"
                    else:
                        actual = "size-bound"
                    passed = actual == arg
                elif op == "open":
                    actual = str(bool(free_vars(case.term))).lower()
                    passed = actual == arg
                elif op == "sandbox-member":
                    model, _ = model_for(arg)
                    value = eval_formula(model, Interpretation(), case.type)
                    inside = case.term in value
                    actual = "member" if inside else "not-member"
                    passed = inside
                elif op == "derivation-checks":
                    d = DERIVATION_BUILDERS[arg]()
                    chk = check_derivation(d, case.theory)
                    actual = str(chk)
                    passed = isinstance(chk, Ok)
                elif op == "adequacy-spot":
                    config_id, _, builder = arg.partition(":")
                    model, th = model_for(config_id)
                    d = DERIVATION_BUILDERS[builder]()
                    out = adequacy_spot(model, d, case.theory)
                    actual = type(out).__name__
                    passed = isinstance(out, Pass)
                else:
                    actual = "unknown expectation"
                    passed = False
            except Exception as e:  # failures are report content
                actual = f"error: {e}"
                passed = False
            results.append(ExpectationResult(case.id, desc, passed, str(actual)))
    return SuiteReport(tuple(results), bounds)


def format_report(report: SuiteReport) -> str:
    lines = []
    for r in report.results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"[{mark}] {r.case_id}: {r.expectation} (actual: {r.actual})")
    total = len(report.results)
    passed = sum(1 for r in report.results if r.passed)
    lines.append(f"{passed}/{total} expectations hold")
    return "\n".join(lines)
