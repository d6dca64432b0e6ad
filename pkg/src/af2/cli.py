"""Command-line frontend: batch verdicts over terms, formulas, derivations,
theories, sandboxes and the regression suite.

Exit codes: 0 positive verdict, 1 negative verdict, 2 bound exhausted,
3 input error."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .bounds import Bounds, DEFAULT_BOUNDS
from .inference import NotTypableWithinBounds, Typable, infer_normal
from .judgments import Context, Ok, check_derivation, dump_derivation, load_derivation
from .logic import ParseError, Theory, Signature, format_formula, parse_formula, parse_theory
from .orders import InstChain
from .reduction import (
    Equivalent,
    Normal,
    NotEquivalentWithinBounds,
    SizeBoundExceeded,
    StepBoundExceeded,
    beta_eta_equiv,
    normalize,
)
from .suite import format_report, run_suite
from .terms import format_term, parse_term
from .typeclass import (
    ClearWithinBounds,
    Violated,
    check_condition_star,
    classify,
    format_witness,
    prettify,
    subtypes,
)

EXIT_POSITIVE = 0
EXIT_NEGATIVE = 1
EXIT_BOUND = 2
EXIT_INPUT = 3

_BOUND_KEYS = {
    "max_steps": "max_steps",
    "maxsteps": "max_steps",
    "max_term_size": "max_term_size",
    "maxtermsize": "max_term_size",
    "max_inst_depth": "max_inst_depth",
    "maxinstdepth": "max_inst_depth",
    "max_congr_depth": "max_congr_depth",
    "maxcongrdepth": "max_congr_depth",
}


def parse_bounds(pairs: list[str]) -> Bounds:
    overrides = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        norm = _BOUND_KEYS.get(key.strip().lower().replace("-", "_"))
        if norm is None:
            raise ValueError(f"unknown bound {key!r}")
        overrides[norm] = int(value)
    return DEFAULT_BOUNDS.override(**overrides)


def _load_theory(path: Optional[str]) -> Theory:
    if path is None:
        return Theory(Signature((("0", 0),)))
    with open(path, "r", encoding="utf-8") as fh:
        return parse_theory(fh.read())


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="af2", description=__doc__)
    parser.add_argument("--bounds", action="append", default=[], metavar="KEY=VALUE",
                        help="override a search bound (may repeat)")
    parser.add_argument("--format", choices=("text", "json"), default="text")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="beta-normalize a term")
    p.add_argument("--term", required=True)

    p = sub.add_parser("equiv", help="beta-eta equivalence of two terms")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)

    p = sub.add_parser("check", help="check a derivation file")
    p.add_argument("--derivation", required=True)
    p.add_argument("--theory")
    p.add_argument("--mode", choices=("AF2", "AF2_0"), default="AF2")

    p = sub.add_parser("typecheck", help="inverse typing of a beta-normal term")
    p.add_argument("--term", required=True)
    p.add_argument("--type", required=True)
    p.add_argument("--theory")
    p.add_argument("--mode", choices=("AF2Bounded", "AF2_0"), default="AF2Bounded")
    p.add_argument("--emit-derivation", metavar="PATH")

    p = sub.add_parser("classify", help="full classifier verdicts for a type")
    p.add_argument("--type", required=True)
    p.add_argument("--theory")

    p = sub.add_parser("star", help="exclusion condition scan for a type")
    p.add_argument("--type", required=True)
    p.add_argument("--theory")

    p = sub.add_parser("subtypes", help="polarized subtype family of a type")
    p.add_argument("--type", required=True)
    p.add_argument("--polarity", choices=("pos", "neg"), default="pos")
    p.add_argument("--theory")

    p = sub.add_parser("adequate", help="numeral adequacy of an equation system")
    p.add_argument("--theory", required=True)

    p = sub.add_parser("represents", help="run a program against a function table")
    p.add_argument("--term", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--report-dir")

    p = sub.add_parser("progthm", help="programming-theorem harness")
    p.add_argument("--derivation", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--report-dir")

    p = sub.add_parser("sandbox", help="build a sandbox and query a membership")
    p.add_argument("--config", required=True)
    p.add_argument("--type")
    p.add_argument("--term")
    p.add_argument("--derivation")

    p = sub.add_parser("suite", help="run the bundled regression suite")
    p.add_argument("--report-dir")

    args = parser.parse_args(argv)
    try:
        bounds = parse_bounds(args.bounds)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    try:
        return _dispatch(args, bounds)
    except ParseError as e:
        print(f"parse error at {e}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


def _dispatch(args, bounds: Bounds) -> int:
    if args.command == "normalize":
        t = parse_term(args.term)
        res = normalize(t, bounds)
        if isinstance(res, Normal):
            _emit(args, {"verdict": "normal", "term": format_term(res.term), "steps": res.steps},
                  f"normal form: {format_term(res.term)} ({res.steps} steps)")
            return EXIT_POSITIVE
        kind = "step-bound" if isinstance(res, StepBoundExceeded) else "size-bound"
        _emit(args, {"verdict": kind, "steps": res.steps},
              f"{kind} exceeded after {res.steps} steps")
        return EXIT_BOUND

    if args.command == "equiv":
        left, right = parse_term(args.left), parse_term(args.right)
        res = beta_eta_equiv(left, right, bounds)
        if isinstance(res, Equivalent):
            _emit(args, {"verdict": "equivalent", "normal_form": format_term(res.normal_form)},
                  f"equivalent (common normal form {format_term(res.normal_form)})")
            return EXIT_POSITIVE
        _emit(args, {"verdict": "not-equivalent", "reason": res.reason},
              f"not equivalent within bounds ({res.reason})")
        return EXIT_BOUND if res.reason == "bound-exhausted" else EXIT_NEGATIVE

    if args.command == "check":
        th = _load_theory(args.theory)
        with open(args.derivation, "r", encoding="utf-8") as fh:
            d = load_derivation(fh.read(), th)
        res = check_derivation(d, th, args.mode)
        if isinstance(res, Ok):
            _emit(args, {"verdict": "ok"}, "derivation checks")
            return EXIT_POSITIVE
        _emit(args, {"verdict": "rejected", "path": list(res.path), "reason": res.reason},
              f"rejected at {'/'.join(map(str, res.path)) or 'root'}: {res.reason}")
        return EXIT_NEGATIVE

    if args.command == "typecheck":
        th = _load_theory(args.theory)
        term = parse_term(args.term)
        goal = parse_formula(args.type, th.sig)
        res = infer_normal(Context(), term, goal, th, args.mode, bounds)
        if isinstance(res, Typable):
            if args.emit_derivation:
                with open(args.emit_derivation, "w", encoding="utf-8") as fh:
                    fh.write(dump_derivation(res.derivation))
            _emit(args, {"verdict": "typable"}, "typable")
            return EXIT_POSITIVE
        tag = "exhaustive-at-bound" if res.exhaustive else "within-bounds"
        _emit(args, {"verdict": "not-typable", "refutation": tag},
              f"not typable ({tag})")
        return EXIT_NEGATIVE if res.exhaustive else EXIT_BOUND

    if args.command == "classify":
        th = _load_theory(args.theory)
        f = parse_formula(args.type, th.sig)
        c = classify(f, th, bounds)
        star = "violated" if isinstance(c.star, Violated) else "clear-within-bounds"
        payload = {
            "forall2": c.forall2,
            "forall": c.forall,
            "proper": c.proper,
            "star": star,
            "b_plus": c.b_plus,
            "b_plus_reason": c.b_plus_reason,
        }
        text = "\n".join(f"{k}: {v}" for k, v in payload.items())
        if isinstance(c.star, Violated):
            text += "\nwitness:\n" + format_witness(c.star.witness)
            payload["witness"] = format_witness(c.star.witness)
        _emit(args, payload, text)
        return EXIT_POSITIVE if c.b_plus == "yes" else EXIT_NEGATIVE

    if args.command == "star":
        th = _load_theory(args.theory)
        f = parse_formula(args.type, th.sig)
        res = check_condition_star(f, th, bounds)
        if isinstance(res, Violated):
            _emit(args, {"verdict": "violated", "witness": format_witness(res.witness)},
                  "condition violated:\n" + format_witness(res.witness))
            return EXIT_NEGATIVE
        _emit(args, {"verdict": "clear-within-bounds"},
              f"clear within bounds (inst depth {bounds.max_inst_depth})")
        return EXIT_POSITIVE

    if args.command == "subtypes":
        th = _load_theory(args.theory)
        f = parse_formula(args.type, th.sig)
        fam = subtypes(f, args.polarity, bounds)
        listing = [format_formula(prettify(s.formula)) for s in fam]
        _emit(args, {"polarity": args.polarity, "subtypes": listing},
              "\n".join(listing))
        return EXIT_POSITIVE

    if args.command == "adequate":
        from .datatypes import Adequate, is_adequate

        th = _load_theory(args.theory)
        res = is_adequate(th, bounds)
        if isinstance(res, Adequate):
            _emit(args, {"verdict": "adequate", "checked_up_to": res.checked_up_to},
                  f"adequate (numerals up to {res.checked_up_to})")
            return EXIT_POSITIVE
        from .logic import format_fo_term

        _emit(args, {"verdict": "inadequate", "reason": res.reason,
                     "witness": [format_fo_term(t) for t in res.witness]},
              f"inadequate: {res.reason} ({format_fo_term(res.witness[0])} vs {format_fo_term(res.witness[1])})")
        return EXIT_NEGATIVE

    if args.command == "represents":
        from .datatypes import parse_function_spec, represents

        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = parse_function_spec(fh.read())
        program = parse_term(args.term)
        rep = represents(program, spec, bounds)
        if args.report_dir:
            from .report import write_represents_report

            for path in write_represents_report(rep, args.report_dir):
                print(f"wrote {path}", file=sys.stderr)
        rows = [
            {"args": list(r.args), "expected": r.expected, "outcome": r.outcome,
             "decoded": r.decoded, "steps": r.steps}
            for r in rep.rows
        ]
        text = "\n".join(
            f"{','.join(map(str, r.args)) or '()'} -> expected {r.expected}: {r.outcome}"
            + (f" (got {r.decoded})" if r.decoded is not None else "")
            for r in rep.rows
        )
        _emit(args, {"rows": rows, "all_pass": rep.all_pass}, text)
        if rep.all_pass:
            return EXIT_POSITIVE
        if any(r.outcome in ("step-bound", "size-bound") for r in rep.rows):
            return EXIT_BOUND
        return EXIT_NEGATIVE

    if args.command == "progthm":
        from .datatypes import parse_function_spec, programming_theorem_check

        th_spec = None
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = parse_function_spec(fh.read())
        with open(args.derivation, "r", encoding="utf-8") as fh:
            d = load_derivation(fh.read(), spec.theory)
        report = programming_theorem_check(d, spec, bounds)
        lines = [f"{'ok' if p else 'FAILED'}: {name}" + (f" ({note})" if note and not p else "")
                 for name, p, note in report.preconditions]
        if report.rows is not None:
            lines += [f"row {','.join(map(str, r.args))}: {r.outcome}" for r in report.rows.rows]
            if args.report_dir:
                from .report import write_represents_report

                for path in write_represents_report(report.rows, args.report_dir, "progthm"):
                    print(f"wrote {path}", file=sys.stderr)
        _emit(args, {"ok": report.ok,
                     "preconditions": [[n, p] for n, p, _ in report.preconditions]},
              "\n".join(lines))
        return EXIT_POSITIVE if report.ok else EXIT_NEGATIVE

    if args.command == "sandbox":
        from .sandbox import (Interpretation, Pass, adequacy_spot, build_model, eval_formula)

        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        model, th = build_model(config, bounds)
        info = {
            "universe": len(model.universe.members),
            "family": len(model.family),
            "closure_complete": model.closure_complete,
        }
        text = [f"universe: {info['universe']} terms, family: {info['family']} sets"
                + ("" if model.closure_complete else " (closure incomplete)")]
        code = EXIT_POSITIVE
        if args.type and args.term:
            f = parse_formula(args.type, th.sig)
            t = parse_term(args.term)
            member = t in eval_formula(model, Interpretation(), f)
            info["member"] = member
            text.append(f"membership: {'yes' if member else 'no'}")
            code = EXIT_POSITIVE if member else EXIT_NEGATIVE
        if args.derivation:
            with open(args.derivation, "r", encoding="utf-8") as fh:
                d = load_derivation(fh.read(), th)
            outcome = adequacy_spot(model, d, th)
            info["adequacy"] = type(outcome).__name__
            text.append(f"adequacy spot: {type(outcome).__name__}")
            if not isinstance(outcome, Pass):
                code = EXIT_NEGATIVE
        _emit(args, info, "\n".join(text))
        return code

    if args.command == "suite":
        report = run_suite(bounds)
        if args.report_dir:
            from .report import write_suite_report

            for path in write_suite_report(report, args.report_dir):
                print(f"wrote {path}", file=sys.stderr)
        if args.format == "json":
            payload = {
                "all_pass": report.all_pass,
                "results": [
                    {"case": r.case_id, "expectation": r.expectation,
                     "passed": r.passed, "actual": r.actual}
                    for r in report.results
                ],
            }
            print(json.dumps(payload, indent=2, sort_keys=True))
        else:
            print(format_report(report))
        return EXIT_POSITIVE if report.all_pass else EXIT_NEGATIVE

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
