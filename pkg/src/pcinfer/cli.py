"""Command line: ``pcinfer {query,validate,oracle,fit,format}``.

Exit codes: 0 success (heuristic fallbacks included), 2 parse or input
file error, 3 invalid theory, 4 malformed or impossible situation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import oracle
from .dsl import ParseError, SituationError, load_theory, parse_situation, parse_theory, print_theory
from .engine import pci_predict
from .render import (
    fmt,
    num,
    prediction_to_json,
    render_prediction,
    render_report,
    report_to_json,
)
from .schema import EMPTY, FeatureSpace, Schema
from .theory import DEFAULT_CAP, TheoryError, check_uniquely_predictive

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_SITUATION = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}", EXIT_PARSE) from exc


def _load(path: str, as_float: bool = False):
    text = _read(path)
    try:
        theory = load_theory(text)
    except ParseError as exc:
        raise CliError(f"{path}:{exc.line}:{exc.column}: {exc.message}", EXIT_PARSE) from exc
    except TheoryError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INVALID) from exc
    return theory.as_float() if as_float else theory


def _situation(text: str, space: FeatureSpace, target: str) -> Schema:
    try:
        return parse_situation(text, space, target)
    except SituationError as exc:
        raise CliError(f"situation: {exc}", EXIT_SITUATION) from exc


def _require_valid(theory, path: str, cap: int) -> None:
    report = check_uniquely_predictive(theory, cap)
    if not report.valid:
        raise CliError(f"{path}: not uniquely predictive\n" + render_report(report).rstrip(), EXIT_INVALID)


def cmd_query(args) -> int:
    theory = _load(args.theory, args.float)
    situation = _situation(args.situation, theory.space, theory.target)
    if not args.skip_validate:
        _require_valid(theory, args.theory, args.cap)
    pred = pci_predict(theory, situation)
    if args.json:
        print(json.dumps(prediction_to_json(theory, pred, args.trace), indent=2))
    else:
        sys.stdout.write(render_prediction(theory, pred, args.trace))
    return EXIT_OK


def cmd_validate(args) -> int:
    theory = _load(args.theory)
    report = check_uniquely_predictive(theory, args.cap)
    if args.json:
        print(json.dumps(report_to_json(report), indent=2))
    else:
        sys.stdout.write(render_report(report))
    return EXIT_OK if report.valid else EXIT_INVALID


def _assumptions(pred, target: str) -> list[dict]:
    """Independence assumptions behind every combination step in the trace."""
    seen, out = set(), []
    for node in pred.trace.walk():
        if not node.ordering or len(node.ordering) < 2:
            continue
        for k, (split, unique) in enumerate(zip(node.shared, node.unique)):
            later = node.ordering[k + 1:]
            shared = split["features"]
            key = (node.situation, tuple(node.ordering[k:]))
            if key in seen:
                continue
            seen.add(key)
            out.append({
                "rule": split["rule"],
                "unique": unique,
                "later_rules": later,
                "shared": shared,
            })
    return out


def cmd_oracle(args) -> int:
    theory = None
    features = None
    if args.theory:
        theory = _load(args.theory, as_float=True)
        features = theory.space.features
    try:
        joint = oracle.read_joint_csv(_read(args.joint), features)
    except oracle.OracleError as exc:
        raise CliError(f"{args.joint}: {exc}", EXIT_PARSE) from exc
    space = joint.space() if theory is None else theory.space
    if theory is None:
        contexts = [EMPTY]
        for chunk in (args.contexts or "").split(";"):
            if chunk.strip():
                ctx = _situation(chunk, space, joint.target)
                if ctx not in contexts:
                    contexts.append(ctx)
        try:
            constraints = oracle.rules_from_joint(joint, contexts)
            theory = oracle.theory_from_constraints(space, joint.target, constraints)
        except oracle.ZeroProbabilityError as exc:
            raise CliError(f"context has zero probability: {exc}", EXIT_SITUATION) from exc
        except TheoryError as exc:
            raise CliError(str(exc), EXIT_INVALID) from exc
    situation = _situation(args.situation, space, theory.target)
    try:
        exact = oracle.exact_conditional(joint, situation)
    except oracle.ZeroProbabilityError as exc:
        raise CliError(f"situation has zero probability: {exc}", EXIT_SITUATION) from exc
    pred = pci_predict(theory, situation)

    checks = []
    for a in _assumptions(pred, theory.target):
        later_feats = set()
        for rid in a["later_rules"]:
            later_feats |= set(theory.rule(rid).context)
        rest = sorted(later_feats - set(a["shared"]) - set(a["unique"]))
        plain = oracle.independence_holds(joint, a["unique"], rest, a["shared"], args.tol)
        with_g = oracle.independence_holds(
            joint, a["unique"], rest, a["shared"], args.tol, given_features=[theory.target]
        )
        checks.append({**a, "rest": rest, "given_shared": plain, "given_target_and_shared": with_g})

    values = theory.target_values
    diffs = {v: abs(float(exact[v]) - float(pred.prob(v))) for v in values}
    if args.json:
        print(json.dumps({
            "situation": situation.as_text(),
            "exact": {v: float(exact[v]) for v in values},
            "pci": {v: num(pred.prob(v)) for v in values},
            "difference": diffs,
            "max_difference": max(diffs.values()),
            "flags": pred.flags,
            "independence": [
                {
                    "rule": c["rule"],
                    "unique": c["unique"],
                    "rest": c["rest"],
                    "shared": c["shared"].as_text(),
                    "given_shared": {"holds": c["given_shared"].holds,
                                     "max_deviation": c["given_shared"].max_deviation},
                    "given_target_and_shared": {"holds": c["given_target_and_shared"].holds,
                                                "max_deviation": c["given_target_and_shared"].max_deviation},
                }
                for c in checks
            ],
        }, indent=2))
        return EXIT_OK
    print(f"situation: {situation}")
    print(f"{'value':<10} {'exact':>12} {'pci':>12} {'|diff|':>12}")
    for v in values:
        print(f"{v:<10} {float(exact[v]):>12.6g} {float(pred.prob(v)):>12.6g} {diffs[v]:>12.3g}")
    print(f"max difference: {max(diffs.values()):.3g}")
    if pred.flags:
        print(f"flags: {', '.join(pred.flags)}")
    for c in checks:
        unique = ", ".join(c["unique"]) or "-"
        rest = ", ".join(c["rest"]) or "-"
        for label, res in (("shared", c["given_shared"]), (f"{theory.target} & shared", c["given_target_and_shared"])):
            status = "holds" if res.holds else "FAILS"
            print(f"independence [{unique}] vs [{rest}] given {label} {c['shared']}: "
                  f"{status} (max deviation {res.max_deviation:.3g})")
    return EXIT_OK


def cmd_fit(args) -> int:
    theory = _load(args.theory, as_float=True)
    try:
        joint = oracle.me_fit(theory.space.features, theory.target,
                              oracle.constraints_from_theory(theory), tol=args.tol)
    except oracle.OracleError as exc:
        raise CliError(str(exc), EXIT_INVALID) from exc
    text = oracle.write_joint_csv(joint)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_format(args) -> int:
    try:
        doc = parse_theory(_read(args.theory))
    except ParseError as exc:
        raise CliError(f"{args.theory}:{exc.line}:{exc.column}: {exc.message}", EXIT_PARSE) from exc
    sys.stdout.write(print_theory(doc))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcinfer", description="Probabilistic theories and PCI inference.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("query", help="predict the target distribution for a situation")
    q.add_argument("theory")
    q.add_argument("situation", help="comma-separated feature=value pairs, '*' for any value")
    q.add_argument("--trace", action="store_true", help="show the derivation tree")
    q.add_argument("--json", action="store_true")
    q.add_argument("--float", action="store_true", help="floating-point instead of exact arithmetic")
    q.add_argument("--skip-validate", action="store_true")
    q.add_argument("--cap", type=int, default=DEFAULT_CAP, help="situation enumeration limit")
    q.set_defaults(func=cmd_query)

    v = sub.add_parser("validate", help="check that every valid MSR set is separable")
    v.add_argument("theory")
    v.add_argument("--json", action="store_true")
    v.add_argument("--cap", type=int, default=DEFAULT_CAP)
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("oracle", help="compare PCI with the exact conditional of a joint table")
    o.add_argument("joint", help="joint table CSV")
    src = o.add_mutually_exclusive_group(required=True)
    src.add_argument("--theory")
    src.add_argument("--contexts", help="';'-separated contexts whose rules are read off the joint")
    o.add_argument("--situation", required=True)
    o.add_argument("--tol", type=float, default=1e-9)
    o.add_argument("--json", action="store_true")
    o.set_defaults(func=cmd_oracle)

    f = sub.add_parser("fit", help="maximum-entropy joint consistent with a theory, as CSV")
    f.add_argument("theory")
    f.add_argument("-o", "--output")
    f.add_argument("--tol", type=float, default=1e-10)
    f.set_defaults(func=cmd_fit)

    fm = sub.add_parser("format", help="reprint a theory file in canonical layout")
    fm.add_argument("theory")
    fm.set_defaults(func=cmd_format)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
