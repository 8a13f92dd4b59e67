"""Text and JSON renderings of predictions, traces and validation reports."""

from __future__ import annotations

from fractions import Fraction
from numbers import Real

from .engine import Prediction, TraceNode
from .theory import PredictiveTheory, ValidationReport


def num(x: Real):
    """JSON-friendly number: exact fractions become ``"p/q"`` strings."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return x
    return float(x)


def fmt(x: Real) -> str:
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        return f"{x} ({float(x):.6f})" if x.denominator != 1 else str(x)
    return f"{float(x):.6g}"


def _values(d: dict | None):
    return None if d is None else {v: num(p) for v, p in d.items()}


def trace_to_json(node: TraceNode) -> dict:
    return {
        "situation": node.situation.as_text(),
        "msr_ids": node.msr_ids,
        "ordering": node.ordering,
        "shared": [
            {"rule": s["rule"], "partner": s["partner"], "features": s["features"].as_text()}
            for s in node.shared
        ],
        "unique": node.unique,
        "numerators": _values(node.numerators),
        "denominators": _values(node.denominators),
        "raw": _values(node.raw),
        "normalization": num(node.normalization),
        "fallback": None if node.fallback is None else {
            "kind": node.fallback.kind,
            "schema": node.fallback.schema.as_text(),
        },
        "flags": node.flags,
        "distribution": _values(node.distribution),
        "children": [trace_to_json(c) for c in node.children],
    }


def prediction_to_json(theory: PredictiveTheory, pred: Prediction, trace: bool = False) -> dict:
    out = {
        "target": theory.target,
        "situation": pred.trace.situation.as_text(),
        "distribution": [
            {"value": v, "probability": float(p), "exact": num(p) if isinstance(p, Fraction) else None}
            for v, p in pred.ranked(theory.target_values)
        ],
        "msr_ids": pred.trace.msr_ids,
        "flags": pred.flags,
    }
    if trace:
        out["trace"] = trace_to_json(pred.trace)
    return out


def render_prediction(theory: PredictiveTheory, pred: Prediction, trace: bool = False) -> str:
    lines = [f"situation: {pred.trace.situation}", f"most specific rules: {', '.join(pred.trace.msr_ids)}"]
    width = max(len(v) for v in theory.target_values)
    for v, p in pred.ranked(theory.target_values):
        lines.append(f"  {theory.target} = {v:<{width}}  {fmt(p)}")
    if pred.flags:
        lines.append(f"flags: {', '.join(pred.flags)}")
    if trace:
        lines.append("trace:")
        lines.extend(_trace_lines(pred.trace, theory, "  "))
    return "\n".join(lines) + "\n"


def _trace_lines(node: TraceNode, theory: PredictiveTheory, pad: str) -> list[str]:
    values = theory.target_values
    out = [f"{pad}- situation {node.situation}", f"{pad}  MSRs: {', '.join(node.msr_ids)}"]
    if node.ordering:
        out.append(f"{pad}  ordering: {', '.join(node.ordering)}")
    for s, u in zip(node.shared, node.unique):
        partner = s["partner"] or "none"
        out.append(
            f"{pad}  split {s['rule']}: shared with {partner} {s['features']}; unique [{', '.join(u)}]"
        )
    if node.numerators is not None:
        for v in values:
            out.append(
                f"{pad}  {v}: numerator {fmt(node.numerators[v])}, denominator {fmt(node.denominators[v])}"
            )
    if node.raw is not None:
        out.append(f"{pad}  raw: " + ", ".join(f"{v}={fmt(node.raw[v])}" for v in values))
    out.append(f"{pad}  normalization: {fmt(node.normalization)}")
    if node.fallback is not None:
        out.append(f"{pad}  fallback: {node.fallback.kind} -> {node.fallback.schema}")
    if node.flags:
        out.append(f"{pad}  flags: {', '.join(node.flags)}")
    out.append(f"{pad}  result: " + ", ".join(f"{v}={fmt(node.distribution.get(v, 0))}" for v in values))
    if node.children:
        out.append(f"{pad}  sub-queries:")
        for c in node.children:
            out.extend(_trace_lines(c, theory, pad + "    "))
    return out


def report_to_json(report: ValidationReport) -> dict:
    return {
        "status": report.status,
        "complete": report.complete,
        "violations": [
            {"msr_ids": list(v.msr_ids), "witness": v.witness.as_text()} for v in report.violations
        ],
        "statistics": {
            "rules": report.rule_count,
            "dag_depth": report.dag_depth,
            "situations_enumerated": report.situations,
            "distinct_msr_sets": report.msr_sets,
        },
    }


def render_report(report: ValidationReport) -> str:
    lines = [report.status + ("" if report.complete else " (incomplete: enumeration cap reached)")]
    for v in report.violations:
        lines.append(f"  inseparable MSR set {{{', '.join(v.msr_ids)}}} witness {v.witness}")
    lines.append(
        f"rules: {report.rule_count}  dag depth: {report.dag_depth}  "
        f"situations: {report.situations}  distinct MSR sets: {report.msr_sets}"
    )
    return "\n".join(lines) + "\n"
