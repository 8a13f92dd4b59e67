"""Probability combination using independence (PCI).

Given a situation, the most specific rules are ordered so that each one is
separable from the rules after it.  For every target value supported by
all of them the combined score is

    prod_i P(v | C_i) / prod_j P(v | shared_j)

where ``shared_j`` is the part of rule j's context it shares with a later
rule.  The denominators are themselves PCI predictions, computed
recursively.  Scores are then normalised; if every score is zero (or the
MSR set cannot be ordered) the prediction falls back to the features shared
by all MSRs.

Arithmetic follows the inputs: Fractions stay exact, floats stay floats.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from numbers import Real

from .schema import Schema, ValueSet, implies, shared_features
from .theory import (
    MsrOrdering,
    PredictiveTheory,
    Rule,
    msr_set,
    ordering_from_ids,
    separable_ordering,
)

# fallback / shield event names recorded on trace nodes
ZERO_SUM = "zero-sum"
NON_SEPARABLE = "non-separable"
PROGRESS_GUARD = "progress-guard"
ZERO_DENOMINATOR = "zero-denominator"


@dataclass
class Fallback:
    kind: str
    schema: Schema


@dataclass
class TraceNode:
    situation: Schema
    msr_ids: list[str]
    ordering: list[str] | None = None
    shared: list[dict] = field(default_factory=list)
    unique: list[list[str]] = field(default_factory=list)
    numerators: dict[str, Real] | None = None
    denominators: dict[str, Real] | None = None
    raw: dict[str, Real] | None = None
    normalization: Real = 1
    fallback: Fallback | None = None
    flags: list[str] = field(default_factory=list)
    children: list[TraceNode] = field(default_factory=list)
    distribution: dict[str, Real] = field(default_factory=dict)

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)

    def all_flags(self) -> list[str]:
        out: list[str] = []
        for node in self.walk():
            for f in node.flags:
                if f not in out:
                    out.append(f)
        return out


@dataclass
class Prediction:
    distribution: dict[str, Real]
    trace: TraceNode

    def prob(self, value: str) -> Real:
        return self.distribution.get(value, 0)

    @property
    def flags(self) -> list[str]:
        return self.trace.all_flags()

    @property
    def heuristic(self) -> bool:
        return bool(self.flags)

    def ranked(self, order: Sequence[str]) -> list[tuple[str, Real]]:
        """Values by descending probability, ties broken by ``order``."""
        pos = {v: i for i, v in enumerate(order)}
        return sorted(self.distribution.items(), key=lambda kv: (-kv[1], pos.get(kv[0], 0)))


def combine(
    ordering: MsrOrdering,
    denominators: Sequence[Mapping[str, Real]],
    common_values: Sequence[str],
    values: Sequence[str],
) -> tuple[dict[str, Real], list[str]]:
    """Raw (unnormalised) scores for each target value.

    ``denominators[j]`` is the distribution P(G | shared_j) for position j.
    Values outside ``common_values`` score 0.  A zero denominator for a
    common value zeroes that value and is reported in the returned flags.
    """
    rules = ordering.rules
    if len(denominators) != len(rules) - 1:
        raise ValueError(f"need {len(rules) - 1} denominators, got {len(denominators)}")
    if len(rules) == 1:
        return {v: rules[0].prob(v) for v in values}, []
    common = set(common_values)
    raw: dict[str, Real] = {}
    flags: list[str] = []
    for v in values:
        if v not in common:
            raw[v] = 0
            continue
        num = 1
        for r in rules:
            num = num * r.prob(v)
        den = 1
        for d in denominators:
            den = den * d.get(v, 0)
        if den == 0:
            raw[v] = 0
            if ZERO_DENOMINATOR not in flags:
                flags.append(ZERO_DENOMINATOR)
        else:
            raw[v] = num / den
    return raw, flags


class _Query:
    """One top-level query; the memo lives and dies with it."""

    def __init__(self, theory: PredictiveTheory):
        self.theory = theory
        self.values = theory.target_values
        self.action = theory.space.action
        self.memo: dict[Schema, Prediction] = {}

    def stored(self, rule: Rule) -> dict[str, Real]:
        return {v: rule.prob(v) for v in self.values}

    def sub(self, schema: Schema, msrs: list[Rule], node: TraceNode) -> Prediction:
        """Recursive prediction, or the prior if recursion would not progress."""
        sub_msrs = msr_set(self.theory, schema)
        if [r.id for r in sub_msrs] == [r.id for r in msrs]:
            prior = self.theory.default_rule
            child = TraceNode(
                situation=schema, msr_ids=[prior.id], raw=self.stored(prior),
                flags=[PROGRESS_GUARD], distribution=self.stored(prior),
            )
            node.children.append(child)
            return Prediction(child.distribution, child)
        pred = self.predict(schema)
        node.children.append(pred.trace)
        return pred

    def fall_back(self, node: TraceNode, msrs: list[Rule], kind: str) -> Prediction:
        target = shared_features([r.context for r in msrs], action=self.action)
        node.fallback = Fallback(kind, target)
        node.flags.append(kind)
        pred = self.sub(target, msrs, node)
        node.distribution = dict(pred.distribution)
        return Prediction(node.distribution, node)

    def predict(self, situation: Schema, ordering: Sequence[str] | None = None) -> Prediction:
        if ordering is None and situation in self.memo:
            return self.memo[situation]
        msrs = msr_set(self.theory, situation)
        node = TraceNode(situation=situation, msr_ids=[r.id for r in msrs])
        if len(msrs) == 1:
            node.ordering = node.msr_ids[:]
            node.raw = self.stored(msrs[0])
            node.distribution = self.stored(msrs[0])
            pred = Prediction(node.distribution, node)
        else:
            pred = self._combine(situation, msrs, node, ordering)
        if ordering is None:
            self.memo[situation] = pred
        return pred

    def _combine(self, situation, msrs, node, forced) -> Prediction:
        if forced is not None:
            order = ordering_from_ids(msrs, forced)
            if order is None:
                raise ValueError(f"{list(forced)} is not a separable ordering")
        else:
            order = separable_ordering(msrs)
        if order is None:
            return self.fall_back(node, msrs, NON_SEPARABLE)
        node.ordering = order.ids
        node.shared = [{"rule": r.id, "partner": s.partner, "features": s.shared}
                       for r, s in zip(order.rules, order.splits)]
        node.unique = [list(s.unique) for s in order.splits]
        common = [v for v in self.values if all(r.prob(v) > 0 for r in msrs)]
        dens = [self.sub(s.shared, msrs, node).distribution for s in order.splits]
        raw, flags = combine(order, dens, common, self.values)
        node.numerators = {}
        node.denominators = {}
        for v in self.values:
            num, den = 1, 1
            for r in order.rules:
                num = num * r.prob(v)
            for d in dens:
                den = den * d.get(v, 0)
            node.numerators[v], node.denominators[v] = num, den
        node.raw = raw
        node.flags.extend(flags)
        total = sum(raw.values())
        if total == 0:
            return self.fall_back(node, msrs, ZERO_SUM)
        node.normalization = 1 / total
        node.distribution = {v: s / total for v, s in raw.items()}
        return Prediction(node.distribution, node)


def pci_predict(
    theory: PredictiveTheory,
    situation: Mapping[str, ValueSet],
    ordering: Sequence[str] | None = None,
) -> Prediction:
    """Predict the target distribution for ``situation``.

    ``ordering`` forces the top-level MSR order (rule ids); recursive
    sub-queries always use the greedy order.
    """
    if not isinstance(situation, Schema):
        situation = Schema(situation)
    if theory.target in situation:
        raise ValueError(f"situation binds the target feature {theory.target!r}")
    return _Query(theory).predict(situation, ordering)


def is_more_general(general: Schema, specific: Schema) -> bool:
    return general != specific and implies(specific, general)
