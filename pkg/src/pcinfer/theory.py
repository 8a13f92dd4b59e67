"""Rules, predictive theories and the structural analysis PCI relies on.

A theory on a target feature is a set of rules, each a conditioning
context plus a distribution over target values.  Rules are arranged in a
specificity DAG.  For a situation, the *most specific rules* (MSRs) are the
satisfied rules with no satisfied strict descendant; a theory is uniquely
predictive when every MSR set a situation can produce is separable.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

from .schema import (
    EMPTY,
    AtomSet,
    FeatureSpace,
    IntervalSet,
    Schema,
    SchemaError,
    ValueSet,
    implies,
)

SUM_TOLERANCE = 1e-9
DEFAULT_CAP = 10**6


class TheoryError(ValueError):
    """A rule set that does not form a predictive theory."""


@dataclass(frozen=True)
class Rule:
    id: str
    context: Schema
    distribution: tuple[tuple[str, Real], ...]

    def __post_init__(self):
        values = [v for v, _ in self.distribution]
        if len(set(values)) != len(values):
            raise TheoryError(f"rule {self.id}: target values are not distinct")
        object.__setattr__(self, "_probs", dict(self.distribution))

    def prob(self, value: str) -> Real:
        return self._probs.get(value, 0)

    @property
    def is_default(self) -> bool:
        return len(self.context) == 0


def _check_sum(rule: Rule) -> None:
    probs = [p for _, p in rule.distribution]
    if any(p < 0 or p > 1 for p in probs):
        raise TheoryError(f"rule {rule.id}: probabilities must lie in [0, 1]")
    total = sum(probs)
    if all(isinstance(p, (int, Fraction)) for p in probs):
        if total != 1:
            raise TheoryError(f"rule {rule.id}: distribution sums to {total}, not 1")
    elif abs(float(total) - 1.0) > SUM_TOLERANCE:
        raise TheoryError(f"rule {rule.id}: distribution sums to {float(total)!r}, not 1")


@dataclass(frozen=True)
class PredictiveTheory:
    space: FeatureSpace
    target: str
    rules: tuple[Rule, ...]
    parents: Mapping[str, tuple[str, ...]] = field(repr=False)
    children: Mapping[str, tuple[str, ...]] = field(repr=False)

    def __post_init__(self):
        index = {r.id: i for i, r in enumerate(self.rules)}
        below = []
        for r in self.rules:
            below.append(frozenset(
                index[o.id] for o in self.rules
                if o.id != r.id and implies(o.context, r.context)
            ))
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_below", tuple(below))

    @property
    def target_values(self) -> tuple[str, ...]:
        return self.space.feature(self.target).values

    @property
    def default_rule(self) -> Rule:
        return next(r for r in self.rules if r.is_default)

    def rule(self, rule_id: str) -> Rule:
        return self.rules[self._index[rule_id]]

    def position(self, rule_id: str) -> int:
        return self._index[rule_id]

    def strictly_below(self, rule_id: str) -> list[Rule]:
        """All rules strictly more specific than ``rule_id``."""
        return [self.rules[i] for i in sorted(self._below[self._index[rule_id]])]

    def depth(self) -> int:
        """Number of edges on the longest root-to-leaf path of the DAG."""
        memo: dict[str, int] = {}

        def down(rid: str) -> int:
            if rid not in memo:
                memo[rid] = max((1 + down(c) for c in self.children[rid]), default=0)
            return memo[rid]

        return max(down(r.id) for r in self.rules)

    def map_probabilities(self, fn) -> PredictiveTheory:
        """Same structure with every stored probability passed through ``fn``."""
        rules = tuple(
            Rule(r.id, r.context, tuple((v, fn(p)) for v, p in r.distribution))
            for r in self.rules
        )
        return PredictiveTheory(self.space, self.target, rules, self.parents, self.children)

    def as_float(self) -> PredictiveTheory:
        return self.map_probabilities(float)


def build_theory(
    space: FeatureSpace,
    target: str,
    rules: Iterable[tuple[str | None, Mapping[str, object] | Schema, Mapping[str, Real] | Sequence]],
) -> PredictiveTheory:
    """Validate a rule list and organise it into a specificity DAG.

    Each rule is ``(id, context, distribution)``; a missing id becomes
    ``r<position>`` (1-based).  Contexts may be schemata or raw bindings for
    :meth:`FeatureSpace.schema`.
    """
    target_def = space.feature(target)
    if not target_def.is_enum:
        raise TheoryError(f"target feature {target!r} must have an enumerated domain")
    if target_def.action:
        raise TheoryError("the action feature cannot be the target")
    built: list[Rule] = []
    for pos, (rid, ctx, dist) in enumerate(rules, start=1):
        rid = rid or f"r{pos}"
        try:
            context = ctx if isinstance(ctx, Schema) else space.schema(ctx)
        except SchemaError as exc:
            raise TheoryError(f"rule {rid}: {exc}") from exc
        if target in context:
            raise TheoryError(f"rule {rid}: context mentions the target feature {target!r}")
        for name, vs in context.items():
            if not vs.issubset(space.feature(name).universe):
                raise TheoryError(f"rule {rid}: value set for {name!r} leaves its domain")
        pairs = tuple((str(v), p) for v, p in (dist.items() if isinstance(dist, Mapping) else dist))
        for v, _ in pairs:
            if v not in target_def.values:
                raise TheoryError(f"rule {rid}: {v!r} is not a value of target {target!r}")
        rule = Rule(rid, context, pairs)
        _check_sum(rule)
        built.append(rule)
    if not built:
        raise TheoryError("a theory needs at least one rule")
    ids = [r.id for r in built]
    if len(set(ids)) != len(ids):
        raise TheoryError(f"duplicate rule id {next(i for i in ids if ids.count(i) > 1)!r}")
    seen: dict[Schema, str] = {}
    for r in built:
        if r.context in seen:
            raise TheoryError(f"rules {seen[r.context]} and {r.id} have the same context")
        seen[r.context] = r.id
    if EMPTY not in seen:
        raise TheoryError("theory has no default rule (empty context)")

    # transitive reduction of strict specificity
    above = {r.id: [o for o in built if o.id != r.id and implies(r.context, o.context)] for r in built}
    parents = {}
    for r in built:
        direct = [
            p for p in above[r.id]
            if not any(q.id != p.id and implies(q.context, p.context) for q in above[r.id])
        ]
        parents[r.id] = tuple(p.id for p in direct)
    children = {r.id: tuple(c.id for c in built if r.id in parents[c.id]) for r in built}
    return PredictiveTheory(space, target, tuple(built), parents, children)


# ---------------------------------------------------------------------------
# most specific rules


def msr_set(theory: PredictiveTheory, situation: Mapping[str, ValueSet]) -> list[Rule]:
    """Satisfied rules with no satisfied strictly more specific rule.

    Returned in theory declaration order.
    """
    sat = {i for i, r in enumerate(theory.rules) if implies(situation, r.context)}
    return [theory.rules[i] for i in sorted(sat) if not (theory._below[i] & sat)]


@dataclass(frozen=True)
class Split:
    """How one rule's context divides against the rules after it."""

    partner: str | None
    shared: Schema
    unique: tuple[str, ...]


@dataclass(frozen=True)
class MsrOrdering:
    rules: tuple[Rule, ...]
    splits: tuple[Split, ...]  # one per position except the last

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rules]


def _overlap(a: Schema, b: Schema) -> Schema:
    out = {}
    for name in a.keys() & b.keys():
        common = a[name] & b[name]
        if common:
            out[name] = common
    return Schema(out)


def split_against(rule: Rule, rest: Sequence[Rule]) -> Split | None:
    """Split ``rule`` against ``rest``, or ``None`` if it is not separable."""
    partners = [(o, ov) for o in rest if (ov := _overlap(rule.context, o.context))]
    if len(partners) > 1:
        return None
    if not partners:
        return Split(None, EMPTY, tuple(sorted(rule.context)))
    other, shared = partners[0]
    unique = tuple(sorted(set(rule.context) - set(shared)))
    return Split(other.id, shared, unique)


def separable_ordering(msrs: Sequence[Rule]) -> MsrOrdering | None:
    """Greedy separable ordering; earliest-declared separable rule first.

    Returns ``None`` when some residual set has no separable rule.
    """
    if not msrs:
        raise TheoryError("separable_ordering needs at least one rule")
    remaining = list(msrs)
    order, splits = [], []
    while len(remaining) > 1:
        for i, r in enumerate(remaining):
            split = split_against(r, remaining[:i] + remaining[i + 1:])
            if split is not None:
                order.append(r)
                splits.append(split)
                del remaining[i]
                break
        else:
            return None
    order.append(remaining[0])
    return MsrOrdering(tuple(order), tuple(splits))


def ordering_from_ids(msrs: Sequence[Rule], ids: Sequence[str]) -> MsrOrdering | None:
    """Build the ordering with the given rule order, or ``None`` if it is not valid."""
    by_id = {r.id: r for r in msrs}
    if sorted(ids) != sorted(by_id):
        raise TheoryError(f"ordering {list(ids)} is not a permutation of {sorted(by_id)}")
    seq = [by_id[i] for i in ids]
    splits = []
    for k in range(len(seq) - 1):
        split = split_against(seq[k], seq[k + 1:])
        if split is None:
            return None
        splits.append(split)
    return MsrOrdering(tuple(seq), tuple(splits))


def all_separable_orderings(msrs: Sequence[Rule]) -> Iterator[MsrOrdering]:
    """Every valid separable ordering, by exhaustive search with pruning."""

    def extend(prefix: list[Rule], splits: list[Split], rest: list[Rule]):
        if len(rest) == 1:
            yield MsrOrdering(tuple(prefix + rest), tuple(splits))
            return
        for i, r in enumerate(rest):
            others = rest[:i] + rest[i + 1:]
            split = split_against(r, others)
            if split is not None:
                yield from extend(prefix + [r], splits + [split], others)

    yield from extend([], [], list(msrs))


# ---------------------------------------------------------------------------
# uniquely-predictive validation


@dataclass(frozen=True)
class Violation:
    msr_ids: tuple[str, ...]
    witness: Schema


@dataclass
class ValidationReport:
    valid: bool
    violations: list[Violation]
    rule_count: int
    dag_depth: int
    situations: int
    msr_sets: int
    complete: bool = True

    @property
    def status(self) -> str:
        return "valid" if self.valid else "invalid"


def _cells(universe: ValueSet, sets: list[ValueSet]) -> list[ValueSet]:
    """Atoms of the Boolean algebra the value sets generate inside the domain."""
    cells = [universe]
    for s in sets:
        nxt = []
        for c in cells:
            for part in (c & s, c - s):
                if part:
                    nxt.append(part)
        cells = nxt
    return cells


def situation_partition(theory: PredictiveTheory) -> dict[str, list[ValueSet | None]]:
    """Per context feature: the representative bindings a situation can take.

    ``None`` stands for "feature unknown"; it is only listed when no domain
    cell already falls outside every context value set.
    """
    occurring: dict[str, list[ValueSet]] = {}
    for r in theory.rules:
        for name, vs in r.context.items():
            bucket = occurring.setdefault(name, [])
            if vs not in bucket:
                bucket.append(vs)
    options: dict[str, list[ValueSet | None]] = {}
    for name in theory.space.names:
        if name not in occurring:
            continue
        sets = occurring[name]
        cells = _cells(theory.space.feature(name).universe, sets)
        residual = [c for c in cells if not any(c.issubset(s) for s in sets)]
        options[name] = [*cells] + ([] if residual else [None])
    return options


def enumerate_situations(theory: PredictiveTheory) -> Iterator[Schema]:
    options = situation_partition(theory)
    names = list(options)
    for combo in itertools.product(*(options[n] for n in names)):
        yield Schema((n, vs) for n, vs in zip(names, combo) if vs is not None)


def check_uniquely_predictive(theory: PredictiveTheory, cap: int = DEFAULT_CAP) -> ValidationReport:
    """Enumerate representative situations and test every MSR set for separability."""
    seen: dict[tuple[str, ...], Schema] = {}
    count = 0
    complete = True
    for situation in enumerate_situations(theory):
        if count >= cap:
            complete = False
            break
        count += 1
        key = tuple(r.id for r in msr_set(theory, situation))
        if key not in seen:
            seen[key] = situation
    violations = []
    for key, witness in seen.items():
        if separable_ordering([theory.rule(i) for i in key]) is None:
            violations.append(Violation(key, witness))
    return ValidationReport(
        valid=not violations,
        violations=violations,
        rule_count=len(theory.rules),
        dag_depth=theory.depth(),
        situations=count,
        msr_sets=len(seen),
        complete=complete,
    )


__all__ = [
    "AtomSet",
    "IntervalSet",
    "MsrOrdering",
    "PredictiveTheory",
    "Rule",
    "Split",
    "TheoryError",
    "ValidationReport",
    "Violation",
    "all_separable_orderings",
    "build_theory",
    "check_uniquely_predictive",
    "enumerate_situations",
    "msr_set",
    "ordering_from_ids",
    "separable_ordering",
    "split_against",
]
