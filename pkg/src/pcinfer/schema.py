"""Features, value sets, schemata and the subsumption algebra over them.

A schema is a conjunction of feature specifications.  Each specification
binds one feature to a set of admissible values; disjunction is only
possible *inside* a feature (``vision-object = wall | food``), never across
features.  Everything here is immutable and canonical at construction, so
structural equality is semantic equality.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

INF = None  # unbounded upper end of an integer interval


class SchemaError(ValueError):
    """Raised for ill-formed features, value expressions or schemata."""


# ---------------------------------------------------------------------------
# value sets


@dataclass(frozen=True)
class AtomSet:
    """A finite set of atomic (symbolic) values."""

    atoms: frozenset[str]

    def __init__(self, atoms: Iterable[str] = ()):
        object.__setattr__(self, "atoms", frozenset(str(a) for a in atoms))

    def __and__(self, other: AtomSet) -> AtomSet:
        return AtomSet(self.atoms & _same(self, other).atoms)

    def __or__(self, other: AtomSet) -> AtomSet:
        return AtomSet(self.atoms | _same(self, other).atoms)

    def __sub__(self, other: AtomSet) -> AtomSet:
        return AtomSet(self.atoms - _same(self, other).atoms)

    def __contains__(self, value: object) -> bool:
        return str(value) in self.atoms

    def __bool__(self) -> bool:
        return bool(self.atoms)

    def issubset(self, other: ValueSet) -> bool:
        return self.atoms <= _same(self, other).atoms

    def is_singleton(self) -> bool:
        return len(self.atoms) == 1

    def elements(self) -> list[str]:
        return sorted(self.atoms)

    def __str__(self) -> str:
        return "|".join(self.elements())


def _succ(x: int | None) -> int | None:
    return None if x is None else x + 1


def _lt(a: int | None, b: int | None) -> bool:
    """Order on interval breakpoints where ``None`` is +infinity."""
    if a is None:
        return False
    return b is None or a < b


@dataclass(frozen=True)
class IntervalSet:
    """A finite union of integer intervals; ``None`` as upper end means unbounded.

    Stored canonically as sorted, disjoint, non-adjacent closed spans.
    """

    spans: tuple[tuple[int, int | None], ...]

    def __init__(self, spans: Iterable[tuple[int, int | None]] = ()):
        cleaned = []
        for lo, hi in spans:
            if hi is not None and hi < lo:
                raise SchemaError(f"empty interval {lo}..{hi}")
            cleaned.append((int(lo), None if hi is None else int(hi)))
        cleaned.sort(key=lambda s: s[0])
        merged: list[list] = []
        for lo, hi in cleaned:
            if merged and not _lt(_succ(merged[-1][1]), lo):
                last = merged[-1]
                if _lt(last[1], hi) or hi is None:
                    last[1] = hi
            else:
                merged.append([lo, hi])
        object.__setattr__(self, "spans", tuple((lo, hi) for lo, hi in merged))

    @classmethod
    def point(cls, value: int) -> IntervalSet:
        return cls([(value, value)])

    def _combine(self, other: IntervalSet, keep) -> IntervalSet:
        other = _same(self, other)
        cuts = set()
        for lo, hi in self.spans + other.spans:
            cuts.add(lo)
            if hi is not None:
                cuts.add(hi + 1)
        points = sorted(cuts)
        out = []
        for i, start in enumerate(points):
            end = points[i + 1] - 1 if i + 1 < len(points) else None
            if keep(start in self, start in other):
                out.append((start, end))
        return IntervalSet(out)

    def __and__(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, lambda a, b: a and b)

    def __or__(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, lambda a, b: a or b)

    def __sub__(self, other: IntervalSet) -> IntervalSet:
        return self._combine(other, lambda a, b: a and not b)

    def __contains__(self, value: object) -> bool:
        try:
            v = int(value)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            return False
        return any(lo <= v and (hi is None or v <= hi) for lo, hi in self.spans)

    def __bool__(self) -> bool:
        return bool(self.spans)

    def issubset(self, other: ValueSet) -> bool:
        return not (self - _same(self, other))

    def is_singleton(self) -> bool:
        return len(self.spans) == 1 and self.spans[0][0] == self.spans[0][1]

    def elements(self) -> list[int]:
        if any(hi is None for _, hi in self.spans):
            raise SchemaError("cannot enumerate an unbounded interval set")
        return [v for lo, hi in self.spans for v in range(lo, hi + 1)]

    def __str__(self) -> str:
        parts = []
        for lo, hi in self.spans:
            if lo == hi:
                parts.append(str(lo))
            else:
                parts.append(f"{lo}..{'inf' if hi is None else hi}")
        return "|".join(parts)


ValueSet = Union[AtomSet, IntervalSet]


def _same(a: ValueSet, b: ValueSet):
    if type(a) is not type(b):
        raise SchemaError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    return b


# ---------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class FeatureDef:
    """A declared feature: either an enumeration or an integer interval domain."""

    name: str
    values: tuple[str, ...] | None = None
    low: int | None = None
    high: int | None = None
    action: bool = False

    def __post_init__(self):
        if self.values is not None:
            if not self.values:
                raise SchemaError(f"feature {self.name!r} has an empty domain")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"feature {self.name!r} has duplicate values")
            object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        else:
            if self.low is None:
                raise SchemaError(f"feature {self.name!r} needs values or an integer range")
            if self.high is not None and self.high < self.low:
                raise SchemaError(f"feature {self.name!r}: lower bound exceeds upper bound")

    @property
    def is_enum(self) -> bool:
        return self.values is not None

    @property
    def universe(self) -> ValueSet:
        if self.is_enum:
            return AtomSet(self.values)
        return IntervalSet([(self.low, self.high)])

    def is_finite(self) -> bool:
        return self.is_enum or self.high is not None

    def point(self, token: str) -> ValueSet:
        """The singleton value set for a single value token."""
        if self.is_enum:
            if token not in self.values:
                raise SchemaError(f"{token!r} is not a value of feature {self.name!r}")
            return AtomSet([token])
        try:
            v = int(token)
        except ValueError:
            raise SchemaError(f"feature {self.name!r} expects an integer, got {token!r}") from None
        vs = IntervalSet.point(v)
        if not vs.issubset(self.universe):
            raise SchemaError(f"{v} is outside the domain of feature {self.name!r}")
        return vs


# Terms of a value expression: a bare name/number, or an integer range.
@dataclass(frozen=True)
class Name:
    text: str

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class Range:
    low: int
    high: int | None

    def __str__(self) -> str:
        return f"{self.low}..{'inf' if self.high is None else self.high}"


Term = Union[Name, Range]


@dataclass(frozen=True)
class FeatureSpace:
    """Feature declarations plus the value hierarchies over them.

    ``hierarchy`` maps feature name -> node name -> member terms, where a
    member may itself name another node.
    """

    features: tuple[FeatureDef, ...]
    hierarchy: Mapping[str, Mapping[str, tuple[Term, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise SchemaError(f"feature {dup!r} declared twice")
        if sum(f.action for f in self.features) > 1:
            raise SchemaError("at most one action feature may be declared")
        object.__setattr__(self, "_by_name", {f.name: f for f in self.features})
        for feat, nodes in self.hierarchy.items():
            fd = self.feature(feat)
            for node in nodes:
                if fd.is_enum and node in fd.values:
                    raise SchemaError(f"hierarchy node {node!r} shadows a value of {feat!r}")
                self.expand(feat, [Name(node)])  # reports cycles and empty nodes early

    def feature(self, name: str) -> FeatureDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def action(self) -> FeatureDef | None:
        return next((f for f in self.features if f.action), None)

    def expand(self, feature: str, terms: Sequence[Term | str]) -> ValueSet:
        """Resolve a value expression (union of terms) to a canonical value set."""
        fd = self.feature(feature)
        nodes = self.hierarchy.get(feature, {})
        result = AtomSet() if fd.is_enum else IntervalSet()

        def resolve(term: Term | str, stack: tuple[str, ...]) -> ValueSet:
            if isinstance(term, str):
                term = Name(term)
            if isinstance(term, Range):
                if fd.is_enum:
                    raise SchemaError(f"range {term} used on enumerated feature {feature!r}")
                vs = IntervalSet([(term.low, term.high)])
                if not vs.issubset(fd.universe):
                    raise SchemaError(f"range {term} exceeds the domain of {feature!r}")
                return vs
            if term.text == "*":
                return fd.universe
            if term.text in nodes:
                if term.text in stack:
                    cycle = " -> ".join(stack + (term.text,))
                    raise SchemaError(f"cyclic hierarchy for {feature!r}: {cycle}")
                acc = AtomSet() if fd.is_enum else IntervalSet()
                for member in nodes[term.text]:
                    acc = acc | resolve(member, stack + (term.text,))
                if not acc:
                    raise SchemaError(f"hierarchy node {term.text!r} of {feature!r} is empty")
                return acc
            if fd.is_enum and term.text not in fd.values:
                raise SchemaError(f"unknown value or node {term.text!r} for feature {feature!r}")
            return fd.point(term.text)

        for t in terms:
            result = result | resolve(t, ())
        if not result:
            raise SchemaError(f"empty value expression for feature {feature!r}")
        return result

    def schema(self, bindings: Mapping[str, object] | None = None, **kw: object) -> Schema:
        """Build a validated schema.

        Values may be value sets, single tokens, or sequences of terms.
        """
        items = dict(bindings or {}, **kw)
        out = {}
        for name, spec in items.items():
            fd = self.feature(name)
            if isinstance(spec, (AtomSet, IntervalSet)):
                if not spec or not spec.issubset(fd.universe):
                    raise SchemaError(f"value set {spec} is not a non-empty subset of {name!r}")
                out[name] = spec
            elif isinstance(spec, (list, tuple)):
                out[name] = self.expand(name, spec)
            else:
                out[name] = self.expand(name, [str(spec)])
        return Schema(out)


# ---------------------------------------------------------------------------
# schemata


class Schema(Mapping):
    """An immutable conjunction ``feature -> value set``.

    Unbound features are unconstrained in a context and unknown in a
    situation.
    """

    __slots__ = ("_items", "_map")

    def __init__(self, bindings: Mapping[str, ValueSet] | Iterable[tuple[str, ValueSet]] = ()):
        pairs = dict(bindings)
        for name, vs in pairs.items():
            if not isinstance(vs, (AtomSet, IntervalSet)):
                raise SchemaError(f"binding for {name!r} is not a value set")
            if not vs:
                raise SchemaError(f"empty value set for {name!r}")
        self._items = tuple(sorted(pairs.items()))
        self._map = dict(self._items)

    def __getitem__(self, key: str) -> ValueSet:
        return self._map[key]

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return hash(self._items)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Schema):
            return self._items == other._items
        return NotImplemented

    def __repr__(self) -> str:
        return f"Schema({str(self)})"

    def __str__(self) -> str:
        if not self._items:
            return "{}"
        return "{" + ", ".join(f"{k}={v}" for k, v in self._items) + "}"

    def restrict(self, names: Iterable[str]) -> Schema:
        keep = set(names)
        return Schema((k, v) for k, v in self._items if k in keep)

    def with_bindings(self, other: Mapping[str, ValueSet]) -> Schema:
        merged = dict(self._items)
        merged.update(other)
        return Schema(merged)

    def as_text(self) -> str:
        """Situation-string form: ``A=true,B=1..3``."""
        return ",".join(f"{k}={v}" for k, v in self._items)


EMPTY = Schema()


def implies(s1: Mapping[str, ValueSet], s2: Mapping[str, ValueSet]) -> bool:
    """True iff every feature bound in ``s2`` is bound in ``s1`` to a subset."""
    for name, vs in s2.items():
        mine = s1.get(name)
        if mine is None or not mine.issubset(vs):
            return False
    return True


def more_specific(s1: Schema, s2: Schema) -> bool:
    """Strict specificity: ``s1`` implies ``s2`` and they differ."""
    return s1 != s2 and implies(s1, s2)


def satisfies(situation: Schema, context: Schema) -> bool:
    return implies(situation, context)


def shared_features(
    schemata: Sequence[Schema],
    situation_flags: Sequence[bool] = (),
    action: FeatureDef | None = None,
) -> Schema:
    """Features present in every schema whose value sets still intersect.

    A situation-flagged schema that leaves the action feature unbound
    counts as binding it to the action's whole domain.
    """
    if not schemata:
        raise SchemaError("shared_features needs at least one schema")
    flags = list(situation_flags) + [False] * (len(schemata) - len(situation_flags))
    candidates = set().union(*(s.keys() for s in schemata))
    out = {}
    for name in candidates:
        acc = None
        for s, is_situation in zip(schemata, flags):
            vs = s.get(name)
            if vs is None and is_situation and action is not None and name == action.name:
                vs = action.universe
            if vs is None:
                acc = None
                break
            acc = vs if acc is None else acc & vs
            if not acc:
                break
        if acc:
            out[name] = acc
    return Schema(out)
