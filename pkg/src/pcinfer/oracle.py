"""Brute-force ground truth over explicit joint tables.

Nothing here calls into the PCI engine: conditionals, independence checks
and the maximum-entropy fit are computed directly from the table so that
they can contradict it.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .schema import FeatureDef, FeatureSpace, Schema, ValueSet

MAX_ATOMS = 2**12
JOINT_TOLERANCE = 1e-12


class OracleError(ValueError):
    pass


class ZeroProbabilityError(OracleError):
    """Conditioning on an event of probability zero."""


class ConvergenceError(OracleError):
    pass


class InconsistentConstraints(OracleError):
    pass


@dataclass
class JointTable:
    """A complete joint over ``features`` (target last).

    ``probs`` has one axis per feature, in order.  Float tables use
    float64; exact tables hold Fractions in an object array.
    """

    features: tuple[FeatureDef, ...]
    target: str
    probs: np.ndarray

    def __post_init__(self):
        self.features = tuple(self.features)
        names = [f.name for f in self.features]
        if self.target not in names:
            raise OracleError(f"target {self.target!r} is not a table feature")
        for f in self.features:
            if not f.is_finite():
                raise OracleError(f"feature {f.name!r} has an infinite domain")
        shape = tuple(len(_domain(f)) for f in self.features)
        if math.prod(shape) > MAX_ATOMS:
            raise OracleError(f"joint has {math.prod(shape)} atoms; the cap is {MAX_ATOMS}")
        if self.probs.shape != shape:
            raise OracleError(f"probability array shape {self.probs.shape} != {shape}")
        if (self.probs < 0).any():
            raise OracleError("negative probability in joint table")
        total = self.probs.sum()
        if self.exact:
            if total != 1:
                raise OracleError(f"joint sums to {total}, not 1")
        elif abs(float(total) - 1.0) > JOINT_TOLERANCE * max(1, self.probs.size):
            raise OracleError(f"joint sums to {float(total)!r}, not 1")

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise OracleError(f"unknown feature {name!r}") from None

    def domain(self, name: str) -> list[str]:
        return _domain(self.features[self.axis(name)])

    def space(self) -> FeatureSpace:
        return FeatureSpace(self.features)

    def mask(self, event: Mapping[str, ValueSet | Iterable[str]]) -> np.ndarray:
        """Boolean array selecting the atoms inside ``event``."""
        m = np.ones(self.probs.shape, dtype=bool)
        for name, allowed in event.items():
            ax = self.axis(name)
            dom = self.domain(name)
            if isinstance(allowed, str):
                allowed = [allowed]
            inside = np.array([_member(v, allowed) for v in dom], dtype=bool)
            shape = [1] * self.probs.ndim
            shape[ax] = len(dom)
            m = m & inside.reshape(shape)
        return m

    def prob(self, event: Mapping[str, ValueSet | Iterable[str]]):
        return self.probs[self.mask(event)].sum()

    def to_float(self) -> JointTable:
        return JointTable(self.features, self.target, self.probs.astype(float))

    def entropy(self) -> float:
        p = self.probs.astype(float).ravel()
        p = p[p > 0]
        return float(-(p * np.log(p)).sum())


def _domain(f: FeatureDef) -> list[str]:
    return list(f.values) if f.is_enum else [str(v) for v in f.universe.elements()]


def _member(value: str, allowed) -> bool:
    if isinstance(allowed, (set, frozenset, list, tuple)):
        return value in {str(a) for a in allowed}
    return value in allowed


def uniform(features: Sequence[FeatureDef], target: str, exact: bool = False) -> JointTable:
    shape = tuple(len(_domain(f)) for f in features)
    n = math.prod(shape)
    if exact:
        probs = np.full(shape, Fraction(1, n), dtype=object)
    else:
        probs = np.full(shape, 1.0 / n)
    return JointTable(tuple(features), target, probs)


def exact_conditional(joint: JointTable, given: Mapping[str, ValueSet], target: str | None = None) -> dict[str, object]:
    """P(target | given) read directly off the table."""
    target = target or joint.target
    m = joint.mask(given)
    denom = joint.probs[m].sum()
    if denom == 0:
        raise ZeroProbabilityError(f"P({_fmt(given)}) = 0")
    out = {}
    for v in joint.domain(target):
        num = joint.probs[m & joint.mask({target: [v]})].sum()
        out[v] = num / denom
    return out


def _fmt(event: Mapping) -> str:
    return ", ".join(f"{k}={v}" for k, v in event.items()) or "true"


# ---------------------------------------------------------------------------
# independence


@dataclass
class IndependenceResult:
    holds: bool
    max_deviation: float
    slices_checked: int
    skipped: list[dict[str, str]] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.holds


def independence_holds(
    joint: JointTable,
    a: Sequence[str],
    b: Sequence[str],
    given: Mapping[str, ValueSet] | Sequence[str] | None = None,
    tol: float = 1e-9,
    given_features: Sequence[str] = (),
) -> IndependenceResult:
    """Check ``a`` independent of ``b`` conditional on ``given``.

    ``given`` is either an event (a schema) or a collection of feature
    names; ``given_features`` adds feature names whose every value slice is
    checked inside the event.  Zero-probability slices are skipped.
    """
    a, b = list(a), list(b)
    if set(a) & set(b):
        raise OracleError(f"feature sets overlap: {sorted(set(a) & set(b))}")
    event: Mapping = {}
    over = list(given_features)
    if isinstance(given, Mapping):
        event = given
    elif given is not None:
        over = list(given) + over
    if set(over) & (set(a) | set(b)):
        raise OracleError("conditioning features overlap the tested sets")
    if not a or not b:
        return IndependenceResult(True, 0.0, 0)

    base = joint.mask(event)
    worst = 0.0
    checked = 0
    skipped = []
    for combo in itertools.product(*(joint.domain(f) for f in over)):
        slice_event = dict(zip(over, ([v] for v in combo)))
        m = base & joint.mask(slice_event) if over else base
        pz = float(joint.probs[m].sum())
        if pz == 0:
            skipped.append(dict(zip(over, combo)))
            continue
        checked += 1
        for va in itertools.product(*(joint.domain(f) for f in a)):
            ma = joint.mask(dict(zip(a, ([v] for v in va))))
            pa = float(joint.probs[m & ma].sum()) / pz
            for vb in itertools.product(*(joint.domain(f) for f in b)):
                mb = joint.mask(dict(zip(b, ([v] for v in vb))))
                pb = float(joint.probs[m & mb].sum()) / pz
                pab = float(joint.probs[m & ma & mb].sum()) / pz
                worst = max(worst, abs(pab - pa * pb))
    return IndependenceResult(worst <= tol and checked > 0, worst, checked, skipped)


# ---------------------------------------------------------------------------
# maximum entropy by cyclic I-projection (iterative proportional fitting)


@dataclass(frozen=True)
class Constraint:
    context: Schema
    value: str
    probability: float


def constraints_from_theory(theory) -> list[Constraint]:
    """One constraint per (rule, target value), in rule order."""
    out = []
    for rule in theory.rules:
        for v in theory.target_values:
            out.append(Constraint(rule.context, v, rule.prob(v)))
    return out


def me_fit(
    features: Sequence[FeatureDef],
    target: str,
    constraints: Sequence[Constraint],
    tol: float = 1e-10,
    max_sweeps: int = 10**5,
) -> JointTable:
    """Maximum-entropy joint satisfying ``P(value | context) = p`` for each constraint.

    Starts from the uniform table and cycles exact I-projections onto each
    constraint in order until the largest violation drops below ``tol``.
    """
    table = uniform(features, target)
    probs = table.probs.copy()
    prepared = []
    for c in constraints:
        ctx = table.mask(c.context)
        hit = ctx & table.mask({target: [c.value]})
        prepared.append((ctx, hit, ctx & ~hit, float(c.probability)))

    for _ in range(max_sweeps):
        worst = 0.0
        for ctx, hit, miss, p in prepared:
            a = probs[hit].sum()
            b = probs[miss].sum()
            if a + b == 0:
                raise InconsistentConstraints("a constrained context has been driven to probability 0")
            worst = max(worst, abs(a / (a + b) - p))
        if worst < tol:
            return JointTable(tuple(features), target, probs / probs.sum())
        for ctx, hit, miss, p in prepared:
            a = probs[hit].sum()
            b = probs[miss].sum()
            if (a == 0 and p > 0) or (b == 0 and p < 1):
                raise InconsistentConstraints(
                    "constraint requires mass on atoms that other constraints set to zero"
                )
            if p == 0:
                probs[hit] = 0.0
            elif p == 1:
                probs[miss] = 0.0
            else:
                # exp(lambda) = p b / ((1 - p) a); factors exp(lambda(1-p)), exp(-lambda p)
                log_lam = math.log(p * b) - math.log((1 - p) * a)
                probs[hit] *= math.exp(log_lam * (1 - p))
                probs[miss] *= math.exp(-log_lam * p)
            total = probs.sum()
            if not np.isfinite(total) or total <= 0:
                raise InconsistentConstraints("correction factors diverged")
            probs /= total
    raise ConvergenceError(f"no convergence to {tol} within {max_sweeps} sweeps")


def rules_from_joint(joint: JointTable, contexts: Sequence[Schema], target: str | None = None) -> list[Constraint]:
    """Exact conditional target distribution for each context, as constraints."""
    target = target or joint.target
    out = []
    for ctx in contexts:
        dist = exact_conditional(joint, ctx, target)
        for v, p in dist.items():
            out.append(Constraint(ctx, v, p))
    return out


def theory_from_constraints(space: FeatureSpace, target: str, constraints: Sequence[Constraint], ids=None):
    """Package constraints (grouped by context, first-seen order) as a theory."""
    from .theory import build_theory

    grouped: dict[Schema, dict[str, object]] = {}
    for c in constraints:
        grouped.setdefault(c.context, {})[c.value] = c.probability
    rules = []
    for i, (ctx, dist) in enumerate(grouped.items()):
        rid = ids[i] if ids else None
        rules.append((rid, ctx, dist))
    return build_theory(space, target, rules)


# ---------------------------------------------------------------------------
# CSV fixtures


def _parse_prob(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise OracleError(f"bad probability {text!r}") from None


def read_joint_csv(
    text: str,
    features: Sequence[FeatureDef] | None = None,
    exact: bool = False,
) -> JointTable:
    """Parse a joint table: header ``f1,...,fn,target,probability``.

    Without ``features``, each column's domain is its values in order of
    first appearance.  Missing atoms have probability 0.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise OracleError("empty joint CSV")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "probability" or len(header) < 2:
        raise OracleError("joint CSV header must end with a 'probability' column")
    names = header[:-1]
    body = [[c.strip() for c in r] for r in rows[1:]]
    for r in body:
        if len(r) != len(header):
            raise OracleError(f"row {r} has {len(r)} columns, expected {len(header)}")
    if features is None:
        doms: dict[str, list[str]] = {n: [] for n in names}
        for r in body:
            for n, v in zip(names, r):
                if v not in doms[n]:
                    doms[n].append(v)
        feats = tuple(FeatureDef(n, tuple(doms[n])) for n in names)
    else:
        by_name = {f.name: f for f in features}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise OracleError(f"CSV columns not declared: {missing}")
        feats = tuple(by_name[n] for n in names)
    shape = tuple(len(_domain(f)) for f in feats)
    if math.prod(shape) > MAX_ATOMS:
        raise OracleError(f"joint has {math.prod(shape)} atoms; the cap is {MAX_ATOMS}")
    probs = np.full(shape, Fraction(0), dtype=object)
    index = [{v: i for i, v in enumerate(_domain(f))} for f in feats]
    for r in body:
        try:
            idx = tuple(index[k][v] for k, v in enumerate(r[:-1]))
        except KeyError as exc:
            raise OracleError(f"value {exc.args[0]!r} not in its feature's domain") from None
        probs[idx] += _parse_prob(r[-1])
    if not exact:
        probs = probs.astype(float)
    return JointTable(feats, names[-1], probs)


def write_joint_csv(joint: JointTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(joint.names + ["probability"])
    doms = [_domain(f) for f in joint.features]
    for idx in itertools.product(*(range(len(d)) for d in doms)):
        p = joint.probs[idx]
        w.writerow([doms[k][i] for k, i in enumerate(idx)] + [_num_text(p)])
    return buf.getvalue()


def _num_text(p) -> str:
    if isinstance(p, Fraction):
        return str(p)
    return repr(float(p))
