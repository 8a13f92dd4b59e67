"""Text format for theories.

::

    # comments run to end of line
    feature vision-object values { wall, food, agent }
    feature nasty-smell values int 0..inf
    action feature action values { munch, move-forward }
    hierarchy vision-object: any-object = { wall, food, agent }
    target du
    rule r1 { action = munch } -> { 90: 1/2, -10: 1/2 }
    rule { vision-object = wall | food, nasty-smell = 10..inf } -> { -10: 0.75, 90: 0.25 }

A value expression is a ``|``-union of values, hierarchy nodes, integer
ranges ``lo..hi`` (``hi`` may be ``inf``) and ``*``.  Distribution entries
are ``value: prob`` or ``target: value @ prob``; probabilities are
decimals or fractions and are kept exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from .schema import FeatureDef, FeatureSpace, Name, Range, Schema, SchemaError, Term
from .theory import PredictiveTheory, TheoryError, build_theory


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        super().__init__(f"line {line}, column {column}: {message}")


class SituationError(ValueError):
    pass


@dataclass(frozen=True)
class Span:
    line: int
    column: int


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    values: tuple[str, ...] | None = None
    low: int | None = None
    high: int | None = None
    action: bool = False
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class HierarchyDecl:
    feature: str
    node: str
    members: tuple[Term, ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TargetDecl:
    feature: str
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Prob:
    value: Fraction
    text: str = field(default="", compare=False)

    def __str__(self) -> str:
        return self.text or str(self.value)


@dataclass(frozen=True)
class RuleDecl:
    id: str | None
    bindings: tuple[tuple[str, tuple[Term, ...]], ...]
    distribution: tuple[tuple[str, Prob], ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TheoryDocument:
    statements: tuple[FeatureDecl | HierarchyDecl | TargetDecl | RuleDecl, ...]

    @property
    def features(self) -> list[FeatureDecl]:
        return [s for s in self.statements if isinstance(s, FeatureDecl)]

    @property
    def hierarchies(self) -> list[HierarchyDecl]:
        return [s for s in self.statements if isinstance(s, HierarchyDecl)]

    @property
    def targets(self) -> list[TargetDecl]:
        return [s for s in self.statements if isinstance(s, TargetDecl)]

    @property
    def rules(self) -> list[RuleDecl]:
        return [s for s in self.statements if isinstance(s, RuleDecl)]


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<arrow>->)
  | (?P<dots>\.\.)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_](?:[A-Za-z0-9_]|-(?!>))*)
  | (?P<punct>[{}=,|:@/*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, punct text, 'eof'
    text: str
    line: int
    column: int

    def describe(self) -> str:
        return "end of input" if self.kind == "eof" else repr(self.text)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tok_kind = {"arrow": "->", "dots": "..", "punct": m.group()}.get(kind, kind)
            tokens.append(Token(tok_kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, expected: set[str]):
        tok = self.tok
        exp = ", ".join(sorted(expected))
        raise ParseError(f"expected {exp}, got {tok.describe()}", tok.line, tok.column, frozenset(expected))

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            self.fail({text or kind})
        tok = self.tok
        self.i += 1
        return tok

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.expect(kind, text)
        return None

    def document(self) -> TheoryDocument:
        stmts = []
        while not self.at("eof"):
            stmts.append(self.statement())
        return TheoryDocument(tuple(stmts))

    def statement(self):
        tok = self.tok
        span = Span(tok.line, tok.column)
        if tok.kind == "ident":
            if tok.text in ("feature", "action"):
                return self.feature(span)
            if tok.text == "hierarchy":
                return self.hierarchy(span)
            if tok.text == "target":
                self.i += 1
                return TargetDecl(self.expect("ident").text, span)
            if tok.text == "rule":
                return self.rule(span)
        self.fail({"'action'", "'feature'", "'hierarchy'", "'rule'", "'target'"})

    def feature(self, span: Span) -> FeatureDecl:
        action = bool(self.accept("ident", "action"))
        self.expect("ident", "feature")
        name = self.expect("ident").text
        self.expect("ident", "values")
        if self.accept("ident", "int"):
            low = self.integer()
            self.expect("..")
            high = None if self.accept("ident", "inf") else self.integer()
            return FeatureDecl(name, None, low, high, action, span)
        self.expect("{")
        values = [self.value()]
        while self.accept(","):
            values.append(self.value())
        self.expect("}")
        return FeatureDecl(name, tuple(values), None, None, action, span)

    def hierarchy(self, span: Span) -> HierarchyDecl:
        self.expect("ident", "hierarchy")
        feature = self.expect("ident").text
        self.expect(":")
        node = self.expect("ident").text
        self.expect("=")
        self.expect("{")
        members = [self.term()]
        while self.accept(","):
            members.append(self.term())
        self.expect("}")
        return HierarchyDecl(feature, node, tuple(members), span)

    def rule(self, span: Span) -> RuleDecl:
        self.expect("ident", "rule")
        rid = None
        if self.at("ident"):
            rid = self.expect("ident").text
        bindings = []
        if self.accept("{"):
            if not self.accept("}"):
                bindings.append(self.binding())
                while self.accept(","):
                    bindings.append(self.binding())
                self.expect("}")
        if not self.at("->"):
            self.fail({"'->'"} if bindings or rid is None else {"'->'", "'{'"})
        self.expect("->")
        self.expect("{")
        entries = [self.entry()]
        while self.accept(","):
            entries.append(self.entry())
        self.expect("}")
        return RuleDecl(rid, tuple(bindings), tuple(entries), span)

    def binding(self) -> tuple[str, tuple[Term, ...]]:
        name = self.expect("ident").text
        self.expect("=")
        terms = [self.term()]
        while self.accept("|"):
            terms.append(self.term())
        return name, tuple(terms)

    def term(self) -> Term:
        if self.accept("*"):
            return Name("*")
        if self.at("number") and self.peek().kind == "..":
            low = self.integer()
            self.expect("..")
            high = None if self.accept("ident", "inf") else self.integer()
            if high is not None and high < low:
                tok = self.toks[self.i - 1]
                raise ParseError(f"empty range {low}..{high}", tok.line, tok.column)
            return Range(low, high)
        return Name(self.value())

    def value(self) -> str:
        if self.at("ident") or self.at("number"):
            tok = self.tok
            self.i += 1
            return tok.text
        self.fail({"value"})

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "number" or "." in tok.text:
            self.fail({"integer"})
        self.i += 1
        return int(tok.text)

    def entry(self) -> tuple[str, Prob]:
        first = self.value()
        self.expect(":")
        if (self.at("ident") or self.at("number")) and self.peek().kind == "@":
            value = self.value()  # ``target: value @ prob``; first was the target name
            self.expect("@")
            return value, self.prob()
        return first, self.prob()

    def prob(self) -> Prob:
        tok = self.tok
        if tok.kind != "number":
            self.fail({"probability"})
        self.i += 1
        text = tok.text
        if self.accept("/"):
            den = self.tok
            if den.kind != "number" or "." in den.text:
                self.fail({"integer"})
            self.i += 1
            if int(den.text) == 0:
                raise ParseError("zero denominator", den.line, den.column)
            text = f"{text}/{den.text}"
        return Prob(Fraction(text), text)


def parse_theory(text: str) -> TheoryDocument:
    return _Parser(text).document()


# ---------------------------------------------------------------------------
# printer


def _terms(terms) -> str:
    return " | ".join(str(t) for t in terms)


def print_theory(doc: TheoryDocument) -> str:
    lines = []
    for s in doc.statements:
        if isinstance(s, FeatureDecl):
            head = ("action " if s.action else "") + f"feature {s.name} values "
            if s.values is not None:
                lines.append(head + "{ " + ", ".join(s.values) + " }")
            else:
                lines.append(head + f"int {s.low}..{'inf' if s.high is None else s.high}")
        elif isinstance(s, HierarchyDecl):
            lines.append(f"hierarchy {s.feature}: {s.node} = {{ " + ", ".join(str(m) for m in s.members) + " }")
        elif isinstance(s, TargetDecl):
            lines.append(f"target {s.feature}")
        else:
            head = "rule" + (f" {s.id}" if s.id else "")
            ctx = ", ".join(f"{n} = {_terms(t)}" for n, t in s.bindings)
            dist = ", ".join(f"{v}: {p}" for v, p in s.distribution)
            lines.append(f"{head} {{ {ctx} }} -> {{ {dist} }}" if ctx else f"{head} {{ }} -> {{ {dist} }}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# document -> theory


def _where(stmt) -> str:
    return f"line {stmt.span.line}: " if stmt.span else ""


def build_space(doc: TheoryDocument) -> FeatureSpace:
    feats = []
    for f in doc.features:
        try:
            feats.append(FeatureDef(f.name, f.values, f.low, f.high, f.action))
        except SchemaError as exc:
            raise TheoryError(_where(f) + str(exc)) from exc
    hierarchy: dict[str, dict[str, tuple[Term, ...]]] = {}
    for h in doc.hierarchies:
        nodes = hierarchy.setdefault(h.feature, {})
        if h.node in nodes:
            raise TheoryError(_where(h) + f"hierarchy node {h.node!r} defined twice")
        nodes[h.node] = h.members
    try:
        return FeatureSpace(tuple(feats), hierarchy)
    except SchemaError as exc:
        raise TheoryError(str(exc)) from exc


def document_to_theory(doc: TheoryDocument) -> PredictiveTheory:
    space = build_space(doc)
    if len(doc.targets) != 1:
        raise TheoryError(f"expected exactly one target declaration, found {len(doc.targets)}")
    target = doc.targets[0]
    if target.feature not in space:
        raise TheoryError(_where(target) + f"target {target.feature!r} is not declared")
    rules = []
    for pos, r in enumerate(doc.rules, start=1):
        try:
            ctx = Schema({name: space.expand(name, terms) for name, terms in r.bindings})
            if len(ctx) != len(r.bindings):
                raise SchemaError("a feature is bound twice in one context")
        except SchemaError as exc:
            raise TheoryError(_where(r) + f"rule {r.id or f'r{pos}'}: {exc}") from exc
        rules.append((r.id, ctx, [(v, p.value) for v, p in r.distribution]))
    try:
        return build_theory(space, target.feature, rules)
    except (TheoryError, SchemaError) as exc:
        raise TheoryError(str(exc)) from exc


def load_theory(text: str) -> PredictiveTheory:
    return document_to_theory(parse_theory(text))


def parse_situation(text: str, space: FeatureSpace, target: str | None = None) -> Schema:
    """``feature=value`` pairs, comma separated; ``*`` binds the whole domain."""
    out = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        name, eq, value = chunk.partition("=")
        name, value = name.strip(), value.strip()
        if not eq or not name or not value:
            raise SituationError(f"malformed binding {chunk!r}; expected feature=value")
        if name not in space:
            raise SituationError(f"unknown feature {name!r}")
        if name == target:
            raise SituationError(f"situation cannot bind the target feature {name!r}")
        if name in out:
            raise SituationError(f"feature {name!r} bound twice")
        fd = space.feature(name)
        try:
            out[name] = fd.universe if value == "*" else fd.point(value)
        except SchemaError as exc:
            raise SituationError(str(exc)) from exc
    return Schema(out)
