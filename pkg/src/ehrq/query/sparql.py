"""AST, parser, and canonical serializer for the SPARQL subset.

Grammar::

    select (?v+ | ( <agg> ( ?v ) as ?alias )) where {
        (<term> </relation> <term> .)*
        (filter ( ?v <op> <value> ))*
    }

Relations are single tokens ``</name>``; entity constants are ``</key/value>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union
from urllib.parse import quote, unquote

from ..errors import SparqlSyntaxError, UnboundProjectionVariable, UnsupportedFeature
from .tokens import AGGREGATES, COMPARISON_OPS, Tok, format_value, lex, parse_value


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return f"?{self.name}"


@dataclass(frozen=True)
class EntityRef:
    """Constant entity ``</key/value>``; value kept as text until execution."""

    key: str
    value: str

    def __str__(self):
        return f"</{self.key}/{quote(self.value, safe='')}>"


Term = Union[Var, EntityRef, str, int, float]


@dataclass(frozen=True)
class Aggregate:
    func: str
    var: Var
    alias: Var = Var("agg")


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: str  # "/name"
    object: Term


@dataclass(frozen=True)
class Filter:
    var: Var
    op: str
    value: object


@dataclass(frozen=True)
class SparqlQuery:
    projection: Union[tuple[Var, ...], Aggregate]
    patterns: tuple[TriplePattern, ...]
    filters: tuple[Filter, ...] = ()

    @property
    def is_aggregate(self) -> bool:
        return isinstance(self.projection, Aggregate)

    @property
    def projected(self) -> tuple[Var, ...]:
        if self.is_aggregate:
            return (self.projection.var,)
        return self.projection

    def variables(self) -> set[Var]:
        out = set()
        for p in self.patterns:
            out.update(t for t in (p.subject, p.object) if isinstance(t, Var))
        return out


def _term_token(term) -> str:
    if isinstance(term, (Var, EntityRef)):
        return str(term)
    return format_value(term)


def serialize_sparql(q: SparqlQuery) -> list[str]:
    out = ["select"]
    if q.is_aggregate:
        a = q.projection
        out += ["(", a.func, "(", str(a.var), ")", "as", str(a.alias), ")"]
    else:
        out += [str(v) for v in q.projection]
    out += ["where", "{"]
    for p in q.patterns:
        out += [_term_token(p.subject), f"<{p.predicate}>", _term_token(p.object), "."]
    for f in q.filters:
        out += ["filter", "(", str(f.var), f.op, _term_token(f.value), ")"]
    out.append("}")
    return out


def sparql_text(q: SparqlQuery) -> str:
    return " ".join(serialize_sparql(q))


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0

    def fail(self, msg):
        raise SparqlSyntaxError(msg, self.i)

    def peek(self) -> Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self) -> Tok:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of query")
        if tok.text in ("distinct", "optional", "union", "order", "limit", "group", "||", "!="):
            raise UnsupportedFeature(f"{tok.text!r} is not supported", self.i)
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            self.i -= 1
            self.fail(f"expected {text!r}, found {tok.text!r}")

    def accept(self, text) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def var(self) -> Var:
        tok = self.next()
        if tok.kind != "var":
            self.i -= 1
            self.fail(f"expected variable, found {tok.text!r}")
        return Var(tok.text[1:])

    def term(self, allow_literal: bool):
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "iri":
            ref = _entity_ref(tok.text)
            if ref is None:
                self.i -= 1
                self.fail(f"relation {tok.text} where an entity or variable was expected")
            return ref
        val = parse_value(tok) if allow_literal else None
        if val is None:
            self.i -= 1
            self.fail(f"unexpected {tok.text!r}")
        return val

    def query(self) -> SparqlQuery:
        self.expect("select")
        if self.accept("("):
            func = self.next().text
            if func not in AGGREGATES:
                self.i -= 1
                self.fail(f"unknown aggregate {func!r}")
            self.expect("(")
            v = self.var()
            self.expect(")")
            self.expect("as")
            alias = self.var()
            self.expect(")")
            projection = Aggregate(func, v, alias)
        else:
            vars_ = [self.var()]
            while self.peek() is not None and self.peek().kind == "var":
                vars_.append(self.var())
            projection = tuple(vars_)
        self.expect("where")
        self.expect("{")
        patterns = []
        filters = []
        while True:
            tok = self.peek()
            if tok is None:
                self.fail("unterminated group")
            if tok.text in ("}", "filter"):
                break
            s = self.term(allow_literal=False)
            p = self.next()
            if p.kind != "iri" or _entity_ref(p.text) is not None:
                self.i -= 1
                self.fail(f"expected relation, found {p.text!r}")
            o = self.term(allow_literal=True)
            patterns.append(TriplePattern(s, p.text[1:-1], o))
            if not self.accept("."):
                nxt = self.peek()
                if nxt is None or nxt.text not in ("}", "filter"):
                    self.fail("expected '.' after triple pattern")
        while self.accept("filter"):
            self.expect("(")
            v = self.var()
            op = self.next().text
            if op not in COMPARISON_OPS:
                self.i -= 1
                self.fail(f"unsupported filter operator {op!r}")
            value = self.term(allow_literal=True)
            if isinstance(value, Var):
                raise UnsupportedFeature("variable-to-variable filters are not supported")
            self.expect(")")
            filters.append(Filter(v, op, value))
        self.expect("}")
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek().text!r} after query")
        return SparqlQuery(projection, tuple(patterns), tuple(filters))


def _entity_ref(iri: str) -> EntityRef | None:
    body = iri[2:-1]
    if "/" not in body:
        return None
    key, _, value = body.partition("/")
    return EntityRef(key, unquote(value))


def _check(q: SparqlQuery) -> SparqlQuery:
    bound = q.variables()
    for v in q.projected:
        if v not in bound:
            raise UnboundProjectionVariable(f"projected variable {v} appears in no pattern")
    for f in q.filters:
        if f.var not in bound:
            raise UnboundProjectionVariable(f"filtered variable {f.var} appears in no pattern")
    # connectivity over variables and entity constants
    parent = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            x = parent[x]
        return x

    nodes = []
    for p in q.patterns:
        ends = [t for t in (p.subject, p.object) if isinstance(t, (Var, EntityRef))]
        nodes += ends
        for t in ends[1:]:
            parent[find(ends[0])] = find(t)
    if len({find(n) for n in nodes}) > 1:
        raise SparqlSyntaxError("triple patterns do not form a connected graph")
    return q


def parse_sparql(text) -> SparqlQuery:
    if isinstance(text, (list, tuple)):
        text = " ".join(text)
    return _check(_Parser(lex(text, error=SparqlSyntaxError)).query())


def count_patterns(tokens: list[str]) -> int:
    """Number of triple patterns in a canonical token stream."""
    try:
        start = tokens.index("{") + 1
    except ValueError:
        return 0
    n = 0
    i = start
    while i + 3 < len(tokens) and tokens[i] not in ("filter", "}"):
        n += 1
        i += 4
    return n
