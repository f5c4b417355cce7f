"""AST, parser, and canonical serializer for the SQL subset.

Grammar::

    select <item> (, <item>)* from <table>
        ((inner)? join <table> on <col> = <col>)*
        (where <col> <op> <value> (and <col> <op> <value>)*)?

Columns may be written fused (``patients.age``) or split (``patients . age``);
a bare column name is accepted when the query touches a single table.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import SqlSyntaxError, UnsupportedFeature
from .tokens import (AGGREGATES, COMPARISON_OPS, MASKED, Slot, Tok, format_value,
                     lex, parse_value)

FUSED = "fused"
SPLIT = "split"
TOKENIZATIONS = (FUSED, SPLIT)

_UNSUPPORTED = {
    "distinct", "or", "like", "group", "order", "by", "limit", "having", "not", "in",
    "between", "union", "left", "right", "outer", "full", "cross", "is", "null",
    "exists", "as", "offset", "*", "<>", "!=",
}
_KEYWORDS = {"select", "from", "inner", "join", "on", "where", "and"} | set(AGGREGATES)


@dataclass(frozen=True)
class ColumnRef:
    table: str | None
    column: str

    def __str__(self):
        return f"{self.table}.{self.column}"


@dataclass(frozen=True)
class SelectItem:
    column: ColumnRef
    agg: str | None = None


@dataclass(frozen=True)
class Join:
    table: str
    left: ColumnRef
    right: ColumnRef


@dataclass(frozen=True)
class Condition:
    column: ColumnRef
    op: str
    value: object


@dataclass(frozen=True)
class SqlQuery:
    select: tuple[SelectItem, ...]
    from_table: str
    joins: tuple[Join, ...] = ()
    conditions: tuple[Condition, ...] = ()

    @property
    def tables(self) -> tuple[str, ...]:
        return (self.from_table,) + tuple(j.table for j in self.joins)

    @property
    def is_aggregate(self) -> bool:
        return any(item.agg for item in self.select)

    def columns(self) -> list[ColumnRef]:
        """Select and condition columns in textual order (join keys excluded)."""
        return [i.column for i in self.select] + [c.column for c in self.conditions]

    def with_values(self, values: dict) -> "SqlQuery":
        """Fill template slots by name."""
        conds = tuple(
            replace(c, value=values[c.value.name]) if isinstance(c.value, Slot) else c
            for c in self.conditions
        )
        return replace(self, conditions=conds)


class _Parser:
    def __init__(self, toks: list[Tok], allow_slots: bool):
        self.toks = toks
        self.i = 0
        self.allow_slots = allow_slots

    def peek(self, offset=0) -> Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def fail(self, msg):
        raise SqlSyntaxError(msg, self.i)

    def next(self) -> Tok:
        tok = self.peek()
        if tok is None:
            self.fail("unexpected end of query")
        if tok.text in _UNSUPPORTED:
            raise UnsupportedFeature(f"{tok.text!r} is not supported", self.i)
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            self.i -= 1
            self.fail(f"expected {text!r}, found {tok.text!r}")
        return tok

    def accept(self, text) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def ident(self, what) -> str:
        tok = self.next()
        if tok.kind != "word" or "." in tok.text or tok.text in _KEYWORDS:
            self.i -= 1
            self.fail(f"expected {what}, found {tok.text!r}")
        return tok.text

    def column(self) -> ColumnRef:
        tok = self.next()
        if tok.kind != "word" or tok.text in _KEYWORDS:
            self.i -= 1
            self.fail(f"expected column, found {tok.text!r}")
        if "." in tok.text:
            table, col = tok.text.split(".")
            return ColumnRef(table, col)
        if self.accept("."):
            return ColumnRef(tok.text, self.ident("column name"))
        return ColumnRef(None, tok.text)

    def value(self):
        tok = self.next()
        val = parse_value(tok)
        if val is None and tok.kind == "word" and "." not in tok.text \
                and tok.text not in _KEYWORDS:
            nxt = self.peek()
            if nxt is not None and nxt.text == ".":
                self.fail("column comparisons are not supported")
            return tok.text  # bare word literal, e.g. ``= antihypertensive``
        if val is None:
            self.i -= 1
            self.fail(f"expected a value, found {tok.text!r}")
        if isinstance(val, Slot) and not self.allow_slots:
            self.i -= 1
            self.fail("template slot outside a template")
        return val

    def query(self) -> SqlQuery:
        self.expect("select")
        items = [self.select_item()]
        while self.accept(","):
            items.append(self.select_item())
        self.expect("from")
        from_table = self.ident("table name")
        joins = []
        while True:
            if self.accept("inner"):
                self.expect("join")
            elif not self.accept("join"):
                break
            table = self.ident("table name")
            self.expect("on")
            left = self.column()
            self.expect("=")
            right = self.column()
            joins.append(Join(table, left, right))
        conds = []
        if self.accept("where"):
            conds.append(self.condition())
            while self.accept("and"):
                conds.append(self.condition())
        self.accept(";")
        if self.peek() is not None:
            self.next()
            self.i -= 1
            self.fail(f"unexpected {self.peek().text!r}")
        return SqlQuery(tuple(items), from_table, tuple(joins), tuple(conds))

    def select_item(self) -> SelectItem:
        tok = self.peek()
        if tok is not None and tok.text in AGGREGATES:
            self.i += 1
            self.expect("(")
            col = self.column()
            self.expect(")")
            return SelectItem(col, tok.text)
        return SelectItem(self.column())

    def condition(self) -> Condition:
        col = self.column()
        tok = self.next()
        if tok.text not in COMPARISON_OPS:
            self.i -= 1
            self.fail(f"expected comparison operator, found {tok.text!r}")
        return Condition(col, tok.text, self.value())


def _resolve(q: SqlQuery) -> SqlQuery:
    """Qualify bare columns and check the join chain."""
    tables = q.tables
    if len(set(tables)) != len(tables):
        raise UnsupportedFeature("a table may appear only once (no self joins)")

    def fix(col: ColumnRef, where) -> ColumnRef:
        if col.table is None:
            if len(tables) != 1:
                raise SqlSyntaxError(f"unqualified column {col.column!r} {where} is ambiguous")
            return ColumnRef(tables[0], col.column)
        return col

    seen = {q.from_table}
    joins = []
    for j in q.joins:
        left, right = fix(j.left, "in a join"), fix(j.right, "in a join")
        sides = {left.table, right.table}
        if j.table not in sides or len(sides) != 2 or not (sides - {j.table}) <= seen:
            raise SqlSyntaxError(
                f"join on {left} = {right} must link {j.table!r} to an earlier table"
            )
        seen.add(j.table)
        joins.append(Join(j.table, left, right))
    select = tuple(SelectItem(fix(s.column, "in select"), s.agg) for s in q.select)
    conds = tuple(Condition(fix(c.column, "in where"), c.op, c.value) for c in q.conditions)
    for col in [s.column for s in select] + [c.column for c in conds]:
        if col.table not in seen:
            raise SqlSyntaxError(f"column {col} refers to a table outside from/join")
    if len({s.agg is None for s in select}) > 1:
        raise UnsupportedFeature("mixing aggregates and plain columns needs group by")
    return SqlQuery(select, q.from_table, tuple(joins), conds)


def parse_sql(text, allow_slots: bool = False) -> SqlQuery:
    """Parse query text (or a token list) into a :class:`SqlQuery`."""
    if isinstance(text, (list, tuple)):
        text = " ".join(text)
    toks = lex(text, error=SqlSyntaxError)
    return _resolve(_Parser(toks, allow_slots).query())


def _col_tokens(col: ColumnRef, mode: str) -> list[str]:
    if mode == FUSED:
        return [f"{col.table}.{col.column}"]
    return [col.table, ".", col.column]


def serialize_sql(q: SqlQuery, mode: str = SPLIT) -> list[str]:
    if mode not in TOKENIZATIONS:
        raise ValueError(f"unknown tokenization {mode!r}")
    out = ["select"]
    for n, item in enumerate(q.select):
        if n:
            out.append(",")
        if item.agg:
            out += [item.agg, "("] + _col_tokens(item.column, mode) + [")"]
        else:
            out += _col_tokens(item.column, mode)
    out += ["from", q.from_table]
    for j in q.joins:
        out += ["inner", "join", j.table, "on"]
        out += _col_tokens(j.left, mode) + ["="] + _col_tokens(j.right, mode)
    for n, c in enumerate(q.conditions):
        out.append("where" if n == 0 else "and")
        out += _col_tokens(c.column, mode) + [c.op, format_value(c.value)]
    return out


def sql_text(q: SqlQuery, mode: str = SPLIT) -> str:
    return " ".join(serialize_sql(q, mode))


def count_joins(tokens: list[str]) -> int:
    return sum(1 for a, b in zip(tokens, tokens[1:]) if a == "inner" and b == "join")


__all__ = [
    "ColumnRef", "SelectItem", "Join", "Condition", "SqlQuery", "parse_sql",
    "serialize_sql", "sql_text", "count_joins", "FUSED", "SPLIT", "TOKENIZATIONS", "MASKED",
]
