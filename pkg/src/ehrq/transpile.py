"""SQL -> SPARQL translation, schema renormalization, and template sampling."""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (EmptyColumn, InvalidJoin, ParseError, SchemaError, UnknownColumn,
                     UnmappedColumn, UnsupportedFeature)
from .query.sparql import Aggregate, EntityRef, Filter, SparqlQuery, TriplePattern, Var
from .query.sql import ColumnRef, Condition, Join, SelectItem, SqlQuery, parse_sql
from .query.tokens import Slot
from .relational import Database
from .schema import (FOREIGN_KEY, EntityClass, SchemaGraph, SchemaManifest,
                     shortest_relation_path)

AGG_ALIAS = "agg"


def _node(graph: SchemaGraph, col: ColumnRef):
    try:
        return graph.node_for_column(col.table, col.column)
    except (SchemaError, AttributeError):
        raise UnknownColumn(f"unknown column {col}") from None


def _check_join(manifest: SchemaManifest, join: Join) -> None:
    # the graph decides how tables connect, so the ON clause must agree with it
    for child, parent in ((join.left, join.right), (join.right, join.left)):
        for col in (child, parent):
            t = manifest.table(col.table)
            if t is None or t.column(col.column) is None:
                raise UnknownColumn(f"unknown column {col}")
        spec = manifest.table(child.table).column(child.column)
        if spec.role == FOREIGN_KEY and spec.references == parent.table \
                and manifest.table(parent.table).primary_key == parent.column:
            return
    raise InvalidJoin(f"{join.left} = {join.right} is not a foreign key / primary key link")


class _PathUnion:
    """Schema edges reached from a root, each kept once, in discovery order."""

    def __init__(self, graph: SchemaGraph, root):
        self.graph = graph
        self.root = root
        self.edges: list[tuple] = []
        self._seen = set()
        self.nodes = [root]

    def add(self, target):
        cur = self.root
        for rel, nxt in shortest_relation_path(self.graph, self.root, target).hops:
            edge = (cur, rel, nxt)
            if edge not in self._seen:
                self._seen.add(edge)
                self.edges.append(edge)
                if nxt not in self.nodes:
                    self.nodes.append(nxt)
            cur = nxt


def _variable_names(graph: SchemaGraph, nodes) -> dict:
    names = {}
    taken = {AGG_ALIAS}
    for node in nodes:
        if isinstance(node, EntityClass):
            base = graph.manifest.entity_name(node.table)
        else:
            base = node.column
        name, k = base, 1
        while name in taken:
            k += 1
            name = f"{base}{k}"
        taken.add(name)
        names[node] = name
    return names


def sql_to_sparql(q: SqlQuery, graph: SchemaGraph) -> SparqlQuery:
    """Translate a SQL query into a SPARQL query over the compiled graph.

    The root variable is the topmost table of the query.  Paths from the root
    to every involved table and every referenced column are unioned, each
    schema edge becoming one triple pattern.  A column with a single equality
    condition (and not projected) is replaced by its value in place; every
    other condition becomes a filter.
    """
    for t in q.tables:
        if graph.manifest.table(t) is None:
            raise UnknownColumn(f"unknown table {t!r}")
    for j in q.joins:
        _check_join(graph.manifest, j)
    cond_nodes = [_node(graph, c.column) for c in q.conditions]
    sel_nodes = [_node(graph, i.column) for i in q.select]
    # a foreign key column is its parent's entity, which may sit above the query's tables
    parents = [n.table for n in cond_nodes + sel_nodes if isinstance(n, EntityClass)]
    root = graph.entity(graph.root_table(list(q.tables) + parents))
    union = _PathUnion(graph, root)
    for t in q.tables:
        union.add(graph.entity(t))
    for node in cond_nodes + sel_nodes:
        union.add(node)
    names = _variable_names(graph, union.nodes)

    by_node: dict = {}
    for node, cond in zip(cond_nodes, q.conditions):
        by_node.setdefault(node, []).append(cond)
    substitute = {}
    filters = []
    for node, conds in by_node.items():
        if len(conds) == 1 and conds[0].op == "=" and node not in sel_nodes:
            value = conds[0].value
            if isinstance(node, EntityClass):
                value = EntityRef(graph.manifest.entity_name(node.table), str(value))
            substitute[node] = value
    for node, cond in zip(cond_nodes, q.conditions):
        if node not in substitute:
            filters.append(Filter(Var(names[node]), cond.op, cond.value))

    def term(node):
        return substitute[node] if node in substitute else Var(names[node])

    patterns = tuple(TriplePattern(term(a), "/" + rel, term(b)) for a, rel, b in union.edges)
    in_patterns = {a for a, _, _ in union.edges} | {b for _, _, b in union.edges}
    for node in sel_nodes + [n for n in cond_nodes if n not in substitute]:
        if node not in in_patterns:
            raise UnsupportedFeature(
                f"{node} is bound by no triple pattern; the query has nothing to match on"
            )

    if q.is_aggregate:
        if len(q.select) != 1:
            raise UnsupportedFeature("only a single aggregate can be projected in SPARQL")
        projection = Aggregate(q.select[0].agg, Var(names[sel_nodes[0]]), Var(AGG_ALIAS))
    else:
        projection = tuple(Var(names[n]) for n in sel_nodes)
    return SparqlQuery(projection, patterns, tuple(filters))


def pattern_edge_count(q: SqlQuery, graph: SchemaGraph) -> int:
    """Distinct schema edges on the root paths of a query (no substitution logic)."""
    nodes = [_node(graph, c) for c in q.columns()]
    parents = [n.table for n in nodes if isinstance(n, EntityClass)]
    root = graph.entity(graph.root_table(list(q.tables) + parents))
    edges = set()
    targets = [graph.entity(t) for t in q.tables] + nodes
    for target in targets:
        cur = root
        for rel, nxt in shortest_relation_path(graph, root, target).hops:
            edges.add((cur, rel, nxt))
            cur = nxt
    return len(edges)


# ---------------------------------------------------------------------------
# renormalization


@dataclass
class ColumnMapping:
    """Source column -> target column, plus the target table whose rows
    correspond one-to-one with each source table's rows (its grain)."""

    columns: dict[tuple[str, str], tuple[str, str]]
    grain: dict[str, str] = field(default_factory=dict)

    @classmethod
    def identity(cls, manifest: SchemaManifest) -> "ColumnMapping":
        cols = {(t.name, c.name): (t.name, c.name)
                for t in manifest.tables for c in t.effective_columns}
        return cls(cols, {t.name: t.name for t in manifest.tables})

    @classmethod
    def from_json(cls, data) -> "ColumnMapping":
        try:
            cols = {}
            for src, dst in data["columns"].items():
                st, sc = src.lower().split(".")
                dt, dc = dst.lower().split(".")
                cols[(st, sc)] = (dt, dc)
            grain = {k.lower(): v.lower() for k, v in data.get("grain", {}).items()}
        except (KeyError, AttributeError, ValueError) as exc:
            raise ParseError(f"malformed column mapping ({exc})") from exc
        return cls(cols, grain)

    def to_json(self) -> dict:
        return {
            "columns": {f"{s}.{c}": f"{t}.{d}" for (s, c), (t, d) in self.columns.items()},
            "grain": dict(self.grain),
        }

    def target(self, col: ColumnRef) -> ColumnRef:
        try:
            return ColumnRef(*self.columns[(col.table, col.column)])
        except KeyError:
            raise UnmappedColumn(f"no mapping for column {col}") from None


def load_mapping(path) -> ColumnMapping:
    try:
        return ColumnMapping.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def renormalize_sql(q: SqlQuery, mapping: ColumnMapping, target: SchemaGraph) -> SqlQuery:
    """Rewrite a query onto the target schema, rebuilding the join chain.

    The involved target tables are the grains of the source tables plus the
    tables of the mapped columns; joins are the FK=PK links along the shortest
    paths from the topmost involved table, in discovery order.
    """
    select = tuple(SelectItem(mapping.target(i.column), i.agg) for i in q.select)
    conds = tuple(Condition(mapping.target(c.column), c.op, c.value) for c in q.conditions)
    involved = []
    for t in q.tables:
        g = mapping.grain.get(t, t)
        if target.manifest.table(g) is None:
            raise UnmappedColumn(f"no target table for source table {t!r}")
        involved.append(g)
    for col in [i.column for i in select] + [c.column for c in conds]:
        spec = target.manifest.table(col.table)
        if spec is None or spec.column(col.column) is None:
            raise UnmappedColumn(f"mapping target {col} is not in the target schema")
        involved.append(col.table)
    involved = list(dict.fromkeys(involved))
    root = target.root_table(involved)
    placed = {root}
    joins = []
    for t in involved:
        prev = root
        for nxt in target.table_path(root, t):
            if nxt not in placed:
                pk, fk = target.join_columns(prev, nxt)
                joins.append(Join(nxt, ColumnRef(prev, pk), ColumnRef(nxt, fk)))
                placed.add(nxt)
            prev = nxt
    return SqlQuery(select, root, tuple(joins), conds)


# ---------------------------------------------------------------------------
# templates and corpus sampling

_SLOT = re.compile(r"\|([a-z_][a-z0-9_]*)\|")


@dataclass(frozen=True)
class QueryTemplate:
    nlq: str
    sql: SqlQuery
    slots: dict

    def __post_init__(self):
        sql_slots = {c.value.name for c in self.sql.conditions if isinstance(c.value, Slot)}
        nlq_slots = set(_SLOT.findall(self.nlq))
        missing = sql_slots - nlq_slots
        if missing:
            raise ParseError(f"template slots {sorted(missing)} do not appear in the question")
        unknown = sql_slots - set(self.slots)
        if unknown:
            raise ParseError(f"template slots {sorted(unknown)} have no column")


def template_from_json(entry) -> QueryTemplate:
    try:
        slots = {}
        for name, col in entry["slots"].items():
            table, column = col.lower().split(".")
            slots[name.lower()] = ColumnRef(table, column)
        return QueryTemplate(entry["nlq"].lower(), parse_sql(entry["sql"], allow_slots=True),
                             slots)
    except (KeyError, AttributeError, ValueError) as exc:
        raise ParseError(f"malformed template ({exc})") from exc


def load_templates(path) -> list[QueryTemplate]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON array of templates")
    return [template_from_json(e) for e in data]


def _value_key(v):
    return (0, v) if isinstance(v, str) else (1, float(v))


def sample_query_corpus(templates, db: Database, n: int, seed: int):
    """``n`` (question, query) pairs; templates are used round-robin and each
    slot value is drawn uniformly from its column's distinct non-null values."""
    rng = random.Random(seed)
    pools = {}

    def pool(col: ColumnRef):
        key = (col.table, col.column)
        if key not in pools:
            values = sorted({v for v in db.column_values(col.table, col.column)
                             if v is not None}, key=_value_key)
            if not values:
                raise EmptyColumn(f"column {col} has no values to sample")
            pools[key] = values
        return pools[key]

    out = []
    if not templates:
        return out
    for i in range(n):
        t = templates[i % len(templates)]
        values = {name: rng.choice(pool(col)) for name, col in t.slots.items()}
        nlq = _SLOT.sub(lambda m: str(values.get(m.group(1), m.group(0))), t.nlq)
        out.append((nlq, t.sql.with_values(values)))
    return out
