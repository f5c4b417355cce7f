"""Schema manifests, the derived relation graph, and shortest relation paths.

The relation graph has one entity node per table (its key) and one literal
node per property column.  Edges run parent entity -> child entity (labelled
with the child table name) and entity -> literal (labelled with the column
name).  Paths are only ever followed in that direction.
"""
from __future__ import annotations

import heapq
import itertools
import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .errors import NoPath, ParseError, SchemaError

PRIMARY_KEY = "primary_key"
FOREIGN_KEY = "foreign_key"
PROPERTY = "property"
ROLES = (PRIMARY_KEY, FOREIGN_KEY, PROPERTY)
DATATYPES = ("text", "integer", "float")

# tables without a declared key get this synthetic integer key at load time
SYNTHETIC_KEY = "row_id"

_IDENT = re.compile(r"[a-z_][a-z0-9_]*\Z")


def check_identifier(name: str, what: str) -> str:
    if not isinstance(name, str) or not _IDENT.match(name):
        raise SchemaError(f"invalid {what} name {name!r}")
    return name


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str = PROPERTY
    datatype: str = "text"
    references: str | None = None

    @property
    def is_key(self) -> bool:
        return self.role != PROPERTY


@dataclass(frozen=True)
class TableSpec:
    name: str
    columns: tuple[ColumnSpec, ...]
    primary_key: str | None = None

    @property
    def key_column(self) -> str:
        return self.primary_key or SYNTHETIC_KEY

    @property
    def has_synthetic_key(self) -> bool:
        return self.primary_key is None

    @property
    def column_names(self) -> tuple[str, ...]:
        """Declared columns, i.e. the expected CSV header."""
        return tuple(c.name for c in self.columns)

    @property
    def effective_columns(self) -> tuple[ColumnSpec, ...]:
        """Columns as stored in a loaded table (synthetic key first)."""
        if self.has_synthetic_key:
            return (ColumnSpec(SYNTHETIC_KEY, PRIMARY_KEY, "integer"),) + self.columns
        return self.columns

    @property
    def properties(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.role == PROPERTY)

    @property
    def foreign_keys(self) -> tuple[ColumnSpec, ...]:
        return tuple(c for c in self.columns if c.role == FOREIGN_KEY)

    def column(self, name: str) -> ColumnSpec | None:
        for c in self.effective_columns:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class SchemaManifest:
    tables: tuple[TableSpec, ...] = ()

    def __post_init__(self):
        _validate_manifest(self)

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def table(self, name: str) -> TableSpec | None:
        for t in self.tables:
            if t.name == name:
                return t
        return None

    def entity_name(self, table: str) -> str:
        """Namespace of the table's row entities in the knowledge graph.

        Declared keys use the key column name; synthetic keys are qualified by
        the table so that rows of different keyless tables stay distinct.
        """
        spec = self.table(table)
        if spec.has_synthetic_key:
            return f"{table}_{SYNTHETIC_KEY}"
        return spec.primary_key

    def to_json(self) -> dict:
        return {
            "tables": [
                {
                    "name": t.name,
                    "primary_key": t.primary_key,
                    "columns": [
                        {
                            "name": c.name,
                            "role": c.role,
                            "references": c.references,
                            "datatype": c.datatype,
                        }
                        for c in t.columns
                    ],
                }
                for t in self.tables
            ]
        }


def _validate_manifest(m: SchemaManifest) -> None:
    by_name = {}
    for t in m.tables:
        check_identifier(t.name, "table")
        if t.name in by_name:
            raise SchemaError(f"duplicate table {t.name!r}")
        by_name[t.name] = t
        seen = set()
        pks = []
        for c in t.columns:
            check_identifier(c.name, f"column in table {t.name!r}")
            if c.name in seen:
                raise SchemaError(f"duplicate column {t.name}.{c.name}")
            seen.add(c.name)
            if c.role not in ROLES:
                raise SchemaError(f"column {t.name}.{c.name}: unknown role {c.role!r}")
            if c.datatype not in DATATYPES:
                raise SchemaError(f"column {t.name}.{c.name}: unknown datatype {c.datatype!r}")
            if c.role == PRIMARY_KEY:
                pks.append(c.name)
            if c.role == FOREIGN_KEY and not c.references:
                raise SchemaError(f"foreign key {t.name}.{c.name} references nothing")
        if len(pks) > 1:
            raise SchemaError(f"table {t.name!r} has several primary keys: {pks}")
        if t.primary_key is not None and pks != [t.primary_key]:
            raise SchemaError(
                f"table {t.name!r}: primary_key {t.primary_key!r} is not a primary_key column"
            )
        if t.primary_key is None and pks:
            raise SchemaError(f"table {t.name!r}: primary_key field does not name {pks[0]!r}")
        if t.has_synthetic_key and SYNTHETIC_KEY in seen:
            raise SchemaError(
                f"table {t.name!r} has no primary key but declares reserved column {SYNTHETIC_KEY!r}"
            )

    for t in m.tables:
        parents = set()
        for c in t.foreign_keys:
            parent = by_name.get(c.references)
            if parent is None:
                raise SchemaError(
                    f"foreign key {t.name}.{c.name} references unknown table {c.references!r}"
                )
            if parent.primary_key is None:
                raise SchemaError(
                    f"foreign key {t.name}.{c.name} references table {c.references!r} "
                    "which has no primary key"
                )
            if parent.column(parent.primary_key).datatype != c.datatype:
                raise SchemaError(
                    f"foreign key {t.name}.{c.name} datatype differs from "
                    f"{parent.name}.{parent.primary_key}"
                )
            if c.references in parents:
                raise SchemaError(
                    f"table {t.name!r} has several foreign keys to {c.references!r}"
                )
            parents.add(c.references)

    # Kahn's algorithm over parent -> child table edges
    indeg = {t.name: len(t.foreign_keys) for t in m.tables}
    children = {t.name: [] for t in m.tables}
    for t in m.tables:
        for c in t.foreign_keys:
            children[c.references].append(t.name)
    ready = [n for n, d in indeg.items() if d == 0]
    done = 0
    while ready:
        n = ready.pop()
        done += 1
        for ch in children[n]:
            indeg[ch] -= 1
            if indeg[ch] == 0:
                ready.append(ch)
    if done != len(m.tables):
        cyclic = sorted(n for n, d in indeg.items() if d > 0)
        raise SchemaError(f"table graph has a cycle through {cyclic}")


def manifest_from_json(data) -> SchemaManifest:
    if not isinstance(data, dict) or not isinstance(data.get("tables"), list):
        raise ParseError('manifest must be an object with a "tables" array')
    tables = []
    for i, t in enumerate(data["tables"]):
        try:
            name = str(t["name"]).lower()
            pk = t.get("primary_key")
            cols = []
            for c in t["columns"]:
                ref = c.get("references")
                cols.append(ColumnSpec(
                    name=str(c["name"]).lower(),
                    role=str(c.get("role", PROPERTY)).lower(),
                    datatype=str(c.get("datatype", "text")).lower(),
                    references=ref.lower() if isinstance(ref, str) else None,
                ))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"table #{i}: malformed entry ({exc})") from exc
        tables.append(TableSpec(name, tuple(cols), pk.lower() if isinstance(pk, str) else None))
    return SchemaManifest(tuple(tables))


def load_manifest(path) -> SchemaManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return manifest_from_json(data)


# ---------------------------------------------------------------------------
# relation graph


@dataclass(frozen=True)
class EntityClass:
    table: str
    key_column: str

    def __str__(self):
        return f"{self.table}[{self.key_column}]"


@dataclass(frozen=True)
class LiteralClass:
    table: str
    column: str

    def __str__(self):
        return f"{self.table}.{self.column}"


Node = Union[EntityClass, LiteralClass]


@dataclass(frozen=True)
class SchemaEdge:
    source: Node
    target: Node
    relation: str


@dataclass(frozen=True)
class RelationPath:
    hops: tuple[tuple[str, Node], ...] = ()

    def __len__(self):
        return len(self.hops)

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(r for r, _ in self.hops)


@dataclass(frozen=True, eq=False)
class SchemaGraph:
    nodes: tuple[Node, ...]
    edges: tuple[SchemaEdge, ...]
    manifest: SchemaManifest | None = None
    _out: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        out = {n: [] for n in self.nodes}
        for e in self.edges:
            if e.source not in out or e.target not in out:
                raise SchemaError(f"edge {e.relation!r} has an endpoint outside the graph")
            out[e.source].append(e)
        self._out.update(out)

    def out_edges(self, node: Node) -> list[SchemaEdge]:
        return self._out[node]

    def entity(self, table: str) -> EntityClass:
        return EntityClass(table, self.manifest.table(table).key_column)

    def node_for_column(self, table: str, column: str) -> Node:
        """Graph node holding the values of ``table.column``.

        Key columns are the row entity itself; a foreign key column holds the
        parent's entity; property columns are literal nodes.
        """
        spec = self.manifest.table(table)
        col = spec.column(column) if spec else None
        if col is None:
            raise SchemaError(f"unknown column {table}.{column}")
        if col.role == PRIMARY_KEY:
            return self.entity(table)
        if col.role == FOREIGN_KEY:
            return self.entity(col.references)
        return LiteralClass(table, column)

    def join_columns(self, parent: str, child: str) -> tuple[str, str]:
        """(parent key column, child foreign key column) linking two tables."""
        for c in self.manifest.table(child).foreign_keys:
            if c.references == parent:
                return self.manifest.table(parent).primary_key, c.name
        raise SchemaError(f"no foreign key from {child!r} to {parent!r}")

    def table_path(self, source: str, target: str) -> list[str]:
        """Tables visited by the shortest entity path, excluding ``source``."""
        path = shortest_relation_path(self, self.entity(source), self.entity(target))
        return [node.table for _, node in path.hops]

    def root_table(self, tables: Iterable[str]) -> str:
        """The involved table from which every other involved table is reachable."""
        tables = list(dict.fromkeys(tables))
        for cand in tables:
            reach = _reachable_tables(self, cand)
            if all(t in reach for t in tables):
                return cand
        raise NoPath(f"no table among {tables} reaches all the others along parent->child edges")

    def is_acyclic(self) -> bool:
        indeg = {n: 0 for n in self.nodes}
        for e in self.edges:
            indeg[e.target] += 1
        ready = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while ready:
            n = ready.pop()
            seen += 1
            for e in self._out[n]:
                indeg[e.target] -= 1
                if indeg[e.target] == 0:
                    ready.append(e.target)
        return seen == len(self.nodes)


def _reachable_tables(graph: SchemaGraph, table: str) -> set[str]:
    start = graph.entity(table)
    seen = {start}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        for e in graph.out_edges(n):
            if isinstance(e.target, EntityClass) and e.target not in seen:
                seen.add(e.target)
                queue.append(e.target)
    return {n.table for n in seen}


def build_schema_graph(manifest: SchemaManifest) -> SchemaGraph:
    nodes: list[Node] = []
    edges: list[SchemaEdge] = []
    entity = {t.name: EntityClass(t.name, t.key_column) for t in manifest.tables}
    labels: dict[str, str] = {}
    entity_names: dict[str, str] = {}

    def claim(label, owner):
        if label in labels:
            raise SchemaError(
                f"relation label {label!r} used by both {labels[label]} and {owner}"
            )
        labels[label] = owner

    for t in manifest.tables:
        ename = manifest.entity_name(t.name)
        if ename in entity_names:
            raise SchemaError(
                f"entity key {ename!r} shared by tables {entity_names[ename]!r} and {t.name!r}"
            )
        entity_names[ename] = t.name
        nodes.append(entity[t.name])
        for c in t.properties:
            lit = LiteralClass(t.name, c.name)
            nodes.append(lit)
            claim(c.name, f"column {t.name}.{c.name}")
            edges.append(SchemaEdge(entity[t.name], lit, c.name))
    for t in manifest.tables:
        if t.foreign_keys:
            claim(t.name, f"table {t.name}")
        for c in t.foreign_keys:
            parent = manifest.table(c.references)
            if parent.column(parent.primary_key) is None:
                raise SchemaError(f"table {parent.name!r} lacks key column {parent.primary_key!r}")
            edges.append(SchemaEdge(entity[c.references], entity[t.name], t.name))
    return SchemaGraph(tuple(nodes), tuple(edges), manifest)


def shortest_relation_path(graph: SchemaGraph, source: Node, target: Node) -> RelationPath:
    """Dijkstra over unit-weight edges.

    Among equally short paths the one whose relation labels are smallest
    hop-by-hop wins, so the result is fully determined by the graph.
    """
    if source not in graph._out or target not in graph._out:
        raise NoPath(f"{source} or {target} is not in the graph")
    tie = itertools.count()
    heap = [(0, (), next(tie), source, ())]
    done = set()
    while heap:
        dist, labels, _, node, hops = heapq.heappop(heap)
        if node in done:
            continue
        if node == target:
            return RelationPath(hops)
        done.add(node)
        for e in graph.out_edges(node):
            if e.target not in done:
                heapq.heappush(
                    heap,
                    (dist + 1, labels + (e.relation,), next(tie), e.target,
                     hops + ((e.relation, e.target),)),
                )
    raise NoPath(f"{target} is unreachable from {source}")
