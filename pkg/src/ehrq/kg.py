"""Knowledge-graph compilation and the SPARQL-subset executor.

Every table row is an entity ``/<key>/<value>``.  Property cells become
literal triples ``(row, /<column>, value)``; each foreign key cell becomes
``(parent, /<child table>, row)``.  Null cells produce nothing.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

from .errors import ExecutionError, TypeMismatch, UnknownPredicate
from .query.sparql import EntityRef, SparqlQuery, TriplePattern, Var
from .relational import Database, ResultSet, aggregate, check_comparable, compare, coerce_cell
from .schema import EntityClass, LiteralClass, SchemaManifest, build_schema_graph


@dataclass(frozen=True)
class Entity:
    key: str
    value: object

    def __str__(self):
        return f"/{self.key}/{quote(str(self.value), safe='')}"


class KnowledgeGraph:
    """Immutable triple set with subject and predicate/object indexes."""

    def __init__(self, triples, manifest: SchemaManifest):
        self.manifest = manifest
        self.schema = build_schema_graph(manifest)
        self.triples = frozenset(triples)
        self.relations = {"/" + e.relation: e for e in self.schema.edges}
        # entity namespace -> (table, key datatype)
        self.entity_keys = {}
        for t in manifest.tables:
            self.entity_keys[manifest.entity_name(t.name)] = (
                t.name, t.column(t.key_column).datatype)
        self._spo = defaultdict(lambda: defaultdict(list))
        self._pos = defaultdict(lambda: defaultdict(list))
        self._by_pred = defaultdict(list)
        for s, p, o in sorted(self.triples, key=_triple_sort_key):
            if not isinstance(s, Entity):
                raise ExecutionError(f"literal {s!r} used as a triple subject")
            self._spo[s][p].append(o)
            self._pos[p][o].append(s)
            self._by_pred[p].append((s, o))

    def __len__(self):
        return len(self.triples)

    def objects(self, subject, predicate) -> list:
        return self._spo.get(subject, {}).get(predicate, [])

    def subjects(self, predicate, obj) -> list:
        return self._pos.get(predicate, {}).get(obj, [])

    def pairs(self, predicate) -> list:
        return self._by_pred.get(predicate, [])

    def out(self, subject) -> dict:
        return self._spo.get(subject, {})

    def entity_for(self, table: str, value) -> Entity:
        return Entity(self.manifest.entity_name(table), value)


def _term_sort_key(term):
    if isinstance(term, Entity):
        return (0, term.key, _term_sort_key(term.value))
    if isinstance(term, str):
        return (2, term)
    return (1, float(term))


def _triple_sort_key(t):
    s, p, o = t
    return (_term_sort_key(s), p, _term_sort_key(o))


def build_kg(db: Database, manifest: SchemaManifest | None = None) -> KnowledgeGraph:
    manifest = manifest or db.manifest
    triples = set()
    for spec in manifest.tables:
        table = db.table(spec.name)
        key_i = table.index[spec.key_column]
        ename = manifest.entity_name(spec.name)
        props = [(table.index[c.name], "/" + c.name) for c in spec.properties]
        fks = [(table.index[c.name], manifest.entity_name(c.references))
               for c in spec.foreign_keys]
        edge = "/" + spec.name
        for row in table.rows:
            ent = Entity(ename, row[key_i])
            for i, pred in props:
                if row[i] is not None:
                    triples.add((ent, pred, row[i]))
            for i, parent_name in fks:
                if row[i] is not None:
                    triples.add((Entity(parent_name, row[i]), edge, ent))
    return KnowledgeGraph(triples, manifest)


def kg_metrics(kg: KnowledgeGraph) -> tuple[int, int]:
    """(triple count, longest root-to-leaf path in edges, literal edges included)."""
    depth = {}
    for start in list(kg._spo):
        if start in depth:
            continue
        stack = [(start, False)]
        while stack:
            node, expanded = stack.pop()
            if node in depth:
                continue
            children = [o for objs in kg.out(node).values() for o in objs]
            if not expanded:
                stack.append((node, True))
                stack.extend((c, False) for c in children
                             if isinstance(c, Entity) and c not in depth)
                continue
            best = 0
            for c in children:
                best = max(best, 1 + depth.get(c, 0) if isinstance(c, Entity) else 1)
            depth[node] = best
    return len(kg), max(depth.values(), default=0)


def dump_triples(kg: KnowledgeGraph, path) -> None:
    """Write ``subject<TAB>predicate<TAB>object`` lines; literals double-quoted."""
    lines = []
    for s, p, o in sorted(kg.triples, key=_triple_sort_key):
        obj = str(o) if isinstance(o, Entity) else '"' + str(o) + '"'
        lines.append(f"{s}\t{p}\t{obj}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# execution


def _resolve_ref(kg: KnowledgeGraph, ref: EntityRef, expected: EntityClass) -> Entity:
    name = kg.manifest.entity_name(expected.table)
    if ref.key != name:
        raise TypeMismatch(f"{ref} is not a {expected.table} entity (expected /{name}/...)")
    dtype = kg.entity_keys[name][1]
    try:
        return Entity(name, coerce_cell(ref.value, dtype))
    except ValueError:
        raise TypeMismatch(f"{ref}: key value is not {dtype}") from None


def _typecheck(kg: KnowledgeGraph, q: SparqlQuery):
    """Resolve constants and infer each variable's datatype.

    Returns the patterns with entity constants resolved, plus a map from
    variable to ``("entity", table)`` or ``("literal", datatype)``.
    """
    var_types = {}
    resolved = []
    for p in q.patterns:
        edge = kg.relations.get(p.predicate)
        if edge is None:
            raise UnknownPredicate(f"unknown predicate <{p.predicate}>")
        s, o = p.subject, p.object
        if isinstance(s, Var):
            var_types.setdefault(s, ("entity", edge.source.table))
        else:
            s = _resolve_ref(kg, s, edge.source)
        if isinstance(edge.target, LiteralClass):
            dtype = kg.manifest.table(edge.target.table).column(edge.target.column).datatype
            if isinstance(o, Var):
                var_types.setdefault(o, ("literal", dtype))
            elif isinstance(o, EntityRef):
                raise TypeMismatch(f"<{p.predicate}> takes a literal, not {o}")
            else:
                check_comparable(dtype, o, f"pattern <{p.predicate}>")
        else:
            if isinstance(o, Var):
                var_types.setdefault(o, ("entity", edge.target.table))
            elif isinstance(o, EntityRef):
                o = _resolve_ref(kg, o, edge.target)
            else:
                raise TypeMismatch(f"<{p.predicate}> links entities, not literal {o!r}")
        resolved.append(TriplePattern(s, p.predicate, o))
    return resolved, var_types


def _var_datatype(kg, kind_info):
    kind, info = kind_info
    if kind == "literal":
        return info
    return kg.entity_keys[kg.manifest.entity_name(info)][1]


def _plain(v):
    return v.value if isinstance(v, Entity) else v


def _bound_score(p: TriplePattern, bound: set) -> int:
    score = 0
    for t, w in ((p.subject, 2), (p.object, 3)):
        if not isinstance(t, Var) or t in bound:
            score += w
    return score


def _extend(kg: KnowledgeGraph, p: TriplePattern, sol: dict):
    s = sol.get(p.subject, p.subject) if isinstance(p.subject, Var) else p.subject
    o = sol.get(p.object, p.object) if isinstance(p.object, Var) else p.object
    s_free = isinstance(s, Var)
    o_free = isinstance(o, Var)
    if not s_free and not o_free:
        if o in kg.objects(s, p.predicate):
            yield sol
    elif not s_free:
        for obj in kg.objects(s, p.predicate):
            yield {**sol, o: obj}
    elif not o_free:
        for subj in kg.subjects(p.predicate, o):
            yield {**sol, s: subj}
    else:
        for subj, obj in kg.pairs(p.predicate):
            if s == o and subj != obj:
                continue
            yield {**sol, s: subj, o: obj}


def match_patterns(kg: KnowledgeGraph, patterns: list[TriplePattern]) -> list[dict]:
    """All solutions of a basic graph pattern, one per satisfying combination."""
    solutions = [{}]
    remaining = list(patterns)
    bound: set = set()
    while remaining and solutions:
        best = max(range(len(remaining)), key=lambda i: (_bound_score(remaining[i], bound), -i))
        p = remaining.pop(best)
        solutions = [ext for sol in solutions for ext in _extend(kg, p, sol)]
        bound.update(t for t in (p.subject, p.object) if isinstance(t, Var))
    return solutions


def execute_sparql(kg: KnowledgeGraph, q: SparqlQuery) -> ResultSet:
    patterns, var_types = _typecheck(kg, q)
    filters = []
    for f in q.filters:
        dtype = _var_datatype(kg, var_types[f.var])
        value = f.value
        if isinstance(value, EntityRef):
            kind, table = var_types[f.var]
            if kind != "entity":
                raise TypeMismatch(f"filter compares literal {f.var} with entity {value}")
            value = _resolve_ref(kg, value, kg.schema.entity(table)).value
        check_comparable(dtype, value, f"filter on {f.var}")
        filters.append((f.var, f.op, value))
    if q.is_aggregate and q.projection.func == "avg" \
            and _var_datatype(kg, var_types[q.projection.var]) == "text":
        raise TypeMismatch(f"avg over text variable {q.projection.var}")

    solutions = [
        sol for sol in match_patterns(kg, patterns)
        if all(compare(_plain(sol[v]), op, val) for v, op, val in filters)
    ]
    if q.is_aggregate:
        a = q.projection
        value = aggregate(a.func, [_plain(sol[a.var]) for sol in solutions])
        return ResultSet((str(a.alias),), ((value,),))
    return ResultSet(
        tuple(str(v) for v in q.projection),
        tuple(tuple(_plain(sol[v]) for v in q.projection) for sol in solutions),
    )
