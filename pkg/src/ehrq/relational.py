"""Typed in-memory relational store and the SQL-subset executor.

Cells are plain Python values: ``None`` (Null), ``str`` (lowercased, trimmed),
``int`` and ``float``.  Execution uses bag semantics throughout.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import (ExecutionError, HeaderMismatch, IntegrityError, InvalidJoin,
                     MissingTableFile, TypeCoercionError, TypeMismatch, UnknownColumn,
                     UnknownTable)
from .query.sql import ColumnRef, SqlQuery
from .query.tokens import MASKED, Slot
from .schema import FOREIGN_KEY, SchemaManifest, TableSpec


@dataclass(frozen=True)
class ResultSet:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row {r!r} does not match columns {self.columns!r}")

    def to_json(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}


@dataclass
class Table:
    spec: TableSpec
    rows: list[tuple]

    def __post_init__(self):
        self.columns = tuple(c.name for c in self.spec.effective_columns)
        self.index = {name: i for i, name in enumerate(self.columns)}
        self.types = {c.name: c.datatype for c in self.spec.effective_columns}


@dataclass
class Database:
    manifest: SchemaManifest
    tables: dict[str, Table]

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise UnknownTable(f"unknown table {name!r}") from None

    def column_values(self, table: str, column: str) -> list:
        t = self.table(table)
        if column not in t.index:
            raise UnknownColumn(f"unknown column {table}.{column}")
        i = t.index[column]
        return [r[i] for r in t.rows]


# ---------------------------------------------------------------------------
# loading


def coerce_cell(raw, datatype: str):
    """Convert a raw cell (CSV text or Python value) to its typed value."""
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw == "":
            return None
        if datatype == "text":
            return raw.lower()
        if datatype == "integer":
            return int(raw)
        return float(raw)
    if isinstance(raw, bool):
        raise ValueError("booleans are not cell values")
    if datatype == "text":
        raise ValueError(f"expected text, got {raw!r}")
    if datatype == "integer":
        if isinstance(raw, float) and not raw.is_integer():
            raise ValueError(f"expected integer, got {raw!r}")
        return int(raw)
    return float(raw)


def database_from_rows(manifest: SchemaManifest, raw: dict[str, list]) -> Database:
    """Build and validate a database from per-table lists of declared-column rows.

    Rows are sequences aligned to the declared columns (no synthetic key);
    cells may be strings as read from CSV or already-typed values.
    """
    tables = {}
    for spec in manifest.tables:
        rows = []
        types = [c.datatype for c in spec.columns]
        for r, raw_row in enumerate(raw.get(spec.name, [])):
            if len(raw_row) != len(types):
                raise HeaderMismatch(
                    f"{spec.name} row {r + 1}: {len(raw_row)} cells for {len(types)} columns"
                )
            cells = []
            for col, dtype, cell in zip(spec.columns, types, raw_row):
                try:
                    cells.append(coerce_cell(cell, dtype))
                except ValueError:
                    raise TypeCoercionError(
                        f"{spec.name} row {r + 1}, column {col.name!r}: "
                        f"cannot read {cell!r} as {dtype}"
                    ) from None
            if spec.has_synthetic_key:
                cells.insert(0, r)
            rows.append(tuple(cells))
        tables[spec.name] = Table(spec, rows)
    db = Database(manifest, tables)
    _check_integrity(db)
    return db


def _check_integrity(db: Database) -> None:
    keys = {}
    for name, t in db.tables.items():
        if t.spec.primary_key is None:
            continue
        i = t.index[t.spec.primary_key]
        seen = set()
        for n, row in enumerate(t.rows):
            v = row[i]
            if v is None:
                raise IntegrityError(f"{name} row {n + 1}: null primary key")
            if v in seen:
                raise IntegrityError(f"{name} row {n + 1}: duplicate primary key {v!r}")
            seen.add(v)
        keys[name] = seen
    for name, t in db.tables.items():
        for col in t.spec.foreign_keys:
            i = t.index[col.name]
            parent = keys[col.references]
            for n, row in enumerate(t.rows):
                if row[i] is not None and row[i] not in parent:
                    raise IntegrityError(
                        f"{name} row {n + 1}: {col.name}={row[i]!r} has no match in "
                        f"{col.references}"
                    )


def load_database(manifest: SchemaManifest, directory) -> Database:
    directory = Path(directory)
    raw = {}
    for spec in manifest.tables:
        path = directory / f"{spec.name}.csv"
        if not path.is_file():
            raise MissingTableFile(f"missing {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise HeaderMismatch(f"{path}: no header row")
            header = [h.strip().lower() for h in header]
            if tuple(header) != spec.column_names:
                raise HeaderMismatch(
                    f"{path}: header {header} does not match {list(spec.column_names)}"
                )
            raw[spec.name] = [row for row in reader if row]
    return database_from_rows(manifest, raw)


def dump_database(db: Database) -> str:
    """Canonical text dump, stable across repeated loads."""
    out = {}
    for name in db.manifest.table_names:
        t = db.tables[name]
        out[name] = {"columns": list(t.columns), "rows": [list(r) for r in t.rows]}
    return json.dumps(out, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# execution


def compare(a, op: str, b) -> bool:
    """SQL comparison; anything involving Null is false."""
    if a is None or b is None:
        return False
    if op == "=":
        return a == b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    raise ExecutionError(f"unknown operator {op!r}")


def check_comparable(datatype: str, value, where: str) -> None:
    if value is MASKED or isinstance(value, Slot):
        raise ExecutionError(f"{where}: unfilled value {value!r}")
    is_text = isinstance(value, str)
    if (datatype == "text") != is_text:
        raise TypeMismatch(f"{where}: cannot compare {datatype} with {value!r}")


def aggregate(func: str, values: list):
    values = [v for v in values if v is not None]
    if func == "count":
        return len(values)
    if not values:
        return None
    if func == "max":
        return max(values)
    if func == "min":
        return min(values)
    if func == "avg":
        return sum(values) / len(values)
    raise ExecutionError(f"unknown aggregate {func!r}")


def _locate(db: Database, query_tables: list[str], col: ColumnRef) -> tuple[int, int]:
    """(table position in the query, column position in that table)."""
    if col.table not in db.tables:
        raise UnknownTable(f"unknown table {col.table!r}")
    if col.table not in query_tables:
        raise UnknownTable(f"table {col.table!r} is not in from/join")
    t = db.tables[col.table]
    if col.column not in t.index:
        raise UnknownColumn(f"unknown column {col}")
    return query_tables.index(col.table), t.index[col.column]


def _check_join(db: Database, a: ColumnRef, b: ColumnRef) -> None:
    for child, parent in ((a, b), (b, a)):
        spec = db.tables[child.table].spec.column(child.column)
        pspec = db.tables[parent.table].spec
        if spec.role == FOREIGN_KEY and spec.references == parent.table \
                and pspec.primary_key == parent.column:
            return
    raise InvalidJoin(f"{a} = {b} is not a foreign key / primary key link")


def execute_sql(db: Database, q: SqlQuery) -> ResultSet:
    tables = list(q.tables)
    for name in tables:
        db.table(name)
    # validate everything before touching rows so errors do not depend on data
    joins = []
    for n, j in enumerate(q.joins, start=1):
        visible = tables[: n + 1]
        la, lb = _locate(db, visible, j.left), _locate(db, visible, j.right)
        _check_join(db, j.left, j.right)
        new, old = (la, lb) if j.left.table == j.table else (lb, la)
        joins.append((new[1], old))
    conds_by_table = [[] for _ in tables]
    for c in q.conditions:
        ti, ci = _locate(db, tables, c.column)
        dtype = db.tables[c.column.table].types[c.column.column]
        check_comparable(dtype, c.value, f"condition on {c.column}")
        conds_by_table[ti].append((ci, c.op, c.value))
    select = []
    for item in q.select:
        ti, ci = _locate(db, tables, item.column)
        if item.agg == "avg" and db.tables[item.column.table].types[item.column.column] == "text":
            raise TypeMismatch(f"avg over text column {item.column}")
        select.append((ti, ci))

    def keep(row, conds):
        return all(compare(row[ci], op, v) for ci, op, v in conds)

    partial = [(row,) for row in db.tables[tables[0]].rows if keep(row, conds_by_table[0])]
    for n, (new_col, (old_t, old_col)) in enumerate(joins, start=1):
        index = {}
        for row in db.tables[tables[n]].rows:
            if row[new_col] is not None and keep(row, conds_by_table[n]):
                index.setdefault(row[new_col], []).append(row)
        partial = [p + (row,) for p in partial for row in index.get(p[old_t][old_col], ())]

    if q.is_aggregate:
        labels = tuple(f"{i.agg}({i.column})" for i in q.select)
        row = tuple(aggregate(item.agg, [p[ti][ci] for p in partial])
                    for item, (ti, ci) in zip(q.select, select))
        return ResultSet(labels, (row,))
    labels = tuple(str(i.column) for i in q.select)
    return ResultSet(labels, tuple(tuple(p[ti][ci] for ti, ci in select) for p in partial))
