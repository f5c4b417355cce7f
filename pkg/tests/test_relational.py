import random

import pytest

from ehrq.errors import (ExecutionError, HeaderMismatch, IntegrityError, InvalidJoin,
                         MissingTableFile, TypeCoercionError, TypeMismatch, UnknownColumn,
                         UnknownTable)
from ehrq.fixtures import fixture_database, gen_fixture
from ehrq.query import parse_sql
from ehrq.relational import (ResultSet, database_from_rows, dump_database, execute_sql,
                             load_database)
from ehrq.schema import load_manifest, manifest_from_json

from oracles import nested_loop_sql, random_db_query, same_rows

DRUG_COUNT_Q = (
    "select count ( prescriptions.timestep ) from patients "
    "inner join admissions on patients.subject_id = admissions.subject_id "
    "inner join prescriptions on admissions.hadm_id = prescriptions.hadm_id "
    "where prescriptions.drug = antihypertensive")


@pytest.fixture(scope="module")
def db():
    return fixture_database(30, 5)


def test_load_from_csv(tmp_path):
    gen_fixture(100, 42, "nine_table", tmp_path)
    db = load_database(load_manifest(tmp_path / "manifest.json"), tmp_path)
    assert len(db.tables) == 9
    assert len(db.tables["patients"].rows) == 100


def test_load_is_idempotent(tmp_path):
    gen_fixture(10, 1, "nine_table", tmp_path)
    m = load_manifest(tmp_path / "manifest.json")
    assert dump_database(load_database(m, tmp_path)) == dump_database(load_database(m, tmp_path))


def test_synthetic_row_id(tmp_path):
    gen_fixture(3, 1, "nine_table", tmp_path)
    db = load_database(load_manifest(tmp_path / "manifest.json"), tmp_path)
    rx = db.tables["prescriptions"]
    assert rx.columns[0] == "row_id"
    assert [r[0] for r in rx.rows] == list(range(len(rx.rows)))


SMALL = {"tables": [
    {"name": "patients", "primary_key": "subject_id", "columns": [
        {"name": "subject_id", "role": "primary_key", "datatype": "integer"},
        {"name": "name", "role": "property", "datatype": "text"},
        {"name": "age", "role": "property", "datatype": "integer"}]},
    {"name": "admissions", "primary_key": "hadm_id", "columns": [
        {"name": "hadm_id", "role": "primary_key", "datatype": "integer"},
        {"name": "subject_id", "role": "foreign_key", "datatype": "integer",
         "references": "patients"},
        {"name": "cost", "role": "property", "datatype": "float"}]},
]}


def write_small(tmp_path, patients, admissions):
    (tmp_path / "patients.csv").write_text(patients)
    (tmp_path / "admissions.csv").write_text(admissions)
    return manifest_from_json(SMALL)


def test_header_only_table(tmp_path):
    m = write_small(tmp_path, "subject_id,name,age\n1, John ,40\n", "hadm_id,subject_id,cost\n")
    db = load_database(m, tmp_path)
    assert db.tables["admissions"].rows == []
    assert db.tables["patients"].rows == [(1, "john", 40)]


def test_empty_cell_is_null(tmp_path):
    m = write_small(tmp_path, "subject_id,name,age\n1,,\n", "hadm_id,subject_id,cost\n7,,2.5\n")
    db = load_database(m, tmp_path)
    assert db.tables["patients"].rows == [(1, None, None)]
    assert db.tables["admissions"].rows == [(7, None, 2.5)]


@pytest.mark.parametrize("patients, admissions, err, needle", [
    ("subject_id,name,age\n1,a,40\n", "hadm_id,subject_id,cost\n5,999,1\n", IntegrityError, "999"),
    ("subject_id,name,age\n1,a,40\n1,b,3\n", "hadm_id,subject_id,cost\n", IntegrityError,
     "duplicate"),
    ("subject_id,name,age\n1,a,forty\n", "hadm_id,subject_id,cost\n", TypeCoercionError,
     "row 1, column 'age'"),
    ("subject_id,nom,age\n", "hadm_id,subject_id,cost\n", HeaderMismatch, "header"),
])
def test_load_errors(tmp_path, patients, admissions, err, needle):
    m = write_small(tmp_path, patients, admissions)
    with pytest.raises(err, match=needle):
        load_database(m, tmp_path)


def test_missing_file(tmp_path):
    (tmp_path / "patients.csv").write_text("subject_id,name,age\n")
    with pytest.raises(MissingTableFile):
        load_database(manifest_from_json(SMALL), tmp_path)


def test_resultset_arity():
    with pytest.raises(ValueError):
        ResultSet(("a",), ((1, 2),))


def test_drug_count_query_runs(db):
    res = execute_sql(db, parse_sql(DRUG_COUNT_Q))
    want = sum(1 for r in db.tables["prescriptions"].rows if r[2] == "antihypertensive")
    assert res.rows == ((want,),)
    assert want > 0


def test_metric_table_shape():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [(1, "a", 30), (2, "b", 50)], "admissions": []})
    q = parse_sql("select max ( patients.age ) from patients where patients.age < 45")
    assert execute_sql(db, q).rows == ((30,),)


def test_zero_row_aggregates():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [(1, "a", 30)], "admissions": []})
    for agg, want in [("count", 0), ("max", None), ("min", None), ("avg", None)]:
        q = parse_sql(f"select {agg} ( patients.age ) from patients where patients.age > 99")
        assert execute_sql(db, q).rows == ((want,),)


def test_avg_is_float_and_skips_null():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [(1, "a", 30), (2, "b", None), (3, "c", 31)],
                                "admissions": []})
    assert execute_sql(db, parse_sql("select avg ( patients.age ) from patients")).rows == ((30.5,),)
    assert execute_sql(db, parse_sql("select count ( patients.age ) from patients")).rows == ((2,),)


def test_bag_semantics_join_multiplies():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [(1, "a", 30), (2, "b", 40)],
                                "admissions": [(10, 1, 1.0), (11, 1, 2.0), (12, 2, 3.0)]})
    q = parse_sql("select patients.name from patients inner join admissions on "
                  "patients.subject_id = admissions.subject_id")
    assert sorted(execute_sql(db, q).rows) == [("a",), ("a",), ("b",)]


@pytest.mark.parametrize("sql, err", [
    ("select nosuch.x from nosuch", UnknownTable),
    ("select patients.nope from patients", UnknownColumn),
    ("select patients.name from patients where patients.age < \"x\"", TypeMismatch),
    ("select patients.name from patients where patients.name > 3", TypeMismatch),
    ("select avg ( patients.name ) from patients", TypeMismatch),
    ("select patients.name from patients inner join admissions on "
     "patients.age = admissions.hadm_id", InvalidJoin),
])
def test_execution_errors(sql, err):
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [], "admissions": []})
    with pytest.raises(err):
        execute_sql(db, parse_sql(sql))


def test_unfilled_slot_rejected():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [], "admissions": []})
    q = parse_sql("select patients.name from patients where patients.age = |v|", allow_slots=True)
    with pytest.raises(ExecutionError):
        execute_sql(db, q)


def test_text_comparison_is_lexicographic():
    m = manifest_from_json(SMALL)
    db = database_from_rows(m, {"patients": [(1, "apple", 1), (2, "pear", 2)], "admissions": []})
    q = parse_sql('select patients.subject_id from patients where patients.name < "banana"')
    assert execute_sql(db, q).rows == ((1,),)


def test_against_nested_loop_oracle(db):
    rng = random.Random(3)
    small = fixture_database(3, 9)
    for _ in range(200):
        q = random_db_query(small, rng)
        res = execute_sql(small, q)
        width, rows = nested_loop_sql(small, q)
        assert same_rows(len(res.columns), list(res.rows), width, rows), q


def test_conjunct_order_does_not_matter(db):
    rng = random.Random(4)
    for _ in range(100):
        q = random_db_query(db, rng, max_joins=3)
        conds = list(q.conditions)
        rng.shuffle(conds)
        q2 = type(q)(q.select, q.from_table, q.joins, tuple(conds))
        assert sorted(map(repr, execute_sql(db, q).rows)) == \
            sorted(map(repr, execute_sql(db, q2).rows))
