import json

import pytest

from ehrq.errors import TypeMismatch, UnboundProjectionVariable, UnknownPredicate
from ehrq.fixtures import fixture_database, gen_fixture
from ehrq.kg import Entity, build_kg, dump_triples, execute_sparql, kg_metrics
from ehrq.query import parse_sparql, parse_sql
from ehrq.relational import database_from_rows, execute_sql, load_database
from ehrq.schema import load_manifest, manifest_from_json

from oracles import longest_path, triple_count_from_csv

FIG1 = {"tables": [
    {"name": "patients", "primary_key": "subject_id", "columns": [
        {"name": "subject_id", "role": "primary_key", "datatype": "integer"},
        {"name": "name", "role": "property", "datatype": "text"},
        {"name": "gender", "role": "property", "datatype": "text"}]},
    {"name": "admissions", "primary_key": "hadm_id", "columns": [
        {"name": "hadm_id", "role": "primary_key", "datatype": "integer"},
        {"name": "subject_id", "role": "foreign_key", "datatype": "integer",
         "references": "patients"}]},
]}

DRUG_COUNT_SPARQL = (
    'select ( count ( ?timestep ) as ?agg ) where { ?subject_id </admissions> ?hadm_id. '
    '?hadm_id </prescriptions> ?rx. ?rx </drug> "antihypertensive". ?rx </timestep> ?timestep. }')
DRUG_COUNT_SQL = (
    "select count ( prescriptions.timestep ) from patients "
    "inner join admissions on patients.subject_id = admissions.subject_id "
    "inner join prescriptions on admissions.hadm_id = prescriptions.hadm_id "
    "where prescriptions.drug = antihypertensive")


@pytest.fixture(scope="module")
def fixture():
    db = fixture_database(40, 3)
    return db, build_kg(db)


def test_figure1_triples():
    m = manifest_from_json(FIG1)
    db = database_from_rows(m, {"patients": [(12, "john", None)], "admissions": [(231, 12)]})
    kg = build_kg(db, m)
    assert (Entity("subject_id", 12), "/name", "john") in kg.triples
    assert (Entity("subject_id", 12), "/admissions", Entity("hadm_id", 231)) in kg.triples
    assert str(Entity("subject_id", 12)) == "/subject_id/12"
    # null gender produces nothing
    assert len(kg) == 2


def test_empty_database():
    m = manifest_from_json(FIG1)
    kg = build_kg(database_from_rows(m, {}), m)
    assert kg_metrics(kg) == (0, 0)


def test_single_table_depth_one():
    m = manifest_from_json({"tables": [FIG1["tables"][0]]})
    kg = build_kg(database_from_rows(m, {"patients": [(1, "a", "f")]}), m)
    assert kg_metrics(kg) == (2, 1)


def test_cell_count_and_depth_oracles(tmp_path):
    gen_fixture(25, 8, "nine_table", tmp_path)
    raw = json.loads((tmp_path / "manifest.json").read_text())
    db = load_database(load_manifest(tmp_path / "manifest.json"), tmp_path)
    kg = build_kg(db)
    count, depth = kg_metrics(kg)
    assert count == triple_count_from_csv(raw, tmp_path)
    assert depth == longest_path(kg.triples) == 5


def test_no_literal_subjects(fixture):
    _, kg = fixture
    assert all(isinstance(s, Entity) for s, _, _ in kg.triples)


def test_drug_count_query_matches_sql(fixture):
    db, kg = fixture
    sql = execute_sql(db, parse_sql(DRUG_COUNT_SQL))
    sparql = execute_sparql(kg, parse_sparql(DRUG_COUNT_SPARQL))
    assert sparql.rows == sql.rows
    assert sparql.columns == ("?agg",)


def test_gender_pattern_equals_sql(fixture):
    db, kg = fixture
    got = execute_sparql(kg, parse_sparql('select ?s where { ?s </gender> "f". }'))
    want = execute_sql(db, parse_sql('select patients.subject_id from patients '
                                     'where patients.gender = "f"'))
    assert sorted(got.rows) == sorted(want.rows)


def test_zero_matches(fixture):
    _, kg = fixture
    q = parse_sparql('select ( count ( ?s ) as ?agg ) where { ?s </drug> "no such drug". }')
    assert execute_sparql(kg, q).rows == ((0,),)
    q = parse_sparql('select ?s where { ?s </drug> "no such drug". }')
    assert execute_sparql(kg, q).rows == ()


def test_entity_constant_subject(fixture):
    db, kg = fixture
    pid = db.tables["patients"].rows[0][0]
    q = parse_sparql(f"select ?h where {{ </subject_id/{pid}> </admissions> ?h . }}")
    want = sorted((r[0],) for r in db.tables["admissions"].rows if r[1] == pid)
    assert sorted(execute_sparql(kg, q).rows) == want


def test_filters_and_avg(fixture):
    db, kg = fixture
    q = parse_sparql("select ( avg ( ?age ) as ?agg ) where { ?h </age> ?age . "
                     "filter ( ?age >= 40 ) filter ( ?age < 70 ) }")
    ages = [r[5] for r in db.tables["admissions"].rows if 40 <= r[5] < 70]
    assert execute_sparql(kg, q).rows[0][0] == pytest.approx(sum(ages) / len(ages), rel=1e-12)


def test_errors(fixture):
    _, kg = fixture
    with pytest.raises(UnknownPredicate):
        execute_sparql(kg, parse_sparql("select ?x where { ?s </nope> ?x . }"))
    with pytest.raises(UnboundProjectionVariable):
        parse_sparql("select ?y where { ?s </name> ?x . }")
    with pytest.raises(TypeMismatch):
        execute_sparql(kg, parse_sparql('select ?s where { ?s </age> "old" . }'))
    with pytest.raises(TypeMismatch):
        execute_sparql(kg, parse_sparql("select ?s where { ?s </admissions> </lab_id/3> . }"))
    with pytest.raises(TypeMismatch):
        execute_sparql(kg, parse_sparql('select ( avg ( ?n ) as ?agg ) where { ?s </name> ?n . }'))


def test_dump_is_sorted_and_quoted(tmp_path):
    m = manifest_from_json(FIG1)
    kg = build_kg(database_from_rows(m, {"patients": [(12, "john", "m")],
                                         "admissions": [(231, 12)]}), m)
    dump_triples(kg, tmp_path / "t.tsv")
    lines = (tmp_path / "t.tsv").read_text().splitlines()
    assert len(lines) == 3
    assert "/subject_id/12\t/admissions\t/hadm_id/231" in lines
    assert '/subject_id/12\t/name\t"john"' in lines


def test_build_is_order_independent():
    db = fixture_database(10, 4)
    shuffled = {name: list(reversed(t.rows)) for name, t in db.tables.items()}
    # row ids are fixed at load, so reordering rows must not change the triple set
    kg1 = build_kg(db)
    db2 = type(db)(db.manifest, {n: type(t)(t.spec, shuffled[n]) for n, t in db.tables.items()})
    kg2 = build_kg(db2)
    assert kg1.triples == kg2.triples
