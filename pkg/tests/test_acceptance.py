"""Acceptance criteria, one test per criterion.

Each test's docstring starts with ``C<n>``; conftest.py prints one PASS/FAIL
line per criterion in the terminal summary.  Tolerances are pinned below.
"""
import json
import random
import time

from ehrq.evaluate import evaluate_pairs, results_match, score_pair, verify_equivalence
from ehrq.fixtures import (fixture_database, fixture_templates,
                           five_to_nine_mapping, gen_fixture)
from ehrq.kg import build_kg, kg_metrics
from ehrq.query import (SPLIT, SQL, parse_sparql, parse_sql, serialize_sparql, serialize_sql,
                        FUSED)
from ehrq.relational import database_from_rows, execute_sql, load_database
from ehrq.schema import (build_schema_graph, load_manifest, manifest_from_json,
                         shortest_relation_path)
from ehrq.errors import NoPath
from ehrq.transpile import renormalize_sql, sample_query_corpus, sql_to_sparql

from oracles import (bfs_shortest_labels, nested_loop_sql, random_db_query, random_sparql_ast,
                     random_sql_ast, same_rows, triple_count_from_csv)
from test_schema import _random_dag

EQUIV_RUNTIME_LIMIT_S = 30.0
ORACLE_TOL = 1e-9
SQL_TOKENS_PER_JOIN = 11
SPARQL_TOKENS_PER_HOP = 4
ORACLE_MAX_ROWS = 50
MIN_SPLIT_FRACTION = 0.5


def test_c1_equivalence_sweep():
    """C1 equivalence sweep: 1000 queries (0-5 joins), seed 42, 100 patients, match_rate == 1.0 in < 30 s"""
    t0 = time.perf_counter()
    db = fixture_database(100, 42)
    corpus = [q for _, q in sample_query_corpus(fixture_templates(), db, 1000, 42)]
    assert {len(q.joins) for q in corpus} == {0, 1, 2, 3, 4, 5}
    rep = verify_equivalence(corpus, db, build_kg(db), build_schema_graph(db.manifest))
    elapsed = time.perf_counter() - t0
    assert rep.n == 1000
    assert rep.match_rate == 1.0, rep.mismatches[:3]
    assert elapsed < EQUIV_RUNTIME_LIMIT_S


def test_c2_metric_truth_table():
    """C2 metric truth table: per-pair (LF,EX,ST) and aggregate (0.25, 0.50, 0.75), exact"""
    m = manifest_from_json({"tables": [{"name": "patients", "primary_key": "subject_id",
                                        "columns": [
        {"name": "subject_id", "role": "primary_key", "datatype": "integer"},
        {"name": "age", "role": "property", "datatype": "integer"},
        {"name": "gender", "role": "property", "datatype": "text"},
        {"name": "dob", "role": "property", "datatype": "integer"}]}]})
    db = database_from_rows(m, {"patients": [(1, 30, "f", 2021), (2, 45, "f", 2022),
                                             (3, 50, "m", 2022), (4, 20, "f", 2019)]})
    gold = 'select max(age) from patients where Gender = "F" and DoB > 2020'
    preds = ['select max(age) from patients where Gender ="F" and DoB > 2020',
             'select max(age) from patients where DoB > 2020 and Gender = "F"',
             'select max(age) from patients where DoB > 2021 and Gender = "M"',
             'select max(age) from patients where DoB > 2021 and Diagnosis = "F"']
    got = [(s.lf, s.ex, s.st) for s in (score_pair(gold, p, SQL, db) for p in preds)]
    assert got == [(True, True, True), (False, True, True), (False, False, True),
                   (False, False, False)]
    rep = evaluate_pairs([(gold, p) for p in preds], SQL, db)
    assert (rep.acc_lf, rep.acc_ex, rep.acc_st) == (0.25, 0.50, 0.75)


# each step joins a child of a table already present, so one join is
# exactly one extra hop in the SPARQL
_CHAIN = [("admissions", "patients.subject_id = admissions.subject_id"),
          ("diagnoses", "admissions.hadm_id = diagnoses.hadm_id"),
          ("procedures", "diagnoses.diag_id = procedures.diag_id"),
          ("prescriptions", "admissions.hadm_id = prescriptions.hadm_id"),
          ("lab", "admissions.hadm_id = lab.hadm_id")]
_FAMILIES = [("select patients.name from patients", ""),
             ("select max ( patients.dob ) from patients", ' where patients.gender = "f"'),
             ("select patients.name , patients.dob from patients", " where patients.dob > 1950")]


def test_c3_join_hop_token_arithmetic():
    """C3 JOIN/hop arithmetic: +11 split SQL tokens per join, +4 SPARQL tokens per hop, k in 0..5"""
    db = fixture_database(2, 0)
    g = build_schema_graph(db.manifest)
    for head, where in _FAMILIES:
        sql_lens, sparql_lens, hops = [], [], []
        for k in range(6):
            text = head + "".join(f" inner join {t} on {on}" for t, on in _CHAIN[:k]) + where
            q = parse_sql(text)
            assert len(q.joins) == k
            execute_sql(db, q)
            s = sql_to_sparql(q, g)
            sql_lens.append(len(serialize_sql(q, SPLIT)))
            sparql_lens.append(len(serialize_sparql(s)))
            hops.append(len(s.patterns))
        assert [b - a for a, b in zip(sql_lens, sql_lens[1:])] == [SQL_TOKENS_PER_JOIN] * 5
        assert [b - a for a, b in zip(hops, hops[1:])] == [1] * 5
        assert [b - a for a, b in zip(sparql_lens, sparql_lens[1:])] == \
            [SPARQL_TOKENS_PER_HOP] * 5


def test_c4_corpus_trend():
    """C4 corpus trend: per join bucket k>=1, mean SPARQL length grows strictly less than mean SQL length (from bucket 0)"""
    db = fixture_database(100, 42)
    g = build_schema_graph(db.manifest)
    buckets = {}
    for _, q in sample_query_corpus(fixture_templates(), db, 1000, 42):
        b = buckets.setdefault(len(q.joins), ([], []))
        b[0].append(len(serialize_sql(q, SPLIT)))
        b[1].append(len(serialize_sparql(sql_to_sparql(q, g))))
    mean = lambda xs: sum(xs) / len(xs)
    sql0, sparql0 = mean(buckets[0][0]), mean(buckets[0][1])
    assert sorted(buckets) == [0, 1, 2, 3, 4, 5]
    for k in range(1, 6):
        sql_growth = mean(buckets[k][0]) - sql0
        sparql_growth = mean(buckets[k][1]) - sparql0
        assert sparql_growth < sql_growth, (k, sql_growth, sparql_growth)


def test_c5_renormalization_growth():
    """C5 renormalization: >=50% split queries, mean split length strictly grows, 0 mismatches over 500"""
    db5 = fixture_database(100, 42, "five_table")
    db9 = fixture_database(100, 42, "nine_table")
    g9 = build_schema_graph(db9.manifest)
    mapping = five_to_nine_mapping()
    corpus = sample_query_corpus(fixture_templates("five_table"), db5, 500, 42)
    before = after = split = mismatches = 0
    for _, q in corpus:
        out = renormalize_sql(q, mapping, g9)
        split += len(out.tables) > len(q.tables)
        before += len(serialize_sql(q, SPLIT))
        after += len(serialize_sql(out, SPLIT))
        mismatches += not results_match(execute_sql(db5, q), execute_sql(db9, out))
    assert len(corpus) == 500
    assert split / 500 >= MIN_SPLIT_FRACTION
    assert after / 500 > before / 500
    assert mismatches == 0


def test_c6_kg_construction(tmp_path):
    """C6 KG construction: triple count == CSV cell oracle on seeds 0-19, max_depth == 5"""
    for seed in range(20):
        n = random.Random(seed).randint(1, 40)
        d = tmp_path / f"s{seed}"
        gen_fixture(n, seed, "nine_table", d)
        manifest = load_manifest(d / "manifest.json")
        kg = build_kg(load_database(manifest, d))
        count, depth = kg_metrics(kg)
        raw = json.loads((d / "manifest.json").read_text())
        assert count == triple_count_from_csv(raw, d), seed
        assert depth == 5, seed


def test_c7_sql_executor_oracle():
    """C7 SQL executor: 1000 queries vs nested-loop oracle on <=50-row fixtures, 0 mismatches (tol 1e-9)"""
    mismatches = 0
    total = 0
    for seed in range(10):
        db = fixture_database(3, seed)
        assert max(len(t.rows) for t in db.tables.values()) <= ORACLE_MAX_ROWS
        rng = random.Random(seed)
        for _ in range(100):
            q = random_db_query(db, rng)
            res = execute_sql(db, q)
            width, rows = nested_loop_sql(db, q)
            mismatches += not same_rows(len(res.columns), list(res.rows), width, rows, ORACLE_TOL)
            total += 1
    assert total == 1000
    assert mismatches == 0


def test_c8_round_trip_and_paths():
    """C8 round trips: 10000 ASTs per language; shortest_relation_path == BFS on 1000 DAGs"""
    rng = random.Random(2024)
    failures = 0
    for _ in range(10_000):
        q = random_sql_ast(rng)
        failures += parse_sql(serialize_sql(q, SPLIT)) != q
        failures += parse_sql(serialize_sql(q, FUSED)) != q
        s = random_sparql_ast(rng)
        failures += parse_sparql(serialize_sparql(s)) != s
    assert failures == 0

    for _ in range(1000):
        g = _random_dag(rng, rng.randint(1, 10))
        adj = {n: [(e.relation, e.target) for e in g.out_edges(n)] for n in g.nodes}
        for src in g.nodes:
            for dst in g.nodes:
                want = bfs_shortest_labels(adj, src, dst)
                try:
                    got = shortest_relation_path(g, src, dst).relations
                except NoPath:
                    got = None
                failures += got != want
    assert failures == 0
