"""``ehrq`` command line: fixtures, KG compilation, transpilation, execution, evaluation."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EhrqError
from .evaluate import (corpus_stats, evaluate_predictions, read_jsonl, verify_equivalence,
                       write_stats)
from .fixtures import SHAPES, gen_fixture
from .kg import build_kg, dump_triples, execute_sparql, kg_metrics
from .query.masking import LANGUAGES, SQL
from .query.sparql import parse_sparql, sparql_text
from .query.sql import SPLIT, TOKENIZATIONS, parse_sql, sql_text
from .relational import load_database, execute_sql
from .schema import build_schema_graph, load_manifest
from .transpile import load_mapping, load_templates, renormalize_sql, sample_query_corpus, \
    sql_to_sparql

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _store(args):
    manifest = load_manifest(args.manifest)
    return manifest, load_database(manifest, args.data)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        print(text)


def _read_query(args) -> str:
    if args.query is not None:
        return args.query
    return Path(args.query_file).read_text(encoding="utf-8")


def cmd_gen_fixture(args) -> int:
    for path in gen_fixture(args.patients, args.seed, args.schema, args.out):
        print(path)
    return EXIT_OK


def cmd_build_kg(args) -> int:
    manifest, db = _store(args)
    kg = build_kg(db, manifest)
    dump_triples(kg, args.out)
    count, depth = kg_metrics(kg)
    print(json.dumps({"triples": count, "max_depth": depth}))
    return EXIT_OK


def cmd_transpile(args) -> int:
    graph = build_schema_graph(load_manifest(args.manifest))
    _emit(sparql_text(sql_to_sparql(parse_sql(_read_query(args)), graph)), args.out)
    return EXIT_OK


def cmd_renormalize(args) -> int:
    target = build_schema_graph(load_manifest(args.target_manifest))
    q = renormalize_sql(parse_sql(_read_query(args)), load_mapping(args.mapping), target)
    _emit(sql_text(q, args.tokenization), args.out)
    return EXIT_OK


def cmd_sample_corpus(args) -> int:
    manifest, db = _store(args)
    graph = build_schema_graph(manifest)
    lines = []
    for nlq, q in sample_query_corpus(load_templates(args.templates), db, args.n, args.seed):
        try:
            sparql = sparql_text(sql_to_sparql(q, graph))
        except EhrqError:
            sparql = None
        lines.append(json.dumps({"nlq_template": nlq, "nlq_natural": None,
                                 "sql": sql_text(q, args.tokenization), "sparql": sparql}))
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_run_sql(args) -> int:
    _, db = _store(args)
    print(json.dumps(execute_sql(db, parse_sql(_read_query(args))).to_json()))
    return EXIT_OK


def cmd_run_sparql(args) -> int:
    manifest, db = _store(args)
    kg = build_kg(db, manifest)
    print(json.dumps(execute_sparql(kg, parse_sparql(_read_query(args))).to_json()))
    return EXIT_OK


def cmd_verify_equivalence(args) -> int:
    manifest, db = _store(args)
    kg = build_kg(db, manifest)
    graph = build_schema_graph(manifest)
    records = read_jsonl(args.corpus, ("sql",))
    report = verify_equivalence([r["sql"] for r in records], db, kg, graph)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json(), indent=2) + "\n",
                                     encoding="utf-8")
    print(f"match_rate {report.match_rate:.3f} ({report.n - len(report.mismatches)}/{report.n})")
    for m in report.mismatches[:10]:
        print(f"mismatch at {m['index']}: {m['error'] or m['sql']}", file=sys.stderr)
    return EXIT_OK if report.match_rate == 1.0 else EXIT_FAIL


def cmd_evaluate(args) -> int:
    manifest, db = _store(args)
    store = db if args.lang == SQL else build_kg(db, manifest)
    report = evaluate_predictions(args.pred, store, args.lang, args.tokenization)
    print(json.dumps(report.to_json(), indent=2))
    return EXIT_OK


def cmd_stats(args) -> int:
    store = None
    if args.predictions and args.manifest and args.data:
        manifest, db = _store(args)
        store = db if args.lang == SQL else build_kg(db, manifest)
    stats = corpus_stats(args.dataset, args.predictions, args.lang, store, args.tokenization)
    for path in write_stats(stats, args.out):
        print(path)
    return EXIT_OK


def _add_store(p, required=True):
    p.add_argument("--manifest", required=required, help="schema manifest JSON")
    p.add_argument("--data", required=required, help="directory of <table>.csv files")


def _add_query(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--query", help="query text")
    g.add_argument("--query-file", help="file holding the query text")


def _add_tokenization(p):
    p.add_argument("--tokenization", choices=TOKENIZATIONS, default=SPLIT,
                   help="SQL column tokens: split (t . c) or fused (t.c); default split")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ehrq", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-fixture", help="write a synthetic seeded fixture")
    p.add_argument("--patients", type=int, default=100, help="number of patients (>= 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--schema", choices=SHAPES, default="nine_table")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_fixture)

    p = sub.add_parser("build-kg", help="compile the database into triples (TSV)")
    _add_store(p)
    p.add_argument("--out", required=True, help="output triples file")
    p.set_defaults(func=cmd_build_kg)

    p = sub.add_parser("transpile", help="translate SQL into SPARQL")
    p.add_argument("--manifest", required=True)
    _add_query(p)
    p.add_argument("--out", help="write the SPARQL here instead of stdout")
    p.set_defaults(func=cmd_transpile)

    p = sub.add_parser("renormalize", help="rewrite SQL onto another schema")
    p.add_argument("--mapping", required=True, help="column mapping JSON")
    p.add_argument("--target-manifest", required=True)
    _add_query(p)
    _add_tokenization(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_renormalize)

    p = sub.add_parser("sample-corpus", help="fill templates with database values")
    _add_store(p)
    p.add_argument("--templates", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_tokenization(p)
    p.add_argument("--out", required=True, help="dataset JSONL")
    p.set_defaults(func=cmd_sample_corpus)

    p = sub.add_parser("run-sql", help="execute SQL against the CSV database")
    _add_store(p)
    _add_query(p)
    p.set_defaults(func=cmd_run_sql)

    p = sub.add_parser("run-sparql", help="execute SPARQL against the compiled graph")
    _add_store(p)
    _add_query(p)
    p.set_defaults(func=cmd_run_sparql)

    p = sub.add_parser("verify-equivalence", help="compare SQL and transpiled SPARQL answers")
    _add_store(p)
    p.add_argument("--corpus", required=True, help="JSONL with a sql field per line")
    p.add_argument("--report", help="write full mismatch diagnostics as JSON")
    p.set_defaults(func=cmd_verify_equivalence)

    p = sub.add_parser("evaluate", help="score predictions with the three accuracies")
    p.add_argument("--pred", required=True, help="JSONL of {gold, pred}")
    p.add_argument("--lang", choices=LANGUAGES, required=True)
    _add_store(p)
    _add_tokenization(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="query length and join statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", help="optional JSONL of {gold, pred} aligned with dataset")
    p.add_argument("--lang", choices=LANGUAGES, default=SQL)
    _add_store(p, required=False)
    _add_tokenization(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "patients", 1) < 1:
        parser.error("--patients must be at least 1")
    try:
        return args.func(args)
    except (EhrqError, OSError, ValueError) as exc:
        print(f"ehrq {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
