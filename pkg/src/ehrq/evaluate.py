"""Accuracy metrics, the SQL/SPARQL differential check, and corpus statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EhrqError, EvaluationError, FileFormatError
from .kg import KnowledgeGraph, execute_sparql
from .query.masking import SPARQL, SQL, structure_key
from .query.sparql import count_patterns, parse_sparql, serialize_sparql
from .query.sql import SPLIT, SqlQuery, count_joins, parse_sql, serialize_sql
from .relational import Database, ResultSet, execute_sql
from .schema import SchemaGraph

REL_TOL = 1e-9
ABS_TOL = 1e-9
HIST_BIN = 5


# ---------------------------------------------------------------------------
# result comparison


def _cell_key(v):
    if v is None:
        return (0, 0.0, "")
    if isinstance(v, str):
        return (2, 0.0, v.strip().lower())
    return (1, float(v), "")


def _cells_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) \
            and a.strip().lower() == b.strip().lower()
    return math.isclose(float(a), float(b), rel_tol=REL_TOL, abs_tol=ABS_TOL)


def results_match(a: ResultSet, b: ResultSet) -> bool:
    """Same arity and the same rows as multisets, within the cell tolerances."""
    if len(a.columns) != len(b.columns) or len(a.rows) != len(b.rows):
        return False
    ra = sorted(a.rows, key=lambda r: tuple(_cell_key(c) for c in r))
    rb = sorted(b.rows, key=lambda r: tuple(_cell_key(c) for c in r))
    return all(_cells_equal(x, y) for r1, r2 in zip(ra, rb) for x, y in zip(r1, r2))


# ---------------------------------------------------------------------------
# metrics


def _parse(text, lang):
    if lang == SQL:
        return parse_sql(text)
    if lang == SPARQL:
        return parse_sparql(text)
    raise ValueError(f"unknown language {lang!r}")


def canonical_tokens(text, lang: str, tokenization: str = SPLIT) -> list[str]:
    q = _parse(text, lang)
    return serialize_sql(q, tokenization) if lang == SQL else serialize_sparql(q)


def _gold_tokens(gold, lang, tokenization):
    try:
        return canonical_tokens(gold, lang, tokenization)
    except EhrqError as exc:
        raise EvaluationError(f"gold query does not parse: {exc}") from exc


def _execute(store, q):
    if isinstance(store, Database):
        return execute_sql(store, q)
    if isinstance(store, KnowledgeGraph):
        return execute_sparql(store, q)
    raise TypeError(f"not a query store: {type(store).__name__}")


@dataclass(frozen=True)
class PairScore:
    lf: bool
    ex: bool
    st: bool
    note: str = ""


def score_pair(gold, pred, lang, store=None, tokenization: str = SPLIT) -> PairScore:
    """All three metrics for one pair; a bad prediction scores false, not an error."""
    gold_toks = _gold_tokens(gold, lang, tokenization)
    try:
        pred_q = _parse(pred, lang)
    except EhrqError as exc:
        return PairScore(False, False, False, f"prediction does not parse: {exc}")
    pred_toks = serialize_sql(pred_q, tokenization) if lang == SQL else serialize_sparql(pred_q)
    lf = gold_toks == pred_toks
    st = structure_key(gold_toks, lang) == structure_key(pred_toks, lang)
    if store is None:
        return PairScore(lf, False, st, "no store given; execution not scored")
    try:
        gold_res = _execute(store, _parse(gold, lang))
    except EhrqError as exc:
        raise EvaluationError(f"gold query failed to execute: {exc}") from exc
    try:
        pred_res = _execute(store, pred_q)
    except EhrqError as exc:
        return PairScore(lf, False, st, f"prediction failed to execute: {exc}")
    return PairScore(lf, results_match(gold_res, pred_res), st)


def acc_lf(gold, pred, lang: str, tokenization: str = SPLIT) -> bool:
    return score_pair(gold, pred, lang, tokenization=tokenization).lf


def acc_st(gold, pred, lang: str, tokenization: str = SPLIT) -> bool:
    return score_pair(gold, pred, lang, tokenization=tokenization).st


def acc_ex(gold, pred, lang: str, store) -> bool:
    return score_pair(gold, pred, lang, store).ex


@dataclass
class EvalReport:
    n: int
    acc_lf: float
    acc_ex: float
    acc_st: float
    per_pair: list[PairScore]
    failures: list[tuple[int, str]] = field(default_factory=list)

    @classmethod
    def from_scores(cls, scores: list[PairScore]) -> "EvalReport":
        n = len(scores)

        def mean(attr):
            return sum(getattr(s, attr) for s in scores) / n if n else 0.0

        failures = [(i, s.note) for i, s in enumerate(scores) if s.note]
        return cls(n, mean("lf"), mean("ex"), mean("st"), list(scores), failures)

    def to_json(self) -> dict:
        return {
            "n": self.n, "acc_lf": self.acc_lf, "acc_ex": self.acc_ex, "acc_st": self.acc_st,
            "pairs": [{"lf": s.lf, "ex": s.ex, "st": s.st, "note": s.note}
                      for s in self.per_pair],
            "failures": [{"index": i, "note": note} for i, note in self.failures],
        }


def read_jsonl(path, required: tuple[str, ...]) -> list[dict]:
    """JSON objects, one per non-blank line; errors carry the 1-based line number."""
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FileFormatError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise FileFormatError("expected a JSON object", lineno)
            for key in required:
                if not isinstance(obj.get(key), str):
                    raise FileFormatError(f"missing string field {key!r}", lineno)
            records.append(obj)
    return records


def evaluate_pairs(pairs, lang: str, store=None, tokenization: str = SPLIT) -> EvalReport:
    return EvalReport.from_scores(
        [score_pair(g, p, lang, store, tokenization) for g, p in pairs])


def evaluate_predictions(pairs_file, store, lang: str, tokenization: str = SPLIT) -> EvalReport:
    records = read_jsonl(pairs_file, ("gold", "pred"))
    return evaluate_pairs([(r["gold"], r["pred"]) for r in records], lang, store, tokenization)


# ---------------------------------------------------------------------------
# differential equivalence


@dataclass
class EquivalenceReport:
    n: int
    match_rate: float
    mismatches: list[dict]

    def to_json(self) -> dict:
        return {"n": self.n, "match_rate": self.match_rate, "mismatches": self.mismatches}


def verify_equivalence(corpus, db: Database, kg: KnowledgeGraph, graph: SchemaGraph,
                       sparql=None) -> EquivalenceReport:
    """Run every SQL query and its transpiled SPARQL and compare the answers.

    ``sparql`` optionally supplies the SPARQL side (texts or parsed queries)
    instead of transpiling.
    """
    from .transpile import sql_to_sparql

    mismatches = []
    corpus = list(corpus)
    for i, q in enumerate(corpus):
        entry = {"index": i, "sql": None, "sparql": None,
                 "sql_result": None, "sparql_result": None, "error": None}
        try:
            if not isinstance(q, SqlQuery):
                q = parse_sql(q)
            entry["sql"] = " ".join(serialize_sql(q))
            sq = sparql[i] if sparql is not None else sql_to_sparql(q, graph)
            if isinstance(sq, str):
                sq = parse_sparql(sq)
            entry["sparql"] = " ".join(serialize_sparql(sq))
            a = execute_sql(db, q)
            entry["sql_result"] = a.to_json()
            b = execute_sparql(kg, sq)
            entry["sparql_result"] = b.to_json()
            if results_match(a, b):
                continue
        except EhrqError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        mismatches.append(entry)
    n = len(corpus)
    rate = (n - len(mismatches)) / n if n else 1.0
    return EquivalenceReport(n, rate, mismatches)


# ---------------------------------------------------------------------------
# corpus statistics


@dataclass
class QueryRecord:
    sql_len: int
    sparql_len: int | None
    nlq_len: int
    n_joins: int
    n_hops: int | None


def histogram(values, width: int = HIST_BIN) -> dict[int, int]:
    """Counts keyed by bin start (``[start, start + width)``)."""
    out: dict[int, int] = defaultdict(int)
    for v in values:
        out[(v // width) * width] += 1
    return dict(sorted(out.items()))


def _mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


@dataclass
class CorpusStats:
    records: list[QueryRecord]
    bucket_accuracy: dict[int, dict] | None = None

    @property
    def n(self) -> int:
        return len(self.records)

    def _sparql(self):
        return [r for r in self.records if r.sparql_len is not None]

    def buckets(self) -> dict[int, dict]:
        groups = defaultdict(list)
        for r in self.records:
            groups[r.n_joins].append(r)
        out = {}
        for k in sorted(groups):
            rs = groups[k]
            sp = [r for r in rs if r.sparql_len is not None]
            out[k] = {
                "n": len(rs),
                "mean_sql_len": _mean(r.sql_len for r in rs),
                "mean_sparql_len": _mean(r.sparql_len for r in sp),
                "mean_hops": _mean(r.n_hops for r in sp),
                "mean_nlq_len": _mean(r.nlq_len for r in rs),
            }
        return out

    def aggregates(self) -> dict:
        sp = self._sparql()
        out = {
            "n": self.n,
            "mean_sql_len": _mean(r.sql_len for r in self.records),
            "mean_sparql_len": _mean(r.sparql_len for r in sp),
            "mean_nlq_len": _mean(r.nlq_len for r in self.records),
            "hist_bin_width": HIST_BIN,
            "hist_sql": histogram(r.sql_len for r in self.records),
            "hist_sparql": histogram(r.sparql_len for r in sp),
            "hist_nlq": histogram(r.nlq_len for r in self.records),
            "join_buckets": self.buckets(),
        }
        if self.bucket_accuracy is not None:
            out["bucket_accuracy"] = self.bucket_accuracy
        return out


def query_record(sql_text_: str, sparql_text_: str | None, nlq: str,
                 tokenization: str = SPLIT) -> QueryRecord:
    sql_toks = serialize_sql(parse_sql(sql_text_), tokenization)
    sparql_toks = serialize_sparql(parse_sparql(sparql_text_)) if sparql_text_ else None
    return QueryRecord(
        sql_len=len(sql_toks),
        sparql_len=len(sparql_toks) if sparql_toks is not None else None,
        nlq_len=len(nlq.split()),
        n_joins=count_joins(sql_toks),
        n_hops=count_patterns(sparql_toks) if sparql_toks is not None else None,
    )


def corpus_stats(dataset_file, predictions_file=None, lang: str = SQL, store=None,
                 tokenization: str = SPLIT) -> CorpusStats:
    """Per-query lengths and join/hop counts; with predictions, per-bucket accuracy.

    Predictions are matched to dataset rows by position; their gold is
    bucketed by the dataset row's join count.
    """
    rows = read_jsonl(dataset_file, ("sql",))
    records = []
    for lineno, r in enumerate(rows, start=1):
        nlq = r.get("nlq_natural") or r.get("nlq_template") or ""
        try:
            records.append(query_record(r["sql"], r.get("sparql"), nlq, tokenization))
        except EhrqError as exc:
            raise FileFormatError(f"record {lineno}: {exc}") from None
    stats = CorpusStats(records)
    if predictions_file is not None:
        preds = read_jsonl(predictions_file, ("gold", "pred"))
        if len(preds) != len(records):
            raise FileFormatError(
                f"{len(preds)} predictions for {len(records)} dataset records")
        groups = defaultdict(list)
        for rec, p in zip(records, preds):
            groups[rec.n_joins].append(score_pair(p["gold"], p["pred"], lang, store,
                                                  tokenization))
        stats.bucket_accuracy = {
            k: {"n": len(v), "acc_lf": _mean(s.lf for s in v),
                "acc_ex": _mean(s.ex for s in v), "acc_st": _mean(s.st for s in v)}
            for k, v in sorted(groups.items())
        }
    return stats


def write_stats(stats: CorpusStats, out_dir) -> list[Path]:
    """CSV per-query table, JSON aggregates and gnuplot ``.dat`` histograms."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "sql_len", "sparql_len", "nlq_len", "n_joins", "n_hops"])
    for i, r in enumerate(stats.records):
        w.writerow([i, r.sql_len, "" if r.sparql_len is None else r.sparql_len, r.nlq_len,
                    r.n_joins, "" if r.n_hops is None else r.n_hops])
    written.append(_write(out / "queries.csv", buf.getvalue()))

    agg = stats.aggregates()
    written.append(_write(out / "summary.json", json.dumps(agg, indent=2, sort_keys=True) + "\n"))

    for name in ("sql", "sparql", "nlq"):
        lines = [f"# bin_start count (bin width {HIST_BIN} tokens)"]
        lines += [f"{k} {v}" for k, v in agg[f"hist_{name}"].items()]
        written.append(_write(out / f"hist_{name}.dat", "\n".join(lines) + "\n"))

    lines = ["# n_joins n mean_sql_len mean_sparql_len mean_hops mean_nlq_len"]
    for k, b in agg["join_buckets"].items():
        lines.append(f"{k} {b['n']} {b['mean_sql_len']:.4f} {b['mean_sparql_len']:.4f} "
                     f"{b['mean_hops']:.4f} {b['mean_nlq_len']:.4f}")
    written.append(_write(out / "join_buckets.dat", "\n".join(lines) + "\n"))

    if stats.bucket_accuracy is not None:
        lines = ["# n_joins n acc_lf acc_ex acc_st"]
        for k, b in stats.bucket_accuracy.items():
            lines.append(f"{k} {b['n']} {b['acc_lf']:.4f} {b['acc_ex']:.4f} {b['acc_st']:.4f}")
        written.append(_write(out / "bucket_accuracy.dat", "\n".join(lines) + "\n"))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path
