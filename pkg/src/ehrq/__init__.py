"""Relational EHR data as a knowledge graph, with a SQL-to-SPARQL transpiler,
two query executors and the logic-form / execution / structural metrics."""
from .errors import *  # noqa: F401,F403
from .evaluate import (CorpusStats, EquivalenceReport, EvalReport, acc_ex, acc_lf, acc_st,
                       corpus_stats, evaluate_predictions, results_match, verify_equivalence)
from .fixtures import fixture_database, fixture_manifest, fixture_templates, gen_fixture
from .kg import Entity, KnowledgeGraph, build_kg, execute_sparql, kg_metrics
from .query import *  # noqa: F401,F403
from .relational import Database, ResultSet, database_from_rows, execute_sql, load_database
from .schema import (SchemaManifest, build_schema_graph, load_manifest, manifest_from_json,
                     shortest_relation_path)
from .transpile import (ColumnMapping, QueryTemplate, load_templates, renormalize_sql,
                        sample_query_corpus, sql_to_sparql)

__version__ = "0.1.0"
