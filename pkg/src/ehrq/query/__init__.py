from .masking import LANGUAGES, SPARQL, SQL, mask_condition_values, structure_key
from .sparql import (Aggregate, EntityRef, Filter, SparqlQuery, TriplePattern, Var,
                     count_patterns, parse_sparql, serialize_sparql, sparql_text)
from .sql import (FUSED, SPLIT, TOKENIZATIONS, ColumnRef, Condition, Join, SelectItem,
                  SqlQuery, count_joins, parse_sql, serialize_sql, sql_text)
from .tokens import MASKED, PLACEHOLDER, Slot, tokenize

__all__ = [
    "SQL", "SPARQL", "LANGUAGES", "FUSED", "SPLIT", "TOKENIZATIONS", "MASKED", "PLACEHOLDER",
    "Slot", "tokenize", "mask_condition_values", "structure_key",
    "ColumnRef", "Condition", "Join", "SelectItem", "SqlQuery", "parse_sql", "serialize_sql",
    "sql_text", "count_joins",
    "Aggregate", "EntityRef", "Filter", "SparqlQuery", "TriplePattern", "Var", "parse_sparql",
    "serialize_sparql", "sparql_text", "count_patterns",
]
