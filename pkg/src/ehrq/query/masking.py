"""Condition-value masking over canonical token streams."""
from __future__ import annotations

from .sparql import parse_sparql
from .sql import parse_sql
from .tokens import COMPARISON_OPS, PLACEHOLDER

SQL = "sql"
SPARQL = "sparql"
LANGUAGES = (SQL, SPARQL)


def _is_variable(tok: str) -> bool:
    return tok.startswith("?")


def mask_condition_values(tokens: list[str], lang: str) -> list[str]:
    """Replace every condition value with ``<cond_val>``; nothing else changes.

    SQL: the token after each comparison operator in the WHERE clause (join
    ON equalities are schema structure and stay).  SPARQL: constant subjects
    and objects of triple patterns and the right-hand side of filters.
    """
    tokens = list(tokens)
    if lang == SQL:
        parse_sql(tokens)
        try:
            start = tokens.index("where")
        except ValueError:
            return tokens
        for i in range(start + 1, len(tokens)):
            if tokens[i - 1] in COMPARISON_OPS:
                tokens[i] = PLACEHOLDER
        return tokens
    if lang == SPARQL:
        parse_sparql(tokens)
        for group in _sparql_groups(tokens):
            if tokens[group[0]] == "filter":
                tokens[group[4]] = PLACEHOLDER
            else:
                s, _, o = group[:3]
                for i in (s, o):
                    if not _is_variable(tokens[i]):
                        tokens[i] = PLACEHOLDER
        return tokens
    raise ValueError(f"unknown language {lang!r}")


def _sparql_groups(tokens: list[str]) -> list[list[int]]:
    """Index groups for each pattern (s p o [.]) and filter in a valid stream."""
    i = tokens.index("{") + 1
    groups = []
    while tokens[i] != "}":
        if tokens[i] == "filter":
            groups.append(list(range(i, i + 6)))
            i += 6
        else:
            g = [i, i + 1, i + 2]
            i += 3
            if tokens[i] == ".":
                g.append(i)
                i += 1
            groups.append(g)
    return groups


def structure_key(tokens: list[str], lang: str) -> tuple:
    """Masked stream with the order of the condition conjuncts factored out.

    WHERE conjuncts (SQL) and triple patterns / filters (SPARQL) are compared
    as multisets; everything else keeps its position.
    """
    masked = mask_condition_values(tokens, lang)
    if lang == SQL:
        if "where" not in masked:
            return tuple(masked), ()
        start = masked.index("where")
        conjuncts, cur = [], []
        for tok in masked[start + 1:]:
            if tok == "and":
                conjuncts.append(tuple(cur))
                cur = []
            else:
                cur.append(tok)
        conjuncts.append(tuple(cur))
        return tuple(masked[:start]), tuple(sorted(conjuncts))
    head = tuple(masked[: masked.index("{")])
    patterns, filters = [], []
    for g in _sparql_groups(masked):
        group = tuple(masked[i] for i in g if masked[i] != ".")
        (filters if group[0] == "filter" else patterns).append(group)
    return head, tuple(sorted(patterns)), tuple(sorted(filters))
