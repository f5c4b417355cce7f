"""Lexer and value formatting shared by the SQL and SPARQL dialects."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

PLACEHOLDER = "<cond_val>"
COMPARISON_OPS = ("=", "<", ">", "<=", ">=")
AGGREGATES = ("count", "max", "min", "avg")

_LEXER = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<string>"[^"]*"|'[^']*')
    | (?P<slot>\|[a-z_][a-z0-9_]*\|)
    | (?P<placeholder><cond_val>)
    | (?P<iri></[^\s<>]*>)
    | (?P<var>\?[a-z_][a-z0-9_]*)
    | (?P<number>[-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?(?![a-z_]))
    | (?P<word>[a-z_][a-z0-9_]*(?:\.[a-z_][a-z0-9_]*)?)
    | (?P<op><=|>=|<>|!=|=|<|>)
    | (?P<punct>[(){},.*;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str


@dataclass(frozen=True)
class Slot:
    """Named value hole in a query template, written ``|name|``."""

    name: str


class _Masked:
    def __repr__(self):
        return PLACEHOLDER


# value standing in for a masked condition value
MASKED = _Masked()

Value = Union[str, int, float, Slot, _Masked]


def lex(text: str, error=ValueError) -> list[Tok]:
    """Split query text into typed tokens; the whole text is lowercased first."""
    text = text.lower()
    out = []
    pos = 0
    while pos < len(text):
        m = _LEXER.match(text, pos)
        if m is None:
            raise error(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup != "ws":
            out.append(Tok(m.lastgroup, m.group()))
    return out


def tokenize(text: str | list[str]) -> list[str]:
    if isinstance(text, list):
        text = " ".join(text)
    return [t.text for t in lex(text)]


def parse_value(tok: Tok):
    """Literal value of a string, number, slot, or placeholder token, else None."""
    if tok.kind == "string":
        return tok.text[1:-1].strip()
    if tok.kind == "number":
        if re.fullmatch(r"[-+]?\d+", tok.text):
            return int(tok.text)
        return float(tok.text)
    if tok.kind == "slot":
        return Slot(tok.text[1:-1])
    if tok.kind == "placeholder":
        return MASKED
    return None


def format_value(value) -> str:
    if isinstance(value, Slot):
        return f"|{value.name}|"
    if value is MASKED:
        return PLACEHOLDER
    if isinstance(value, bool):
        raise TypeError("boolean values are not part of the query language")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        if '"' in value:
            raise ValueError(f"text value {value!r} contains a double quote")
        return f'"{value}"'
    raise TypeError(f"cannot format value {value!r}")
