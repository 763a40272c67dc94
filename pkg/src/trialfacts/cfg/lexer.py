"""Lexer for attribute criteria.

Divides a tokenized criteria line into typed lexemes: attribute names,
unit symbols, comparison phrases, numbers, negation markers, connectors,
and unknowns, with a trailing end-of-string lexeme. Attribute aliases and
unit symbols come from the attribute catalog; comparison phrases are
normalized to one of <, <=, >, >=, =, between.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from ..kb import AttributeDef
from ..preprocess import NUM_MASK, Token, tokenize


class LexKind(Enum):
    ATTRIBUTE = "attribute"
    UNIT = "unit"
    COMPARISON = "comparison"
    NUMBER = "number"
    NEGATION = "negation"
    CONNECTOR = "connector"
    END_OF_STRING = "end_of_string"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class LexToken:
    kind: LexKind
    surface: str
    token_span: tuple[int, int]  # [first, last] indices into the source tokens
    value: Fraction | None = None
    attribute_id: str | None = None
    unit_symbol: str | None = None
    comparison_op: str | None = None


# Comparison phrases. Multi-word phrases are matched over space-joined
# lowercased tokens; symbol sequences (">=") over tokens joined without
# spaces. Postfix phrases like "or older" read as attribute-op-value with
# the value written first ("18 years or older" means age >= 18).
COMPARISON_PHRASES: dict[str, str] = {
    "<": "<",
    ">": ">",
    "=": "=",
    "==": "=",
    "<=": "<=",
    "=<": "<=",
    ">=": ">=",
    "=>": ">=",
    "≤": "<=",
    "≥": ">=",
    "at least": ">=",
    "no less than": ">=",
    "not less than": ">=",
    "greater than or equal to": ">=",
    "greater or equal to": ">=",
    "no more than": "<=",
    "not more than": "<=",
    "at most": "<=",
    "less than or equal to": "<=",
    "up to": "<=",
    "greater than": ">",
    "more than": ">",
    "over": ">",
    "above": ">",
    "exceeding": ">",
    "higher than": ">",
    "less than": "<",
    "under": "<",
    "below": "<",
    "fewer than": "<",
    "lower than": "<",
    "equal to": "=",
    "equals": "=",
    "between": "between",
    "in the range of": "between",
    "or older": ">=",
    "or greater": ">=",
    "or more": ">=",
    "or higher": ">=",
    "or above": ">=",
    "and older": ">=",
    "and above": ">=",
    "or younger": "<=",
    "or less": "<=",
    "or lower": "<=",
    "or fewer": "<=",
    "or below": "<=",
    "and younger": "<=",
    "and under": "<=",
}

NEGATION_WORDS = {"no", "not", "non", "without"}
CONNECTOR_WORDS = {"and", "to", "-", "–", "—"}


class LexCatalog:
    """Phrase tables compiled from an attribute catalog, reusable per line."""

    def __init__(self, attributes: dict[str, AttributeDef]):
        self.attributes = attributes
        self.attribute_names: dict[str, str] = {}
        for attr_id in sorted(attributes):
            for name in sorted(attributes[attr_id].names()):
                # index by the tokenized join so punctuated names match scans
                key = " ".join(t.surface.lower() for t in tokenize(name))
                if key:
                    self.attribute_names.setdefault(key, attr_id)
        self.unit_symbols: set[str] = set()
        for attr in attributes.values():
            self.unit_symbols.update(u for u in attr.accepted_units if u)
        self.unit_symbols.add("%")
        self.max_attr_tokens = max(
            (name.count(" ") + 1 for name in self.attribute_names), default=1
        )
        self.max_unit_tokens = max(
            (len(tokenize(symbol)) for symbol in self.unit_symbols), default=1
        )
        self.max_cmp_tokens = max(
            len(phrase.split()) for phrase in COMPARISON_PHRASES
        )
        self.max_neg_tokens = max(len(p.split()) for p in NEGATION_WORDS)


def _joined(tokens: list[Token] | tuple[Token, ...], first: int, last: int, sep: str) -> str:
    return sep.join(tokens[i].surface.lower() for i in range(first, last + 1))


def _match_at(tokens, position: int, catalog: LexCatalog) -> LexToken | None:
    """Longest phrase match at a position; ties break by table priority:
    attribute, comparison, unit, negation, connector."""
    n = len(tokens)
    limit = max(
        catalog.max_attr_tokens,
        catalog.max_unit_tokens,
        catalog.max_cmp_tokens,
        catalog.max_neg_tokens,
    )
    for last in range(min(position + limit, n) - 1, position - 1, -1):
        spaced = _joined(tokens, position, last, " ")
        compact = _joined(tokens, position, last, "")
        span = (position, last)
        surface = " ".join(tokens[i].surface for i in range(position, last + 1))
        if spaced in catalog.attribute_names:
            return LexToken(
                kind=LexKind.ATTRIBUTE,
                surface=surface,
                token_span=span,
                attribute_id=catalog.attribute_names[spaced],
            )
        op = COMPARISON_PHRASES.get(spaced) or COMPARISON_PHRASES.get(compact)
        if op is not None:
            return LexToken(
                kind=LexKind.COMPARISON,
                surface=surface,
                token_span=span,
                comparison_op=op,
            )
        if compact in catalog.unit_symbols:
            return LexToken(
                kind=LexKind.UNIT, surface=surface, token_span=span, unit_symbol=compact
            )
        if spaced in NEGATION_WORDS:
            return LexToken(kind=LexKind.NEGATION, surface=surface, token_span=span)
        if spaced in CONNECTOR_WORDS:
            return LexToken(kind=LexKind.CONNECTOR, surface=surface, token_span=span)
    return None


def _parse_number(surface: str) -> Fraction:
    return Fraction(surface.replace(",", ""))


def lex(
    line_tokens: list[Token] | tuple[Token, ...],
    catalog: LexCatalog | dict[str, AttributeDef],
) -> list[LexToken]:
    """Greedy longest-match lexing of a tokenized line.

    Always appends an end_of_string lexeme. Tokens covered by no table and
    not numeric come out as unknown.
    """
    if isinstance(catalog, dict):
        catalog = LexCatalog(catalog)
    lexemes: list[LexToken] = []
    position = 0
    n = len(line_tokens)
    while position < n:
        match = _match_at(line_tokens, position, catalog)
        if match is not None:
            lexemes.append(match)
            position = match.token_span[1] + 1
            continue
        token = line_tokens[position]
        if token.delex == NUM_MASK:
            lexemes.append(
                LexToken(
                    kind=LexKind.NUMBER,
                    surface=token.surface,
                    token_span=(position, position),
                    value=_parse_number(token.surface),
                )
            )
        else:
            lexemes.append(
                LexToken(
                    kind=LexKind.UNKNOWN,
                    surface=token.surface,
                    token_span=(position, position),
                )
            )
        position += 1
    end_position = (n, n) if n else (0, 0)
    lexemes.append(
        LexToken(kind=LexKind.END_OF_STRING, surface="", token_span=end_position)
    )
    return lexemes
