"""Binary negation detection for entity mentions.

A mention is negated when a rule's keyword occurs close enough to the
mention span, in the rule's direction. Rules are per-category or wildcard
and ship as an editable TSV: category_or_* <TAB> keyword <TAB>
max_token_distance <TAB> direction(preceding|either).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import TrialFactsError
from .kb import EntityCategory
from .preprocess import Token
from .tagging import EntityMention


class Polarity(Enum):
    AFFIRMED = "affirmed"
    NEGATED = "negated"


@dataclass(frozen=True)
class NegationRule:
    category: EntityCategory | None  # None = wildcard, applies to every class
    keywords: frozenset[str]
    max_token_distance: int
    direction: str  # "preceding" | "either"

    def __post_init__(self):
        if self.max_token_distance < 0:
            raise ValueError("max_token_distance must be >= 0")
        if not self.keywords:
            raise ValueError("rule needs at least one keyword")
        if self.direction not in ("preceding", "either"):
            raise ValueError(f"bad direction: {self.direction}")

    def applies_to(self, category: EntityCategory) -> bool:
        return self.category is None or self.category == category


def load_negation_rules(path: str | Path) -> list[NegationRule]:
    rules = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise TrialFactsError(
                    f"{path}:{lineno}: expected 4 columns, got {len(cols)}"
                )
            category_cell, keyword, distance_cell, direction = (
                c.strip() for c in cols
            )
            category = (
                None if category_cell == "*" else EntityCategory.parse(category_cell)
            )
            rules.append(
                NegationRule(
                    category=category,
                    keywords=frozenset({keyword.lower()}),
                    max_token_distance=int(distance_cell),
                    direction=direction,
                )
            )
    return rules


def load_default_negation_rules() -> list[NegationRule]:
    with resources.as_file(
        resources.files("trialfacts.data").joinpath("negation_rules.tsv")
    ) as path:
        return load_negation_rules(path)


def _keyword_occurrences(
    lowered: list[str], keyword: str
) -> list[tuple[int, int]]:
    words = keyword.split()
    spans = []
    for start in range(len(lowered) - len(words) + 1):
        if lowered[start : start + len(words)] == words:
            spans.append((start, start + len(words) - 1))
    return spans


def detect_negation(
    line_tokens: list[Token] | tuple[Token, ...],
    mention: EntityMention,
    rules: list[NegationRule],
) -> Polarity:
    """Negated iff any applicable rule's keyword lies within the rule's
    token distance of the mention span, in the rule's direction.

    Token distance counts the tokens strictly between keyword and mention
    (adjacent = 0). A keyword overlapping the mention span counts as
    distance 0. Any hit suffices.
    """
    lowered = [t.surface.lower() for t in line_tokens]
    first, last = mention.token_span
    for rule in rules:
        if not rule.applies_to(mention.category):
            continue
        for keyword in sorted(rule.keywords):
            for k_start, k_end in _keyword_occurrences(lowered, keyword):
                if k_start <= last and first <= k_end:
                    distance = 0  # overlaps the mention
                elif k_end < first:
                    distance = first - k_end - 1
                elif rule.direction == "either":
                    distance = k_start - last - 1
                else:
                    continue
                if distance <= rule.max_token_distance:
                    return Polarity.NEGATED
    return Polarity.AFFIRMED
