"""Entity mention tagging.

Two sources of mentions feed the pipeline: a gazetteer tagger that matches
knowledge-base names against token n-grams (always available), and external
BIO tag files produced by a separately trained neural tagger. Both yield
EntityMention spans; merge_mentions reconciles them.

Tag interchange JSONL, one record per criteria line:
    {"nct_id": ..., "block": "inclusion"|"exclusion", "line_index": int,
     "tokens": [...], "tags": [...], "scores": [...](optional)}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import TagIngestError
from .kb import EntityCategory, KnowledgeBase, normalize_name
from .preprocess import BlockKind, Line, Token

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntityMention:
    """A tagged span with category and provenance.

    token_span is [first_token, last_token], inclusive, within the line.
    surface is the space-joined raw tokens of the span.
    """

    trial_id: str
    block_kind: BlockKind
    line_index: int
    token_span: tuple[int, int]
    surface: str
    category: EntityCategory
    score: float = 1.0

    @property
    def span_length(self) -> int:
        return self.token_span[1] - self.token_span[0] + 1

    def sort_key(self):
        return (self.trial_id, self.line_index, self.token_span[0], self.token_span[1])

    def overlaps(self, other: "EntityMention") -> bool:
        return (
            self.line_index == other.line_index
            and self.token_span[0] <= other.token_span[1]
            and other.token_span[0] <= self.token_span[1]
        )


def span_surface(tokens: list[Token] | tuple[Token, ...], first: int, last: int) -> str:
    return " ".join(tokens[i].surface for i in range(first, last + 1))


# --- BIO tag sequences ----------------------------------------------------


def validate_bio(tags: list[str]) -> bool:
    """True iff the sequence is well-formed BIO over the entity categories."""
    previous = "O"
    for tag in tags:
        if tag == "O":
            previous = tag
            continue
        if "-" not in tag:
            return False
        prefix, category = tag.split("-", 1)
        try:
            EntityCategory(category)
        except ValueError:
            return False
        if prefix == "I":
            if previous == "O" or previous.split("-", 1)[1] != category:
                return False
        elif prefix != "B":
            return False
        previous = tag
    return True


def decode_bio(tags: list[str], repair: bool = False) -> list[tuple[int, int, EntityCategory]]:
    """Convert BIO labels to (first, last, category) spans.

    With repair=True, a stray I- tag (after O or a different category) is
    treated as B-. Without it, invalid input raises ValueError.
    """
    spans = []
    current: tuple[int, EntityCategory] | None = None
    for position, tag in enumerate(tags):
        if tag == "O":
            if current is not None:
                spans.append((current[0], position - 1, current[1]))
                current = None
            continue
        prefix, _, category_name = tag.partition("-")
        category = EntityCategory(category_name)
        if prefix == "B":
            if current is not None:
                spans.append((current[0], position - 1, current[1]))
            current = (position, category)
        elif prefix == "I":
            if current is not None and current[1] == category:
                continue
            if not repair:
                raise ValueError(f"invalid BIO transition at position {position}: {tag}")
            if current is not None:
                spans.append((current[0], position - 1, current[1]))
            current = (position, category)
        else:
            raise ValueError(f"unknown tag prefix: {tag}")
    if current is not None:
        spans.append((current[0], len(tags) - 1, current[1]))
    return spans


def encode_bio(spans: list[tuple[int, int, EntityCategory]], length: int) -> list[str]:
    tags = ["O"] * length
    for first, last, category in spans:
        tags[first] = f"B-{category.value}"
        for i in range(first + 1, last + 1):
            tags[i] = f"I-{category.value}"
    return tags


# --- Gazetteer tagging ----------------------------------------------------


def tag_gazetteer(
    line_tokens: list[Token] | tuple[Token, ...],
    kb: KnowledgeBase,
    *,
    trial_id: str = "",
    block_kind: BlockKind = BlockKind.INCLUSION,
    line_index: int = 0,
) -> list[EntityMention]:
    """Greedy longest-match of concept names/synonyms over token n-grams.

    Matches never overlap: longer spans win, then leftmost. Every match gets
    score 1.0.
    """
    max_tokens = min(len(line_tokens), kb.max_name_token_count())
    candidates = []
    for first in range(len(line_tokens)):
        for last in range(first, min(first + max_tokens, len(line_tokens))):
            # scan key must not strip edge punctuation, or the span would
            # swallow neighboring punctuation tokens
            key = " ".join(
                line_tokens[i].surface.lower() for i in range(first, last + 1)
            )
            ids = kb.name_index.get(key)
            if not ids:
                continue
            concept_ids = sorted(i for i in ids if i in kb.concepts)
            if not concept_ids:
                continue
            candidates.append((first, last, concept_ids[0]))

    candidates.sort(key=lambda c: (-(c[1] - c[0]), c[0]))
    chosen: list[EntityMention] = []
    taken: set[int] = set()
    for first, last, concept_id in candidates:
        if any(i in taken for i in range(first, last + 1)):
            continue
        taken.update(range(first, last + 1))
        chosen.append(
            EntityMention(
                trial_id=trial_id,
                block_kind=block_kind,
                line_index=line_index,
                token_span=(first, last),
                surface=span_surface(line_tokens, first, last),
                category=kb.concepts[concept_id].category,
                score=1.0,
            )
        )
    chosen.sort(key=lambda m: m.token_span)
    return chosen


# --- External tag ingestion -----------------------------------------------


def ingest_external_tags(
    tag_file: str | Path,
    corpus_lines: dict[tuple[str, int], tuple[BlockKind, Line]],
) -> list[EntityMention]:
    """Read a tag interchange JSONL file and decode mentions.

    corpus_lines maps (nct_id, line_index) to the preprocessed line, used to
    check token counts and to recover raw surfaces. Invalid BIO transitions
    are repaired by treating stray I- tags as B-.
    """
    mentions = []
    with open(tag_file, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise TagIngestError(f"{tag_file}:{lineno}: bad JSON: {exc}") from exc
            nct_id = record["nct_id"]
            line_index = record["line_index"]
            key = (nct_id, line_index)
            if key not in corpus_lines:
                raise TagIngestError(
                    f"{tag_file}:{lineno}: trial {nct_id} line {line_index} "
                    f"not present in corpus"
                )
            block_kind, line = corpus_lines[key]
            if record.get("block", block_kind.value) != block_kind.value:
                raise TagIngestError(
                    f"{tag_file}:{lineno}: trial {nct_id} line {line_index} is in "
                    f"the {block_kind.value} block, tag record says "
                    f"{record['block']!r}"
                )
            tags = record["tags"]
            if len(record["tokens"]) != len(line.tokens) or len(tags) != len(line.tokens):
                raise TagIngestError(
                    f"token count mismatch for trial {nct_id} line {line_index}: "
                    f"tag file has {len(record['tokens'])} tokens / {len(tags)} tags, "
                    f"corpus line has {len(line.tokens)} tokens"
                )
            scores = record.get("scores")
            for first, last, category in decode_bio(tags, repair=True):
                if scores:
                    score = sum(scores[first : last + 1]) / (last - first + 1)
                else:
                    score = 1.0
                mentions.append(
                    EntityMention(
                        trial_id=nct_id,
                        block_kind=block_kind,
                        line_index=line_index,
                        token_span=(first, last),
                        surface=span_surface(line.tokens, first, last),
                        category=category,
                        score=score,
                    )
                )
    return mentions


# --- Merging ----------------------------------------------------------------


def merge_mentions(
    a: list[EntityMention], b: list[EntityMention]
) -> list[EntityMention]:
    """Union of two mention lists over the same line.

    Overlaps are resolved by higher score, then longer span, then leftmost.
    Exact duplicates collapse to one.
    """
    pool: list[EntityMention] = []
    seen = set()
    for mention in list(a) + list(b):
        key = (mention.line_index, mention.token_span, mention.category, mention.score)
        if key in seen:
            continue
        seen.add(key)
        pool.append(mention)
    pool.sort(
        key=lambda m: (-m.score, -m.span_length, m.token_span[0], m.category.value)
    )
    chosen: list[EntityMention] = []
    for mention in pool:
        if any(mention.overlaps(kept) for kept in chosen):
            continue
        chosen.append(mention)
    chosen.sort(key=lambda m: m.sort_key())
    return chosen

