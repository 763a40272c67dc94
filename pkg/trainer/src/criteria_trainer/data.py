"""Training data loading, BIO validation, and vocabulary building.

Training JSONL: one record per sentence, {"tokens": [...], "tags": [...]}.
Tags use the BIO scheme over the ten entity classes of the extraction
pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

ENTITY_CLASSES = (
    "treatment",
    "chronic_disease",
    "cancer",
    "gender",
    "pregnancy",
    "allergy",
    "contraception_consent",
    "language_literacy",
    "technology_access",
    "ethnicity",
)

TAGS = ("O",) + tuple(
    f"{prefix}-{category}" for category in ENTITY_CLASSES for prefix in ("B", "I")
)
TAG_TO_INDEX = {tag: i for i, tag in enumerate(TAGS)}

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingExample:
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise DataError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        if not valid_bio(self.tags):
            raise DataError(f"invalid BIO sequence: {self.tags}")


def valid_bio(tags) -> bool:
    previous = "O"
    for tag in tags:
        if tag not in TAG_TO_INDEX:
            return False
        if tag.startswith("I-"):
            if previous == "O" or previous[2:] != tag[2:]:
                return False
        previous = tag
    return True


def load_training_file(path: str | Path) -> list[TrainingExample]:
    examples = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            try:
                examples.append(
                    TrainingExample(
                        tokens=tuple(record["tokens"]), tags=tuple(record["tags"])
                    )
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not examples:
        raise DataError(f"{path}: no training examples")
    return examples


def build_vocabularies(examples: list[TrainingExample]):
    """(token vocab, char vocab) with pad at 0 and unk at 1, sorted for
    run-to-run determinism."""
    tokens = sorted({t for example in examples for t in example.tokens})
    chars = sorted({c for token in tokens for c in token})
    token_vocab = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    for token in tokens:
        token_vocab[token] = len(token_vocab)
    char_vocab = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    for char in chars:
        char_vocab[char] = len(char_vocab)
    return token_vocab, char_vocab


def spans_of(tags) -> set[tuple[int, int, str]]:
    """(first, last, category) spans of a BIO sequence, for span-level F1."""
    spans = set()
    start = None
    category = None
    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if start is not None:
                spans.add((start, i - 1, category))
            start, category = i, tag[2:]
        elif tag == "O":
            if start is not None:
                spans.add((start, i - 1, category))
            start, category = None, None
    if start is not None:
        spans.add((start, len(tags) - 1, category))
    return spans


def span_f1(gold_sequences, predicted_sequences) -> float:
    true_positives = predicted = gold = 0
    for gold_tags, predicted_tags in zip(gold_sequences, predicted_sequences):
        gold_spans = spans_of(gold_tags)
        predicted_spans = spans_of(predicted_tags)
        true_positives += len(gold_spans & predicted_spans)
        predicted += len(predicted_spans)
        gold += len(gold_spans)
    if predicted == 0 or gold == 0:
        return 0.0
    precision = true_positives / predicted
    recall = true_positives / gold
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
