"""Evaluation against gold annotations.

Gold annotation JSONL carries two record shapes:

    entity:    {"nct_id": ..., "line_index": int, "span": [first, last],
                "category": ..., "concept_id": ..., "polarity": ...,
                "block": "inclusion"|"exclusion" (optional, default inclusion)}
    attribute: {"nct_id": ..., "attribute_id": ..., "lower": number|null,
                "upper": number|null,
                "lower_inclusive"/"upper_inclusive": bool (optional, default true)}

Matching rules (stated in the report header): entity recognition matches on
trial, line, token span, and category; entity linking is concept-id accuracy
over correctly recognized mentions; relationship extraction is polarity
accuracy over the same; attribute linking matches gold attribute ids against
predicted attribute facts per trial; end-to-end accuracy is exact-fact match
(concept plus final inclusion-form constraint) over all gold records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import EvalMismatchError, TrialFactsError

REPORT_RULES = (
    "entity recognition: span+category match; entity linking: concept-id "
    "accuracy over recognized mentions; relationship extraction: polarity "
    "accuracy over recognized mentions; attribute linking: attribute-id "
    "match; end-to-end: exact-fact match over all gold records"
)


@dataclass(frozen=True)
class EvalCounts:
    true_positives: int
    predicted: int
    gold: int

    def __post_init__(self):
        if min(self.true_positives, self.predicted, self.gold) < 0:
            raise TrialFactsError("counts must be non-negative")
        if self.true_positives > min(self.predicted, self.gold):
            raise TrialFactsError(
                "true_positives cannot exceed predicted or gold counts"
            )


def compute_prf(counts: EvalCounts) -> tuple[float | None, float | None, float | None]:
    """Precision, recall, F1. A metric with a zero denominator is None
    (reported as n/a); F1 is 0 when P + R = 0."""
    precision = (
        counts.true_positives / counts.predicted if counts.predicted > 0 else None
    )
    recall = counts.true_positives / counts.gold if counts.gold > 0 else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass
class StageResult:
    name: str
    counts: EvalCounts

    @property
    def metrics(self):
        return compute_prf(self.counts)


@dataclass
class EvalReport:
    stages: dict[str, StageResult]

    def as_text(self) -> str:
        lines = [f"matching rules: {REPORT_RULES}"]
        for stage in self.stages.values():
            precision, recall, f1 = stage.metrics
            c = stage.counts
            lines.append(
                f"{stage.name}: tp={c.true_positives} predicted={c.predicted} "
                f"gold={c.gold} "
                f"P={_fmt(precision)} R={_fmt(recall)} F1={_fmt(f1)}"
            )
        return "\n".join(lines)


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def load_gold(path: str | Path) -> tuple[list[dict], list[dict]]:
    """Split a gold annotation file into entity and attribute records."""
    entities, attributes = [], []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            if "attribute_id" in record:
                attributes.append(record)
            elif "concept_id" in record or "span" in record:
                entities.append(record)
            else:
                raise TrialFactsError(f"{path}:{lineno}: unrecognized gold record")
    return entities, attributes


def _predicted_mentions(facts: list[dict]) -> list[dict]:
    """One mention per entity-fact provenance entry."""
    mentions = []
    for fact in facts:
        if fact["kind"] != "entity":
            continue
        for prov in fact["provenance"]:
            if "span" not in prov:
                continue
            mentions.append(
                {
                    "nct_id": fact["trial_id"],
                    "line_index": prov["line_index"],
                    "span": tuple(prov["span"]),
                    "category": prov.get("category"),
                    "polarity": prov.get("polarity"),
                    "concept_id": fact["concept_id"],
                    "requires_presence": fact["constraint"]["requires_presence"],
                }
            )
    return mentions


def _mention_key(record: dict) -> tuple:
    return (
        record["nct_id"],
        record["line_index"],
        tuple(record["span"]),
        record["category"],
    )


def _gold_entity_fact(record: dict) -> tuple:
    """Expected (concept, requires_presence) after casting to inclusion form."""
    block = record.get("block", "inclusion")
    affirmed = record.get("polarity", "affirmed") == "affirmed"
    requires_presence = affirmed == (block == "inclusion")
    return (record["nct_id"], record["concept_id"], requires_presence)


def _gold_attribute_bounds(record: dict) -> tuple:
    def bound(value, inclusive):
        return None if value is None else (float(value), bool(inclusive))

    return (
        bound(record.get("lower"), record.get("lower_inclusive", True)),
        bound(record.get("upper"), record.get("upper_inclusive", True)),
    )


def _predicted_attribute_bounds(fact: dict) -> tuple | None:
    intervals = fact["constraint"]["intervals"]
    if len(intervals) != 1:
        return None

    def bound(data):
        return None if data is None else (float(data["value"]), bool(data["inclusive"]))

    return (bound(intervals[0]["lower"]), bound(intervals[0]["upper"]))


def run_eval(predicted_facts: list[dict], gold_path: str | Path) -> EvalReport:
    """Score a fact stream against a gold annotation file.

    Raises EvalMismatchError when predictions reference trials the gold set
    does not cover (gold trials without predictions simply score zero).
    """
    gold_entities, gold_attributes = load_gold(gold_path)
    gold_trials = {r["nct_id"] for r in gold_entities} | {
        r["nct_id"] for r in gold_attributes
    }
    predicted_trials = {fact["trial_id"] for fact in predicted_facts}
    unmatched = predicted_trials - gold_trials
    if unmatched:
        raise EvalMismatchError(unmatched)

    mentions = _predicted_mentions(predicted_facts)
    mention_index = {_mention_key(m): m for m in mentions}

    recognized: list[tuple[dict, dict]] = []  # (gold record, predicted mention)
    for record in gold_entities:
        key = (
            record["nct_id"],
            record["line_index"],
            tuple(record["span"]),
            record["category"],
        )
        match = mention_index.get(key)
        if match is not None:
            recognized.append((record, match))

    ner = EvalCounts(
        true_positives=len(recognized),
        predicted=len(mention_index),
        gold=len(gold_entities),
    )
    linked = sum(
        1 for gold, pred in recognized if gold["concept_id"] == pred["concept_id"]
    )
    nel = EvalCounts(
        true_positives=linked, predicted=len(recognized), gold=len(recognized)
    )
    polarity_hits = sum(
        1
        for gold, pred in recognized
        if gold.get("polarity", "affirmed") == pred["polarity"]
    )
    rel = EvalCounts(
        true_positives=polarity_hits,
        predicted=len(recognized),
        gold=len(recognized),
    )

    predicted_attrs = {
        (fact["trial_id"], fact["concept_id"]): fact
        for fact in predicted_facts
        if fact["kind"] == "attribute"
    }
    attr_linked = sum(
        1
        for record in gold_attributes
        if (record["nct_id"], record["attribute_id"]) in predicted_attrs
    )
    attr = EvalCounts(
        true_positives=attr_linked,
        predicted=len(predicted_attrs),
        gold=len(gold_attributes),
    )

    # end-to-end compares distinct fact keys on both sides
    predicted_fact_keys = {
        (fact["trial_id"], fact["concept_id"], fact["constraint"]["requires_presence"])
        for fact in predicted_facts
        if fact["kind"] == "entity"
    } | {
        (fact["trial_id"], fact["concept_id"], _predicted_attribute_bounds(fact))
        for fact in predicted_facts
        if fact["kind"] == "attribute"
    }
    gold_fact_keys = {_gold_entity_fact(record) for record in gold_entities} | {
        (record["nct_id"], record["attribute_id"], _gold_attribute_bounds(record))
        for record in gold_attributes
    }
    end_to_end = EvalCounts(
        true_positives=len(gold_fact_keys & predicted_fact_keys),
        predicted=len(predicted_fact_keys),
        gold=len(gold_fact_keys),
    )

    stages = {
        "entity_recognition": StageResult("entity_recognition", ner),
        "entity_linking": StageResult("entity_linking", nel),
        "relationship_extraction": StageResult("relationship_extraction", rel),
        "attribute_linking": StageResult("attribute_linking", attr),
        "end_to_end": StageResult("end_to_end", end_to_end),
    }
    return EvalReport(stages=stages)
