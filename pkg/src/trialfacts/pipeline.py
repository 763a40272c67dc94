"""Corpus ingestion and end-to-end extraction.

The corpus is a pipe-separated file with header
``nct_id|title|eligibility_criteria``; newlines inside the criteria text are
escaped as ``\\n``. Extraction runs each trial independently through
preprocessing, the entity path (tagging, linking, negation) and the
attribute path (lexer, chart parser, interpreter), then aggregates into an
eligibility profile. Output is JSONL, one fact per line, preceded by a
header line recording the effective config.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import aggregation as agg
from .aggregation import (
    AttributeConstraint,
    CriterionFact,
    EligibilityProfile,
    EntityConstraint,
    Interval,
    Provenance,
)
from .cfg import evaluate, lex, load_grammar, parse_cyk, prune
from .cfg.interpreter import Bound
from .cfg.lexer import LexCatalog
from .config import PipelineConfig
from .errors import BoundContradictionError, IngestError, TrialFactsError
from .kb import KnowledgeBase, load_knowledge_base
from .linking import EmbeddingTable, link_mentions, load_embeddings
from .negation import detect_negation, load_negation_rules
from .preprocess import BlockKind, CriteriaBlock, Line, segment_blocks
from .tagging import EntityMention, ingest_external_tags, merge_mentions, tag_gazetteer

logger = logging.getLogger(__name__)

_NCT_RE = re.compile(r"NCT\d{8}$")
CORPUS_HEADER = "nct_id|title|eligibility_criteria"


@dataclass(frozen=True)
class TrialRecord:
    nct_id: str
    title: str
    eligibility_text: str


def ingest(path: str | Path) -> list[TrialRecord]:
    """Parse the pipe-separated corpus. Malformed rows are skipped with a
    warning; a missing header is fatal."""
    records = []
    skipped = 0
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != CORPUS_HEADER:
            raise IngestError(
                f"{path}: first line must be {CORPUS_HEADER!r}, got {header!r}"
            )
        for lineno, raw in enumerate(handle, start=2):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("|", 2)
            if len(parts) != 3:
                logger.warning("%s:%d: expected 3 pipe-separated fields; skipped",
                               path, lineno)
                skipped += 1
                continue
            nct_id, title, criteria = parts
            if not _NCT_RE.match(nct_id):
                logger.warning("%s:%d: bad nct_id %r; skipped", path, lineno, nct_id)
                skipped += 1
                continue
            records.append(
                TrialRecord(
                    nct_id=nct_id,
                    title=title,
                    eligibility_text=criteria.replace("\\n", "\n"),
                )
            )
    if skipped:
        logger.warning("%s: skipped %d malformed rows", path, skipped)
    return records


@dataclass
class Resources:
    """Shared read-only state loaded once per run."""

    kb: KnowledgeBase
    grammar: object
    lex_catalog: LexCatalog
    negation_rules: list
    intent_rules: list
    embeddings: EmbeddingTable | None
    external_mentions: list[EntityMention]
    config: PipelineConfig


def load_resources(
    config: PipelineConfig, corpus_lines: dict | None = None
) -> Resources:
    config.validate()
    kb = load_knowledge_base(config.kb_concepts, config.kb_attributes)
    grammar = load_grammar(config.grammar)
    negation_rules = load_negation_rules(config.negation_rules)
    intent_rules = agg.load_intent_rules(config.intent_rules)
    embeddings = load_embeddings(config.embeddings) if config.embeddings else None
    external: list[EntityMention] = []
    if config.tags:
        if corpus_lines is None:
            raise TrialFactsError("external tags need a preprocessed corpus")
        external = ingest_external_tags(config.tags, corpus_lines)
    return Resources(
        kb=kb,
        grammar=grammar,
        lex_catalog=LexCatalog(kb.attributes),
        negation_rules=negation_rules,
        intent_rules=intent_rules,
        embeddings=embeddings,
        external_mentions=external,
        config=config,
    )


def corpus_line_map(
    records: list[TrialRecord],
) -> dict[tuple[str, int], tuple[BlockKind, Line]]:
    """(nct_id, line_index) -> (block kind, preprocessed line), the anchor
    the tag interchange format is validated against."""
    mapping: dict[tuple[str, int], tuple[BlockKind, Line]] = {}
    for record in records:
        for block in segment_blocks(record.eligibility_text):
            for line in block.lines:
                mapping[(record.nct_id, line.index)] = (block.block_kind, line)
    return mapping


def _trial_mentions(
    record: TrialRecord,
    blocks: list[CriteriaBlock],
    resources: Resources,
) -> list[EntityMention]:
    mode = resources.config.tagger_mode
    gazetteer: list[EntityMention] = []
    if mode in ("gazetteer", "merged"):
        for block in blocks:
            for line in block.lines:
                gazetteer.extend(
                    tag_gazetteer(
                        line.tokens,
                        resources.kb,
                        trial_id=record.nct_id,
                        block_kind=block.block_kind,
                        line_index=line.index,
                    )
                )
    external = [
        m for m in resources.external_mentions if m.trial_id == record.nct_id
    ]
    if mode == "gazetteer":
        return gazetteer
    if mode == "external":
        return sorted(external, key=lambda m: m.sort_key())
    merged: list[EntityMention] = []
    by_line: dict[int, tuple[list[EntityMention], list[EntityMention]]] = {}
    for mention in gazetteer:
        by_line.setdefault(mention.line_index, ([], []))[0].append(mention)
    for mention in external:
        by_line.setdefault(mention.line_index, ([], []))[1].append(mention)
    for line_index in sorted(by_line):
        a, b = by_line[line_index]
        merged.extend(merge_mentions(a, b))
    return merged


def extract_trial(record: TrialRecord, resources: Resources) -> EligibilityProfile:
    """Run one trial through both extraction paths and aggregate."""
    blocks = segment_blocks(record.eligibility_text)
    line_of = {
        line.index: (block.block_kind, line)
        for block in blocks
        for line in block.lines
    }

    facts: list[CriterionFact] = []
    contradiction_drops: list = []

    mentions = _trial_mentions(record, blocks, resources)
    groundings = link_mentions(
        mentions,
        resources.kb,
        resources.embeddings,
        eps=resources.config.eps,
        min_points=resources.config.min_points,
        theta=resources.config.theta,
    )
    for grounding in groundings:
        if grounding.concept_id is None:
            continue
        mention = grounding.mention
        block_kind, line = line_of[mention.line_index]
        polarity = detect_negation(line.tokens, mention, resources.negation_rules)
        facts.append(
            agg.entity_fact(
                trial_id=record.nct_id,
                concept_id=grounding.concept_id,
                block_kind=block_kind,
                polarity=polarity,
                provenance=Provenance(
                    block_kind=block_kind,
                    line_index=mention.line_index,
                    text=line.text,
                    token_span=mention.token_span,
                    category=mention.category.value,
                    polarity=polarity.value,
                ),
            )
        )

    for block in blocks:
        for line in block.lines:
            lexed = lex(line.tokens, resources.lex_catalog)
            trees = prune(parse_cyk(lexed, resources.grammar))
            for tree in trees:
                try:
                    criteria = evaluate(tree, resources.kb.attributes)
                except BoundContradictionError as exc:
                    logger.warning(
                        "%s line %d: contradictory bounds for %s",
                        record.nct_id,
                        line.index,
                        exc.attribute_id,
                    )
                    contradiction_drops.append((line, exc))
                    continue
                for criterion in criteria:
                    facts.append(
                        agg.attribute_fact(
                            trial_id=record.nct_id,
                            criterion=criterion,
                            block_kind=block.block_kind,
                            provenance=Provenance(
                                block_kind=block.block_kind,
                                line_index=line.index,
                                text=line.text,
                            ),
                        )
                    )

    profile = agg.aggregate(facts, resources.kb, resources.intent_rules)
    if not profile.facts and not profile.dropped:
        profile = EligibilityProfile(trial_id=record.nct_id, facts=())
    return profile


def run_extract(
    records: list[TrialRecord], resources: Resources
) -> Iterator[EligibilityProfile]:
    """Profiles for each trial, in input order. Per-trial failures isolate:
    they are logged and the pipeline continues."""
    for record in records:
        try:
            yield extract_trial(record, resources)
        except TrialFactsError:
            logger.exception("trial %s failed; continuing", record.nct_id)


# --- Fact serialization -------------------------------------------------------


def _bound_json(bound: Bound | None):
    if bound is None:
        return None
    return {"value": bound.value, "inclusive": bound.inclusive}


def _constraint_json(fact: CriterionFact) -> dict:
    if isinstance(fact.constraint, EntityConstraint):
        return {"requires_presence": fact.constraint.requires_presence}
    return {
        "unit": fact.constraint.unit,
        "intervals": [
            {"lower": _bound_json(i.lower), "upper": _bound_json(i.upper)}
            for i in fact.constraint.alternatives
        ],
    }


def fact_to_json(fact: CriterionFact, kb: KnowledgeBase) -> dict:
    if fact.kind == "entity":
        name = kb.concept(fact.concept_ref).preferred_name
    else:
        name = kb.attribute(fact.concept_ref).canonical_name
    return {
        "trial_id": fact.trial_id,
        "concept_id": fact.concept_ref,
        "concept_name": name,
        "kind": fact.kind,
        "constraint": _constraint_json(fact),
        "provenance": [
            {
                "block": p.block_kind.value,
                "line_index": p.line_index,
                "text": p.text,
                **({"span": list(p.token_span)} if p.token_span else {}),
                **({"category": p.category} if p.category else {}),
                **({"polarity": p.polarity} if p.polarity else {}),
            }
            for p in fact.provenance
        ],
    }


def fact_from_json(record: dict) -> CriterionFact:
    constraint_data = record["constraint"]
    if record["kind"] == "entity":
        constraint: EntityConstraint | AttributeConstraint = EntityConstraint(
            requires_presence=constraint_data["requires_presence"]
        )
    else:
        intervals = tuple(
            Interval(
                lower=_bound_from(i.get("lower")), upper=_bound_from(i.get("upper"))
            )
            for i in constraint_data["intervals"]
        )
        constraint = AttributeConstraint(
            alternatives=intervals, unit=constraint_data["unit"]
        )
    provenance = tuple(
        Provenance(
            block_kind=BlockKind(p["block"]),
            line_index=p["line_index"],
            text=p.get("text", ""),
            token_span=tuple(p["span"]) if "span" in p else None,
            category=p.get("category"),
            polarity=p.get("polarity"),
        )
        for p in record.get("provenance", [])
    )
    return CriterionFact(
        trial_id=record["trial_id"],
        concept_ref=record["concept_id"],
        kind=record["kind"],
        constraint=constraint,
        provenance=provenance,
        inclusion_form=True,
    )


def _bound_from(data) -> Bound | None:
    if data is None:
        return None
    return Bound(value=data["value"], inclusive=data["inclusive"])


def write_facts(
    profiles: Iterator[EligibilityProfile],
    kb: KnowledgeBase,
    config: PipelineConfig,
    out_path: str | Path,
) -> int:
    """Write the JSONL fact stream with a config header line. Returns the
    number of facts written."""
    written = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        header = {"header": {"format": "trialfacts/1", "config": config.as_dict()}}
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for profile in profiles:
            for fact in profile.facts:
                handle.write(
                    json.dumps(fact_to_json(fact, kb), sort_keys=True) + "\n"
                )
                written += 1
    return written


def read_facts(path: str | Path) -> list[dict]:
    """Fact records from an extraction output file (header line skipped)."""
    facts = []
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            raw = raw.strip()
            if not raw:
                continue
            record = json.loads(raw)
            if "header" in record:
                continue
            facts.append(record)
    return facts


def dump_token_lines(
    records: list[TrialRecord], out_path: str | Path
) -> int:
    """Write one JSONL record per preprocessed line (the tag interchange
    schema minus tags), for external taggers to fill in."""
    count = 0
    with open(out_path, "w", encoding="utf-8") as handle:
        for record in records:
            for block in segment_blocks(record.eligibility_text):
                for line in block.lines:
                    handle.write(
                        json.dumps(
                            {
                                "nct_id": record.nct_id,
                                "block": block.block_kind.value,
                                "line_index": line.index,
                                "tokens": [t.delex for t in line.tokens],
                                "raw_tokens": [t.surface for t in line.tokens],
                                "text": line.text,
                            },
                            sort_keys=True,
                        )
                        + "\n"
                    )
                    count += 1
    return count
