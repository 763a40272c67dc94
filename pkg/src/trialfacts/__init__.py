"""trialfacts: structured eligibility-criteria extraction for clinical trials.

Converts free-text inclusion/exclusion sections into (concept, constraint,
trial) facts grounded in a hierarchical vocabulary, aggregates them into
trial-level eligibility profiles, and evaluates patient records against
them.
"""

from .aggregation import (
    AttributeConstraint,
    CriterionFact,
    EligibilityProfile,
    EntityConstraint,
    aggregate,
    cast_exclusion,
    evaluate_patient,
)
from .kb import (
    AttributeDef,
    Concept,
    EntityCategory,
    KnowledgeBase,
    is_ancestor,
    load_knowledge_base,
    lookup_exact,
)
from .linking import dice_similarity, load_embeddings
from .metrics import EvalCounts, compute_prf, run_eval
from .pipeline import TrialRecord, ingest, run_extract
from .preprocess import segment_blocks, tokenize
from .tagging import EntityMention, merge_mentions, tag_gazetteer

__version__ = "0.1.0"

__all__ = [
    "AttributeConstraint",
    "AttributeDef",
    "Concept",
    "CriterionFact",
    "EligibilityProfile",
    "EntityCategory",
    "EntityConstraint",
    "EntityMention",
    "EvalCounts",
    "KnowledgeBase",
    "TrialRecord",
    "aggregate",
    "cast_exclusion",
    "compute_prf",
    "dice_similarity",
    "evaluate_patient",
    "ingest",
    "is_ancestor",
    "load_embeddings",
    "load_knowledge_base",
    "lookup_exact",
    "merge_mentions",
    "run_eval",
    "run_extract",
    "segment_blocks",
    "tag_gazetteer",
    "tokenize",
]
