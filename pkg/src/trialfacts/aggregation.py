"""Aggregation of extracted criteria into trial-level eligibility.

Extraction produces per-line facts: entity presence requirements and
attribute bounds, each tied to an inclusion or exclusion block. Aggregation
casts exclusion facts to inclusion form by constraint inversion, collapses
duplicates, drops general concepts shadowed by more specific ones, removes
contradictions and intent conflicts, and intersects attribute bounds. The
result is a conjunction of inclusion-form facts a patient record can be
evaluated against; an excluded two-sided interval becomes a fact with two
alternative intervals evaluated with OR semantics, since its complement is
a disjunction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .cfg.interpreter import AttributeCriterion, Bound
from .errors import PatientDataError, TrialFactsError
from .kb import KnowledgeBase, is_ancestor
from .negation import Polarity
from .preprocess import BlockKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    lower: Bound | None
    upper: Bound | None

    def contains(self, value: float) -> bool:
        if self.lower is not None:
            if value < self.lower.value:
                return False
            if value == self.lower.value and not self.lower.inclusive:
                return False
        if self.upper is not None:
            if value > self.upper.value:
                return False
            if value == self.upper.value and not self.upper.inclusive:
                return False
        return True

    def is_empty(self) -> bool:
        if self.lower is None or self.upper is None:
            return False
        if self.lower.value > self.upper.value:
            return True
        return self.lower.value == self.upper.value and not (
            self.lower.inclusive and self.upper.inclusive
        )


@dataclass(frozen=True)
class EntityConstraint:
    requires_presence: bool


@dataclass(frozen=True)
class AttributeConstraint:
    """One or two alternative intervals (canonical units). A patient value
    satisfies the constraint when it falls in any alternative."""

    alternatives: tuple[Interval, ...]
    unit: str

    def satisfied_by(self, value: float) -> bool:
        return any(interval.contains(value) for interval in self.alternatives)


class DropReason(Enum):
    DUPLICATE = "duplicate"
    GENERALIZED = "generalized"
    CONTRADICTION = "contradiction"
    INTENT_CONFLICT = "intent_conflict"


@dataclass(frozen=True)
class Provenance:
    block_kind: BlockKind
    line_index: int
    text: str
    token_span: tuple[int, int] | None = None
    category: str | None = None
    polarity: str | None = None

    def sort_key(self):
        return (self.line_index, self.token_span or (-1, -1), self.text)


@dataclass(frozen=True)
class CriterionFact:
    """One (concept, constraint, trial) fact.

    inclusion_form is False for facts as written in an exclusion block and
    True once the constraint has been inverted into a requirement.
    """

    trial_id: str
    concept_ref: str
    kind: str  # "entity" | "attribute"
    constraint: EntityConstraint | AttributeConstraint
    provenance: tuple[Provenance, ...]
    inclusion_form: bool

    def identity(self):
        return (self.trial_id, self.concept_ref, self.kind, self.constraint)


@dataclass(frozen=True)
class EligibilityProfile:
    trial_id: str
    facts: tuple[CriterionFact, ...]
    dropped: tuple[tuple[CriterionFact, DropReason], ...] = ()


@dataclass(frozen=True)
class IntentRule:
    winner_concept_id: str
    loser_concept_id: str
    note: str = ""


def load_intent_rules(path: str | Path) -> list[IntentRule]:
    rules = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise TrialFactsError(f"{path}:{lineno}: expected 2+ columns")
            rules.append(
                IntentRule(
                    winner_concept_id=cols[0].strip(),
                    loser_concept_id=cols[1].strip(),
                    note=cols[2].strip() if len(cols) > 2 else "",
                )
            )
    return rules


def load_default_intent_rules() -> list[IntentRule]:
    with resources.as_file(
        resources.files("trialfacts.data").joinpath("intent_rules.tsv")
    ) as path:
        return load_intent_rules(path)


# --- Fact construction -------------------------------------------------------


def entity_fact(
    trial_id: str,
    concept_id: str,
    block_kind: BlockKind,
    polarity: Polarity,
    provenance: Provenance,
) -> CriterionFact:
    """Fact for a grounded, polarized mention, in as-written form."""
    return CriterionFact(
        trial_id=trial_id,
        concept_ref=concept_id,
        kind="entity",
        constraint=EntityConstraint(
            requires_presence=(polarity == Polarity.AFFIRMED)
        ),
        provenance=(provenance,),
        inclusion_form=(block_kind == BlockKind.INCLUSION),
    )


def attribute_fact(
    trial_id: str,
    criterion: AttributeCriterion,
    block_kind: BlockKind,
    provenance: Provenance,
) -> CriterionFact:
    if criterion.negated:
        # outside-interval constraint: complement of [a, b] is a disjunction
        alternatives = _complement_interval(
            Interval(lower=criterion.lower, upper=criterion.upper)
        )
    else:
        alternatives = (Interval(lower=criterion.lower, upper=criterion.upper),)
    return CriterionFact(
        trial_id=trial_id,
        concept_ref=criterion.attribute_id,
        kind="attribute",
        constraint=AttributeConstraint(alternatives=alternatives, unit=criterion.unit),
        provenance=(provenance,),
        inclusion_form=(block_kind == BlockKind.INCLUSION),
    )


def _complement_interval(interval: Interval) -> tuple[Interval, ...]:
    lower, upper = interval.lower, interval.upper
    if lower is not None and upper is not None:
        return (
            Interval(lower=None, upper=Bound(lower.value, not lower.inclusive)),
            Interval(lower=Bound(upper.value, not upper.inclusive), upper=None),
        )
    if lower is not None:
        return (Interval(lower=None, upper=Bound(lower.value, not lower.inclusive)),)
    if upper is not None:
        return (Interval(lower=Bound(upper.value, not upper.inclusive), upper=None),)
    raise ValueError("cannot complement the unbounded interval")


def _intersect_intervals(a: Interval, b: Interval) -> Interval:
    def tight_lower(x: Bound | None, y: Bound | None) -> Bound | None:
        if x is None:
            return y
        if y is None:
            return x
        if x.value != y.value:
            return x if x.value > y.value else y
        return x if not x.inclusive else y

    def tight_upper(x: Bound | None, y: Bound | None) -> Bound | None:
        if x is None:
            return y
        if y is None:
            return x
        if x.value != y.value:
            return x if x.value < y.value else y
        return x if not x.inclusive else y

    return Interval(
        lower=tight_lower(a.lower, b.lower), upper=tight_upper(a.upper, b.upper)
    )


# --- Aggregation steps --------------------------------------------------------


def cast_exclusion(fact: CriterionFact) -> CriterionFact:
    """Invert a fact's constraint ("can-have" becomes "cannot-have", an upper
    bound becomes a lower bound). Applying it twice returns the original."""
    if isinstance(fact.constraint, EntityConstraint):
        inverted: EntityConstraint | AttributeConstraint = EntityConstraint(
            requires_presence=not fact.constraint.requires_presence
        )
    else:
        inverted = _complement_constraint(fact.constraint)
    return replace(fact, constraint=inverted, inclusion_form=not fact.inclusion_form)


def _complement_constraint(constraint: AttributeConstraint) -> AttributeConstraint:
    alternatives = constraint.alternatives
    if len(alternatives) == 1:
        return AttributeConstraint(
            alternatives=_complement_interval(alternatives[0]), unit=constraint.unit
        )
    # complement of a union is the intersection of the complements; the
    # alternatives are one-sided, so each complement is a single interval
    combined = None
    for interval in alternatives:
        pieces = _complement_interval(interval)
        if len(pieces) != 1:
            raise ValueError("alternatives must be one-sided intervals")
        combined = (
            pieces[0] if combined is None else _intersect_intervals(combined, pieces[0])
        )
    return AttributeConstraint(alternatives=(combined,), unit=constraint.unit)


def deduplicate(facts: list[CriterionFact]) -> list[CriterionFact]:
    """Collapse exact (concept, constraint) duplicates, merging provenance."""
    by_identity: dict = {}
    order = []
    for fact in facts:
        key = fact.identity()
        if key in by_identity:
            merged = by_identity[key]
            provenance = tuple(
                sorted(set(merged.provenance) | set(fact.provenance),
                       key=lambda p: p.sort_key())
            )
            by_identity[key] = replace(merged, provenance=provenance)
        else:
            by_identity[key] = fact
            order.append(key)
    return [by_identity[key] for key in order]


def drop_generalized(
    facts: list[CriterionFact], kb: KnowledgeBase
) -> tuple[list[CriterionFact], list[tuple[CriterionFact, DropReason]]]:
    """Remove an entity fact when another fact with the same polarity sits on
    a strict descendant concept (the more specific criterion wins)."""
    retained, dropped = [], []
    for fact in facts:
        if fact.kind != "entity":
            retained.append(fact)
            continue
        shadowed = any(
            other.kind == "entity"
            and other is not fact
            and other.constraint == fact.constraint
            and is_ancestor(kb, fact.concept_ref, other.concept_ref)
            for other in facts
        )
        if shadowed:
            dropped.append((fact, DropReason.GENERALIZED))
        else:
            retained.append(fact)
    return retained, dropped


def remove_contradictions(
    facts: list[CriterionFact], intents: list[IntentRule]
) -> tuple[list[CriterionFact], list[tuple[CriterionFact, DropReason]]]:
    """Drop presence/absence pairs on one concept (both sides), attribute
    facts whose combined bounds are empty (all contributors), and intent-rule
    losers when the winner concept is also required."""
    dropped: list[tuple[CriterionFact, DropReason]] = []
    out = list(facts)

    # presence vs absence of the same concept: both dropped
    entity_by_concept: dict[str, list[CriterionFact]] = {}
    for fact in out:
        if fact.kind == "entity":
            entity_by_concept.setdefault(fact.concept_ref, []).append(fact)
    contradictory: set[int] = set()
    for concept_facts in entity_by_concept.values():
        values = {f.constraint.requires_presence for f in concept_facts}
        if len(values) == 2:
            contradictory.update(id(f) for f in concept_facts)
    if contradictory:
        dropped.extend(
            (f, DropReason.CONTRADICTION) for f in out if id(f) in contradictory
        )
        out = [f for f in out if id(f) not in contradictory]

    # attribute facts whose conjunction is empty
    attr_by_id: dict[str, list[CriterionFact]] = {}
    for fact in out:
        if fact.kind == "attribute":
            attr_by_id.setdefault(fact.concept_ref, []).append(fact)
    empty_attrs: set[int] = set()
    for attr_facts in attr_by_id.values():
        if _conjunction_is_empty(attr_facts):
            empty_attrs.update(id(f) for f in attr_facts)
    if empty_attrs:
        dropped.extend(
            (f, DropReason.CONTRADICTION) for f in out if id(f) in empty_attrs
        )
        out = [f for f in out if id(f) not in empty_attrs]

    # intent conflicts: the loser is dropped when both are required
    for rule in intents:
        required = {
            f.concept_ref
            for f in out
            if f.kind == "entity" and f.constraint.requires_presence
        }
        if rule.winner_concept_id in required and rule.loser_concept_id in required:
            losers = [
                f
                for f in out
                if f.kind == "entity"
                and f.concept_ref == rule.loser_concept_id
                and f.constraint.requires_presence
            ]
            dropped.extend((f, DropReason.INTENT_CONFLICT) for f in losers)
            loser_ids = {id(f) for f in losers}
            out = [f for f in out if id(f) not in loser_ids]
    return out, dropped


def _conjunction_is_empty(attr_facts: list[CriterionFact]) -> bool:
    """Whether the AND of the facts' constraints admits no value."""
    simple = Interval(lower=None, upper=None)
    disjunctive: list[AttributeConstraint] = []
    for fact in attr_facts:
        constraint = fact.constraint
        if len(constraint.alternatives) == 1:
            simple = _intersect_intervals(simple, constraint.alternatives[0])
        else:
            disjunctive.append(constraint)
    if simple.is_empty():
        return True
    for constraint in disjunctive:
        feasible = [
            _intersect_intervals(simple, alternative)
            for alternative in constraint.alternatives
        ]
        if all(piece.is_empty() for piece in feasible):
            return True
    return False


def _intersect_attribute_facts(facts: list[CriterionFact]) -> list[CriterionFact]:
    """Merge single-interval facts on the same attribute into one fact."""
    out: list[CriterionFact] = []
    merged: dict[str, CriterionFact] = {}
    order: list[str] = []
    for fact in facts:
        if fact.kind != "attribute" or len(fact.constraint.alternatives) != 1:
            out.append(fact)
            continue
        attr_id = fact.concept_ref
        if attr_id not in merged:
            merged[attr_id] = fact
            order.append(attr_id)
        else:
            base = merged[attr_id]
            interval = _intersect_intervals(
                base.constraint.alternatives[0], fact.constraint.alternatives[0]
            )
            provenance = tuple(
                sorted(set(base.provenance) | set(fact.provenance),
                       key=lambda p: p.sort_key())
            )
            merged[attr_id] = replace(
                base,
                constraint=AttributeConstraint(
                    alternatives=(interval,), unit=base.constraint.unit
                ),
                provenance=provenance,
            )
    return out + [merged[attr_id] for attr_id in order]


def _fact_sort_key(fact: CriterionFact):
    head = fact.provenance[0] if fact.provenance else None
    return (
        head.sort_key() if head is not None else (-1, (-1, -1), ""),
        fact.kind,
        fact.concept_ref,
    )


def aggregate(
    trial_facts: list[CriterionFact],
    kb: KnowledgeBase,
    intents: list[IntentRule] | None = None,
) -> EligibilityProfile:
    """Cast, deduplicate, prune, and intersect one trial's facts.

    Idempotent: aggregating an aggregated profile's facts reproduces it.
    """
    if not trial_facts:
        return EligibilityProfile(trial_id="", facts=())
    trial_ids = {fact.trial_id for fact in trial_facts}
    if len(trial_ids) != 1:
        raise TrialFactsError(f"facts span multiple trials: {sorted(trial_ids)}")
    trial_id = trial_ids.pop()
    intents = intents if intents is not None else []

    cast = [
        fact if fact.inclusion_form else cast_exclusion(fact) for fact in trial_facts
    ]
    dropped_duplicates = []
    seen_identities: set = set()
    for fact in cast:
        key = fact.identity()
        if key in seen_identities:
            dropped_duplicates.append((fact, DropReason.DUPLICATE))
        else:
            seen_identities.add(key)
    unique = deduplicate(cast)
    specific, dropped_general = drop_generalized(unique, kb)
    consistent, dropped_conflicts = remove_contradictions(specific, intents)
    final = _intersect_attribute_facts(consistent)
    final.sort(key=_fact_sort_key)
    return EligibilityProfile(
        trial_id=trial_id,
        facts=tuple(final),
        dropped=tuple(dropped_duplicates + dropped_general + dropped_conflicts),
    )


# --- Patient evaluation -------------------------------------------------------


@dataclass(frozen=True)
class FactVerdict:
    fact: CriterionFact
    status: str  # "satisfied" | "failed" | "indeterminate"


@dataclass(frozen=True)
class PatientDecision:
    eligible: str  # "eligible" | "ineligible" | "indeterminate"
    verdicts: tuple[FactVerdict, ...]


def _parse_attribute_value(
    raw, fact: CriterionFact, kb: KnowledgeBase
) -> float:
    attribute = kb.attribute(fact.concept_ref)
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, str):
        parts = raw.strip().split()
        try:
            value = float(parts[0])
        except (ValueError, IndexError):
            raise PatientDataError(
                f"fact {fact.concept_ref}: expected numeric value, got {raw!r}"
            ) from None
        if len(parts) == 1:
            return value
        unit = " ".join(parts[1:]).lower()
        if unit not in attribute.accepted_units:
            raise PatientDataError(
                f"fact {fact.concept_ref}: unit {unit!r} not accepted"
            )
        return value * float(attribute.accepted_units[unit])
    raise PatientDataError(
        f"fact {fact.concept_ref}: expected numeric value, got {type(raw).__name__}"
    )


def evaluate_patient(
    profile: EligibilityProfile,
    patient: dict[str, object],
    kb: KnowledgeBase,
) -> PatientDecision:
    """Conjunction over the profile's facts.

    Entity values are "present"/"absent"; attribute values are numbers or
    "value unit" strings converted to canonical units. A missing value makes
    that fact (and, unless some other fact fails, the overall result)
    indeterminate.
    """
    verdicts = []
    any_failed = False
    any_indeterminate = False
    for fact in profile.facts:
        if fact.concept_ref not in patient:
            verdicts.append(FactVerdict(fact=fact, status="indeterminate"))
            any_indeterminate = True
            continue
        raw = patient[fact.concept_ref]
        if isinstance(fact.constraint, EntityConstraint):
            if not isinstance(raw, str) or raw.strip().lower() not in (
                "present",
                "absent",
            ):
                raise PatientDataError(
                    f"fact {fact.concept_ref}: entity value must be "
                    f"'present' or 'absent', got {raw!r}"
                )
            present = raw.strip().lower() == "present"
            ok = present == fact.constraint.requires_presence
        else:
            value = _parse_attribute_value(raw, fact, kb)
            ok = fact.constraint.satisfied_by(value)
        verdicts.append(FactVerdict(fact=fact, status="satisfied" if ok else "failed"))
        if not ok:
            any_failed = True
    if any_failed:
        overall = "ineligible"
    elif any_indeterminate:
        overall = "indeterminate"
    else:
        overall = "eligible"
    return PatientDecision(eligible=overall, verdicts=tuple(verdicts))
