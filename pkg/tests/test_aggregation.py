import random

import pytest

from oracles import eq1_eligible, raw_fact_satisfied
from trialfacts.aggregation import (
    AttributeConstraint,
    Bound,
    CriterionFact,
    DropReason,
    EntityConstraint,
    Interval,
    IntentRule,
    Provenance,
    aggregate,
    cast_exclusion,
    deduplicate,
    drop_generalized,
    evaluate_patient,
    remove_contradictions,
)
from trialfacts.errors import PatientDataError
from trialfacts.negation import Polarity
from trialfacts.preprocess import BlockKind


def prov(line_index=0, block=BlockKind.INCLUSION, text="line"):
    return Provenance(block_kind=block, line_index=line_index, text=text)


def efact(concept, presence, block=BlockKind.INCLUSION, trial="NCT00000001", line=0):
    return CriterionFact(
        trial_id=trial,
        concept_ref=concept,
        kind="entity",
        constraint=EntityConstraint(requires_presence=presence),
        provenance=(prov(line, block),),
        inclusion_form=(block == BlockKind.INCLUSION),
    )


def afact(
    attr,
    lower=None,
    upper=None,
    block=BlockKind.INCLUSION,
    trial="NCT00000001",
    line=0,
    unit="years",
    alternatives=None,
):
    if alternatives is None:
        alternatives = (Interval(lower=lower, upper=upper),)
    return CriterionFact(
        trial_id=trial,
        concept_ref=attr,
        kind="attribute",
        constraint=AttributeConstraint(alternatives=alternatives, unit=unit),
        provenance=(prov(line, block),),
        inclusion_form=(block == BlockKind.INCLUSION),
    )


# --- cast_exclusion ----------------------------------------------------------


def test_cast_entity_flips_presence():
    fact = efact("D007938", True, BlockKind.EXCLUSION)
    cast = cast_exclusion(fact)
    assert cast.constraint == EntityConstraint(requires_presence=False)
    assert cast.inclusion_form


def test_cast_upper_becomes_lower():
    fact = afact("A001", upper=Bound(65.0, False), block=BlockKind.EXCLUSION)
    cast = cast_exclusion(fact)
    assert cast.constraint.alternatives == (
        Interval(lower=Bound(65.0, True), upper=None),
    )


def test_cast_two_sided_becomes_outside_pair():
    fact = afact(
        "A001",
        lower=Bound(18.0, True),
        upper=Bound(65.0, True),
        block=BlockKind.EXCLUSION,
    )
    cast = cast_exclusion(fact)
    assert cast.constraint.alternatives == (
        Interval(lower=None, upper=Bound(18.0, False)),
        Interval(lower=Bound(65.0, False), upper=None),
    )


def test_cast_is_involution():
    cases = [
        efact("D007938", True, BlockKind.EXCLUSION),
        efact("D007938", False, BlockKind.EXCLUSION),
        afact("A001", lower=Bound(18.0, True), block=BlockKind.EXCLUSION),
        afact("A001", upper=Bound(65.0, False), block=BlockKind.EXCLUSION),
        afact(
            "A001",
            lower=Bound(18.0, True),
            upper=Bound(65.0, False),
            block=BlockKind.EXCLUSION,
        ),
        afact(
            "A001",
            block=BlockKind.EXCLUSION,
            alternatives=(
                Interval(lower=None, upper=Bound(18.0, False)),
                Interval(lower=Bound(65.0, True), upper=None),
            ),
        ),
    ]
    for fact in cases:
        assert cast_exclusion(cast_exclusion(fact)) == fact


# --- deduplicate ---------------------------------------------------------------


def test_deduplicate_merges_provenance():
    a = efact("D006509", False, line=1)
    b = efact("D006509", False, line=3)
    merged = deduplicate([a, b])
    assert len(merged) == 1
    assert [p.line_index for p in merged[0].provenance] == [1, 3]


def test_deduplicate_empty():
    assert deduplicate([]) == []


def test_deduplicate_keeps_different_bounds():
    a = afact("A001", lower=Bound(18.0, True))
    b = afact("A001", lower=Bound(21.0, True))
    assert len(deduplicate([a, b])) == 2


# --- drop_generalized -----------------------------------------------------------


def test_drop_generalized_hepatitis(kb):
    general = efact("D006505", False)  # hepatitis excluded
    specific = efact("D006509", False)  # hepatitis b excluded
    retained, dropped = drop_generalized([general, specific], kb)
    assert retained == [specific]
    assert dropped == [(general, DropReason.GENERALIZED)]


def test_drop_generalized_single_fact_unchanged(kb):
    fact = efact("D006509", False)
    retained, dropped = drop_generalized([fact], kb)
    assert retained == [fact] and dropped == []


def test_drop_generalized_opposite_polarity_kept(kb):
    general = efact("D006505", False)
    specific = efact("D006509", True)
    retained, dropped = drop_generalized([general, specific], kb)
    assert retained == [general, specific] and dropped == []


def test_drop_generalized_witness_is_retained(kb):
    from trialfacts.kb import is_ancestor

    # three-level chain: both ancestors drop against the retained leaf
    chain = [efact("D008107", False), efact("D006505", False), efact("D006509", False)]
    retained, dropped = drop_generalized(chain, kb)
    assert [f.concept_ref for f in retained] == ["D006509"]
    for fact, reason in dropped:
        assert reason == DropReason.GENERALIZED
        # every drop has a retained strict-descendant witness with the
        # same constraint
        assert any(
            witness.constraint == fact.constraint
            and is_ancestor(kb, fact.concept_ref, witness.concept_ref)
            for witness in retained
        )


# --- remove_contradictions -------------------------------------------------------


def test_presence_absence_pair_both_dropped():
    a = efact("D007938", True)
    b = efact("D007938", False)
    retained, dropped = remove_contradictions([a, b], [])
    assert retained == []
    assert {reason for _, reason in dropped} == {DropReason.CONTRADICTION}


def test_empty_attribute_interval_dropped():
    a = afact("A001", lower=Bound(18.0, True))
    b = afact("A001", upper=Bound(18.0, False))
    retained, dropped = remove_contradictions([a, b], [])
    assert retained == []
    assert len(dropped) == 2


def test_no_conflicts_unchanged():
    facts = [efact("D007938", False), afact("A001", lower=Bound(18.0, True))]
    retained, dropped = remove_contradictions(facts, [])
    assert retained == facts and dropped == []


def test_intent_rule_drops_loser():
    rules = [IntentRule(winner_concept_id="C11001", loser_concept_id="C12001")]
    pregnancy = efact("C11001", True)
    contraception = efact("C12001", True)
    retained, dropped = remove_contradictions([pregnancy, contraception], rules)
    assert retained == [pregnancy]
    assert dropped == [(contraception, DropReason.INTENT_CONFLICT)]


def test_intent_rule_needs_both_required():
    rules = [IntentRule(winner_concept_id="C11001", loser_concept_id="C12001")]
    pregnancy = efact("C11001", False)  # pregnancy excluded
    contraception = efact("C12001", True)
    retained, dropped = remove_contradictions([pregnancy, contraception], rules)
    assert retained == [pregnancy, contraception] and dropped == []


# --- aggregate -------------------------------------------------------------------


def test_aggregate_intersects_bounds(kb):
    inclusion = afact("A001", lower=Bound(18.0, True))
    exclusion = afact("A001", lower=Bound(65.0, False), block=BlockKind.EXCLUSION)
    profile = aggregate([inclusion, exclusion], kb)
    assert len(profile.facts) == 1
    constraint = profile.facts[0].constraint
    assert constraint.alternatives == (
        Interval(lower=Bound(18.0, True), upper=Bound(65.0, True)),
    )


def test_aggregate_empty():
    profile = aggregate([], None)
    assert profile.facts == ()


def test_aggregate_simple_counts(kb):
    facts = [
        efact("D007938", True),
        efact("D003920", True, line=1),
        efact("C11001", True, BlockKind.EXCLUSION, line=2),
    ]
    profile = aggregate(facts, kb)
    assert len(profile.facts) == 3
    assert all(f.inclusion_form for f in profile.facts)


def test_aggregate_idempotent(kb):
    facts = [
        efact("D006505", False),
        efact("D006509", False, line=1),
        afact("A001", lower=Bound(18.0, True), line=2),
        afact(
            "A001",
            lower=Bound(30.0, True),
            upper=Bound(40.0, True),
            block=BlockKind.EXCLUSION,
            line=3,
        ),
    ]
    profile = aggregate(facts, kb)
    again = aggregate(list(profile.facts), kb)
    assert again.facts == profile.facts


def test_aggregate_hepatitis_drop_rule(kb):
    facts = [
        efact("D006505", True, BlockKind.EXCLUSION, line=0),
        efact("D006509", True, BlockKind.EXCLUSION, line=1),
    ]
    profile = aggregate(facts, kb)
    assert [f.concept_ref for f in profile.facts] == ["D006509"]
    assert [(f.concept_ref, r) for f, r in profile.dropped] == [
        ("D006505", DropReason.GENERALIZED)
    ]


def test_aggregate_intent_conflict(kb):
    from trialfacts.aggregation import load_default_intent_rules

    rules = load_default_intent_rules()
    facts = [efact("C11001", True), efact("C12001", True, line=1)]
    profile = aggregate(facts, kb, rules)
    assert [f.concept_ref for f in profile.facts] == ["C11001"]
    assert [(f.concept_ref, r) for f, r in profile.dropped] == [
        ("C12001", DropReason.INTENT_CONFLICT)
    ]


# --- evaluate_patient --------------------------------------------------------------


def test_patient_eligible(kb):
    facts = [
        afact("A001", lower=Bound(18.0, True), upper=Bound(65.0, True)),
        efact("D007938", False),
    ]
    profile = aggregate(facts, kb)
    decision = evaluate_patient(
        profile, {"A001": 40, "D007938": "absent"}, kb
    )
    assert decision.eligible == "eligible"
    assert all(v.status == "satisfied" for v in decision.verdicts)


def test_patient_ineligible_names_failing_fact(kb):
    facts = [
        afact("A001", lower=Bound(18.0, True), upper=Bound(65.0, True)),
        efact("D007938", False),
    ]
    profile = aggregate(facts, kb)
    decision = evaluate_patient(profile, {"A001": 70, "D007938": "absent"}, kb)
    assert decision.eligible == "ineligible"
    failing = [v for v in decision.verdicts if v.status == "failed"]
    assert len(failing) == 1
    assert failing[0].fact.concept_ref == "A001"


def test_patient_empty_profile_always_eligible(kb):
    profile = aggregate([], kb)
    assert evaluate_patient(profile, {}, kb).eligible == "eligible"


def test_patient_missing_value_indeterminate(kb):
    profile = aggregate([efact("D007938", False)], kb)
    decision = evaluate_patient(profile, {}, kb)
    assert decision.eligible == "indeterminate"


def test_patient_unit_suffix_and_type_errors(kb):
    profile = aggregate(
        [afact("A001", lower=Bound(18.0, True), unit="years")], kb
    )
    decision = evaluate_patient(profile, {"A001": "216 months"}, kb)
    assert decision.eligible == "eligible"
    with pytest.raises(PatientDataError):
        evaluate_patient(profile, {"A001": "tall"}, kb)


def test_patient_disjunctive_alternatives_or_semantics(kb):
    outside = afact(
        "A001",
        block=BlockKind.EXCLUSION,
        lower=Bound(30.0, True),
        upper=Bound(40.0, True),
    )
    profile = aggregate([outside], kb)
    assert evaluate_patient(profile, {"A001": 25}, kb).eligible == "eligible"
    assert evaluate_patient(profile, {"A001": 35}, kb).eligible == "ineligible"
    assert evaluate_patient(profile, {"A001": 45}, kb).eligible == "eligible"


# --- Eq. 1 equivalence --------------------------------------------------------------


ENTITY_POOL = ["D007938", "D003920", "D001249", "C11001", "C10002", "D013502"]
ATTR_POOL = ["A001", "A002", "A007", "A022", "A026"]


def random_fact(rng, trial="NCT00000001"):
    block = rng.choice([BlockKind.INCLUSION, BlockKind.EXCLUSION])
    line = rng.randrange(10)
    if rng.random() < 0.5:
        return efact(rng.choice(ENTITY_POOL), rng.random() < 0.7, block, trial, line)
    attr = rng.choice(ATTR_POOL)
    style = rng.random()
    scale = rng.choice([1, 10, 100])
    a = round(rng.uniform(0, 10) * scale, 1)
    b = round(rng.uniform(0, 10) * scale, 1)
    low, high = min(a, b), max(a, b)
    if style < 0.4:
        return afact(attr, lower=Bound(low, rng.random() < 0.5), block=block,
                     trial=trial, line=line, unit="u")
    if style < 0.8:
        return afact(attr, upper=Bound(high, rng.random() < 0.5), block=block,
                     trial=trial, line=line, unit="u")
    return afact(attr, lower=Bound(low, True), upper=Bound(high, True),
                 block=block, trial=trial, line=line, unit="u")


def random_patient(rng):
    patient = {}
    for concept in ENTITY_POOL:
        patient[concept] = rng.choice(["present", "absent"])
    for attr in ATTR_POOL:
        patient[attr] = round(rng.uniform(-100, 1100), 2)
    return patient


def run_eq1_trials(kb, n_trials, n_patients, seed):
    rng = random.Random(seed)
    checked = skipped = 0
    for _ in range(n_trials):
        facts = [random_fact(rng) for _ in range(rng.randrange(1, 11))]
        for fact in facts:
            assert cast_exclusion(cast_exclusion(fact)) == fact
        profile = aggregate(facts, kb)
        again = aggregate(list(profile.facts), kb)
        assert again.facts == profile.facts  # idempotence
        if any(
            reason in (DropReason.CONTRADICTION, DropReason.INTENT_CONFLICT)
            for _, reason in profile.dropped
        ):
            skipped += 1
            continue
        inclusion = [f for f in facts if f.inclusion_form]
        exclusion = [f for f in facts if not f.inclusion_form]
        for _ in range(n_patients):
            patient = random_patient(rng)
            expected = eq1_eligible(inclusion, exclusion, patient)
            decision = evaluate_patient(profile, patient, kb)
            assert decision.eligible == ("eligible" if expected else "ineligible")
        checked += 1
    return checked, skipped


def test_eq1_equivalence_sample(kb):
    checked, skipped = run_eq1_trials(kb, n_trials=150, n_patients=5, seed=42)
    assert checked > 50  # contradiction skips must not dominate
