"""Hierarchical vocabulary of entity concepts and attribute definitions.

The knowledge base is loaded from two TSV files (concepts and attributes),
validated, and indexed by normalized surface string. It is immutable after
load and safe to share across pipeline workers.

Concept TSV columns:
    id <TAB> preferred_name <TAB> synonym1|synonym2|... <TAB> category <TAB> parent_id_or_empty
Attribute TSV columns:
    id <TAB> canonical_name <TAB> alias1|alias2|... <TAB> value_kind <TAB> canonical_unit <TAB> unit1=factor1,unit2=factor2,...

Lines starting with ``#`` are ignored in both files. Unit conversion factors
may be written as decimals ("0.45359237") or exact fractions ("1/12").
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .errors import KnowledgeBaseError, UnknownIdError

logger = logging.getLogger(__name__)

DIMENSIONLESS = ""


class EntityCategory(Enum):
    """The ten entity classes mentions are tagged with."""

    TREATMENT = "treatment"
    CHRONIC_DISEASE = "chronic_disease"
    CANCER = "cancer"
    GENDER = "gender"
    PREGNANCY = "pregnancy"
    ALLERGY = "allergy"
    CONTRACEPTION_CONSENT = "contraception_consent"
    LANGUAGE_LITERACY = "language_literacy"
    TECHNOLOGY_ACCESS = "technology_access"
    ETHNICITY = "ethnicity"

    @classmethod
    def parse(cls, value: str) -> "EntityCategory":
        try:
            return cls(value)
        except ValueError:
            raise KnowledgeBaseError(f"unknown entity category: {value!r}") from None


_PUNCT_EDGE = re.compile(r"^[^\w]+|[^\w]+$", re.UNICODE)
_WS = re.compile(r"\s+")


def normalize_name(surface: str) -> str:
    """Case-fold a surface string the way vocabulary names are stored.

    Lowercase, collapse internal whitespace, strip leading/trailing
    punctuation. Gazetteer lookups and grounding both go through this.
    """
    lowered = _WS.sub(" ", surface.lower()).strip()
    return _PUNCT_EDGE.sub("", lowered).strip()


@dataclass(frozen=True)
class Concept:
    id: str
    preferred_name: str
    synonyms: frozenset[str]
    category: EntityCategory
    parent_id: str | None = None

    def names(self) -> frozenset[str]:
        return self.synonyms | {self.preferred_name}


@dataclass(frozen=True)
class AttributeDef:
    id: str
    canonical_name: str
    aliases: frozenset[str]
    value_kind: str  # "numeric" | "ordinal"
    canonical_unit: str
    accepted_units: dict[str, Fraction]

    def names(self) -> frozenset[str]:
        return self.aliases | {self.canonical_name}

    def to_canonical(self, value: Fraction, unit: str) -> Fraction:
        """Convert a value expressed in ``unit`` to the canonical unit."""
        if unit not in self.accepted_units:
            raise KnowledgeBaseError(
                f"unit {unit!r} not accepted for attribute {self.id}"
            )
        return value * self.accepted_units[unit]

    def from_canonical(self, value: Fraction, unit: str) -> Fraction:
        if unit not in self.accepted_units:
            raise KnowledgeBaseError(
                f"unit {unit!r} not accepted for attribute {self.id}"
            )
        return value / self.accepted_units[unit]


@dataclass
class KnowledgeBase:
    """Validated, indexed vocabulary. Treat as immutable after load."""

    concepts: dict[str, Concept] = field(default_factory=dict)
    attributes: dict[str, AttributeDef] = field(default_factory=dict)
    name_index: dict[str, frozenset[str]] = field(default_factory=dict)

    def concept(self, concept_id: str) -> Concept:
        try:
            return self.concepts[concept_id]
        except KeyError:
            raise UnknownIdError(f"unknown concept id: {concept_id}") from None

    def attribute(self, attribute_id: str) -> AttributeDef:
        try:
            return self.attributes[attribute_id]
        except KeyError:
            raise UnknownIdError(f"unknown attribute id: {attribute_id}") from None

    def max_name_token_count(self) -> int:
        """Longest vocabulary name measured in scan tokens."""
        longest = 1
        for name in self.name_index:
            longest = max(longest, name.count(" ") + 1)
        return longest

    def scan_keys(self, name: str) -> set[str]:
        """Index keys a vocabulary name is findable under: its normalized
        form plus its tokenized join, so names with internal punctuation
        ("d-dimer") still match token n-gram scans."""
        from .preprocess import tokenize  # local import to avoid a cycle at load

        keys = {name}
        tokenized = " ".join(t.surface.lower() for t in tokenize(name))
        if tokenized:
            keys.add(tokenized)
        return keys


def _parse_factor(text: str) -> Fraction:
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise KnowledgeBaseError(f"bad conversion factor: {text!r}") from exc


def _read_rows(path: Path, n_cols: int, label: str):
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) > n_cols:
                raise KnowledgeBaseError(
                    f"{label} file {path}, line {lineno}: expected {n_cols} "
                    f"tab-separated columns, got {len(cols)}"
                )
            cols.extend([""] * (n_cols - len(cols)))  # trailing empties may be omitted
            rows.append((lineno, cols))
    return rows


def _split_multi(cell: str) -> list[str]:
    return [part for part in (p.strip() for p in cell.split("|")) if part]


def load_knowledge_base(concept_file: str | Path, attribute_file: str | Path) -> KnowledgeBase:
    """Load and validate the two vocabulary TSV files.

    Raises KnowledgeBaseError on duplicate ids, dangling or cross-category
    parents, hierarchy cycles, empty names, or bad unit factors.
    """
    kb = KnowledgeBase()
    concept_file = Path(concept_file)
    attribute_file = Path(attribute_file)

    for lineno, cols in _read_rows(concept_file, 5, "concept"):
        concept_id, pref, syn_cell, cat_cell, parent_cell = (c.strip() for c in cols)
        if not concept_id:
            raise KnowledgeBaseError(f"{concept_file}:{lineno}: empty concept id")
        if concept_id in kb.concepts:
            raise KnowledgeBaseError(f"duplicate id: {concept_id}")
        preferred = normalize_name(pref)
        if not preferred:
            raise KnowledgeBaseError(
                f"{concept_file}:{lineno}: empty preferred name for {concept_id}"
            )
        synonyms = []
        for raw_syn in _split_multi(syn_cell):
            syn = normalize_name(raw_syn)
            if not syn:
                raise KnowledgeBaseError(
                    f"{concept_file}:{lineno}: empty synonym for {concept_id}"
                )
            if syn != preferred:
                synonyms.append(syn)
        kb.concepts[concept_id] = Concept(
            id=concept_id,
            preferred_name=preferred,
            synonyms=frozenset(synonyms),
            category=EntityCategory.parse(cat_cell),
            parent_id=parent_cell or None,
        )

    for lineno, cols in _read_rows(attribute_file, 6, "attribute"):
        attr_id, name_cell, alias_cell, kind_cell, unit_cell, factors_cell = (
            c.strip() for c in cols
        )
        if not attr_id:
            raise KnowledgeBaseError(f"{attribute_file}:{lineno}: empty attribute id")
        if attr_id in kb.attributes or attr_id in kb.concepts:
            raise KnowledgeBaseError(f"duplicate id: {attr_id}")
        canonical_name = normalize_name(name_cell)
        if not canonical_name:
            raise KnowledgeBaseError(
                f"{attribute_file}:{lineno}: empty canonical name for {attr_id}"
            )
        kind = kind_cell.lower()
        if kind not in ("numeric", "ordinal"):
            raise KnowledgeBaseError(
                f"{attribute_file}:{lineno}: value_kind must be numeric or ordinal, "
                f"got {kind_cell!r}"
            )
        canonical_unit = unit_cell  # may be empty string = dimensionless
        accepted: dict[str, Fraction] = {}
        if factors_cell:
            for pair in factors_cell.split(","):
                pair = pair.strip()
                if not pair:
                    continue
                if "=" not in pair:
                    raise KnowledgeBaseError(
                        f"{attribute_file}:{lineno}: bad unit entry {pair!r}"
                    )
                unit, factor_text = pair.split("=", 1)
                unit = unit.strip().lower()
                factor = _parse_factor(factor_text)
                if factor <= 0:
                    raise KnowledgeBaseError(
                        f"{attribute_file}:{lineno}: factor for {unit!r} must be "
                        f"strictly positive"
                    )
                accepted[unit] = factor
        canonical_key = canonical_unit.lower()
        if canonical_key in accepted:
            if accepted[canonical_key] != 1:
                raise KnowledgeBaseError(
                    f"{attribute_file}:{lineno}: canonical unit {canonical_unit!r} "
                    f"must convert with factor 1"
                )
        else:
            accepted[canonical_key] = Fraction(1)
        aliases = []
        for raw_alias in _split_multi(alias_cell):
            alias = normalize_name(raw_alias)
            if not alias:
                raise KnowledgeBaseError(
                    f"{attribute_file}:{lineno}: empty alias for {attr_id}"
                )
            if alias != canonical_name:
                aliases.append(alias)
        kb.attributes[attr_id] = AttributeDef(
            id=attr_id,
            canonical_name=canonical_name,
            aliases=frozenset(aliases),
            value_kind=kind,
            canonical_unit=canonical_key,
            accepted_units=accepted,
        )

    _validate_hierarchy(kb)
    _build_name_index(kb)
    return kb


def _validate_hierarchy(kb: KnowledgeBase) -> None:
    for concept in kb.concepts.values():
        if concept.parent_id is None:
            continue
        parent = kb.concepts.get(concept.parent_id)
        if parent is None:
            raise KnowledgeBaseError(
                f"concept {concept.id}: dangling parent_id {concept.parent_id}"
            )
        if parent.category != concept.category:
            raise KnowledgeBaseError(
                f"concept {concept.id} ({concept.category.value}) has parent "
                f"{parent.id} of different category {parent.category.value}"
            )
    # Full traversal: walking up from any node must terminate without revisiting.
    for start in kb.concepts:
        seen = set()
        current: str | None = start
        while current is not None:
            if current in seen:
                cycle = _trace_cycle(kb, current)
                raise KnowledgeBaseError(
                    "hierarchy cycle: " + " -> ".join(cycle)
                )
            seen.add(current)
            current = kb.concepts[current].parent_id


def _trace_cycle(kb: KnowledgeBase, start: str) -> list[str]:
    cycle = [start]
    current = kb.concepts[start].parent_id
    while current is not None and current != start:
        cycle.append(current)
        current = kb.concepts[current].parent_id
    cycle.append(start)
    return cycle


def _build_name_index(kb: KnowledgeBase) -> None:
    index: dict[str, set[str]] = {}
    for concept in kb.concepts.values():
        for name in concept.names():
            for key in kb.scan_keys(name):
                index.setdefault(key, set()).add(concept.id)
    for attr in kb.attributes.values():
        for name in attr.names():
            for key in kb.scan_keys(name):
                index.setdefault(key, set()).add(attr.id)
    kb.name_index = {name: frozenset(ids) for name, ids in index.items()}


def is_ancestor(kb: KnowledgeBase, ancestor_id: str, descendant_id: str) -> bool:
    """True iff ancestor_id is reachable from descendant_id via one or more
    parent links. Irreflexive: is_ancestor(x, x) is False."""
    kb.concept(ancestor_id)
    current = kb.concept(descendant_id).parent_id
    while current is not None:
        if current == ancestor_id:
            return True
        current = kb.concepts[current].parent_id
    return False


def lookup_exact(kb: KnowledgeBase, surface: str) -> frozenset[str]:
    """Ids whose preferred name, synonym, or alias equals the normalized surface."""
    key = normalize_name(surface)
    if not key:
        return frozenset()
    return kb.name_index.get(key, frozenset())


def save_knowledge_base(
    kb: KnowledgeBase, concept_file: str | Path, attribute_file: str | Path
) -> None:
    """Write the knowledge base back to the TSV formats load expects.

    load -> save -> load is the identity on every valid knowledge base.
    """
    with open(concept_file, "w", encoding="utf-8") as handle:
        for concept_id in sorted(kb.concepts):
            c = kb.concepts[concept_id]
            handle.write(
                "\t".join(
                    [
                        c.id,
                        c.preferred_name,
                        "|".join(sorted(c.synonyms)),
                        c.category.value,
                        c.parent_id or "",
                    ]
                )
                + "\n"
            )
    with open(attribute_file, "w", encoding="utf-8") as handle:
        for attr_id in sorted(kb.attributes):
            a = kb.attributes[attr_id]
            factors = ",".join(
                f"{unit}={_format_factor(factor)}"
                for unit, factor in sorted(a.accepted_units.items())
            )
            handle.write(
                "\t".join(
                    [
                        a.id,
                        a.canonical_name,
                        "|".join(sorted(a.aliases)),
                        a.value_kind,
                        a.canonical_unit,
                        factors,
                    ]
                )
                + "\n"
            )


def _format_factor(factor: Fraction) -> str:
    if factor.denominator == 1:
        return str(factor.numerator)
    return f"{factor.numerator}/{factor.denominator}"
