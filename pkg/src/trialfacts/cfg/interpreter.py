"""Evaluation of parse trees into attribute constraints.

A tree's leaf lexemes are matched against the small set of constraint
templates the grammar generates (prefix comparison, postfix comparison,
unit-inferred postfix, between, dash range, compound bound), values are
converted to the attribute's canonical unit, and negation is folded in as
interval complement.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import BoundContradictionError
from ..kb import AttributeDef
from .lexer import LexKind, LexToken
from .parser import ParseTree


@dataclass(frozen=True)
class Bound:
    value: float
    inclusive: bool


@dataclass(frozen=True)
class AttributeCriterion:
    """A numeric/ordinal constraint on one attribute, in canonical units.

    negated=True means the constraint is the complement of the stated
    interval (only two-sided intervals stay in that form; one-sided
    negations are normalized to the opposite bound directly).
    """

    attribute_id: str
    lower: Bound | None
    upper: Bound | None
    unit: str
    negated: bool = False

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("criterion must carry at least one bound")
        if (
            self.lower is not None
            and self.upper is not None
            and self.lower.value > self.upper.value
        ):
            raise ValueError("lower bound above upper bound")


def complement(criterion: AttributeCriterion) -> AttributeCriterion:
    """Set complement of the constraint. Involution."""
    if criterion.negated:
        return AttributeCriterion(
            attribute_id=criterion.attribute_id,
            lower=criterion.lower,
            upper=criterion.upper,
            unit=criterion.unit,
            negated=False,
        )
    if criterion.lower is not None and criterion.upper is not None:
        return AttributeCriterion(
            attribute_id=criterion.attribute_id,
            lower=criterion.lower,
            upper=criterion.upper,
            unit=criterion.unit,
            negated=True,
        )
    if criterion.lower is not None:
        flipped = Bound(criterion.lower.value, not criterion.lower.inclusive)
        return AttributeCriterion(
            attribute_id=criterion.attribute_id,
            lower=None,
            upper=flipped,
            unit=criterion.unit,
            negated=False,
        )
    flipped = Bound(criterion.upper.value, not criterion.upper.inclusive)
    return AttributeCriterion(
        attribute_id=criterion.attribute_id,
        lower=flipped,
        upper=None,
        unit=criterion.unit,
        negated=False,
    )


def _resolve_unit(
    attribute: AttributeDef, unit_token: LexToken | None
) -> str | None:
    """The source unit to convert from; None when the attribute does not
    accept the written unit (the parse is then discarded)."""
    if unit_token is None:
        return attribute.canonical_unit
    symbol = (unit_token.unit_symbol or "").lower()
    if symbol in attribute.accepted_units:
        return symbol
    return None


def _to_canonical(attribute: AttributeDef, value: Fraction, unit: str) -> float:
    return float(attribute.to_canonical(value, unit))


def _bounds_for(op: str, value: float) -> tuple[Bound | None, Bound | None]:
    if op == "<":
        return None, Bound(value, False)
    if op == "<=":
        return None, Bound(value, True)
    if op == ">":
        return Bound(value, False), None
    if op == ">=":
        return Bound(value, True), None
    if op == "=":
        return Bound(value, True), Bound(value, True)
    raise ValueError(f"no bound semantics for operator {op!r}")


def _intersect_bounds(
    a: tuple[Bound | None, Bound | None], b: tuple[Bound | None, Bound | None]
) -> tuple[Bound | None, Bound | None]:
    def tighter_lower(x: Bound | None, y: Bound | None) -> Bound | None:
        if x is None:
            return y
        if y is None:
            return x
        if x.value != y.value:
            return x if x.value > y.value else y
        return x if not x.inclusive else y

    def tighter_upper(x: Bound | None, y: Bound | None) -> Bound | None:
        if x is None:
            return y
        if y is None:
            return x
        if x.value != y.value:
            return x if x.value < y.value else y
        return x if not x.inclusive else y

    return tighter_lower(a[0], b[0]), tighter_upper(a[1], b[1])


def _template_single(
    attribute: AttributeDef,
    op: str,
    number: LexToken,
    unit_token: LexToken | None,
) -> AttributeCriterion | None:
    unit = _resolve_unit(attribute, unit_token)
    if unit is None:
        return None
    value = _to_canonical(attribute, number.value, unit)
    lower, upper = _bounds_for(op, value)
    return AttributeCriterion(
        attribute_id=attribute.id,
        lower=lower,
        upper=upper,
        unit=attribute.canonical_unit,
    )


def _template_range(
    attribute: AttributeDef,
    low: LexToken,
    high: LexToken,
    unit_token: LexToken | None,
) -> AttributeCriterion | None:
    unit = _resolve_unit(attribute, unit_token)
    if unit is None:
        return None
    low_value = _to_canonical(attribute, low.value, unit)
    high_value = _to_canonical(attribute, high.value, unit)
    if low_value > high_value:
        raise BoundContradictionError(attribute.id, low_value, high_value)
    return AttributeCriterion(
        attribute_id=attribute.id,
        lower=Bound(low_value, True),
        upper=Bound(high_value, True),
        unit=attribute.canonical_unit,
    )


def _infer_attribute(
    catalog: dict[str, AttributeDef], unit_token: LexToken
) -> AttributeDef | None:
    """Unique attribute whose canonical unit is the written unit, if any."""
    symbol = (unit_token.unit_symbol or "").lower()
    matches = [
        catalog[attr_id]
        for attr_id in sorted(catalog)
        if catalog[attr_id].canonical_unit == symbol and symbol
    ]
    if len(matches) == 1:
        return matches[0]
    return None


def evaluate(
    tree: ParseTree, attributes: dict[str, AttributeDef]
) -> list[AttributeCriterion]:
    """Interpret one parse tree. Returns zero criteria when the leaves do
    not instantiate a known template (wrong operator for the shape, unit not
    accepted by the attribute, ambiguous unit inference).

    Raises BoundContradictionError when a range's bounds invert after unit
    normalization; the aggregator records those as contradictions.
    """
    leaves = tree.leaves()
    negations = sum(1 for leaf in leaves if leaf.kind == LexKind.NEGATION)
    rest = [leaf for leaf in leaves if leaf.kind != LexKind.NEGATION]
    kinds = tuple(leaf.kind for leaf in rest)

    criterion: AttributeCriterion | None = None

    def attr_of(token: LexToken) -> AttributeDef | None:
        return attributes.get(token.attribute_id or "")

    if kinds in (
        (LexKind.ATTRIBUTE, LexKind.COMPARISON, LexKind.NUMBER),
        (LexKind.ATTRIBUTE, LexKind.COMPARISON, LexKind.NUMBER, LexKind.UNIT),
    ):
        attribute = attr_of(rest[0])
        op = rest[1].comparison_op
        if attribute is not None and op != "between":
            unit_token = rest[3] if len(rest) == 4 else None
            criterion = _template_single(attribute, op, rest[2], unit_token)
    elif kinds in (
        (LexKind.ATTRIBUTE, LexKind.NUMBER, LexKind.COMPARISON),
        (LexKind.ATTRIBUTE, LexKind.NUMBER, LexKind.UNIT, LexKind.COMPARISON),
    ):
        attribute = attr_of(rest[0])
        op = rest[-1].comparison_op
        if attribute is not None and op != "between":
            unit_token = rest[2] if len(rest) == 4 else None
            criterion = _template_single(attribute, op, rest[1], unit_token)
    elif kinds == (LexKind.NUMBER, LexKind.UNIT, LexKind.COMPARISON):
        attribute = _infer_attribute(attributes, rest[1])
        op = rest[2].comparison_op
        if attribute is not None and op != "between":
            criterion = _template_single(attribute, op, rest[0], rest[1])
    elif kinds in (
        (
            LexKind.ATTRIBUTE,
            LexKind.COMPARISON,
            LexKind.NUMBER,
            LexKind.CONNECTOR,
            LexKind.NUMBER,
        ),
        (
            LexKind.ATTRIBUTE,
            LexKind.COMPARISON,
            LexKind.NUMBER,
            LexKind.CONNECTOR,
            LexKind.NUMBER,
            LexKind.UNIT,
        ),
    ):
        attribute = attr_of(rest[0])
        if (
            attribute is not None
            and rest[1].comparison_op == "between"
            and rest[3].surface.lower() == "and"
        ):
            unit_token = rest[5] if len(rest) == 6 else None
            criterion = _template_range(attribute, rest[2], rest[4], unit_token)
    elif kinds in (
        (LexKind.ATTRIBUTE, LexKind.NUMBER, LexKind.CONNECTOR, LexKind.NUMBER),
        (
            LexKind.ATTRIBUTE,
            LexKind.NUMBER,
            LexKind.CONNECTOR,
            LexKind.NUMBER,
            LexKind.UNIT,
        ),
    ):
        attribute = attr_of(rest[0])
        if attribute is not None and rest[2].surface.lower() in {"-", "–", "—", "to"}:
            unit_token = rest[4] if len(rest) == 5 else None
            criterion = _template_range(attribute, rest[1], rest[3], unit_token)
    else:
        criterion = _evaluate_compound(rest, kinds, attributes)

    if criterion is None:
        return []
    if negations % 2 == 1:
        criterion = complement(criterion)
    return [criterion]


def _evaluate_compound(
    rest: list[LexToken],
    kinds: tuple[LexKind, ...],
    attributes: dict[str, AttributeDef],
) -> AttributeCriterion | None:
    """ATTR CMP NUM UNIT? and CMP NUM UNIT?: two bounds on one attribute."""
    if not rest or rest[0].kind != LexKind.ATTRIBUTE:
        return None
    attribute = attributes.get(rest[0].attribute_id or "")
    if attribute is None:
        return None
    try:
        connector_at = next(
            i for i, leaf in enumerate(rest) if leaf.kind == LexKind.CONNECTOR
        )
    except StopIteration:
        return None
    if rest[connector_at].surface.lower() != "and":
        return None
    left = rest[1:connector_at]
    right = rest[connector_at + 1 :]

    def side(leaves: list[LexToken]) -> tuple[str, LexToken, LexToken | None] | None:
        shapes = {
            (LexKind.COMPARISON, LexKind.NUMBER): None,
            (LexKind.COMPARISON, LexKind.NUMBER, LexKind.UNIT): 2,
        }
        key = tuple(leaf.kind for leaf in leaves)
        if key not in shapes:
            return None
        op = leaves[0].comparison_op
        if op == "between":
            return None
        unit_token = leaves[2] if len(leaves) == 3 else None
        return op, leaves[1], unit_token

    left_side = side(left)
    right_side = side(right)
    if left_side is None or right_side is None:
        return None

    bounds = (None, None)
    for op, number, unit_token in (left_side, right_side):
        unit = _resolve_unit(attribute, unit_token)
        if unit is None:
            return None
        value = _to_canonical(attribute, number.value, unit)
        bounds = _intersect_bounds(bounds, _bounds_for(op, value))
    lower, upper = bounds
    if lower is not None and upper is not None and lower.value > upper.value:
        raise BoundContradictionError(attribute.id, lower.value, upper.value)
    return AttributeCriterion(
        attribute_id=attribute.id,
        lower=lower,
        upper=upper,
        unit=attribute.canonical_unit,
    )
