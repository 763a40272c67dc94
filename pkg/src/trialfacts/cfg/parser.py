"""Chart parser over lexeme kinds.

Standard CYK, modified to accept parses over any contiguous subspan of the
input instead of only the full span, so constraints embedded in prose are
still found. Trees are enumerated deterministically by span start, span
length, and production order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .grammar import Grammar
from .lexer import LexToken


@dataclass(frozen=True)
class ParseTree:
    """A derivation node. Leaves carry the lexeme; span is [start, end) over
    the lexeme sequence; children partition the span contiguously."""

    root: str
    span: tuple[int, int]
    children: tuple["ParseTree", ...] = ()
    token: LexToken | None = None

    def leaves(self) -> list[LexToken]:
        if not self.children:
            return [self.token] if self.token is not None else []
        found = []
        for child in self.children:
            found.extend(child.leaves())
        return found

    def shape(self):
        """Token-free structural form, for comparing derivations."""
        return (self.root, self.span, tuple(child.shape() for child in self.children))


def parse_cyk(tokens: list[LexToken], grammar: Grammar) -> list[ParseTree]:
    """All parse trees rooted at the start symbol over every contiguous
    subspan of the lexeme sequence. Unparseable input yields an empty list."""
    n = len(tokens)
    # chart[(i, j)] maps nonterminal -> list of trees spanning [i, j)
    chart: dict[tuple[int, int], dict[str, list[ParseTree]]] = {}

    for i, token in enumerate(tokens):
        cell: dict[str, list[ParseTree]] = {}
        leaf = ParseTree(root=token.kind.value, span=(i, i + 1), token=token)
        for production in sorted(
            grammar.preterminal.get(token.kind.value, []), key=lambda p: p.order
        ):
            cell.setdefault(production.lhs, []).append(
                ParseTree(root=production.lhs, span=(i, i + 1), children=(leaf,))
            )
        chart[(i, i + 1)] = cell

    for length in range(2, n + 1):
        for start in range(0, n - length + 1):
            end = start + length
            cell = {}
            for split in range(start + 1, end):
                left_cell = chart.get((start, split), {})
                right_cell = chart.get((split, end), {})
                if not left_cell or not right_cell:
                    continue
                for left_symbol, left_trees in left_cell.items():
                    for right_symbol, right_trees in right_cell.items():
                        productions = grammar.binary.get((left_symbol, right_symbol))
                        if not productions:
                            continue
                        for production in sorted(productions, key=lambda p: p.order):
                            for left_tree in left_trees:
                                for right_tree in right_trees:
                                    cell.setdefault(production.lhs, []).append(
                                        ParseTree(
                                            root=production.lhs,
                                            span=(start, end),
                                            children=(left_tree, right_tree),
                                        )
                                    )
            chart[(start, end)] = cell

    trees: list[ParseTree] = []
    for start in range(n):
        for length in range(1, n - start + 1):
            cell = chart.get((start, start + length))
            if cell and grammar.start in cell:
                trees.extend(cell[grammar.start])
    return trees


def prune(trees: list[ParseTree]) -> list[ParseTree]:
    """Drop structural duplicates, then drop any tree whose span is strictly
    contained in another retained tree's span (maximal spans win)."""
    unique: list[ParseTree] = []
    seen = set()
    for tree in trees:
        if tree not in seen:
            seen.add(tree)
            unique.append(tree)
    spans = {tree.span for tree in unique}

    def strictly_contained(inner: tuple[int, int]) -> bool:
        return any(
            outer != inner and outer[0] <= inner[0] and inner[1] <= outer[1]
            for outer in spans
        )

    return [tree for tree in unique if not strictly_contained(tree.span)]
