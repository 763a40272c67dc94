"""Grammar file loading for the chart parser.

Format, one production per line, ``#`` comments allowed:

    LHS -> RHS1 RHS2      (binary rule, both symbols nonterminal)
    LHS -> terminal_kind  (preterminal rule, kind is a lexeme kind name)

The start symbol is CRITERION. The file must be in this binarized form
already; unary nonterminal rules are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import GrammarError
from .lexer import LexKind

START_SYMBOL = "CRITERION"

_KIND_NAMES = {kind.value for kind in LexKind}


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[str, ...]  # one terminal kind name, or two nonterminals
    order: int  # position in the grammar file, for deterministic enumeration


@dataclass
class Grammar:
    productions: list[Production]
    start: str = START_SYMBOL
    preterminal: dict[str, list[Production]] = field(default_factory=dict)
    binary: dict[tuple[str, str], list[Production]] = field(default_factory=dict)

    @property
    def nonterminals(self) -> set[str]:
        return {p.lhs for p in self.productions}


def _index(grammar: Grammar) -> None:
    for production in grammar.productions:
        if len(production.rhs) == 1:
            grammar.preterminal.setdefault(production.rhs[0], []).append(production)
        else:
            grammar.binary.setdefault(production.rhs, []).append(production)


def _check_generating(grammar: Grammar) -> None:
    """The start symbol must derive at least one terminal sentence."""
    generating: set[str] = set()
    changed = True
    while changed:
        changed = False
        for production in grammar.productions:
            if production.lhs in generating:
                continue
            if len(production.rhs) == 1 or all(
                symbol in generating for symbol in production.rhs
            ):
                generating.add(production.lhs)
                changed = True
    if grammar.start not in generating:
        raise GrammarError(f"start symbol {grammar.start} derives no sentence")


def load_grammar(path: str | Path) -> Grammar:
    productions: list[Production] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    lhs_symbols: set[str] = set()
    raw_rules: list[tuple[int, str, tuple[str, ...]]] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "->" not in line:
                raise GrammarError(f"{path}:{lineno}: missing '->'")
            lhs, rhs_text = (part.strip() for part in line.split("->", 1))
            rhs = tuple(rhs_text.split())
            if not lhs or not rhs:
                raise GrammarError(f"{path}:{lineno}: empty side in production")
            if len(rhs) > 2:
                raise GrammarError(
                    f"{path}:{lineno}: production must be binary or preterminal"
                )
            lhs_symbols.add(lhs)
            raw_rules.append((lineno, lhs, rhs))

    for lineno, lhs, rhs in raw_rules:
        if len(rhs) == 1:
            if rhs[0] not in _KIND_NAMES:
                if rhs[0] in lhs_symbols:
                    raise GrammarError(
                        f"{path}:{lineno}: unary nonterminal rule {lhs} -> {rhs[0]} "
                        f"not allowed; inline it"
                    )
                raise GrammarError(f"{path}:{lineno}: unknown terminal kind {rhs[0]!r}")
        else:
            for symbol in rhs:
                if symbol not in lhs_symbols:
                    raise GrammarError(
                        f"{path}:{lineno}: {symbol!r} in a binary rule is not a "
                        f"nonterminal (kinds may only appear in preterminal rules)"
                    )
        key = (lhs, rhs)
        if key in seen:
            continue
        seen.add(key)
        productions.append(Production(lhs=lhs, rhs=rhs, order=len(productions)))

    if START_SYMBOL not in lhs_symbols:
        raise GrammarError(f"{path}: no productions for start symbol {START_SYMBOL}")
    grammar = Grammar(productions=productions)
    _index(grammar)
    _check_generating(grammar)
    return grammar


def load_default_grammar() -> Grammar:
    with resources.as_file(
        resources.files("trialfacts.data").joinpath("grammar.cfg")
    ) as path:
        return load_grammar(path)
