"""Attribute-constraint extraction: lexer, chart parser, interpreter."""

from .grammar import Grammar, load_grammar, load_default_grammar
from .interpreter import AttributeCriterion, Bound, evaluate
from .lexer import LexKind, LexToken, lex
from .parser import ParseTree, parse_cyk, prune

__all__ = [
    "AttributeCriterion",
    "Bound",
    "Grammar",
    "LexKind",
    "LexToken",
    "ParseTree",
    "evaluate",
    "lex",
    "load_default_grammar",
    "load_grammar",
    "parse_cyk",
    "prune",
]
