"""Segmentation and tokenization of raw eligibility text.

Raw eligibility sections are split into inclusion/exclusion blocks by
heading rules, bullet markers are stripped, and every retained line is
tokenized twice: a raw view (surfaces with offsets into the original line)
and a delexicalized view where digit-runs and punctuation are masked.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

NUM_MASK = "<num>"
PUNC_MASK = "<punc>"

_NUMBER_PATTERN = r"\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?"
_TOKEN_RE = re.compile(_NUMBER_PATTERN + r"|\w+|[^\w\s]")
_NUMBER_RE = re.compile(rf"(?:{_NUMBER_PATTERN})$")
_PUNCT_RE = re.compile(r"[^\w\s]+$")

# Lines consisting only of one of these phrases (plus surrounding punctuation)
# open a new block. "eligibility criteria" and the bare "inclusion" forms open
# inclusion blocks.
_HEADINGS = {
    "eligibility criteria": "inclusion",
    "inclusion criteria": "inclusion",
    "key inclusion criteria": "inclusion",
    "inclusion": "inclusion",
    "exclusion criteria": "exclusion",
    "key exclusion criteria": "exclusion",
    "exclusion": "exclusion",
}

# Heading markers embedded mid-line ("Inclusion: age >= 18. Exclusion: ...")
# get split onto their own lines before per-line classification. The colon is
# required so prose mentions of "exclusion" do not trigger a split.
_INLINE_HEADING_RE = re.compile(
    r"(?i)\b((?:key\s+)?(?:inclusion|exclusion)(?:\s+criteria)?\s*:)"
)

_BULLET_RE = re.compile(r"^\s*(?:[-*•·◦▪]+|\(?\d{1,2}[.)]|[a-z][.)])\s+")


class BlockKind(Enum):
    INCLUSION = "inclusion"
    EXCLUSION = "exclusion"


@dataclass(frozen=True)
class Token:
    """One token of a criteria line.

    ``surface`` is the exact slice line[start:end]; ``delex`` is the masked,
    case-folded form used by taggers and embeddings.
    """

    surface: str
    start: int
    end: int
    delex: str


@dataclass(frozen=True)
class Line:
    """A retained criteria line with its tokenization.

    ``index`` is the line's position among all retained lines of the trial,
    counted across blocks in document order. It is the line identifier used
    by tag files, gold annotations, and fact provenance.
    """

    text: str
    tokens: tuple[Token, ...]
    index: int


@dataclass(frozen=True)
class CriteriaBlock:
    block_kind: BlockKind
    lines: tuple[Line, ...]


def delexicalize(surface: str) -> str:
    """Mask a token: digit-runs become the number placeholder, punctuation
    becomes the punctuation placeholder, everything else is lowercased."""
    if _NUMBER_RE.fullmatch(surface):
        return NUM_MASK
    if _PUNCT_RE.fullmatch(surface):
        return PUNC_MASK
    return surface.lower()


def tokenize(line: str) -> list[Token]:
    """Split a line into number, word, and single-punctuation tokens.

    Offsets refer to the original line, so concatenating surfaces with the
    original gaps reconstructs it exactly.
    """
    tokens = []
    for match in _TOKEN_RE.finditer(line):
        surface = match.group(0)
        tokens.append(
            Token(
                surface=surface,
                start=match.start(),
                end=match.end(),
                delex=delexicalize(surface),
            )
        )
    return tokens


def _heading_kind(line: str) -> str | None:
    stripped = re.sub(r"\s+", " ", line.strip().strip(" \t-*:•·.#()[]")).strip().lower()
    return _HEADINGS.get(stripped)


def _split_inline_headings(text: str) -> list[str]:
    lines = []
    for raw_line in text.splitlines():
        pieces = _INLINE_HEADING_RE.split(raw_line)
        # split() leaves the matched marker in odd positions
        for piece in pieces:
            if piece.strip():
                lines.append(piece)
    return lines


def strip_bullet(line: str) -> str:
    return _BULLET_RE.sub("", line, count=1)


def segment_blocks(eligibility_text: str) -> list[CriteriaBlock]:
    """Assign every non-heading, non-empty line to an inclusion or exclusion
    block. Lines before the first heading default to inclusion.

    Always returns at least one (possibly empty) inclusion block.
    """
    blocks: list[tuple[BlockKind, list[Line]]] = [(BlockKind.INCLUSION, [])]
    line_index = 0
    for raw_line in _split_inline_headings(eligibility_text):
        kind = _heading_kind(raw_line)
        if kind is not None:
            blocks.append((BlockKind(kind), []))
            continue
        content = strip_bullet(raw_line).strip()
        if not content:
            continue
        blocks[-1][1].append(
            Line(text=content, tokens=tuple(tokenize(content)), index=line_index)
        )
        line_index += 1
    result = [
        CriteriaBlock(block_kind=kind, lines=tuple(lines))
        for kind, lines in blocks
        if lines
    ]
    if not result:
        result = [CriteriaBlock(block_kind=BlockKind.INCLUSION, lines=())]
    return result
