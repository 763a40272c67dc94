"""Toy training-set synthesis from the pipeline's vocabulary files.

Sentences are generated from templates instantiated with concept names and
synonyms, in the delexicalized token view (lowercase, digit-runs masked,
punctuation masked) so they match what the pipeline's preprocessor feeds a
tagger. Reads the concept/attribute TSV formats directly; no import of the
pipeline package.
"""

from __future__ import annotations

import json
import random
import re
from pathlib import Path

NUM_MASK = "<num>"
PUNC_MASK = "<punc>"

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|\w+|[^\w\s]")

# context templates: tokens before / after the entity span
TEMPLATES = [
    (["history", "of"], []),
    (["patients", "with"], []),
    (["diagnosis", "of"], []),
    (["known"], []),
    (["prior"], []),
    (["documented"], []),
    (["no"], []),
    (["active"], []),
    ([], ["at", "screening"]),
    ([], ["within", NUM_MASK, "months"]),
]

FILLER_SENTENCES = [
    ["able", "to", "attend", "study", "visits"],
    ["willing", "to", "complete", "questionnaires"],
    ["no", "other", "investigational", "agents"],
    ["stable", "dose", "for", NUM_MASK, "weeks"],
    ["adequate", "organ", "function"],
]


def delex_tokens(text: str) -> list[str]:
    tokens = []
    for match in _TOKEN_RE.finditer(text.lower()):
        surface = match.group(0)
        if re.fullmatch(r"\d+(?:\.\d+)?", surface):
            tokens.append(NUM_MASK)
        elif re.fullmatch(r"[^\w\s]+", surface):
            tokens.append(PUNC_MASK)
        else:
            tokens.append(surface)
    return tokens


def read_concept_families(
    concept_file: str | Path,
) -> list[tuple[list[str], str]]:
    """([preferred, synonym, ...], category) per concept row."""
    families = []
    with open(concept_file, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            preferred, synonyms, category = cols[1], cols[2] if len(cols) > 2 else "", cols[3]
            members = [preferred.strip().lower()]
            for synonym in synonyms.split("|"):
                synonym = synonym.strip().lower()
                if synonym:
                    members.append(synonym)
            families.append((members, category.strip()))
    return families


def read_concept_names(concept_file: str | Path) -> list[tuple[str, str]]:
    """(name, category) pairs for every preferred name and synonym."""
    return [
        (name, category)
        for members, category in read_concept_families(concept_file)
        for name in members
    ]


def read_attribute_phrases(attribute_file: str | Path) -> list[list[str]]:
    """Delexicalized attribute-constraint token lines (all-O sentences)."""
    phrases = []
    with open(attribute_file, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            name = cols[1].strip().lower()
            unit = cols[4].strip().lower() if len(cols) > 4 else ""
            sentence = delex_tokens(name) + [PUNC_MASK, NUM_MASK]
            if unit:
                sentence += delex_tokens(unit)
            phrases.append(sentence)
    return phrases


def synthesize(
    concept_file: str | Path,
    attribute_file: str | Path,
    sentence_count: int = 500,
    seed: int = 11,
):
    """(training examples, corpus lines). Training examples are dicts with
    "tokens" and "tags"; corpus lines are the same sentences as plain text
    plus paired synonym contexts for the embedding trainer."""
    rng = random.Random(seed)
    names = read_concept_names(concept_file)
    attribute_phrases = read_attribute_phrases(attribute_file)

    examples = []
    attribute_share = sentence_count // 5
    entity_share = sentence_count - attribute_share - len(FILLER_SENTENCES)
    for _ in range(entity_share):
        name, category = rng.choice(names)
        before, after = TEMPLATES[rng.randrange(len(TEMPLATES))]
        entity_tokens = delex_tokens(name)
        tokens = before + entity_tokens + after
        tags = (
            ["O"] * len(before)
            + [f"B-{category}"]
            + [f"I-{category}"] * (len(entity_tokens) - 1)
            + ["O"] * len(after)
        )
        examples.append({"tokens": tokens, "tags": tags})
    for _ in range(attribute_share):
        sentence = rng.choice(attribute_phrases)
        examples.append({"tokens": list(sentence), "tags": ["O"] * len(sentence)})
    for sentence in FILLER_SENTENCES:
        examples.append({"tokens": list(sentence), "tags": ["O"] * len(sentence)})
    rng.shuffle(examples)

    corpus_lines = [" ".join(example["tokens"]) for example in examples]
    # every synonym family gets repeated identical contexts around a
    # family-specific anchor token, so spelling variants end up closer to
    # each other in embedding space than arbitrary token pairs
    families = read_concept_families(concept_file)
    for i, (members, _) in enumerate(families):
        anchor_members = families[(i * 7 + 3) % len(families)][0]
        anchor = delex_tokens(anchor_members[0])[0]
        for member in members:
            member_tokens = delex_tokens(member)
            patterns = [
                ["history", "of"] + member_tokens + ["with", anchor],
                member_tokens + ["treated", "with", anchor],
                ["patients", "with"] + member_tokens + ["and", anchor],
            ]
            for pattern in patterns:
                for _ in range(2):
                    corpus_lines.append(" ".join(pattern))
    return examples, corpus_lines


def write_dataset(examples, corpus_lines, train_path, corpus_path):
    with open(train_path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example, sort_keys=True) + "\n")
    with open(corpus_path, "w", encoding="utf-8") as handle:
        for line in corpus_lines:
            handle.write(line + "\n")
