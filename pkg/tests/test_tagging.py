import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialfacts.errors import TagIngestError
from trialfacts.kb import EntityCategory
from trialfacts.preprocess import BlockKind, Line, tokenize
from trialfacts.tagging import (
    EntityMention,
    decode_bio,
    encode_bio,
    ingest_external_tags,
    merge_mentions,
    tag_gazetteer,
    validate_bio,
)


def mention(first, last, category=EntityCategory.CANCER, score=1.0, line_index=0):
    return EntityMention(
        trial_id="NCT00000001",
        block_kind=BlockKind.INCLUSION,
        line_index=line_index,
        token_span=(first, last),
        surface="x",
        category=category,
        score=score,
    )


def test_gazetteer_single_concept(tiny_kb):
    tokens = tokenize("history of kidney failure")
    mentions = tag_gazetteer(tokens, tiny_kb)
    assert len(mentions) == 1
    assert mentions[0].surface == "kidney failure"
    assert mentions[0].category == EntityCategory.CHRONIC_DISEASE
    assert mentions[0].token_span == (2, 3)
    assert mentions[0].score == 1.0


def test_gazetteer_empty(tiny_kb):
    assert tag_gazetteer([], tiny_kb) == []


def test_gazetteer_repeated_concept(tiny_kb):
    tokens = tokenize("leukemia and leukemia")
    mentions = tag_gazetteer(tokens, tiny_kb)
    assert [m.token_span for m in mentions] == [(0, 0), (2, 2)]


def test_gazetteer_longest_match_wins(tiny_kb):
    tokens = tokenize("acute myeloid leukemia")
    mentions = tag_gazetteer(tokens, tiny_kb)
    assert len(mentions) == 1
    assert mentions[0].surface == "acute myeloid leukemia"


def test_gazetteer_does_not_absorb_punctuation(tiny_kb):
    tokens = tokenize("leukemia .")
    mentions = tag_gazetteer(tokens, tiny_kb)
    assert [m.token_span for m in mentions] == [(0, 0)]


def test_bio_decode_example():
    spans = decode_bio(["B-cancer", "I-cancer", "O"])
    assert spans == [(0, 1, EntityCategory.CANCER)]


def test_bio_all_outside():
    assert decode_bio(["O", "O", "O"]) == []


def test_bio_stray_inside_repaired():
    spans = decode_bio(["O", "I-treatment"], repair=True)
    assert spans == [(1, 1, EntityCategory.TREATMENT)]
    with pytest.raises(ValueError):
        decode_bio(["O", "I-treatment"], repair=False)


def test_bio_category_switch_repaired():
    spans = decode_bio(["B-cancer", "I-treatment"], repair=True)
    assert spans == [
        (0, 0, EntityCategory.CANCER),
        (1, 1, EntityCategory.TREATMENT),
    ]


categories = st.sampled_from([c for c in EntityCategory])


@st.composite
def bio_spans(draw):
    length = draw(st.integers(0, 12))
    spans = []
    position = 0
    while position < length:
        if draw(st.booleans()):
            end = draw(st.integers(position, min(position + 3, length - 1)))
            spans.append((position, end, draw(categories)))
            position = end + 1
        else:
            position += 1
    return spans, length


@given(bio_spans())
def test_bio_round_trip(case):
    spans, length = case
    tags = encode_bio(spans, length)
    assert validate_bio(tags)
    assert decode_bio(tags) == spans


def test_merge_disjoint():
    a = [mention(0, 1)]
    b = [mention(3, 4)]
    assert [m.token_span for m in merge_mentions(a, b)] == [(0, 1), (3, 4)]


def test_merge_same_span_higher_score_wins():
    a = [mention(0, 1, score=0.9)]
    b = [mention(0, 1, score=1.0)]
    merged = merge_mentions(a, b)
    assert len(merged) == 1
    assert merged[0].score == 1.0


def test_merge_nested_equal_scores_longer_wins():
    a = [mention(1, 2)]
    b = [mention(0, 3)]
    merged = merge_mentions(a, b)
    assert [m.token_span for m in merged] == [(0, 3)]


def test_merge_idempotent():
    a = [mention(0, 1), mention(3, 4, category=EntityCategory.TREATMENT)]
    assert merge_mentions(a, a) == merge_mentions(a, [])


def write_tags(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def corpus_for(line_text):
    tokens = tuple(tokenize(line_text))
    line = Line(text=line_text, tokens=tokens, index=0)
    return {("NCT00000001", 0): (BlockKind.INCLUSION, line)}, tokens


def test_ingest_external_tags(tmp_path):
    corpus, tokens = corpus_for("acute leukemia patients")
    tag_file = tmp_path / "tags.jsonl"
    write_tags(
        tag_file,
        [
            {
                "nct_id": "NCT00000001",
                "block": "inclusion",
                "line_index": 0,
                "tokens": [t.delex for t in tokens],
                "tags": ["B-cancer", "I-cancer", "O"],
            }
        ],
    )
    mentions = ingest_external_tags(tag_file, corpus)
    assert len(mentions) == 1
    assert mentions[0].surface == "acute leukemia"
    assert mentions[0].category == EntityCategory.CANCER


def test_ingest_token_count_mismatch(tmp_path):
    corpus, _ = corpus_for("acute leukemia patients")
    tag_file = tmp_path / "tags.jsonl"
    write_tags(
        tag_file,
        [
            {
                "nct_id": "NCT00000001",
                "block": "inclusion",
                "line_index": 0,
                "tokens": ["acute", "leukemia"],
                "tags": ["B-cancer", "I-cancer"],
            }
        ],
    )
    with pytest.raises(TagIngestError, match="NCT00000001"):
        ingest_external_tags(tag_file, corpus)


def test_ingest_block_mismatch(tmp_path):
    corpus, tokens = corpus_for("acute leukemia patients")
    tag_file = tmp_path / "tags.jsonl"
    write_tags(
        tag_file,
        [
            {
                "nct_id": "NCT00000001",
                "block": "exclusion",  # corpus line is in the inclusion block
                "line_index": 0,
                "tokens": [t.delex for t in tokens],
                "tags": ["O", "O", "O"],
            }
        ],
    )
    with pytest.raises(TagIngestError, match="block"):
        ingest_external_tags(tag_file, corpus)


def test_ingest_scores_averaged(tmp_path):
    corpus, tokens = corpus_for("acute leukemia patients")
    tag_file = tmp_path / "tags.jsonl"
    write_tags(
        tag_file,
        [
            {
                "nct_id": "NCT00000001",
                "block": "inclusion",
                "line_index": 0,
                "tokens": [t.delex for t in tokens],
                "tags": ["B-cancer", "I-cancer", "O"],
                "scores": [0.8, 0.6, 0.99],
            }
        ],
    )
    mentions = ingest_external_tags(tag_file, corpus)
    assert mentions[0].score == pytest.approx(0.7)
