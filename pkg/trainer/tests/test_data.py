import json

import pytest

from criteria_trainer.data import (
    DataError,
    TrainingExample,
    build_vocabularies,
    load_training_file,
    span_f1,
    spans_of,
    valid_bio,
)


def test_example_validates_lengths():
    with pytest.raises(DataError):
        TrainingExample(tokens=("a", "b"), tags=("O",))


def test_example_validates_bio():
    with pytest.raises(DataError):
        TrainingExample(tokens=("a",), tags=("I-cancer",))
    with pytest.raises(DataError):
        TrainingExample(tokens=("a",), tags=("B-vegetable",))


def test_valid_bio_category_switch():
    assert not valid_bio(["B-cancer", "I-treatment"])
    assert valid_bio(["B-cancer", "I-cancer", "O", "B-treatment"])


def test_load_training_file(tmp_path):
    path = tmp_path / "train.jsonl"
    path.write_text(
        json.dumps({"tokens": ["no", "leukemia"], "tags": ["O", "B-cancer"]}) + "\n",
        encoding="utf-8",
    )
    examples = load_training_file(path)
    assert examples[0].tokens == ("no", "leukemia")


def test_load_empty_file_rejected(tmp_path):
    path = tmp_path / "train.jsonl"
    path.write_text("", encoding="utf-8")
    with pytest.raises(DataError):
        load_training_file(path)


def test_load_bad_tag_rejected(tmp_path):
    path = tmp_path / "train.jsonl"
    path.write_text(
        json.dumps({"tokens": ["x"], "tags": ["B-nonsense"]}) + "\n",
        encoding="utf-8",
    )
    with pytest.raises(DataError):
        load_training_file(path)


def test_vocabularies_deterministic():
    examples = [
        TrainingExample(tokens=("b", "a"), tags=("O", "O")),
        TrainingExample(tokens=("c",), tags=("O",)),
    ]
    tokens1, chars1 = build_vocabularies(examples)
    tokens2, chars2 = build_vocabularies(list(reversed(examples)))
    assert tokens1 == tokens2
    assert chars1 == chars2
    assert tokens1["<pad>"] == 0 and tokens1["<unk>"] == 1


def test_spans_and_f1():
    gold = [["B-cancer", "I-cancer", "O", "B-treatment"]]
    assert spans_of(gold[0]) == {(0, 1, "cancer"), (3, 3, "treatment")}
    predicted = [["B-cancer", "I-cancer", "O", "O"]]
    f1 = span_f1(gold, predicted)
    assert f1 == pytest.approx(2 * 1.0 * 0.5 / 1.5)
    assert span_f1(gold, gold) == 1.0
