import json

import pytest

from criteria_trainer.config import TrainerConfig
from criteria_trainer.data import DataError, TrainingExample, valid_bio
from criteria_trainer.tagger import (
    load_artifact,
    predict_tags,
    save_artifact,
    train_tagger,
)


def fast_config(**overrides):
    defaults = dict(
        token_embed_dim=24,
        char_embed_dim=12,
        lstm_dim=24,
        attn_dim=12,
        decoder_dim=32,
        batch_size=8,
        max_epochs=60,
        learning_rate=5e-3,
        seed=3,
    )
    defaults.update(overrides)
    return TrainerConfig(**defaults)


@pytest.fixture(scope="module")
def memorized():
    example = TrainingExample(
        tokens=("no", "history", "of", "leukemia"),
        tags=("O", "O", "O", "B-cancer"),
    )
    examples = [example] * 8
    artifact = train_tagger(examples, fast_config(target_f1=1.0))
    return examples, artifact


def test_single_example_memorized(memorized):
    examples, artifact = memorized
    assert artifact.history[-1]["f1"] == 1.0


def test_loss_decreases(memorized):
    _, artifact = memorized
    losses = [h["loss"] for h in artifact.history]
    assert losses[-1] < losses[0]


def test_empty_examples_rejected():
    with pytest.raises(DataError):
        train_tagger([], fast_config())


def test_artifact_round_trip(tmp_path, memorized):
    _, artifact = memorized
    path = tmp_path / "model.pt"
    save_artifact(artifact, path)
    loaded = load_artifact(path)
    assert loaded.fingerprint == artifact.fingerprint
    assert loaded.token_vocab == artifact.token_vocab


def test_artifact_fingerprint_mismatch(tmp_path, memorized):
    import torch

    _, artifact = memorized
    path = tmp_path / "model.pt"
    save_artifact(artifact, path)
    payload = torch.load(path, weights_only=False)
    payload["fingerprint"] = "0000000000000000"
    torch.save(payload, path)
    with pytest.raises(DataError, match="fingerprint"):
        load_artifact(path)


def test_predict_memorized_line_and_empty_line(tmp_path, memorized):
    examples, artifact = memorized
    corpus = tmp_path / "lines.jsonl"
    records = [
        {"nct_id": "NCT00000001", "block": "inclusion", "line_index": 0,
         "tokens": list(examples[0].tokens)},
        {"nct_id": "NCT00000001", "block": "exclusion", "line_index": 1,
         "tokens": []},
    ]
    corpus.write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8"
    )
    out = tmp_path / "tags.jsonl"
    count = predict_tags(artifact, corpus, out)
    assert count == 2
    tagged = [json.loads(line) for line in out.read_text().splitlines()]
    assert tagged[0]["tags"] == list(examples[0].tags)  # memorized
    assert tagged[1]["tags"] == []
    for record in tagged:
        assert valid_bio(record["tags"])


def test_fixed_seed_identical_tag_files(tmp_path):
    examples = [
        TrainingExample(tokens=("prior", "chemotherapy"), tags=("O", "B-treatment")),
        TrainingExample(tokens=("known", "asthma"), tags=("O", "B-chronic_disease")),
    ] * 4
    corpus = tmp_path / "lines.jsonl"
    corpus.write_text(
        json.dumps(
            {"nct_id": "NCT00000001", "block": "inclusion", "line_index": 0,
             "tokens": ["prior", "chemotherapy", "and", "asthma"]}
        )
        + "\n",
        encoding="utf-8",
    )
    outputs = []
    for run in range(2):
        artifact = train_tagger(examples, fast_config(max_epochs=12, seed=21))
        out = tmp_path / f"tags{run}.jsonl"
        predict_tags(artifact, corpus, out)
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
