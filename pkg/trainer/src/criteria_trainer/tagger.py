"""Tagger training, serialization, and corpus tagging.

The prediction input is the token-line JSONL the pipeline's
``extract --dump-tokens`` writes (tag interchange schema minus tags); the
output is the full tag interchange JSONL the pipeline ingests.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import torch

from .config import TrainerConfig
from .data import (
    TAGS,
    TAG_TO_INDEX,
    DataError,
    TrainingExample,
    build_vocabularies,
    span_f1,
    valid_bio,
)
from .model import AttBiLstmCrf

logger = logging.getLogger(__name__)


@dataclass
class TaggerArtifact:
    model: AttBiLstmCrf
    token_vocab: dict[str, int]
    char_vocab: dict[str, int]
    config: TrainerConfig
    fingerprint: str
    history: list[dict]


def _vocab_fingerprint(token_vocab, char_vocab, config: TrainerConfig) -> str:
    payload = json.dumps(
        [sorted(token_vocab), sorted(char_vocab), config.fingerprint()]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def _encode_batch(batch, token_vocab, char_vocab, device):
    max_tokens = max(len(ex.tokens) for ex in batch)
    max_chars = max((len(t) for ex in batch for t in ex.tokens), default=1)
    tokens = torch.zeros(len(batch), max_tokens, dtype=torch.long, device=device)
    chars = torch.zeros(
        len(batch), max_tokens, max_chars, dtype=torch.long, device=device
    )
    tags = torch.zeros(len(batch), max_tokens, dtype=torch.long, device=device)
    mask = torch.zeros(len(batch), max_tokens, dtype=torch.bool, device=device)
    unk = token_vocab["<unk>"]
    char_unk = char_vocab["<unk>"]
    for i, example in enumerate(batch):
        for j, token in enumerate(example.tokens):
            tokens[i, j] = token_vocab.get(token, unk)
            for k, char in enumerate(token[:max_chars]):
                chars[i, j, k] = char_vocab.get(char, char_unk)
        for j, tag in enumerate(example.tags):
            tags[i, j] = TAG_TO_INDEX[tag]
        mask[i, : len(example.tokens)] = True
    return tokens, chars, tags, mask


def _decode_examples(model, examples, token_vocab, char_vocab, batch_size):
    predictions = []
    for start in range(0, len(examples), batch_size):
        batch = examples[start : start + batch_size]
        tokens, chars, _, mask = _encode_batch(batch, token_vocab, char_vocab, "cpu")
        for path in model.decode(tokens, chars, mask):
            predictions.append([TAGS[i] for i in path])
    return predictions


def train_tagger(
    examples: list[TrainingExample], config: TrainerConfig | None = None
) -> TaggerArtifact:
    """Train until the training-set span F1 reaches config.target_f1 or
    config.max_epochs is exhausted. Deterministic for a fixed seed."""
    if not examples:
        raise DataError("no training examples")
    config = config or TrainerConfig()
    torch.manual_seed(config.seed)
    non_empty = [ex for ex in examples if ex.tokens]
    if not non_empty:
        raise DataError("all training examples are empty")
    token_vocab, char_vocab = build_vocabularies(non_empty)
    model = AttBiLstmCrf(config, len(token_vocab), len(char_vocab))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    generator = torch.Generator().manual_seed(config.seed)

    history = []
    gold_tags = [list(ex.tags) for ex in non_empty]
    for epoch in range(config.max_epochs):
        model.train()
        order = torch.randperm(len(non_empty), generator=generator).tolist()
        total_loss = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            batch = [non_empty[i] for i in order[start : start + config.batch_size]]
            tokens, chars, tags, mask = _encode_batch(
                batch, token_vocab, char_vocab, "cpu"
            )
            optimizer.zero_grad()
            loss = model.loss(tokens, chars, tags, mask)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.clipping)
            optimizer.step()
            total_loss += float(loss.detach())
            batches += 1
        predictions = _decode_examples(
            model, non_empty, token_vocab, char_vocab, config.batch_size
        )
        f1 = span_f1(gold_tags, predictions)
        history.append({"epoch": epoch, "loss": total_loss / batches, "f1": f1})
        logger.info("epoch %d loss %.4f f1 %.4f", epoch, total_loss / batches, f1)
        if f1 >= config.target_f1:
            break

    return TaggerArtifact(
        model=model,
        token_vocab=token_vocab,
        char_vocab=char_vocab,
        config=config,
        fingerprint=_vocab_fingerprint(token_vocab, char_vocab, config),
        history=history,
    )


def save_artifact(artifact: TaggerArtifact, path: str | Path) -> None:
    torch.save(
        {
            "state_dict": artifact.model.state_dict(),
            "token_vocab": artifact.token_vocab,
            "char_vocab": artifact.char_vocab,
            "config": asdict(artifact.config),
            "fingerprint": artifact.fingerprint,
            "history": artifact.history,
        },
        path,
    )


def load_artifact(path: str | Path) -> TaggerArtifact:
    payload = torch.load(path, weights_only=False)
    raw_config = dict(payload["config"])
    raw_config["dropout"] = tuple(raw_config["dropout"])
    config = TrainerConfig(**raw_config)
    expected = _vocab_fingerprint(
        payload["token_vocab"], payload["char_vocab"], config
    )
    if expected != payload["fingerprint"]:
        raise DataError(
            f"artifact fingerprint mismatch: stored {payload['fingerprint']}, "
            f"recomputed {expected}"
        )
    model = AttBiLstmCrf(config, len(payload["token_vocab"]), len(payload["char_vocab"]))
    model.load_state_dict(payload["state_dict"])
    return TaggerArtifact(
        model=model,
        token_vocab=payload["token_vocab"],
        char_vocab=payload["char_vocab"],
        config=config,
        fingerprint=payload["fingerprint"],
        history=payload.get("history", []),
    )


def predict_tags(
    artifact: TaggerArtifact, corpus_path: str | Path, out_path: str | Path
) -> int:
    """Tag a token-line JSONL file and write tag interchange JSONL.

    Every emitted sequence is valid BIO (the CRF decodes under transition
    constraints; an assertion backs that up). Returns the line count.
    """
    records = []
    with open(corpus_path, encoding="utf-8") as handle:
        for raw in handle:
            raw = raw.strip()
            if raw:
                records.append(json.loads(raw))

    count = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for record in records:
            tokens = record["tokens"]
            if tokens:
                example = TrainingExample(
                    tokens=tuple(tokens), tags=("O",) * len(tokens)
                )
                predictions = _decode_examples(
                    artifact.model,
                    [example],
                    artifact.token_vocab,
                    artifact.char_vocab,
                    artifact.config.batch_size,
                )
                tags = predictions[0]
            else:
                tags = []
            if not valid_bio(tags):
                raise AssertionError(f"decoder produced invalid BIO: {tags}")
            out.write(
                json.dumps(
                    {
                        "nct_id": record["nct_id"],
                        "block": record["block"],
                        "line_index": record["line_index"],
                        "tokens": tokens,
                        "tags": tags,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            count += 1
    return count
