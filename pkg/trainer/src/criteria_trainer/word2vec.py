"""cbow word embeddings with negative sampling, trained from scratch.

Input is a plain-text corpus, one (already delexicalized) criteria line per
row. Output is the text vector format the extraction pipeline loads:
header "<count> <dim>", then one "token v1 ... vd" row per token.
"""

from __future__ import annotations

import logging
from collections import Counter
from pathlib import Path

import numpy as np

from .config import Word2VecConfig
from .data import DataError

logger = logging.getLogger(__name__)


def load_corpus(path: str | Path) -> list[list[str]]:
    sentences = []
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            tokens = raw.split()
            if tokens:
                sentences.append(tokens)
    return sentences


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class EmbeddingModel:
    def __init__(self, vocab: list[str], dim: int, rng: np.random.Generator):
        self.vocab = vocab
        self.index = {token: i for i, token in enumerate(vocab)}
        self.input_vectors = (rng.random((len(vocab), dim)) - 0.5) / dim
        self.output_vectors = np.zeros((len(vocab), dim))

    def vector(self, token: str) -> np.ndarray:
        return self.input_vectors[self.index[token]]


def train_embeddings(
    corpus_path: str | Path,
    out_path: str | Path,
    config: Word2VecConfig | None = None,
) -> EmbeddingModel:
    """Train and write the embedding file. Deterministic for a fixed seed.

    Raises DataError when the corpus is smaller than the context window.
    """
    config = config or Word2VecConfig()
    if config.model != "cbow" or config.loss != "ns":
        raise DataError("only cbow with negative-sampling loss is implemented")
    sentences = load_corpus(corpus_path)
    total_tokens = sum(len(s) for s in sentences)
    if total_tokens < config.window + 1:
        raise DataError(
            f"corpus has {total_tokens} tokens, smaller than the window "
            f"({config.window})"
        )

    counts = Counter(token for sentence in sentences for token in sentence)
    vocab = [
        token
        for token, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if count >= config.min_count
    ]
    if not vocab:
        raise DataError("no tokens above min_count")

    rng = np.random.default_rng(config.seed)
    model = EmbeddingModel(vocab, config.dim, rng)

    # unigram^0.75 negative-sampling distribution
    frequencies = np.array([counts[token] for token in vocab], dtype=np.float64)
    noise = frequencies**0.75
    noise /= noise.sum()

    encoded = [
        [model.index[t] for t in sentence if t in model.index]
        for sentence in sentences
    ]
    encoded = [s for s in encoded if len(s) >= 2]

    previous_mean = None
    for epoch in range(config.max_epochs):
        total_loss = 0.0
        steps = 0
        for sentence in encoded:
            for position, center in enumerate(sentence):
                reach = int(rng.integers(1, config.window + 1))
                context = [
                    sentence[j]
                    for j in range(
                        max(0, position - reach),
                        min(len(sentence), position + reach + 1),
                    )
                    if j != position
                ]
                if not context:
                    continue
                hidden = model.input_vectors[context].mean(axis=0)
                negatives = rng.choice(len(vocab), size=config.negative, p=noise)
                targets = np.concatenate(([center], negatives))
                labels = np.zeros(len(targets))
                labels[0] = 1.0
                scores = _sigmoid(model.output_vectors[targets] @ hidden)
                gradients = (labels - scores) * config.learning_rate
                hidden_error = gradients @ model.output_vectors[targets]
                model.output_vectors[targets] += np.outer(gradients, hidden)
                model.input_vectors[context] += hidden_error
                eps = 1e-10
                total_loss += -float(
                    np.log(scores[0] + eps) + np.log(1.0 - scores[1:] + eps).sum()
                )
                steps += 1
        mean_loss = total_loss / max(steps, 1)
        logger.info("epoch %d mean loss %.6f", epoch, mean_loss)
        if previous_mean is not None and abs(previous_mean - mean_loss) < config.epsilon:
            break
        previous_mean = mean_loss

    write_embeddings(model, out_path)
    return model


def write_embeddings(model: EmbeddingModel, path: str | Path) -> None:
    dim = model.input_vectors.shape[1]
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(model.vocab)} {dim}\n")
        for i, token in enumerate(model.vocab):
            components = " ".join(f"{x:.6f}" for x in model.input_vectors[i])
            handle.write(f"{token} {components}\n")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b)) / denom
