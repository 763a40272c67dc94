"""Hyper-parameter configurations, with the published defaults."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field


@dataclass
class TrainerConfig:
    """Attention-BiLSTM-CRF tagger defaults.

    The learning rate is this artifact's choice (the published table fixes
    the architecture and regularization but not the tagger optimizer).
    """

    batch_size: int = 64
    clipping: float = 1.0  # gradient norm tau
    dropout: tuple[float, float] = (0.2, 0.2)  # after embeddings, after LSTM
    char_embed_dim: int = 100
    token_embed_dim: int = 100
    bilstm_layers: int = 1
    lstm_dim: int = 128
    attn_dim: int = 64
    decoder_dim: int = 256
    learning_rate: float = 1e-3
    max_epochs: int = 50
    target_f1: float = 1.0  # stop early once training F1 reaches this
    seed: int = 13

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class Word2VecConfig:
    """cbow + negative-sampling defaults.

    epsilon is the convergence tolerance on the change of the mean epoch
    loss; training stops early once the delta falls below it.
    """

    model: str = "cbow"
    loss: str = "ns"
    dim: int = 100
    window: int = 5
    learning_rate: float = 0.05
    epsilon: float = 1e-6
    negative: int = 5
    min_count: int = 1
    max_epochs: int = 40
    seed: int = 13
