"""Attention-BiLSTM-CRF sequence tagger.

Token embeddings are concatenated with mean-pooled character embeddings,
run through a single BiLSTM layer, combined with an additive single-head
self-attention context, and decoded by an MLP into per-tag emissions for
the constrained CRF.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import TrainerConfig
from .crf import ConstrainedCRF
from .data import TAGS


class AttBiLstmCrf(nn.Module):
    def __init__(self, config: TrainerConfig, token_vocab_size: int, char_vocab_size: int):
        super().__init__()
        self.config = config
        self.token_embed = nn.Embedding(
            token_vocab_size, config.token_embed_dim, padding_idx=0
        )
        self.char_embed = nn.Embedding(
            char_vocab_size, config.char_embed_dim, padding_idx=0
        )
        self.embed_dropout = nn.Dropout(config.dropout[0])
        self.lstm = nn.LSTM(
            config.token_embed_dim + config.char_embed_dim,
            config.lstm_dim,
            num_layers=config.bilstm_layers,
            bidirectional=True,
            batch_first=True,
        )
        hidden = 2 * config.lstm_dim
        self.attn_query = nn.Linear(hidden, config.attn_dim, bias=False)
        self.attn_key = nn.Linear(hidden, config.attn_dim, bias=False)
        self.attn_score = nn.Linear(config.attn_dim, 1, bias=False)
        self.output_dropout = nn.Dropout(config.dropout[1])
        self.decoder = nn.Sequential(
            nn.Linear(2 * hidden, config.decoder_dim),
            nn.Tanh(),
            nn.Linear(config.decoder_dim, len(TAGS)),
        )
        self.crf = ConstrainedCRF()

    def _char_features(self, chars: torch.Tensor) -> torch.Tensor:
        # chars: (batch, tokens, chars); mean-pool the non-pad characters
        embedded = self.char_embed(chars)
        char_mask = (chars != 0).unsqueeze(-1).float()
        summed = (embedded * char_mask).sum(dim=2)
        counts = char_mask.sum(dim=2).clamp(min=1.0)
        return summed / counts

    def emissions(self, tokens: torch.Tensor, chars: torch.Tensor, mask: torch.Tensor):
        embedded = torch.cat(
            [self.token_embed(tokens), self._char_features(chars)], dim=-1
        )
        embedded = self.embed_dropout(embedded)
        states, _ = self.lstm(embedded)

        # additive self-attention over the LSTM states
        query = self.attn_query(states).unsqueeze(2)  # (B, T, 1, A)
        key = self.attn_key(states).unsqueeze(1)  # (B, 1, T, A)
        scores = self.attn_score(torch.tanh(query + key)).squeeze(-1)  # (B, T, T)
        scores = scores.masked_fill(~mask.unsqueeze(1), float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = torch.bmm(weights, states)

        combined = self.output_dropout(torch.cat([states, context], dim=-1))
        return self.decoder(combined)

    def loss(self, tokens, chars, tags, mask) -> torch.Tensor:
        emissions = self.emissions(tokens, chars, mask)
        return -self.crf.log_likelihood(emissions, tags, mask)

    @torch.no_grad()
    def decode(self, tokens, chars, mask) -> list[list[int]]:
        self.eval()
        emissions = self.emissions(tokens, chars, mask)
        paths = []
        for i in range(tokens.shape[0]):
            length = int(mask[i].sum())
            paths.append(self.crf.viterbi(emissions[i, :length]))
        return paths
