"""Linear-chain CRF layer with BIO transition constraints.

Transitions that would break the BIO scheme (O -> I-x, B-x -> I-y, start
-> I-x) are masked with a large negative score in both training and
Viterbi decoding, so decoded sequences are valid by construction.
"""

from __future__ import annotations

import torch
from torch import nn

from .data import TAGS

IMPOSSIBLE = -1e4


def _allowed(from_tag: str, to_tag: str) -> bool:
    if to_tag.startswith("I-"):
        return from_tag[2:] == to_tag[2:] if from_tag != "O" else False
    return True


def transition_mask() -> torch.Tensor:
    n = len(TAGS)
    mask = torch.zeros(n, n)
    for i, from_tag in enumerate(TAGS):
        for j, to_tag in enumerate(TAGS):
            if not _allowed(from_tag, to_tag):
                mask[i, j] = IMPOSSIBLE
    return mask


def start_mask() -> torch.Tensor:
    return torch.tensor(
        [IMPOSSIBLE if tag.startswith("I-") else 0.0 for tag in TAGS]
    )


class ConstrainedCRF(nn.Module):
    def __init__(self):
        super().__init__()
        n = len(TAGS)
        self.transitions = nn.Parameter(torch.zeros(n, n))
        self.start_scores = nn.Parameter(torch.zeros(n))
        self.end_scores = nn.Parameter(torch.zeros(n))
        self.register_buffer("trans_mask", transition_mask())
        self.register_buffer("start_constraint", start_mask())

    def _constrained(self):
        return self.transitions + self.trans_mask, self.start_scores + self.start_constraint

    def log_likelihood(
        self, emissions: torch.Tensor, tags: torch.Tensor, mask: torch.Tensor
    ) -> torch.Tensor:
        """Mean log p(tags | emissions) over the batch. mask marks real
        tokens; sequences must be left-aligned."""
        transitions, start = self._constrained()
        batch, length, _ = emissions.shape
        lengths = mask.sum(dim=1)

        # score of the gold paths
        first_tags = tags[:, 0]
        gold = start[first_tags] + emissions[:, 0].gather(
            1, first_tags.unsqueeze(1)
        ).squeeze(1)
        for t in range(1, length):
            step = (
                transitions[tags[:, t - 1], tags[:, t]]
                + emissions[:, t].gather(1, tags[:, t].unsqueeze(1)).squeeze(1)
            )
            gold = gold + step * mask[:, t]
        last_indices = (lengths - 1).clamp(min=0)
        last_tags = tags.gather(1, last_indices.unsqueeze(1)).squeeze(1)
        gold = gold + self.end_scores[last_tags]

        # partition function by the forward algorithm
        alpha = start.unsqueeze(0) + emissions[:, 0]
        for t in range(1, length):
            broadcast = alpha.unsqueeze(2) + transitions.unsqueeze(0)
            next_alpha = torch.logsumexp(broadcast, dim=1) + emissions[:, t]
            step_mask = mask[:, t].unsqueeze(1)
            alpha = torch.where(step_mask.bool(), next_alpha, alpha)
        alpha = alpha + self.end_scores.unsqueeze(0)
        log_z = torch.logsumexp(alpha, dim=1)
        return (gold - log_z).mean()

    @torch.no_grad()
    def viterbi(self, emissions: torch.Tensor) -> list[int]:
        """Best tag sequence for one unpadded sequence (length, num_tags)."""
        transitions, start = self._constrained()
        length = emissions.shape[0]
        if length == 0:
            return []
        score = start + emissions[0]
        backpointers = []
        for t in range(1, length):
            combined = score.unsqueeze(1) + transitions
            best_scores, best_prev = combined.max(dim=0)
            score = best_scores + emissions[t]
            backpointers.append(best_prev)
        score = score + self.end_scores
        best_last = int(score.argmax())
        path = [best_last]
        for pointers in reversed(backpointers):
            path.append(int(pointers[path[-1]]))
        path.reverse()
        return path
