"""Grounding of entity mentions to knowledge-base concepts.

Mentions are projected into a word-embedding space (mean of in-vocabulary
token vectors), grouped with DBSCAN under cosine distance, and each group is
grounded to the concept whose name or synonym is most Sørensen-Dice similar
to any member surface. Mentions ground individually when no embeddings are
available, when they fall out as noise, or when their cluster's best match
is below the acceptance threshold.

Embedding text format: first line "<vocab_count> <dimension>", then one line
per token: "token v1 v2 ... vd", space-separated decimal floats.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError
from .kb import EntityCategory, KnowledgeBase, normalize_name
from .preprocess import tokenize
from .tagging import EntityMention

logger = logging.getLogger(__name__)

NOISE = None  # cluster label for noise points


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class MentionVector:
    """A mention projected into embedding space.

    vector is None (ungroundable by clustering) when no mention token is in
    vocabulary; such mentions still go through individual Dice grounding.
    """

    mention: EntityMention
    vector: np.ndarray | None
    in_vocab_fraction: float


@dataclass(frozen=True)
class Cluster:
    """A DBSCAN cluster (label is a dense integer id) or a noise singleton
    (label is None). member_indices index into the input vector list."""

    label: int | None
    member_indices: frozenset[int]


@dataclass(frozen=True)
class Grounding:
    mention: EntityMention
    concept_id: str | None
    similarity: float


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a text-format embedding file. Duplicate tokens keep the last
    occurrence (with a warning); malformed rows are load errors."""
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise EmbeddingFormatError(f"{path}:1: header must be '<count> <dim>'")
        try:
            count, dimension = int(header[0]), int(header[1])
        except ValueError as exc:
            raise EmbeddingFormatError(f"{path}:1: non-integer header") from exc
        for lineno, raw in enumerate(handle, start=2):
            if not raw.strip():
                continue
            parts = raw.rstrip("\n").split(" ")
            if len(parts) != dimension + 1:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: expected {dimension} components, "
                    f"got {len(parts) - 1}"
                )
            token = parts[0]
            try:
                vector = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingFormatError(
                    f"{path}:{lineno}: non-numeric component"
                ) from exc
            if not np.all(np.isfinite(vector)):
                raise EmbeddingFormatError(f"{path}:{lineno}: non-finite component")
            if token in vectors:
                logger.warning("duplicate embedding token %r; keeping last", token)
            vectors[token] = vector
    if len(vectors) != count:
        logger.warning(
            "embedding header declared %d tokens, file has %d", count, len(vectors)
        )
    return EmbeddingTable(dimension=dimension, vectors=vectors)


def embed_mention(mention: EntityMention, table: EmbeddingTable) -> MentionVector:
    """Mean of the in-vocabulary delexicalized token vectors of the mention."""
    delex_tokens = [t.delex for t in tokenize(mention.surface)]
    in_vocab = [table.vectors[t] for t in delex_tokens if t in table.vectors]
    if not delex_tokens or not in_vocab:
        return MentionVector(mention=mention, vector=None, in_vocab_fraction=0.0)
    return MentionVector(
        mention=mention,
        vector=np.mean(in_vocab, axis=0),
        in_vocab_fraction=len(in_vocab) / len(delex_tokens),
    )


def cluster_mentions(
    vectors: list[MentionVector], eps: float, min_points: int
) -> list[Cluster]:
    """DBSCAN over mention vectors with cosine distance.

    Points are processed in (trial_id, line_index, span) order regardless of
    input order, so the partition is permutation-invariant. Mentions without
    a vector, and zero-norm vectors, become noise singletons.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if min_points < 1:
        raise ValueError("min_points must be >= 1")

    usable: list[int] = []
    noise: set[int] = set()
    for i, mv in enumerate(vectors):
        if mv.vector is None:
            noise.add(i)
        elif float(np.linalg.norm(mv.vector)) == 0.0:
            logger.warning(
                "zero-norm vector for mention %r; marked noise", mv.mention.surface
            )
            noise.add(i)
        else:
            usable.append(i)
    usable.sort(key=lambda i: vectors[i].mention.sort_key())

    unit = {
        i: vectors[i].vector / np.linalg.norm(vectors[i].vector) for i in usable
    }

    def neighbors(i: int) -> list[int]:
        vi = unit[i]
        return [j for j in usable if 1.0 - float(np.dot(vi, unit[j])) <= eps]

    labels: dict[int, int | None] = {}
    visited: set[int] = set()
    next_label = 0
    for i in usable:
        if i in visited:
            continue
        visited.add(i)
        seed_neighbors = neighbors(i)
        if len(seed_neighbors) < min_points:
            labels[i] = NOISE
            continue
        labels[i] = next_label
        queue = deque(j for j in seed_neighbors if j != i)
        while queue:
            j = queue.popleft()
            if labels.get(j, NOISE) is NOISE:
                labels[j] = next_label  # border point claimed by first cluster
            if j in visited:
                continue
            visited.add(j)
            expansion = neighbors(j)
            if len(expansion) >= min_points:
                # include earlier noise points: they may yet be claimed as
                # border points of this cluster
                queue.extend(
                    k
                    for k in expansion
                    if k not in visited or labels.get(k, NOISE) is NOISE
                )
        next_label += 1

    clusters: dict[int, set[int]] = {}
    for i in usable:
        label = labels.get(i, NOISE)
        if label is NOISE:
            noise.add(i)
        else:
            clusters.setdefault(label, set()).add(i)
    result = [
        Cluster(label=label, member_indices=frozenset(members))
        for label, members in sorted(clusters.items())
    ]
    result.extend(
        Cluster(label=NOISE, member_indices=frozenset({i})) for i in sorted(noise)
    )
    return result


def character_bigrams(text: str) -> Counter:
    return Counter(text[i : i + 2] for i in range(len(text) - 1))


def dice_similarity(a: str, b: str) -> float:
    """Sørensen-Dice similarity over character-bigram multisets of the
    normalized strings. Strings shorter than two characters fall back to
    exact equality."""
    left = normalize_name(a)
    right = normalize_name(b)
    if len(left) < 2 or len(right) < 2:
        return 1.0 if left == right else 0.0
    left_bigrams = character_bigrams(left)
    right_bigrams = character_bigrams(right)
    shared = sum((left_bigrams & right_bigrams).values())
    total = sum(left_bigrams.values()) + sum(right_bigrams.values())
    return 2.0 * shared / total


def _best_concept_for(
    surfaces: list[str], kb: KnowledgeBase, category: EntityCategory
) -> tuple[str | None, float]:
    """Concept of the given category maximizing max Dice similarity between
    any surface and any concept name or synonym."""
    best_id: str | None = None
    best_sim = -1.0
    for concept_id in sorted(kb.concepts):
        concept = kb.concepts[concept_id]
        if concept.category != category:
            continue
        for name in sorted(concept.names()):
            for surface in surfaces:
                sim = dice_similarity(surface, name)
                if sim > best_sim:
                    best_sim = sim
                    best_id = concept_id
    return best_id, max(best_sim, 0.0)


def _majority_category(mentions: list[EntityMention]) -> EntityCategory:
    counts = Counter(m.category for m in mentions)
    top = max(counts.values())
    return sorted(
        (c for c, n in counts.items() if n == top), key=lambda c: c.value
    )[0]


def _ground_individually(
    mention: EntityMention, kb: KnowledgeBase, theta: float
) -> Grounding:
    concept_id, sim = _best_concept_for([mention.surface], kb, mention.category)
    if concept_id is not None and sim >= theta:
        return Grounding(mention=mention, concept_id=concept_id, similarity=sim)
    return Grounding(mention=mention, concept_id=None, similarity=sim)


def ground_cluster(
    cluster: Cluster,
    mentions: list[EntityMention],
    kb: KnowledgeBase,
    theta: float,
) -> list[Grounding]:
    """Ground a cluster's members to the knowledge base.

    The candidate concept maximizes the maximum Dice similarity between any
    member surface and any concept name/synonym, restricted to the members'
    majority category. If that best similarity reaches theta, every member
    grounds to it; otherwise members are grounded individually. Noise points
    are always grounded individually.
    """
    members = [mentions[i] for i in sorted(cluster.member_indices)]
    if cluster.label is NOISE:
        return [_ground_individually(m, kb, theta) for m in members]
    category = _majority_category(members)
    concept_id, sim = _best_concept_for([m.surface for m in members], kb, category)
    if concept_id is not None and sim >= theta:
        return [
            Grounding(mention=m, concept_id=concept_id, similarity=sim)
            for m in members
        ]
    return [_ground_individually(m, kb, theta) for m in members]


def link_mentions(
    mentions: list[EntityMention],
    kb: KnowledgeBase,
    table: EmbeddingTable | None,
    *,
    eps: float = 0.15,
    min_points: int = 2,
    theta: float = 0.8,
) -> list[Grounding]:
    """Full linking stage: project, cluster, ground.

    Without an embedding table every mention grounds individually. Output
    order follows mention (trial, line, span) order.
    """
    if table is None:
        groundings = [_ground_individually(m, kb, theta) for m in mentions]
    else:
        vectors = [embed_mention(m, table) for m in mentions]
        groundings = []
        for cluster in cluster_mentions(vectors, eps=eps, min_points=min_points):
            groundings.extend(ground_cluster(cluster, mentions, kb, theta))
    groundings.sort(key=lambda g: g.mention.sort_key())
    return groundings
