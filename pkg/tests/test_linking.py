import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dbscan_oracle, partition_of
from trialfacts.errors import EmbeddingFormatError
from trialfacts.kb import EntityCategory
from trialfacts.linking import (
    Cluster,
    MentionVector,
    cluster_mentions,
    dice_similarity,
    embed_mention,
    ground_cluster,
    link_mentions,
    load_embeddings,
)
from trialfacts.preprocess import BlockKind
from trialfacts.tagging import EntityMention


def make_mention(i, surface="leukemia", category=EntityCategory.CANCER):
    return EntityMention(
        trial_id="NCT00000001",
        block_kind=BlockKind.INCLUSION,
        line_index=i,
        token_span=(0, 0),
        surface=surface,
        category=category,
    )


def make_vectors(arrays):
    return [
        MentionVector(mention=make_mention(i), vector=np.asarray(a, dtype=float),
                      in_vocab_fraction=1.0)
        for i, a in enumerate(arrays)
    ]


# --- embedding file loading -------------------------------------------------


def test_load_embeddings_basic(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("2 3\nalpha 1 2 3\nbeta 0.5 0 -1\n", encoding="utf-8")
    table = load_embeddings(path)
    assert table.dimension == 3
    assert len(table) == 2
    assert np.allclose(table.vectors["beta"], [0.5, 0, -1])


def test_load_embeddings_empty_vocab(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("0 100\n", encoding="utf-8")
    table = load_embeddings(path)
    assert table.dimension == 100
    assert len(table) == 0


def test_load_embeddings_ragged_row(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("1 100\ntoken " + " ".join(["0.1"] * 99) + "\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError, match=":2"):
        load_embeddings(path)


def test_load_embeddings_non_numeric(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("1 2\ntoken 0.1 oops\n", encoding="utf-8")
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(path)


def test_load_embeddings_duplicate_last_wins(tmp_path, caplog):
    path = tmp_path / "vec.txt"
    path.write_text("2 2\ntok 1 1\ntok 2 2\n", encoding="utf-8")
    with caplog.at_level("WARNING"):
        table = load_embeddings(path)
    assert np.allclose(table.vectors["tok"], [2, 2])
    assert any("duplicate" in r.message for r in caplog.records)


# --- mention projection -------------------------------------------------------


def table_of(vectors):
    from trialfacts.linking import EmbeddingTable

    dim = len(next(iter(vectors.values())))
    return EmbeddingTable(
        dimension=dim, vectors={k: np.asarray(v, float) for k, v in vectors.items()}
    )


def test_embed_single_token_is_exact():
    table = table_of({"leukemia": [1.0, 2.0]})
    vec = embed_mention(make_mention(0), table)
    assert np.allclose(vec.vector, [1, 2])
    assert vec.in_vocab_fraction == 1.0


def test_embed_two_tokens_mean():
    table = table_of({"kidney": [1.0, 0.0], "failure": [0.0, 1.0]})
    vec = embed_mention(make_mention(0, surface="kidney failure"), table)
    assert np.allclose(vec.vector, [0.5, 0.5])


def test_embed_out_of_vocabulary_marker():
    table = table_of({"alpha": [1.0, 0.0]})
    vec = embed_mention(make_mention(0, surface="unknown thing"), table)
    assert vec.vector is None
    assert vec.in_vocab_fraction == 0.0


def test_embed_uses_delexicalized_tokens():
    # digits are masked before lookup
    table = table_of({"<num>": [1.0, 0.0], "grade": [0.0, 1.0]})
    vec = embed_mention(make_mention(0, surface="grade 3"), table)
    assert vec.in_vocab_fraction == 1.0


# --- DBSCAN -------------------------------------------------------------------


def test_all_identical_single_cluster():
    vectors = make_vectors([[1, 0]] * 4)
    clusters = cluster_mentions(vectors, eps=0.1, min_points=1)
    real = [c for c in clusters if c.label is not None]
    assert len(real) == 1
    assert real[0].member_indices == frozenset({0, 1, 2, 3})


def test_two_far_groups():
    group_a = [[1, 0.01 * i] for i in range(3)]
    group_b = [[-1, 0.01 * i] for i in range(3)]
    vectors = make_vectors(group_a + group_b)
    clusters = cluster_mentions(vectors, eps=0.05, min_points=2)
    labels = {}
    for cluster in clusters:
        for i in cluster.member_indices:
            labels[i] = cluster.label
    oracle = dbscan_oracle([v.vector for v in vectors], 0.05, 2)
    assert partition_of([labels[i] for i in range(6)]) == partition_of(oracle)
    assert all(label is not None for label in oracle)
    assert len({labels[0], labels[3]}) == 2


def test_isolated_point_is_noise():
    dense = [[1, 0.001 * i] for i in range(4)]
    outlier = [[-1, 0.5]]
    vectors = make_vectors(dense + outlier)
    clusters = cluster_mentions(vectors, eps=0.05, min_points=3)
    noise = [c for c in clusters if c.label is None]
    assert frozenset({4}) in {c.member_indices for c in noise}


def test_zero_norm_vector_marked_noise(caplog):
    vectors = make_vectors([[1, 0], [0, 0], [1, 0.001]])
    with caplog.at_level("WARNING"):
        clusters = cluster_mentions(vectors, eps=0.05, min_points=1)
    noise_members = {
        i for c in clusters if c.label is None for i in c.member_indices
    }
    assert 1 in noise_members


def random_instance(rng, n):
    # mixture of a few directions plus jitter so clusters of varying density appear
    centers = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
               np.array([-0.7, 0.7, 0.1]), np.array([0.2, -0.9, 0.4])]
    vectors = []
    for _ in range(n):
        center = centers[rng.randrange(len(centers))]
        jitter = np.array([rng.gauss(0, 0.08) for _ in range(3)])
        vectors.append(center + jitter)
    return vectors


@pytest.mark.parametrize("eps,min_points", [(0.05, 2), (0.1, 3), (0.2, 2)])
def test_dbscan_matches_oracle_random(eps, min_points):
    rng = random.Random(1234)
    for _ in range(40):
        n = rng.randrange(2, 30)
        arrays = random_instance(rng, n)
        vectors = make_vectors(arrays)
        clusters = cluster_mentions(vectors, eps=eps, min_points=min_points)
        labels = [None] * n
        for cluster in clusters:
            for i in cluster.member_indices:
                if cluster.label is not None:
                    labels[i] = cluster.label
        assert partition_of(labels) == partition_of(
            dbscan_oracle(arrays, eps, min_points)
        )


def test_dbscan_late_border_point_claimed():
    # p0 is non-core, processed first (labeled noise), and adjacent only to
    # a non-seed core; expansion must still claim it as a border point
    angles = [0, 36, 18, 54, 40]
    arrays = [
        np.array([np.cos(np.radians(a)), np.sin(np.radians(a))]) for a in angles
    ]
    clusters = cluster_mentions(make_vectors(arrays), eps=0.05, min_points=3)
    labels = [None] * len(arrays)
    for cluster in clusters:
        if cluster.label is not None:
            for i in cluster.member_indices:
                labels[i] = cluster.label
    assert partition_of(labels) == partition_of(dbscan_oracle(arrays, 0.05, 3))
    assert labels[0] == 0  # border of the single cluster, not noise


def test_dbscan_permutation_invariant():
    rng = random.Random(99)
    arrays = random_instance(rng, 20)
    vectors = make_vectors(arrays)

    def partition(clusters):
        return frozenset(
            c.member_indices for c in clusters if c.label is not None
        )

    base = cluster_mentions(vectors, eps=0.1, min_points=2)
    order = list(range(len(vectors)))
    for _ in range(5):
        rng.shuffle(order)
        shuffled = [vectors[i] for i in order]
        clusters = cluster_mentions(shuffled, eps=0.1, min_points=2)
        remapped = frozenset(
            frozenset(order[i] for i in c.member_indices)
            for c in clusters
            if c.label is not None
        )
        assert remapped == partition(base)


def test_bad_parameters_rejected():
    with pytest.raises(ValueError):
        cluster_mentions([], eps=0.0, min_points=1)
    with pytest.raises(ValueError):
        cluster_mentions([], eps=0.1, min_points=0)


# --- Dice similarity ----------------------------------------------------------


def test_dice_identical():
    assert dice_similarity("kidney failure", "kidney failure") == 1.0


def test_dice_night_nacht():
    assert dice_similarity("night", "nacht") == 0.25


def test_dice_disjoint():
    assert dice_similarity("abc", "xyz") == 0.0


def test_dice_short_strings_exact_equality():
    assert dice_similarity("a", "a") == 1.0
    assert dice_similarity("a", "b") == 0.0


@given(st.text(max_size=30), st.text(max_size=30))
def test_dice_symmetric_and_bounded(a, b):
    sim = dice_similarity(a, b)
    assert 0.0 <= sim <= 1.0
    assert sim == dice_similarity(b, a)


# --- grounding ------------------------------------------------------------------


def test_ground_cluster_synonym_variants(tiny_kb):
    mentions = [make_mention(0, "leukemia"), make_mention(1, "leukaemia")]
    cluster = Cluster(label=0, member_indices=frozenset({0, 1}))
    groundings = ground_cluster(cluster, mentions, tiny_kb, theta=0.8)
    assert [g.concept_id for g in groundings] == ["D007938", "D007938"]
    assert all(g.similarity >= 0.8 for g in groundings)


def test_ground_exact_name_full_similarity(tiny_kb):
    mentions = [make_mention(0, "kidney failure", EntityCategory.CHRONIC_DISEASE)]
    cluster = Cluster(label=None, member_indices=frozenset({0}))
    groundings = ground_cluster(cluster, mentions, tiny_kb, theta=0.8)
    assert groundings[0].concept_id == "D051437"
    assert groundings[0].similarity == 1.0


def test_overly_general_candidate_gated(kb):
    # the only vocabulary entry resembling this long mention is far more
    # general; the threshold keeps it ungrounded
    mentions = [
        make_mention(0, "left main stem stenosis", EntityCategory.CHRONIC_DISEASE)
    ]
    cluster = Cluster(label=None, member_indices=frozenset({0}))
    groundings = ground_cluster(cluster, mentions, kb, theta=0.8)
    assert groundings[0].concept_id is None
    assert groundings[0].similarity < 0.8


def test_grounding_respects_threshold_invariant(kb):
    rng = random.Random(7)
    surfaces = ["leukemia", "luekemia", "severe anemia", "unrelated text", "asthma"]
    mentions = [
        make_mention(i, s, EntityCategory.CANCER if i < 2 else EntityCategory.CHRONIC_DISEASE)
        for i, s in enumerate(surfaces)
    ]
    groundings = link_mentions(mentions, kb, None, theta=0.8)
    for grounding in groundings:
        if grounding.concept_id is not None:
            assert grounding.similarity >= 0.8


def test_cluster_grounding_propagates_to_all_members(tiny_kb):
    # the cluster-level best match (an exact concept name) carries the
    # garbage member along with it
    mentions = [make_mention(0, "zzzz qqqq"), make_mention(1, "leukemia")]
    cluster = Cluster(label=0, member_indices=frozenset({0, 1}))
    groundings = ground_cluster(cluster, mentions, tiny_kb, theta=0.95)
    assert [g.concept_id for g in groundings] == ["D007938", "D007938"]


def test_cluster_below_theta_falls_back_to_individual(tiny_kb):
    # majority category is cancer, whose best match stays below theta;
    # the minority member still grounds individually in its own category
    mentions = [
        make_mention(0, "zzzz qqqq"),
        make_mention(1, "xxxx wwww"),
        make_mention(2, "kidney failure", EntityCategory.CHRONIC_DISEASE),
    ]
    cluster = Cluster(label=0, member_indices=frozenset({0, 1, 2}))
    groundings = ground_cluster(cluster, mentions, tiny_kb, theta=0.8)
    by_line = {g.mention.line_index: g for g in groundings}
    assert by_line[0].concept_id is None
    assert by_line[1].concept_id is None
    assert by_line[2].concept_id == "D051437"
