import numpy as np
import pytest

from everdex.dictionary import (
    BankConfig,
    PrototypeBank,
    TextDictionary,
    auto_k,
    bank_extend,
    build_bank,
    class_scores,
    rank_classes,
    rank_classes_batch,
    rank_text,
    silhouette_cos,
    spherical_kmeans,
)
from everdex.errors import DegenerateInputError, DimensionMismatchError, ProtocolError
from everdex.numerics import l2_normalize


def _modes(rng, centers, n_per, spread):
    pts = []
    for c in centers:
        pts.append(l2_normalize(c[None, :] + spread * rng.standard_normal((n_per, c.size))))
    return np.vstack(pts)


def _three_mode_cloud(rng, dim=16, n_per=40, spread=0.08):
    centers = l2_normalize(rng.standard_normal((3, dim)))
    while np.abs(np.triu(centers @ centers.T, 1)).max() > 0.6:
        centers = l2_normalize(rng.standard_normal((3, dim)))
    return centers, _modes(rng, centers, n_per, spread)


def test_spherical_kmeans_recovers_separated_modes():
    rng = np.random.default_rng(0)
    centers, pts = _three_mode_cloud(rng)
    result = spherical_kmeans(pts, 3, seed=1)
    sims = result.centroids @ centers.T
    # every true center matched by some centroid
    assert sims.max(axis=0).min() > 0.98
    np.testing.assert_allclose(np.linalg.norm(result.centroids, axis=1), 1.0, atol=1e-6)


def test_spherical_kmeans_deterministic_given_seed():
    rng = np.random.default_rng(1)
    _, pts = _three_mode_cloud(rng)
    a = spherical_kmeans(pts, 3, seed=42)
    b = spherical_kmeans(pts, 3, seed=42)
    np.testing.assert_array_equal(a.centroids, b.centroids)
    np.testing.assert_array_equal(a.assignments, b.assignments)


def _silhouette_reference(points, assignments):
    """Quadratic-time transcription of the silhouette formula under cosine distance."""
    n = len(points)
    dist = 1.0 - points @ points.T
    vals = []
    for i in range(n):
        same = assignments == assignments[i]
        same[i] = False
        if not same.any():
            vals.append(0.0)
            continue
        a_i = dist[i][same].mean()
        b_i = min(
            dist[i][assignments == other].mean()
            for other in set(assignments.tolist())
            if other != assignments[i]
        )
        denom = max(a_i, b_i)
        vals.append(0.0 if denom == 0 else (b_i - a_i) / denom)
    return float(np.mean(vals))


def test_silhouette_matches_reference():
    rng = np.random.default_rng(2)
    _, pts = _three_mode_cloud(rng, n_per=15)
    result = spherical_kmeans(pts, 3, seed=0)
    ours = silhouette_cos(pts, result.assignments)
    ref = _silhouette_reference(pts, result.assignments)
    assert ours == pytest.approx(ref, abs=1e-9)
    assert ours > 0.5  # separated modes score well


def test_auto_k_returns_one_for_tiny_classes():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3):  # floor(sqrt(n)) < 2
        pts = l2_normalize(rng.standard_normal((n, 8)))
        assert auto_k(pts, seed=0) == 1


def test_auto_k_respects_sqrt_cap():
    rng = np.random.default_rng(4)
    # 10 tight modes but only 16 samples: cap = floor(sqrt(16)) = 4
    centers = l2_normalize(rng.standard_normal((10, 12)))
    pts = _modes(rng, centers, 2, 0.01)[:16]
    assert auto_k(pts, seed=0) <= 4
    # large n: cap = min(32, floor(sqrt(n)))
    big = l2_normalize(rng.standard_normal((2000, 6)))
    assert auto_k(big, k_max=32, seed=0) <= 32


def test_auto_k_finds_three_modes():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        _, pts = _three_mode_cloud(rng)
        if auto_k(pts, seed=seed) == 3:
            hits += 1
    assert hits >= 9


def test_bank_pointer_prefix_consistency():
    rng = np.random.default_rng(5)
    pts = l2_normalize(rng.standard_normal((60, 8)))
    keys = [("s", f"c{i % 7}") for i in range(60)]
    for strategy in ("auto", "mean", "random_sample"):
        bank = build_bank(pts, keys, BankConfig(strategy=strategy), seed=0)
        counts = [bank.prototypes_for(y).shape[0] for y in range(bank.n_classes)]
        np.testing.assert_array_equal(bank.pointers, np.concatenate([[0], np.cumsum(counts)]))
        assert bank.pointers[-1] == bank.prototypes.shape[0]
        np.testing.assert_allclose(np.linalg.norm(bank.prototypes, axis=1), 1.0, atol=1e-5)


def test_mean_strategy_is_normalized_class_mean():
    rng = np.random.default_rng(6)
    pts = l2_normalize(rng.standard_normal((12, 5)))
    keys = [("s", "a")] * 7 + [("s", "b")] * 5
    bank = build_bank(pts, keys, BankConfig(strategy="mean"), seed=0)
    np.testing.assert_allclose(
        bank.prototypes_for(0)[0], l2_normalize(pts[:7].mean(axis=0)), atol=1e-6
    )
    assert bank.pointers.tolist() == [0, 1, 2]


def test_random_sample_strategy_draws_class_members():
    rng = np.random.default_rng(7)
    pts = l2_normalize(rng.standard_normal((20, 5)))
    keys = [("s", "a")] * 14 + [("s", "b")] * 6
    bank = build_bank(pts, keys, BankConfig(strategy="random_sample", random_m=8), seed=0)
    assert bank.prototypes_for(0).shape[0] == 8
    assert bank.prototypes_for(1).shape[0] == 6  # fewer than M keeps all
    a_rows = {r.astype(np.float32).tobytes() for r in pts[:14]}
    for proto in bank.prototypes_for(0):
        assert proto.astype(np.float32).tobytes() in a_rows


def test_class_score_is_max_over_prototypes():
    protos = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], dtype=np.float32)
    bank = PrototypeBank(
        prototypes=protos,
        pointers=np.array([0, 2, 3]),
        class_keys=[("s", "two-proto"), ("s", "one-proto")],
        strategy="auto",
        seed=0,
    )
    q = l2_normalize(np.array([0.6, 0.8]))
    scores = class_scores(q[None, :], bank)[0]
    assert scores[0] == pytest.approx(0.8)   # best of the two prototypes
    assert scores[1] == pytest.approx(-0.6)


def test_rank_classes_matches_brute_force():
    rng = np.random.default_rng(8)
    n_classes, per, dim = 50, 6, 12
    pts = l2_normalize(rng.standard_normal((n_classes * per, dim)))
    keys = [("s", f"c{i // per:02d}") for i in range(n_classes * per)]
    bank = build_bank(pts, keys, BankConfig(strategy="auto"), seed=3)
    queries = l2_normalize(rng.standard_normal((25, dim)))

    for q in queries:
        ranked = rank_classes(q, bank, top_k=50)
        brute = []
        for y, key in enumerate(bank.class_keys):
            best = max(float(q @ p) for p in bank.prototypes_for(y))
            brute.append((key, best))
        brute.sort(key=lambda kv: (-kv[1], kv[0]))
        assert [k for k, _ in ranked] == [k for k, _ in brute]
        np.testing.assert_allclose([s for _, s in ranked], [s for _, s in brute], atol=1e-6)


def test_rank_classes_trivial_orderings():
    bank = PrototypeBank(
        prototypes=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=np.float32),
        pointers=np.array([0, 1, 2]),
        class_keys=[("s", "a"), ("s", "b")],
        strategy="auto",
        seed=0,
    )
    ranked = rank_classes(np.array([1.0, 0.0]), bank, top_k=2)
    assert ranked[0][0] == ("s", "a") and ranked[0][1] == pytest.approx(1.0)
    assert rank_classes(np.array([1.0, 0.0]), bank, top_k=5) == ranked  # capped at classes


def test_rank_classes_batch_agrees_with_single():
    rng = np.random.default_rng(9)
    pts = l2_normalize(rng.standard_normal((30, 6)))
    keys = [("s", f"c{i % 5}") for i in range(30)]
    bank = build_bank(pts, keys, BankConfig(strategy="auto"), seed=0)
    queries = l2_normalize(rng.standard_normal((8, 6)))
    top = rank_classes_batch(queries, bank, top_k=3)
    for qi, q in enumerate(queries):
        singles = [bank.class_keys.index(k) for k, _ in rank_classes(q, bank, top_k=3)]
        assert top[qi].tolist() == singles


def test_bank_extend_preserves_existing_scores_exactly():
    rng = np.random.default_rng(10)
    pts = l2_normalize(rng.standard_normal((40, 8)))
    keys = [("s1", f"c{i % 4}") for i in range(40)]
    bank = build_bank(pts, keys, BankConfig(strategy="auto"), seed=1)
    queries = l2_normalize(rng.standard_normal((10, 8)))
    before = class_scores(queries, bank)

    new_pts = l2_normalize(rng.standard_normal((30, 8)))
    new_keys = [("s2", f"c{i % 3}") for i in range(30)]
    grown = bank_extend(bank, new_pts, new_keys, BankConfig(strategy="auto"))
    after = class_scores(queries, grown)

    old_cols = [grown.class_keys.index(k) for k in bank.class_keys]
    np.testing.assert_array_equal(after[:, old_cols], before)
    assert grown.n_classes == bank.n_classes + 3
    grown.validate()


def test_bank_extend_rejects_duplicate_class():
    rng = np.random.default_rng(11)
    pts = l2_normalize(rng.standard_normal((8, 4)))
    bank = build_bank(pts, [("s", "a")] * 8, BankConfig(strategy="auto"), seed=0)
    with pytest.raises(ProtocolError):
        bank_extend(bank, pts, [("s", "a")] * 8, BankConfig(strategy="auto"))


def test_build_bank_input_validation():
    with pytest.raises(ProtocolError):
        build_bank(np.zeros((0, 4)), [], BankConfig(strategy="auto"), seed=0)
    pts = l2_normalize(np.random.default_rng(0).standard_normal((4, 4)))
    with pytest.raises(DimensionMismatchError):
        build_bank(pts, [("s", "a")] * 3, BankConfig(strategy="auto"), seed=0)
    with pytest.raises(DegenerateInputError):
        build_bank(pts * 3.0, [("s", "a")] * 4, BankConfig(strategy="auto"), seed=0)


def test_text_dictionary_ranking():
    rng = np.random.default_rng(12)
    embs = l2_normalize(rng.standard_normal((6, 8)))
    chars = [f"z{i}" for i in range(6)]
    d = TextDictionary(char_ids=chars, embeddings=embs)
    hits = rank_text(embs[3], d, top_k=3)
    assert hits[0][0] == "z3" and hits[0][1] == pytest.approx(1.0)
    assert len(hits) == 3
    assert len(rank_text(embs[0], d, top_k=99)) == 6
