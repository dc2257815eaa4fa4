"""Expandable retrieval dictionary over unit-norm embeddings.

Each script-aware class owns one or more spherical k-means prototypes; the
cluster count is chosen per class by maximizing a cosine silhouette score
(auto-K), capped by min(k_max, floor(sqrt(n))). Prototypes live in one
flattened matrix addressed through a prefix-sum pointer array, so adding
classes never moves or rescores existing rows.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError, ProtocolError
from .numerics import l2_normalize


def _unit_check(points: np.ndarray, tol: float = 1e-4) -> None:
    norms = np.linalg.norm(np.asarray(points, dtype=np.float64), axis=1)
    if norms.size and np.any(np.abs(norms - 1.0) > tol):
        raise DegenerateInputError("points must be unit-norm")


# ---------------------------------------------------------------------------
# Spherical k-means
# ---------------------------------------------------------------------------


@dataclass
class ClusteringResult:
    centroids: np.ndarray       # (k, D), unit-norm
    assignments: np.ndarray     # (N,) cluster index per point
    inertia: float              # mean cosine distance to assigned centroid
    inertia_history: list[float] = field(default_factory=list)


def _kmeanspp_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++-style seeding under cosine distance."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    min_dist = 1.0 - points @ points[chosen[0]]
    for _ in range(1, k):
        weights = np.maximum(min_dist, 0.0) ** 2
        total = weights.sum()
        if total <= 0:
            # All points coincide with a chosen centroid; fall back to uniform.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=weights / total))
        chosen.append(idx)
        min_dist = np.minimum(min_dist, 1.0 - points @ points[idx])
    return points[chosen].copy()


def spherical_kmeans(points: np.ndarray, k: int, seed: int, max_iters: int = 100) -> ClusteringResult:
    """Cosine k-means on unit-norm points: assign by max dot, update by normalized mean.

    Empty clusters are repaired by seizing the point farthest from its current
    centroid (the seized point becomes the empty cluster's centroid), which
    keeps the mean cosine distance non-increasing across iterations.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionMismatchError("points must be a (N, D) array")
    n = points.shape[0]
    if k < 1:
        raise ProtocolError(f"k must be >= 1, got {k}")
    if k > n:
        raise ProtocolError(f"k={k} exceeds number of points {n}")
    if np.any(np.linalg.norm(points, axis=1) == 0):
        raise DegenerateInputError("zero-norm point in clustering input")
    _unit_check(points)

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_seed(points, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    history: list[float] = []

    for _ in range(max_iters):
        sims = points @ centroids.T
        new_assignments = np.argmax(sims, axis=1)

        # Repair: give each empty cluster the globally worst-fit point.
        counts = np.bincount(new_assignments, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            own_sim = sims[np.arange(n), new_assignments]
            movable = counts[new_assignments] > 1
            if not np.any(movable):
                break
            worst = int(np.flatnonzero(movable)[np.argmin(own_sim[movable])])
            counts[new_assignments[worst]] -= 1
            new_assignments[worst] = empty
            counts[empty] += 1
            centroids[empty] = points[worst]
            sims[:, empty] = points @ centroids[empty]

        converged = np.array_equal(new_assignments, assignments)
        assignments = new_assignments
        for j in range(k):
            members = points[assignments == j]
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[j] = mean / norm
        history.append(float(np.mean(1.0 - (points * centroids[assignments]).sum(axis=1))))
        if converged:
            break

    return ClusteringResult(
        centroids=centroids,
        assignments=assignments,
        inertia=history[-1],
        inertia_history=history,
    )


def silhouette_cos(points: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette under cosine distance (1 - cos); singletons score 0."""
    points = np.asarray(points, dtype=np.float64)
    assignments = np.asarray(assignments)
    labels = np.unique(assignments)
    if labels.size < 2:
        raise ProtocolError("silhouette needs at least 2 non-empty clusters")
    n = points.shape[0]
    dist = 1.0 - points @ points.T

    # Mean distance from each point to each cluster.
    sums = np.stack([dist[:, assignments == lab].sum(axis=1) for lab in labels], axis=1)
    counts = np.array([(assignments == lab).sum() for lab in labels], dtype=np.float64)
    label_pos = {int(lab): j for j, lab in enumerate(labels)}
    own = np.array([label_pos[int(a)] for a in assignments])

    scores = np.zeros(n)
    for i in range(n):
        c = own[i]
        if counts[c] <= 1:
            continue
        a_i = sums[i, c] / (counts[c] - 1.0)
        other = [j for j in range(labels.size) if j != c]
        b_i = min(sums[i, j] / counts[j] for j in other)
        denom = max(a_i, b_i)
        scores[i] = 0.0 if denom == 0 else (b_i - a_i) / denom
    return float(scores.mean())


def auto_k(
    class_points: np.ndarray,
    k_max: int = 32,
    sample_cap: int = 256,
    seed: int = 0,
    max_iters: int = 100,
) -> int:
    """Pick the prototype count for one class by cosine-silhouette search.

    The search range is [2, min(k_max, floor(sqrt(n)))]; classes too small for
    that range get a single prototype. The silhouette sweep runs on a uniform
    subsample of at most ``sample_cap`` points.
    """
    class_points = np.asarray(class_points, dtype=np.float64)
    n = class_points.shape[0]
    if n < 1:
        raise ProtocolError("auto_k needs at least one point")
    cap = min(k_max, int(np.floor(np.sqrt(n))))
    if cap < 2:
        return 1
    rng = np.random.default_rng(seed)
    take = min(n, sample_cap)
    sample = class_points[rng.choice(n, size=take, replace=False)]
    best_k, best_score = 2, -np.inf
    for k in range(2, cap + 1):
        result = spherical_kmeans(sample, k, seed=int(rng.integers(2**63)), max_iters=max_iters)
        score = silhouette_cos(sample, result.assignments)
        if score > best_score:
            best_k, best_score = k, score
    return best_k


# ---------------------------------------------------------------------------
# Prototype bank
# ---------------------------------------------------------------------------

STRATEGY_AUTO = "auto"
STRATEGY_MEAN = "mean"
STRATEGY_RANDOM = "random_sample"
STRATEGIES = (STRATEGY_AUTO, STRATEGY_MEAN, STRATEGY_RANDOM)

ClassKey = tuple[str, str]


@dataclass(frozen=True)
class BankConfig:
    strategy: str = STRATEGY_AUTO
    k_max: int = 32
    sample_cap: int = 256
    random_m: int = 8
    max_iters: int = 100

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ProtocolError(f"unknown bank strategy {self.strategy!r}")


@dataclass
class PrototypeBank:
    """Flattened prototype rows plus a prefix-sum pointer array.

    Class ``class_keys[y]`` owns rows ``pointers[y]..pointers[y+1]``.
    """

    prototypes: np.ndarray
    pointers: np.ndarray
    class_keys: list[ClassKey]
    strategy: str = STRATEGY_AUTO
    seed: int = 0

    @property
    def n_classes(self) -> int:
        return len(self.class_keys)

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]

    def prototypes_for(self, y: int) -> np.ndarray:
        return self.prototypes[self.pointers[y]:self.pointers[y + 1]]

    def validate(self) -> None:
        if self.pointers[0] != 0 or self.pointers[-1] != self.prototypes.shape[0]:
            raise ProtocolError("pointer array endpoints inconsistent with prototype rows")
        diffs = np.diff(self.pointers)
        if np.any(diffs < 1):
            raise ProtocolError("every class must own at least one prototype")
        if len(self.class_keys) != len(self.pointers) - 1:
            raise ProtocolError("class_keys misaligned with pointer ranges")
        _unit_check(self.prototypes, tol=1e-4)


def class_seed(seed: int, key: ClassKey) -> int:
    """Stable per-class seed derived from the run seed and the class key."""
    digest = hashlib.blake2b(f"{seed}/{key[0]}/{key[1]}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % (2**63)


def _class_prototypes(points: np.ndarray, key: ClassKey, config: BankConfig, seed: int) -> np.ndarray:
    base = class_seed(seed, key)
    if config.strategy == STRATEGY_MEAN:
        mean = np.asarray(points, dtype=np.float64).mean(axis=0)
        if np.linalg.norm(mean) == 0:
            raise DegenerateInputError(f"class {key} has a zero mean embedding")
        return l2_normalize(mean)[None, :]
    if config.strategy == STRATEGY_RANDOM:
        rng = np.random.default_rng(base)
        m = min(config.random_m, points.shape[0])
        picks = rng.choice(points.shape[0], size=m, replace=False)
        return l2_normalize(np.asarray(points, dtype=np.float64)[picks])
    k = auto_k(points, k_max=config.k_max, sample_cap=config.sample_cap,
               seed=base, max_iters=config.max_iters)
    return spherical_kmeans(points, k, seed=base + 1, max_iters=config.max_iters).centroids


def build_bank(
    embeddings: np.ndarray,
    class_keys: list[ClassKey],
    config: BankConfig,
    seed: int = 0,
) -> PrototypeBank:
    """Construct the bank from labeled unit-norm embeddings.

    Classes are processed in sorted (script, char) order so the bank layout is
    deterministic; per-class randomness derives from (seed, class key) only.
    """
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise ProtocolError("build_bank needs a non-empty (N, D) embedding array")
    if len(class_keys) != embeddings.shape[0]:
        raise DimensionMismatchError("one class key required per embedding row")
    groups: dict[ClassKey, list[int]] = {}
    for i, key in enumerate(class_keys):
        groups.setdefault(key, []).append(i)

    rows: list[np.ndarray] = []
    pointers = [0]
    ordered_keys = sorted(groups)
    for key in ordered_keys:
        protos = _class_prototypes(embeddings[groups[key]], key, config, seed)
        rows.append(protos)
        pointers.append(pointers[-1] + protos.shape[0])
    bank = PrototypeBank(
        prototypes=np.vstack(rows).astype(np.float32),
        pointers=np.array(pointers, dtype=np.int64),
        class_keys=ordered_keys,
        strategy=config.strategy,
        seed=seed,
    )
    bank.validate()
    return bank


def bank_extend(
    bank: PrototypeBank,
    embeddings: np.ndarray,
    class_keys: list[ClassKey],
    config: BankConfig,
) -> PrototypeBank:
    """Append new classes; existing rows, ranges and scores are untouched."""
    embeddings = np.asarray(embeddings)
    if embeddings.shape[0] == 0:
        return PrototypeBank(
            prototypes=bank.prototypes.copy(),
            pointers=bank.pointers.copy(),
            class_keys=list(bank.class_keys),
            strategy=bank.strategy,
            seed=bank.seed,
        )
    existing = set(bank.class_keys)
    groups: dict[ClassKey, list[int]] = {}
    for i, key in enumerate(class_keys):
        if key in existing:
            raise ProtocolError(f"class {key} already present in the bank")
        groups.setdefault(key, []).append(i)

    rows = [bank.prototypes]
    pointers = list(bank.pointers)
    keys = list(bank.class_keys)
    for key in sorted(groups):
        protos = _class_prototypes(embeddings[groups[key]], key, config, bank.seed)
        rows.append(protos.astype(np.float32))
        pointers.append(pointers[-1] + protos.shape[0])
        keys.append(key)
    extended = PrototypeBank(
        prototypes=np.vstack(rows),
        pointers=np.array(pointers, dtype=np.int64),
        class_keys=keys,
        strategy=bank.strategy,
        seed=bank.seed,
    )
    extended.validate()
    return extended


def class_scores(queries: np.ndarray, bank: PrototypeBank) -> np.ndarray:
    """Per-class score = max cosine over the class's prototypes; (Q, C) array."""
    if bank.n_classes == 0:
        raise ProtocolError("ranking against an empty bank")
    queries = np.atleast_2d(np.asarray(queries))
    if queries.shape[1] != bank.dim:
        raise DimensionMismatchError(f"query dim {queries.shape[1]} != bank dim {bank.dim}")
    sims = queries.astype(np.float64) @ bank.prototypes.astype(np.float64).T
    return np.maximum.reduceat(sims, bank.pointers[:-1], axis=1)


def rank_classes(query: np.ndarray, bank: PrototypeBank, top_k: int) -> list[tuple[ClassKey, float]]:
    """Classes sorted by descending score; ties resolved by class-key order."""
    scores = class_scores(query, bank)[0]
    order = np.argsort(-scores, kind="stable")
    take = min(top_k, bank.n_classes)
    return [(bank.class_keys[int(i)], float(scores[int(i)])) for i in order[:take]]


def rank_classes_batch(queries: np.ndarray, bank: PrototypeBank, top_k: int) -> np.ndarray:
    """Top-k class indices per query row, same ordering rule as ``rank_classes``."""
    scores = class_scores(queries, bank)
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, : min(top_k, bank.n_classes)]


# ---------------------------------------------------------------------------
# Meaning-text dictionary (zero-shot track)
# ---------------------------------------------------------------------------


@dataclass
class TextDictionary:
    """Candidate characters with their meaning-text embeddings (no image content)."""

    char_ids: list[str]
    embeddings: np.ndarray

    def __post_init__(self) -> None:
        self.embeddings = np.asarray(self.embeddings)
        if len(self.char_ids) != self.embeddings.shape[0]:
            raise DimensionMismatchError("one character id required per embedding row")
        if len(set(self.char_ids)) != len(self.char_ids):
            raise ProtocolError("duplicate character in text dictionary")
        _unit_check(self.embeddings)

    @property
    def size(self) -> int:
        return len(self.char_ids)


def rank_text(query: np.ndarray, text_dict: TextDictionary, top_k: int) -> list[tuple[str, float]]:
    """Characters sorted by cosine to the query; ties by dictionary order."""
    if text_dict.size == 0:
        raise ProtocolError("ranking against an empty text dictionary")
    scores = text_dict.embeddings.astype(np.float64) @ np.asarray(query, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    take = min(top_k, text_dict.size)
    return [(text_dict.char_ids[int(i)], float(scores[int(i)])) for i in order[:take]]
