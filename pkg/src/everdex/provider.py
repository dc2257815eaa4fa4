"""Frozen embedding providers: the pre-insertion feature store and post-map.

A provider stands in for a frozen multimodal backbone split at the adapter
insertion point: ``visual_features`` yields the pre-insertion feature for an
image id, ``post_map`` is the frozen tail that maps a (possibly adapted)
feature into the unit-norm retrieval space, and ``text_embedding`` yields
retrieval-space text vectors. Everything is deterministic per (config, id) and
immutable after construction; gradients flow through ``post_map`` but never
into it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError, ProtocolError
from .numerics import l2_normalize, l2_normalize_backward

POST_MAP_ORTHOGONAL = "orthogonal"
POST_MAP_IDENTITY = "identity"


def _seeded_orthogonal(dim: int, seed: int) -> np.ndarray:
    """Deterministic orthogonal matrix via QR with sign fixing."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
    return (q * np.sign(np.diag(r))).astype(np.float64)


@dataclass
class PostMapTape:
    pre: np.ndarray     # input to the map
    mapped: np.ndarray  # after the linear map, before normalization


class PostMap:
    """Frozen retrieval-space projection: seeded orthogonal map + L2 normalize.

    The identity configuration skips the matrix and only normalizes.
    """

    def __init__(self, dim: int, kind: str = POST_MAP_ORTHOGONAL, seed: int = 0):
        if kind not in (POST_MAP_ORTHOGONAL, POST_MAP_IDENTITY):
            raise ProtocolError(f"unknown post-map kind {kind!r}")
        self.dim = dim
        self.kind = kind
        self.seed = seed
        self.matrix = _seeded_orthogonal(dim, seed) if kind == POST_MAP_ORTHOGONAL else None

    def forward(self, v: np.ndarray) -> np.ndarray:
        out, _ = self.forward_with_tape(v)
        return out

    def forward_with_tape(self, v: np.ndarray) -> tuple[np.ndarray, PostMapTape]:
        v = np.asarray(v)
        if v.shape[-1] != self.dim:
            raise DimensionMismatchError(f"input dim {v.shape[-1]} != post-map dim {self.dim}")
        mapped = v if self.matrix is None else v @ self.matrix.T.astype(v.dtype)
        norms = np.linalg.norm(np.atleast_2d(mapped), axis=1)
        if np.any(norms == 0):
            raise DegenerateInputError("zero vector reached the post-map normalization")
        return l2_normalize(mapped), PostMapTape(pre=v, mapped=mapped)

    def backward(self, upstream: np.ndarray, tape: PostMapTape) -> np.ndarray:
        """Gradient w.r.t. the pre-map input; the map itself is frozen."""
        g_mapped = l2_normalize_backward(tape.mapped, upstream)
        if self.matrix is None:
            return g_mapped
        return g_mapped @ self.matrix.astype(g_mapped.dtype)


class EmbeddingProvider:
    """In-memory provider over precomputed feature/text stores.

    ``visual`` holds pre-insertion features (not necessarily unit-norm);
    ``texts`` holds unit-norm raw text vectors that are pushed through the
    post-map once at construction, since texts never pass through an adapter.
    """

    def __init__(
        self,
        dim: int,
        visual: dict[str, np.ndarray],
        texts: dict[str, np.ndarray],
        post_map: PostMap,
    ):
        if post_map.dim != dim:
            raise DimensionMismatchError(f"post-map dim {post_map.dim} != provider dim {dim}")
        self.dim = dim
        self._visual = visual
        self._texts_final: dict[str, np.ndarray] = {}
        self.post_map = post_map
        for tid, raw in texts.items():
            if raw.shape != (dim,):
                raise DimensionMismatchError(f"text vector {tid!r} has shape {raw.shape}")
            self._texts_final[tid] = post_map.forward(raw)

    # Lookups ---------------------------------------------------------------

    def has_sample(self, sample_id: str) -> bool:
        return sample_id in self._visual

    def visual_features(self, sample_id: str) -> np.ndarray:
        try:
            return self._visual[sample_id]
        except KeyError:
            raise ProtocolError(f"unknown sample id {sample_id!r}") from None

    def visual_batch(self, sample_ids: list[str]) -> np.ndarray:
        return np.stack([self.visual_features(i) for i in sample_ids])

    def text_embedding(self, text_id: str) -> np.ndarray:
        try:
            return self._texts_final[text_id]
        except KeyError:
            raise ProtocolError(f"unknown text id {text_id!r}") from None

    def text_batch(self, text_ids: list[str]) -> np.ndarray:
        return np.stack([self.text_embedding(i) for i in text_ids])


class AccessTrackingProvider:
    """Wraps a provider and records every visual/text id it serves.

    The continual engine uses this to assert the data-access contract: each
    training phase may only touch its allowed record set.
    """

    def __init__(self, inner: EmbeddingProvider):
        self.inner = inner
        self.visual_ids: set[str] = set()
        self.text_ids: set[str] = set()

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def post_map(self) -> PostMap:
        return self.inner.post_map

    def reset(self) -> None:
        self.visual_ids.clear()
        self.text_ids.clear()

    def has_sample(self, sample_id: str) -> bool:
        return self.inner.has_sample(sample_id)

    def visual_features(self, sample_id: str) -> np.ndarray:
        self.visual_ids.add(sample_id)
        return self.inner.visual_features(sample_id)

    def visual_batch(self, sample_ids: list[str]) -> np.ndarray:
        self.visual_ids.update(sample_ids)
        return self.inner.visual_batch(sample_ids)

    def text_embedding(self, text_id: str) -> np.ndarray:
        self.text_ids.add(text_id)
        return self.inner.text_embedding(text_id)

    def text_batch(self, text_ids: list[str]) -> np.ndarray:
        self.text_ids.update(text_ids)
        return self.inner.text_batch(text_ids)


def load_file_provider(
    manifest_path: str,
    embeddings_path: str,
    post_map_kind: str = POST_MAP_ORTHOGONAL,
    post_map_seed: int = 0,
):
    """Build a provider from manifest + embeddings files.

    Pre-insertion features need not be unit-norm; text vectors must be (within
    1e-3), since they enter the retrieval space directly.
    Returns (provider, manifest records).
    """
    from .errors import FormatError
    from .io import read_dataset

    records, visual, texts, dim = read_dataset(manifest_path, embeddings_path)
    for tid, vec in texts.items():
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-3:
            raise FormatError(f"text embedding {tid!r} is not unit-norm (|v| = {norm:.6f})")
    post_map = PostMap(dim, kind=post_map_kind, seed=post_map_seed)
    provider = EmbeddingProvider(dim, visual, texts, post_map)
    return provider, records
