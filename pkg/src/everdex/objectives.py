"""Contrastive losses and batch assembly for the two training phases.

Phase-I pairs each new-script anchor image with exactly one positive drawn
8:1:1 from (same-class image, meaning text, shape text); Phase-II pairs
buffered images within their script-aware class. Both phases share one
anchor-to-candidates InfoNCE with in-batch negatives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import DatasetIndex, KIND_IMAGE, KIND_MEANING, KIND_SHAPE
from .errors import DegenerateInputError, DimensionMismatchError, ProtocolError

log = logging.getLogger(__name__)

# Positive-source weights for Phase-I: visual, meaning, shape.
POSITIVE_RATIO = (8, 1, 1)

SOURCE_VISUAL = "same_class_image"
SOURCE_MEANING = "meaning_text"
SOURCE_SHAPE = "shape_text"

_SOURCE_KIND = {
    SOURCE_VISUAL: KIND_IMAGE,
    SOURCE_MEANING: KIND_MEANING,
    SOURCE_SHAPE: KIND_SHAPE,
}


@dataclass(frozen=True)
class PositiveDraw:
    """One sampled positive: its source rule, target id, and modality kind."""

    source: str
    positive_id: str
    kind: str


def sample_positive(anchor_id: str, index: DatasetIndex, rng: np.random.Generator) -> PositiveDraw:
    """Draw one positive for an anchor image with 0.8/0.1/0.1 source weights.

    Singleton classes self-pair for the visual source; a missing text modality
    falls back to the visual source with a logged warning.
    """
    rec = index.by_id[anchor_id]
    u = rng.random()
    if u < 0.8:
        source = SOURCE_VISUAL
    elif u < 0.9:
        source = SOURCE_MEANING
    else:
        source = SOURCE_SHAPE

    if source == SOURCE_MEANING:
        meaning_id = index.meaning_by_char.get(rec.char)
        if meaning_id is None:
            log.warning("no meaning text for char %s; falling back to visual positive", rec.char)
            source = SOURCE_VISUAL
        else:
            return PositiveDraw(SOURCE_MEANING, meaning_id, KIND_MEANING)
    if source == SOURCE_SHAPE:
        shape_id = index.shape_by_image.get(anchor_id)
        if shape_id is None:
            log.warning("no shape text for image %s; falling back to visual positive", anchor_id)
            source = SOURCE_VISUAL
        else:
            return PositiveDraw(SOURCE_SHAPE, shape_id, KIND_SHAPE)

    candidates = index.train_class_images[(rec.script, rec.char)]
    others = [i for i in candidates if i != anchor_id]
    if not others:
        return PositiveDraw(SOURCE_VISUAL, anchor_id, KIND_IMAGE)
    pick = others[int(rng.integers(len(others)))]
    return PositiveDraw(SOURCE_VISUAL, pick, KIND_IMAGE)


@dataclass
class ContrastiveBatch:
    """Anchors with one matched candidate each; all candidates act as the pool.

    Candidate ``j == i`` is anchor ``i``'s positive. ``trainable_mask`` marks
    candidates that receive gradients; text candidates are always frozen.
    """

    anchors: np.ndarray
    candidates: np.ndarray
    candidate_kinds: list[str] = field(default_factory=list)
    trainable_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.anchors = np.asarray(self.anchors)
        self.candidates = np.asarray(self.candidates)
        if self.anchors.shape != self.candidates.shape:
            raise DimensionMismatchError(
                f"anchors {self.anchors.shape} and candidates {self.candidates.shape} must match"
            )
        n = self.anchors.shape[0]
        if not self.candidate_kinds:
            self.candidate_kinds = [KIND_IMAGE] * n
        if len(self.candidate_kinds) != n:
            raise DimensionMismatchError("one candidate kind required per candidate")
        if self.trainable_mask is None:
            self.trainable_mask = np.array([k == KIND_IMAGE for k in self.candidate_kinds])
        self.trainable_mask = np.asarray(self.trainable_mask, dtype=bool)
        if self.trainable_mask.shape != (n,):
            raise DimensionMismatchError("trainable_mask must have one flag per candidate")
        for kind, trainable in zip(self.candidate_kinds, self.trainable_mask):
            if kind != KIND_IMAGE and trainable:
                raise ProtocolError("text candidates must not be marked trainable")

    @property
    def size(self) -> int:
        return self.anchors.shape[0]


def _check_unit_norm(x: np.ndarray, what: str, tol: float = 1e-4) -> None:
    norms = np.linalg.norm(np.asarray(x, dtype=np.float64), axis=1)
    worst = float(np.abs(norms - 1.0).max()) if norms.size else 0.0
    if worst > tol:
        raise DegenerateInputError(f"{what} must be unit-norm (worst deviation {worst:.3g})")


def infonce_loss(
    batch: ContrastiveBatch, tau: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Anchor-to-candidates InfoNCE with in-batch negatives, mean-reduced.

    Returns (loss, grad_anchors, grad_candidates); candidate gradients are
    zeroed where ``trainable_mask`` is false. The candidate pool is exactly
    the batch's own candidates, nothing more, and the loss is one-directional.
    """
    if tau <= 0:
        raise DegenerateInputError(f"temperature must be > 0, got {tau}")
    b = batch.size
    if b == 0:
        raise ProtocolError("empty contrastive batch")
    _check_unit_norm(batch.anchors, "anchors")
    _check_unit_norm(batch.candidates, "candidates")

    sims = batch.anchors @ batch.candidates.T          # (B, B) cosine, inputs unit-norm
    logits = sims / tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    losses = log_z - np.diagonal(logits)
    loss = float(losses.mean())

    p = np.exp(logits - log_z[:, None])
    d_logits = p.copy()
    np.fill_diagonal(d_logits, np.diagonal(d_logits) - 1.0)
    d_logits /= b * tau
    d_logits = d_logits.astype(batch.anchors.dtype, copy=False)

    grad_anchors = d_logits @ batch.candidates
    grad_candidates = d_logits.T @ batch.anchors
    grad_candidates[~batch.trainable_mask] = 0.0
    return loss, grad_anchors, grad_candidates


def phase2_pair_batches(
    entries: list[tuple[str, str, str]],
    rng: np.random.Generator,
    batch_size: int = 128,
) -> list[list[tuple[str, str, str]]]:
    """Replay pairs from the buffer: (anchor id, positive id, script) batches.

    Each pair shares its script-aware class; singleton classes self-pair.
    Entries are (image id, script, char) triples. Anchors are a seeded
    permutation of the whole buffer, chunked into ``batch_size`` groups.
    """
    if not entries:
        raise ProtocolError("replay sampling from an empty buffer")
    if batch_size < 1:
        raise ProtocolError(f"batch_size must be >= 1, got {batch_size}")
    by_class: dict[tuple[str, str], list[str]] = {}
    for image_id, script, char in entries:
        by_class.setdefault((script, char), []).append(image_id)

    order = rng.permutation(len(entries))
    pairs: list[tuple[str, str, str]] = []
    for idx in order:
        image_id, script, char = entries[int(idx)]
        mates = by_class[(script, char)]
        others = [m for m in mates if m != image_id]
        positive = image_id if not others else others[int(rng.integers(len(others)))]
        pairs.append((image_id, positive, script))
    return [pairs[i:i + batch_size] for i in range(0, len(pairs), batch_size)]
