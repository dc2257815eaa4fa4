"""Script routing: a one-hidden-layer classifier over frozen visual features.

The router sees the pre-insertion feature only, predicts which onboarded
script produced it, and exactly one adapter is applied downstream (hard
routing). Training is plain cross-entropy on script labels and never sends
gradient into the feature itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ProtocolError
from .numerics import ParamDict, softmax


@dataclass
class RouterParams:
    w_hidden: np.ndarray   # (H, D)
    b_hidden: np.ndarray   # (H,)
    w_head: np.ndarray     # (t, H)
    b_head: np.ndarray     # (t,)

    @property
    def dim(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def hidden_width(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def n_scripts(self) -> int:
        return self.w_head.shape[0]

    def param_dict(self) -> ParamDict:
        return {
            "w_hidden": self.w_hidden,
            "b_hidden": self.b_hidden,
            "w_head": self.w_head,
            "b_head": self.b_head,
        }

    def copy(self) -> "RouterParams":
        return RouterParams(
            w_hidden=self.w_hidden.copy(),
            b_hidden=self.b_hidden.copy(),
            w_head=self.w_head.copy(),
            b_head=self.b_head.copy(),
        )


def _init_head(hidden: int, n_scripts: int, seed: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(n_scripts, hidden)).astype(dtype)
    b = np.zeros(n_scripts, dtype=dtype)
    return w, b


def router_init(dim: int, hidden: int, n_scripts: int, seed: int, dtype=np.float32) -> RouterParams:
    if n_scripts < 1 or hidden < 1 or dim < 1:
        raise DimensionMismatchError(
            f"invalid router dims: dim={dim}, hidden={hidden}, n_scripts={n_scripts}"
        )
    rng = np.random.default_rng(seed)
    w_hidden = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(hidden, dim)).astype(dtype)
    b_hidden = np.zeros(hidden, dtype=dtype)
    w_head, b_head = _init_head(hidden, n_scripts, seed + 1, dtype)
    return RouterParams(w_hidden=w_hidden, b_hidden=b_hidden, w_head=w_head, b_head=b_head)


def _hidden_acts(e: np.ndarray, params: RouterParams) -> np.ndarray:
    if e.shape[-1] != params.dim:
        raise DimensionMismatchError(f"input dim {e.shape[-1]} != router dim {params.dim}")
    return np.tanh(e @ params.w_hidden.T + params.b_hidden)


def route_probs(e: np.ndarray, params: RouterParams) -> np.ndarray:
    """Probability over onboarded scripts; rows sum to 1."""
    h = _hidden_acts(np.asarray(e), params)
    logits = h @ params.w_head.T + params.b_head
    return softmax(logits)


def route_select(p: np.ndarray) -> int:
    """Hard routing: argmax with ties broken by lowest index."""
    p = np.asarray(p)
    if p.ndim != 1:
        raise DimensionMismatchError("route_select expects a single probability vector")
    return int(np.argmax(p))


def route_select_batch(p: np.ndarray) -> np.ndarray:
    """Row-wise argmax (first max wins), for batched routing."""
    return np.argmax(np.asarray(p), axis=-1)


def router_ce_loss(
    e: np.ndarray, true_scripts: np.ndarray | int, params: RouterParams
) -> tuple[float, ParamDict]:
    """Mean cross-entropy ``-log p[true]`` plus gradients for all router fields.

    Accepts a single feature with an int label or a batch with a label array.
    Gradient never flows into ``e``.
    """
    e = np.asarray(e)
    single = e.ndim == 1
    e2 = e[None, :] if single else e
    labels = np.atleast_1d(np.asarray(true_scripts, dtype=np.int64))
    if labels.shape[0] != e2.shape[0]:
        raise DimensionMismatchError(
            f"{labels.shape[0]} labels for {e2.shape[0]} features"
        )
    t = params.n_scripts
    if np.any(labels < 0) or np.any(labels >= t):
        raise ProtocolError(f"script label outside [0, {t})")
    n = e2.shape[0]

    h = _hidden_acts(e2, params)
    logits = h @ params.w_head.T + params.b_head
    p = softmax(logits)
    loss = float(-np.log(np.maximum(p[np.arange(n), labels], 1e-300)).mean())

    d_logits = p.copy()
    d_logits[np.arange(n), labels] -= 1.0
    d_logits /= n
    grad_w_head = d_logits.T @ h
    grad_b_head = d_logits.sum(axis=0)
    g_h = (d_logits @ params.w_head) * (1.0 - h * h)
    grad_w_hidden = g_h.T @ e2
    grad_b_hidden = g_h.sum(axis=0)
    grads: ParamDict = {
        "w_hidden": grad_w_hidden,
        "b_hidden": grad_b_hidden,
        "w_head": grad_w_head,
        "b_head": grad_b_head,
    }
    return loss, grads


def router_grow(params: RouterParams, new_t: int, seed: int) -> RouterParams:
    """Widen the head to ``new_t`` outputs (must be exactly old_t + 1).

    The trunk is retained; the head is reinitialized from a seeded
    distribution and retrained on the script-balanced buffer.
    """
    if new_t != params.n_scripts + 1:
        raise ProtocolError(
            f"router grows one script at a time: {params.n_scripts} -> {new_t} rejected"
        )
    w_head, b_head = _init_head(params.hidden_width, new_t, seed, params.w_head.dtype)
    return RouterParams(
        w_hidden=params.w_hidden.copy(),
        b_hidden=params.b_hidden.copy(),
        w_head=w_head,
        b_head=b_head,
    )
