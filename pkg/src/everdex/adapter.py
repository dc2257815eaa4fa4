"""Per-script low-rank gated residual adapter.

The adapter calibrates a frozen pre-insertion feature ``e`` without touching
the surrounding space: ``out = e + alpha * W_up(sigmoid(Wg LN(e)) * Wv LN(e))``.
The up-projection starts at zero, so a freshly initialized adapter is an exact
identity map and onboarding a new script never perturbs embeddings before
training begins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ProtocolError
from .numerics import (
    ParamDict,
    layer_norm,
    layer_norm_backward,
    sigmoid,
    swiglu_gate_backward,
)


@dataclass
class AdapterParams:
    """Trainable state for one script's adapter.

    ``w_gate``/``w_value`` are the two down-projections (rank x dim), ``w_up``
    lifts the gated bottleneck back to dim, ``alpha`` is the learned residual
    scale (0-d array so the optimizer can update it in place).
    """

    script_id: int
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    w_gate: np.ndarray
    w_value: np.ndarray
    w_up: np.ndarray
    alpha: np.ndarray

    @property
    def dim(self) -> int:
        return self.ln_gain.shape[0]

    @property
    def rank(self) -> int:
        return self.w_gate.shape[0]

    def param_dict(self) -> ParamDict:
        """Views (not copies) of all trainable arrays, for the optimizer."""
        return {
            "ln_gain": self.ln_gain,
            "ln_bias": self.ln_bias,
            "w_gate": self.w_gate,
            "w_value": self.w_value,
            "w_up": self.w_up,
            "alpha": self.alpha,
        }

    def copy(self) -> "AdapterParams":
        return AdapterParams(
            script_id=self.script_id,
            ln_gain=self.ln_gain.copy(),
            ln_bias=self.ln_bias.copy(),
            w_gate=self.w_gate.copy(),
            w_value=self.w_value.copy(),
            w_up=self.w_up.copy(),
            alpha=self.alpha.copy(),
        )


@dataclass
class AdapterTape:
    """Cached intermediates from one forward call; consumed exactly once."""

    e: np.ndarray
    h: np.ndarray
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    delta: np.ndarray
    consumed: bool = False


def adapter_init(dim: int, rank: int, seed: int, script_id: int = 0,
                 alpha: float = 0.5, dtype=np.float32) -> AdapterParams:
    """Fresh adapter: seeded down-projections (scale 1/sqrt(dim)), zero up-projection."""
    if not 0 < rank < dim:
        raise DimensionMismatchError(f"rank must satisfy 0 < rank < dim, got rank={rank}, dim={dim}")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    return AdapterParams(
        script_id=script_id,
        ln_gain=np.ones(dim, dtype=dtype),
        ln_bias=np.zeros(dim, dtype=dtype),
        w_gate=rng.normal(0.0, scale, size=(rank, dim)).astype(dtype),
        w_value=rng.normal(0.0, scale, size=(rank, dim)).astype(dtype),
        w_up=np.zeros((dim, rank), dtype=dtype),
        alpha=np.array(alpha, dtype=dtype),
    )


def adapter_forward(e: np.ndarray, params: AdapterParams) -> tuple[np.ndarray, AdapterTape]:
    """Apply the scaled residual correction; returns output plus backward tape.

    Accepts a single vector (D,) or a batch (B, D).
    """
    e = np.asarray(e)
    if e.shape[-1] != params.dim:
        raise DimensionMismatchError(f"input dim {e.shape[-1]} != adapter dim {params.dim}")
    h = layer_norm(e, params.ln_gain, params.ln_bias)
    a = h @ params.w_gate.T
    b = h @ params.w_value.T
    z = sigmoid(a) * b
    delta = z @ params.w_up.T
    out = e + params.alpha * delta
    return out, AdapterTape(e=e, h=h, a=a, b=b, z=z, delta=delta)


def adapter_backward(
    upstream: np.ndarray, tape: AdapterTape, params: AdapterParams
) -> tuple[np.ndarray, ParamDict]:
    """Gradients of ``adapter_forward`` w.r.t. the input and every parameter."""
    if tape.consumed:
        raise ProtocolError("adapter tape already consumed by a previous backward call")
    tape.consumed = True
    upstream = np.asarray(upstream)
    if upstream.shape != tape.delta.shape:
        raise DimensionMismatchError(
            f"upstream shape {upstream.shape} != forward output shape {tape.delta.shape}"
        )
    single = upstream.ndim == 1
    up2 = upstream[None, :] if single else upstream
    h2 = tape.h[None, :] if single else tape.h
    z2 = tape.z[None, :] if single else tape.z

    grad_alpha = np.array((upstream * tape.delta).sum(), dtype=params.alpha.dtype)
    g_delta = (params.alpha * upstream)
    g_delta2 = g_delta[None, :] if single else g_delta
    grad_w_up = g_delta2.T @ z2
    g_z = g_delta2 @ params.w_up
    g_a, g_b = swiglu_gate_backward(
        tape.a[None, :] if single else tape.a,
        tape.b[None, :] if single else tape.b,
        g_z,
    )
    grad_w_gate = g_a.T @ h2
    grad_w_value = g_b.T @ h2
    g_h = g_a @ params.w_gate + g_b @ params.w_value
    if single:
        g_h = g_h[0]
    g_e_ln, grad_gain, grad_bias = layer_norm_backward(tape.e, params.ln_gain, params.ln_bias, g_h)
    grad_e = upstream + g_e_ln
    grads: ParamDict = {
        "ln_gain": grad_gain,
        "ln_bias": grad_bias,
        "w_gate": grad_w_gate,
        "w_value": grad_w_value,
        "w_up": grad_w_up,
        "alpha": grad_alpha,
    }
    return grad_e, grads
