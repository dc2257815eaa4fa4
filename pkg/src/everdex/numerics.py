"""Differentiable numeric primitives, the AdamW optimizer, and the LR schedule.

All forward/backward pairs here are hand-derived and validated against central
finite differences (see ``finite_diff_check``). Functions accept a single
vector ``(D,)`` or a batch ``(B, D)``; reductions for parameter gradients sum
over the batch axis. Dtype is preserved: callers pick float32 for training and
float64 for gradient-check mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DimensionMismatchError, NonFiniteError, ProtocolError

ParamDict = dict[str, np.ndarray]


def _as_2d(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """View ``x`` as (B, D); second value tells whether input was 1-D."""
    x = np.asarray(x)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise DimensionMismatchError(f"expected 1-D or 2-D array, got ndim={x.ndim}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def softmax(z: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis."""
    z = np.asarray(z)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Normalize over the last axis (population variance, divisor D) then apply affine."""
    x2, single = _as_2d(x)
    gain = np.asarray(gain)
    bias = np.asarray(bias)
    if gain.shape != (x2.shape[1],) or bias.shape != (x2.shape[1],):
        raise DimensionMismatchError(
            f"gain/bias shape {gain.shape}/{bias.shape} does not match feature dim {x2.shape[1]}"
        )
    if eps < 0:
        raise DegenerateInputError("layer_norm eps must be >= 0")
    mu = x2.mean(axis=1, keepdims=True)
    var = x2.var(axis=1, keepdims=True)
    xhat = (x2 - mu) / np.sqrt(var + eps)
    y = gain * xhat + bias
    return y[0] if single else y


def layer_norm_backward(
    x: np.ndarray,
    gain: np.ndarray,
    bias: np.ndarray,
    upstream: np.ndarray,
    eps: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of ``layer_norm`` w.r.t. (x, gain, bias).

    ``grad_gain`` and ``grad_bias`` are summed over the batch axis.
    """
    x2, single = _as_2d(x)
    up2, up_single = _as_2d(upstream)
    if x2.shape != up2.shape:
        raise DimensionMismatchError(f"upstream shape {up2.shape} != input shape {x2.shape}")
    if single != up_single:
        raise DimensionMismatchError("input and upstream gradient must have the same rank")
    d = x2.shape[1]
    mu = x2.mean(axis=1, keepdims=True)
    var = x2.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x2 - mu) * inv_std

    grad_gain = (up2 * xhat).sum(axis=0)
    grad_bias = up2.sum(axis=0)

    dxhat = up2 * np.asarray(gain)
    # Standard layer-norm backward with population-variance divisor D.
    grad_x = (
        inv_std / d * (d * dxhat - dxhat.sum(axis=1, keepdims=True) - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
    )
    if single:
        return grad_x[0], grad_gain, grad_bias
    return grad_x, grad_gain, grad_bias


def swiglu_gate(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gated fusion ``sigmoid(a) * b`` over matching shapes."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"gate operand shapes differ: {a.shape} vs {b.shape}")
    return sigmoid(a) * b


def swiglu_gate_backward(
    a: np.ndarray, b: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``swiglu_gate`` w.r.t. both operands."""
    a = np.asarray(a)
    b = np.asarray(b)
    s = sigmoid(a)
    grad_a = upstream * b * s * (1.0 - s)
    grad_b = upstream * s
    return grad_a, grad_b


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Scale rows to unit L2 norm; rejects zero vectors."""
    x2, single = _as_2d(x)
    norms = np.linalg.norm(x2, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateInputError("cannot normalize a zero vector")
    y = x2 / norms
    return y[0] if single else y


def l2_normalize_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``l2_normalize`` w.r.t. ``x`` (projects out the radial part)."""
    x2, single = _as_2d(x)
    up2, _ = _as_2d(upstream)
    norms = np.linalg.norm(x2, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateInputError("cannot normalize a zero vector")
    y = x2 / norms
    grad = (up2 - (up2 * y).sum(axis=1, keepdims=True) * y) / norms
    return grad[0] if single else grad


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors; clipped into [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionMismatchError(f"vector shapes differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise DegenerateInputError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


# ---------------------------------------------------------------------------
# AdamW
# ---------------------------------------------------------------------------


@dataclass
class AdamWState:
    """Per-parameter-group optimizer accumulators.

    ``step`` counts completed updates; moments mirror the shapes of the
    parameters they track.
    """

    weight_decay: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: ParamDict = field(default_factory=dict)
    second_moment: ParamDict = field(default_factory=dict)


def adamw_init(params: ParamDict, weight_decay: float = 0.1,
               beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamWState:
    state = AdamWState(weight_decay=weight_decay, beta1=beta1, beta2=beta2, eps=eps)
    for name, p in params.items():
        state.first_moment[name] = np.zeros_like(p)
        state.second_moment[name] = np.zeros_like(p)
    return state


def adamw_step(params: ParamDict, grads: ParamDict, state: AdamWState, lr: float) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Parameters are first scaled by ``(1 - lr * weight_decay)``, then receive the
    bias-corrected Adam step. Raises on non-finite gradients.
    """
    if lr < 0:
        raise ProtocolError(f"learning rate must be >= 0, got {lr}")
    for name in params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter '{name}'")
        if g.shape != params[name].shape:
            raise DimensionMismatchError(
                f"gradient shape {g.shape} != parameter shape {params[name].shape} for '{name}'"
            )
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        p *= 1.0 - lr * state.weight_decay
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Learning-rate schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CosineSchedule:
    """Linear warmup to the base rate, then cosine decay to zero."""

    warmup_ratio: float
    total_steps: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ProtocolError(f"warmup_ratio must be in [0, 1], got {self.warmup_ratio}")
        if self.total_steps <= 0:
            raise ProtocolError(f"total_steps must be > 0, got {self.total_steps}")


def lr_at(schedule: CosineSchedule, step: int, base_lr: float) -> float:
    """Learning rate at ``step`` (0..total_steps inclusive)."""
    if step < 0 or step > schedule.total_steps:
        raise ProtocolError(f"step {step} outside [0, {schedule.total_steps}]")
    warmup = schedule.warmup_ratio * schedule.total_steps
    if warmup > 0 and step <= warmup:
        return base_lr * step / warmup
    span = schedule.total_steps - warmup
    if span <= 0:
        return base_lr
    progress = (step - warmup) / span
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------


def finite_diff_check(f, params: ParamDict, analytic: ParamDict, h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f`` maps a parameter dict to a scalar. Per element the error is
    ``|analytic - numeric| / max(1, |numeric|)``; the max over all elements of
    all parameters is returned. Run in float64 for trustworthy results.
    """
    work = {name: np.array(p, dtype=np.float64, copy=True) for name, p in params.items()}
    worst = 0.0
    for name in sorted(work):
        p = work[name]
        a = np.asarray(analytic[name], dtype=np.float64)
        if a.shape != p.shape:
            raise DimensionMismatchError(
                f"analytic gradient shape {a.shape} != parameter shape {p.shape} for '{name}'"
            )
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            f_plus = f(work)
            p[idx] = orig - h
            f_minus = f(work)
            p[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(a[idx] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
            it.iternext()
    return worst
