import math

import numpy as np
import pytest
from scipy.special import expit, logsumexp
from scipy.special import softmax as scipy_softmax

from everdex.errors import DimensionMismatchError, ProtocolError
from everdex.numerics import (
    CosineSchedule,
    adamw_init,
    adamw_step,
    cosine_sim,
    finite_diff_check,
    l2_normalize,
    l2_normalize_backward,
    layer_norm,
    layer_norm_backward,
    lr_at,
    sigmoid,
    softmax,
    swiglu_gate,
    swiglu_gate_backward,
)


def test_sigmoid_matches_scipy():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(200) * 6
    np.testing.assert_allclose(sigmoid(x), expit(x), rtol=0, atol=1e-12)


def test_softmax_matches_scipy():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((8, 5)) * 10
    np.testing.assert_allclose(softmax(z), scipy_softmax(z, axis=-1), atol=1e-12)
    np.testing.assert_allclose(softmax(z).sum(axis=-1), 1.0, atol=1e-12)


def test_layer_norm_hand_case():
    # population std of [1, 3] is 1, mean 2 -> normalized [-1, 1]
    out = layer_norm(np.array([1.0, 3.0]), np.ones(2), np.zeros(2), eps=0.0)
    np.testing.assert_allclose(out, [-1.0, 1.0], atol=1e-12)
    out = layer_norm(np.array([1.0, 3.0]), np.array([2.0, 2.0]), np.array([1.0, -1.0]), eps=0.0)
    np.testing.assert_allclose(out, [-1.0, 1.0], atol=1e-12)


def test_layer_norm_backward_finite_diff():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((3, 6))
    gain = rng.standard_normal(6)
    bias = rng.standard_normal(6)
    upstream = rng.standard_normal((3, 6))

    def f(p):
        return float((layer_norm(p["x"], p["gain"], p["bias"]) * upstream).sum())

    gx, gg, gb = layer_norm_backward(x, gain, bias, upstream)
    err = finite_diff_check(f, {"x": x, "gain": gain, "bias": bias},
                            {"x": gx, "gain": gg, "bias": gb})
    assert err < 1e-6


def test_swiglu_gate_backward_finite_diff():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((4, 5))
    upstream = rng.standard_normal((4, 5))

    def f(p):
        return float((swiglu_gate(p["a"], p["b"]) * upstream).sum())

    ga, gb = swiglu_gate_backward(a, b, upstream)
    assert finite_diff_check(f, {"a": a, "b": b}, {"a": ga, "b": gb}) < 1e-6


def test_l2_normalize_rows_unit():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((7, 9)) * 5
    norms = np.linalg.norm(l2_normalize(x), axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_l2_normalize_backward_finite_diff():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 4)) + 2.0
    upstream = rng.standard_normal((3, 4))

    def f(p):
        return float((l2_normalize(p["x"]) * upstream).sum())

    gx = l2_normalize_backward(x, upstream)
    assert finite_diff_check(f, {"x": x}, {"x": gx}) < 1e-6


def test_cosine_sim_basics():
    assert cosine_sim([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.0, abs=1e-12)
    assert cosine_sim([2.0, 0.0], [5.0, 0.0]) == pytest.approx(1.0)
    assert cosine_sim([1.0, 1.0], [-1.0, -1.0]) == pytest.approx(-1.0)


def _reference_adamw(params, grads_seq, lr, wd, b1=0.9, b2=0.999, eps=1e-8):
    """Straight transcription of decoupled weight decay Adam, step-indexed."""
    p = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    m = {k: np.zeros_like(v) for k, v in p.items()}
    v = {k: np.zeros_like(val) for k, val in p.items()}
    for t, grads in enumerate(grads_seq, start=1):
        for k in p:
            p[k] *= 1.0 - lr * wd
            m[k] = b1 * m[k] + (1 - b1) * grads[k]
            v[k] = b2 * v[k] + (1 - b2) * grads[k] ** 2
            mh = m[k] / (1 - b1**t)
            vh = v[k] / (1 - b2**t)
            p[k] -= lr * mh / (np.sqrt(vh) + eps)
    return p


def test_adamw_matches_reference_over_steps():
    rng = np.random.default_rng(6)
    params = {"w": rng.standard_normal((3, 2)), "b": rng.standard_normal(2)}
    grads_seq = [
        {"w": rng.standard_normal((3, 2)), "b": rng.standard_normal(2)} for _ in range(5)
    ]
    expected = _reference_adamw(params, grads_seq, lr=0.01, wd=0.1)

    live = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    state = adamw_init(live, weight_decay=0.1)
    for grads in grads_seq:
        adamw_step(live, grads, state, lr=0.01)
    for k in expected:
        np.testing.assert_allclose(live[k], expected[k], atol=1e-12)


def test_adamw_updates_in_place_and_requires_all_grads():
    rng = np.random.default_rng(7)
    w = rng.standard_normal(4)
    params = {"w": w}
    state = adamw_init(params)
    adamw_step(params, {"w": np.ones(4)}, state, lr=0.1)
    assert params["w"] is w  # same buffer mutated
    with pytest.raises((KeyError, ProtocolError, DimensionMismatchError)):
        adamw_step(params, {}, state, lr=0.1)


def test_cosine_schedule_endpoints_and_warmup():
    sched = CosineSchedule(warmup_ratio=0.1, total_steps=100)
    assert lr_at(sched, 0, 1.0) == pytest.approx(0.0)
    assert lr_at(sched, 5, 1.0) == pytest.approx(0.5)
    assert lr_at(sched, 10, 1.0) == pytest.approx(1.0)
    mid = 10 + (100 - 10) // 2
    assert lr_at(sched, mid, 1.0) == pytest.approx(0.5)
    assert lr_at(sched, 100, 1.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ProtocolError):
        lr_at(sched, 101, 1.0)


def test_cosine_schedule_no_warmup_is_pure_cosine():
    sched = CosineSchedule(warmup_ratio=0.0, total_steps=10)
    for step in range(11):
        expected = 0.5 * (1 + math.cos(math.pi * step / 10))
        assert lr_at(sched, step, 2.0) == pytest.approx(2.0 * expected)


def test_finite_diff_check_detects_wrong_gradient():
    x = np.array([1.0, 2.0])

    def f(p):
        return float((p["x"] ** 2).sum())

    good = {"x": 2 * x}
    bad = {"x": 2 * x + 0.5}
    assert finite_diff_check(f, {"x": x}, good) < 1e-6
    assert finite_diff_check(f, {"x": x}, bad) > 0.05
