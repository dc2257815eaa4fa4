import numpy as np
import pytest

from everdex.adapter import adapter_backward, adapter_forward, adapter_init
from everdex.errors import DimensionMismatchError
from everdex.numerics import finite_diff_check


def test_fresh_adapter_is_exact_identity():
    rng = np.random.default_rng(0)
    params = adapter_init(dim=12, rank=4, seed=3)
    e = rng.standard_normal((5, 12)).astype(np.float32)
    out, _ = adapter_forward(e, params)
    np.testing.assert_array_equal(out, e)


def test_adapter_rank_bounds_enforced():
    with pytest.raises(DimensionMismatchError):
        adapter_init(dim=8, rank=0, seed=0)
    with pytest.raises(DimensionMismatchError):
        adapter_init(dim=8, rank=8, seed=0)
    adapter_init(dim=8, rank=7, seed=0)  # boundary rank is fine


def test_adapter_perturbed_output_differs():
    params = adapter_init(dim=10, rank=3, seed=1, dtype=np.float64)
    params.w_up += 0.1
    e = np.random.default_rng(1).standard_normal((4, 10))
    out, _ = adapter_forward(e, params)
    assert np.abs(out - e).max() > 1e-4


def test_param_dict_views_allow_in_place_updates():
    params = adapter_init(dim=6, rank=2, seed=5)
    views = params.param_dict()
    views["w_up"] += 1.0
    assert np.all(params.w_up == 1.0)
    assert set(views) == {"w_gate", "w_value", "w_up", "alpha", "ln_gain", "ln_bias"}


def test_adapter_backward_finite_diff():
    rng = np.random.default_rng(7)
    dim, rank, batch = 7, 3, 4
    params = adapter_init(dim=dim, rank=rank, seed=11, dtype=np.float64)
    # move off the zero-init point so every branch carries signal
    for name, arr in params.param_dict().items():
        arr += 0.05 * rng.standard_normal(arr.shape)
    e = rng.standard_normal((batch, dim))
    upstream = rng.standard_normal((batch, dim))

    out, tape = adapter_forward(e, params)
    grad_e, grads = adapter_backward(upstream, tape, params)

    base = {name: arr.copy() for name, arr in params.param_dict().items()}
    base["_e"] = e.copy()

    def f(p):
        trial = adapter_init(dim=dim, rank=rank, seed=11, dtype=np.float64)
        for name, arr in trial.param_dict().items():
            arr[...] = p[name]
        o, _ = adapter_forward(p["_e"], trial)
        return float((o * upstream).sum())

    analytic = dict(grads)
    analytic["_e"] = grad_e
    assert finite_diff_check(f, base, analytic) < 1e-6


def test_adapter_copy_is_deep():
    params = adapter_init(dim=6, rank=2, seed=0)
    dup = params.copy()
    dup.w_up += 1.0
    assert np.all(params.w_up == 0.0)
