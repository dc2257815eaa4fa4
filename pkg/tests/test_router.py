import numpy as np
import pytest

from everdex.errors import DimensionMismatchError, ProtocolError
from everdex.numerics import finite_diff_check
from everdex.router import (
    route_probs,
    route_select,
    route_select_batch,
    router_ce_loss,
    router_grow,
    router_init,
)


def test_route_probs_rows_sum_to_one():
    params = router_init(dim=10, hidden=16, n_scripts=4, seed=0)
    e = np.random.default_rng(0).standard_normal((6, 10)).astype(np.float32)
    p = route_probs(e, params)
    assert p.shape == (6, 4)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-5)


def test_route_select_ties_break_to_lowest_index():
    assert route_select(np.array([0.25, 0.25, 0.25, 0.25])) == 0
    assert route_select(np.array([0.1, 0.45, 0.45])) == 1
    picks = route_select_batch(np.array([[0.5, 0.5], [0.2, 0.8]]))
    np.testing.assert_array_equal(picks, [0, 1])


def test_router_ce_loss_matches_finite_diff():
    rng = np.random.default_rng(3)
    params = router_init(dim=6, hidden=8, n_scripts=3, seed=2, dtype=np.float64)
    e = rng.standard_normal((5, 6))
    labels = np.array([0, 2, 1, 1, 0])

    loss, grads = router_ce_loss(e, labels, params)
    assert loss > 0

    def f(p):
        trial = router_init(dim=6, hidden=8, n_scripts=3, seed=2, dtype=np.float64)
        for name, arr in trial.param_dict().items():
            arr[...] = p[name]
        l, _ = router_ce_loss(e, labels, trial)
        return l

    base = {name: arr.copy() for name, arr in params.param_dict().items()}
    assert finite_diff_check(f, base, grads) < 1e-6


def test_router_ce_rejects_bad_labels():
    params = router_init(dim=4, hidden=8, n_scripts=2, seed=0)
    e = np.zeros((2, 4), dtype=np.float32)
    with pytest.raises(ProtocolError):
        router_ce_loss(e, np.array([0, 2]), params)
    with pytest.raises(DimensionMismatchError):
        router_ce_loss(e, np.array([0]), params)


def test_router_grow_keeps_trunk_and_reinits_head():
    params = router_init(dim=5, hidden=8, n_scripts=2, seed=7)
    trunk_before = params.w_hidden.copy()
    grown = router_grow(params, new_t=3, seed=9)
    assert grown.n_scripts == 3
    np.testing.assert_array_equal(grown.w_hidden, trunk_before)
    np.testing.assert_array_equal(grown.b_hidden, params.b_hidden)
    assert grown.w_head.shape == (3, 8)
    # fresh head: not a copy of the old rows
    assert not np.array_equal(grown.w_head[:2], params.w_head)
    with pytest.raises(ProtocolError):
        router_grow(params, new_t=4, seed=9)  # one script per stage


def test_router_single_script_ce_is_zero():
    params = router_init(dim=4, hidden=8, n_scripts=1, seed=0, dtype=np.float64)
    e = np.random.default_rng(0).standard_normal((3, 4))
    loss, grads = router_ce_loss(e, np.zeros(3, dtype=np.int64), params)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert all(np.allclose(g, 0.0, atol=1e-12) for g in grads.values())
