"""Acceptance gate: every release criterion asserted at its stated tolerance.

The module covers five groups:

* manual gradients against central finite differences,
* prototype-count selection and bank ranking behavior,
* closed-form values (single-pair loss, identity adapters, metric arithmetic),
* protocol contracts (stage-local reads, frozen parameters, balanced replay,
  disjoint zero-shot classes, bit-stable reruns),
* benchmark ordering directions across the seven run modes, with pass margins
  pinned in tests/fixtures/benchmark_margins.json (derived by
  tools/derive_margins.py, never hand-edited).

The benchmark fixture trains 7 modes x 5 seeds at desk scale; expect a few
minutes for this module alone.
"""

import json
import os
import time

import numpy as np
import pytest

from everdex.adapter import adapter_backward, adapter_forward, adapter_init
from everdex.config import MODES, RunConfig, SynthConfig
from everdex.data import KIND_IMAGE, KIND_MEANING, KIND_SHAPE, DatasetIndex
from everdex.dictionary import (
    BankConfig,
    auto_k,
    build_bank,
    bank_extend,
    class_scores,
    rank_classes,
    rank_classes_batch,
)
from everdex.engine import ContinualEngine, compute_aa, compute_fgt
from everdex.errors import ProtocolError
from everdex.numerics import finite_diff_check, l2_normalize
from everdex.objectives import ContrastiveBatch, infonce_loss
from everdex.provider import AccessTrackingProvider, PostMap
from everdex.router import RouterParams, route_select, route_select_batch, router_ce_loss, router_init
from everdex.runner import dataset_paths, run_generate, run_training
from everdex.synthdata import generate

from conftest import in_memory_provider, tiny_run, tiny_synth

FIXTURE_PATH = os.path.join(os.path.dirname(__file__), "fixtures", "benchmark_margins.json")


# -- gradient correctness ---------------------------------------------------


def _chain_gradient_error(seed: int) -> float:
    """Full training chain: adapter -> post-map -> InfoNCE, params and input."""
    rng = np.random.default_rng(seed)
    dim, rank, n = 6, 2, 3
    ap = adapter_init(dim, rank, seed=seed, dtype=np.float64)
    for name, arr in ap.param_dict().items():
        arr += rng.standard_normal(arr.shape) * 0.3  # move off the identity
    pm = PostMap(dim, kind="orthogonal", seed=seed)
    anchors_raw = rng.standard_normal((n, dim))
    cand_raw = rng.standard_normal((2, dim))
    text_cand = l2_normalize(rng.standard_normal(dim))
    kinds = [KIND_IMAGE, KIND_IMAGE, KIND_MEANING]
    tau = 0.1

    def split(work):
        trial = ap.copy()
        for name, arr in trial.param_dict().items():
            arr[...] = work[name]
        return trial, work["_e"]

    def forward(work):
        trial, e = split(work)
        a_pre, tape_a = adapter_forward(e, trial)
        qa, ptape_a = pm.forward_with_tape(a_pre)
        c_pre, tape_c = adapter_forward(cand_raw, trial)
        qc, ptape_c = pm.forward_with_tape(c_pre)
        candidates = np.vstack([qc, text_cand[None, :]])
        batch = ContrastiveBatch(anchors=qa, candidates=candidates, candidate_kinds=kinds)
        loss, g_a, g_c = infonce_loss(batch, tau)
        return loss, (trial, tape_a, ptape_a, tape_c, ptape_c, g_a, g_c)

    base = {name: arr.copy() for name, arr in ap.param_dict().items()}
    base["_e"] = anchors_raw.copy()

    loss, (trial, tape_a, ptape_a, tape_c, ptape_c, g_a, g_c) = forward(base)
    g_pre_a = pm.backward(g_a, ptape_a)
    g_e, g_params = adapter_backward(g_pre_a, tape_a, trial)
    g_pre_c = pm.backward(g_c[:2], ptape_c)
    _, g_params_c = adapter_backward(g_pre_c, tape_c, trial)
    analytic = {name: g_params[name] + g_params_c[name] for name in g_params}
    analytic["_e"] = g_e

    return finite_diff_check(lambda w: forward(w)[0], base, analytic)


def _router_gradient_error(seed: int) -> float:
    rng = np.random.default_rng(seed)
    dim, hidden, t, n = 5, 6, 3, 4
    params = router_init(dim, hidden, t, seed=seed, dtype=np.float64)
    e = rng.standard_normal((n, dim))
    labels = rng.integers(0, t, size=n)

    def f(work):
        trial = RouterParams(
            w_hidden=work["w_hidden"], b_hidden=work["b_hidden"],
            w_head=work["w_head"], b_head=work["b_head"],
        )
        loss, _ = router_ce_loss(e, labels, trial)
        return loss

    base = {name: arr.copy() for name, arr in params.param_dict().items()}
    _, analytic = router_ce_loss(e, labels, params)
    return finite_diff_check(f, base, analytic)


def test_manual_gradients_match_finite_differences():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(100):
        worst = max(worst, _chain_gradient_error(seed))
        worst = max(worst, _router_gradient_error(seed))
    elapsed = time.perf_counter() - start
    assert worst < 1e-4, f"max relative gradient error {worst:.3e}"
    assert elapsed < 60.0, f"gradient sweep took {elapsed:.1f}s"


# -- prototype-count selection and ranking ----------------------------------


def test_auto_k_is_one_for_tiny_classes():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        pts = l2_normalize(rng.standard_normal((n, 6)))
        assert auto_k(pts) == 1  # floor(sqrt(n)) < 2 leaves nothing to search


def test_auto_k_respects_sqrt_cap():
    rng = np.random.default_rng(1)
    # 16 tight pairs would "want" many clusters; the cap allows at most 4
    centers = l2_normalize(rng.standard_normal((8, 16)))
    pts = l2_normalize(
        np.repeat(centers, 2, axis=0) + 0.01 * rng.standard_normal((16, 16))
    )
    assert auto_k(pts) <= 4
    many = l2_normalize(rng.standard_normal((2000, 8)))
    assert auto_k(many) <= 32


def _three_mode_class(rng, n_per=20, dim=8, spread=0.05):
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    centers = basis[:, :3].T
    pts = np.vstack(
        [c + spread * rng.standard_normal((n_per, dim)) for c in centers]
    )
    return l2_normalize(pts), centers


def test_auto_k_recovers_three_well_separated_modes():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        pts, centers = _three_mode_class(rng)
        if auto_k(pts, seed=seed) != 3:
            continue
        bank = build_bank(
            pts, [("s", "c")] * pts.shape[0], BankConfig(strategy="auto"), seed=seed
        )
        protos = bank.prototypes_for(0)
        sims = protos.astype(np.float64) @ centers.T
        # every true mode center matched by some prototype within cosine 0.05
        if protos.shape[0] == 3 and np.all(sims.max(axis=0) >= 0.95):
            hits += 1
    assert hits >= 95, f"three-mode recovery on {hits}/100 seeds"


def _clustered_bank(rng, n_classes=50, dim=12):
    rows, keys = [], []
    for c in range(n_classes):
        script = f"s{c % 3}"
        n_modes = 1 + int(rng.integers(3))
        centers = l2_normalize(rng.standard_normal((n_modes, dim)))
        n_pts = 9 + int(rng.integers(8))
        pts = centers[rng.integers(n_modes, size=n_pts)] + 0.1 * rng.standard_normal(
            (n_pts, dim)
        )
        rows.append(l2_normalize(pts))
        keys.extend([(script, f"c{c:03d}")] * n_pts)
    return build_bank(np.vstack(rows), keys, BankConfig(strategy="auto"), seed=0)


def test_bank_pointer_prefix_consistency():
    bank = _clustered_bank(np.random.default_rng(5))
    bank.validate()
    assert bank.pointers[0] == 0
    assert bank.pointers[-1] == bank.prototypes.shape[0]
    assert np.all(np.diff(bank.pointers) >= 1)
    slices = np.vstack([bank.prototypes_for(y) for y in range(bank.n_classes)])
    np.testing.assert_array_equal(slices, bank.prototypes)


def test_rank_classes_matches_brute_force():
    rng = np.random.default_rng(6)
    bank = _clustered_bank(rng)
    queries = l2_normalize(rng.standard_normal((20, bank.dim)))
    for q in queries:
        ranked = rank_classes(q, bank, bank.n_classes)
        brute = []
        for y, key in enumerate(bank.class_keys):
            protos = bank.prototypes_for(y).astype(np.float64)
            brute.append((key, float(np.max(protos @ q.astype(np.float64)))))
        brute.sort(key=lambda kv: (-kv[1], kv[0]))
        assert [k for k, _ in ranked] == [k for k, _ in brute]
        # same math, different BLAS summation order: ulp-level slack only
        np.testing.assert_allclose(
            [s for _, s in ranked], [s for _, s in brute], rtol=0, atol=1e-12
        )
    batch = rank_classes_batch(queries, bank, 10)
    for qi, q in enumerate(queries):
        singles = [bank.class_keys.index(k) for k, _ in rank_classes(q, bank, 10)]
        np.testing.assert_array_equal(batch[qi], singles)


def test_bank_extend_preserves_existing_class_scores():
    rng = np.random.default_rng(7)
    dim = 10
    first = l2_normalize(rng.standard_normal((40, dim)))
    keys = [(f"s{i % 2}", f"c{i % 5}") for i in range(40)]
    cfg = BankConfig(strategy="auto")
    bank = build_bank(first, keys, cfg, seed=0)
    queries = l2_normalize(rng.standard_normal((6, dim)))
    before = class_scores(queries, bank)

    extra = l2_normalize(rng.standard_normal((24, dim)))
    extra_keys = [("s2", f"n{i % 3}") for i in range(24)]
    grown = bank_extend(bank, extra, extra_keys, cfg)
    grown.validate()
    assert grown.n_classes == bank.n_classes + 3
    after = class_scores(queries, grown)
    np.testing.assert_array_equal(after[:, : bank.n_classes], before)
    np.testing.assert_array_equal(grown.prototypes[: bank.prototypes.shape[0]], bank.prototypes)


# -- closed-form values -----------------------------------------------------


def test_infonce_single_pair_loss_is_zero():
    v = l2_normalize(np.array([0.3, -1.2, 0.5]))
    batch = ContrastiveBatch(
        anchors=v[None, :], candidates=v[None, :], candidate_kinds=[KIND_IMAGE]
    )
    loss, _, _ = infonce_loss(batch, tau=0.1)
    assert abs(loss) <= 1e-9


def test_infonce_uniform_similarity_equals_log_batch_size():
    rng = np.random.default_rng(8)
    b, dim = 7, 5
    anchors = l2_normalize(rng.standard_normal((b, dim)))
    candidates = np.tile(l2_normalize(rng.standard_normal(dim)), (b, 1))
    batch = ContrastiveBatch(
        anchors=anchors, candidates=candidates, candidate_kinds=[KIND_MEANING] * b
    )
    loss, _, _ = infonce_loss(batch, tau=0.1)
    assert abs(loss - np.log(b)) <= 1e-9


def test_fresh_adapter_is_exact_identity():
    rng = np.random.default_rng(9)
    params = adapter_init(dim=32, rank=8, seed=4)
    e = rng.standard_normal((10, 32)).astype(np.float32)
    out, _ = adapter_forward(e, params)
    np.testing.assert_array_equal(out, e)


def test_router_ties_break_to_lowest_index():
    assert route_select(np.array([0.25, 0.25, 0.25, 0.25])) == 0
    np.testing.assert_array_equal(
        route_select_batch(np.array([[0.5, 0.5], [0.3, 0.7], [1 / 3, 1 / 3]])), [0, 1, 0]
    )


def test_aa_and_fgt_match_hand_computation():
    matrix = [[1.0], [0.5, 1.0]]
    assert compute_aa(matrix[-1]) == 0.75
    assert compute_fgt(matrix) == 0.5


# -- protocol contracts -----------------------------------------------------


def _three_script_world(seed=0):
    cfg = tiny_synth(seed=seed, scripts=("CS", "WSC", "SAC"), chars_per_script=5)
    dataset = generate(cfg)
    provider = in_memory_provider(dataset, cfg.dim)
    index = DatasetIndex(dataset.records)
    run = tiny_run(stage_order=("CS", "WSC", "SAC"), buffer_capacity=30)
    return dataset, provider, index, run


def test_phase1_never_updates_frozen_adapters():
    _, provider, index, _ = _three_script_world()
    run = tiny_run(stage_order=("CS", "WSC", "SAC"), phase2_epochs=0)
    engine = ContinualEngine(provider, index, run)
    engine.run_stage(1)
    snaps = [{k: v.copy() for k, v in a.param_dict().items()} for a in engine.adapters]
    engine.run_stage(2)
    engine.run_stage(3)
    for snap, adapter in zip(snaps, engine.adapters):
        for k, v in adapter.param_dict().items():
            np.testing.assert_array_equal(snap[k], v)


def test_training_reads_stay_within_observed_scripts():
    dataset, provider, index, run = _three_script_world()
    tracked = AccessTrackingProvider(provider)
    engine = ContinualEngine(tracked, index, run)
    order = list(run.stage_order)
    for t in range(1, len(order) + 1):
        engine.run_stage(t)
        future = set(order[t:])
        future_visual = {
            r.id for r in dataset.records if r.kind == KIND_IMAGE and r.script in future
        }
        future_text = {
            r.id for r in dataset.records if r.kind == KIND_SHAPE and r.script in future
        } | {
            r.id
            for r in dataset.records
            if r.kind == KIND_MEANING and any(r.char.startswith(s + "-u") for s in future)
        }
        stray_v = tracked.visual_ids & future_visual
        stray_t = tracked.text_ids & future_text
        assert not stray_v, f"stage {t} read future images: {sorted(stray_v)[:5]}"
        assert not stray_t, f"stage {t} read future texts: {sorted(stray_t)[:5]}"


def test_replay_buffer_stays_script_balanced():
    _, provider, index, run = _three_script_world()
    engine = ContinualEngine(provider, index, run)
    for t in range(1, len(run.stage_order) + 1):
        engine.run_stage(t)
        counts = engine.buffer.per_script_counts()
        assert set(counts) == set(engine.observed)
        assert sum(counts.values()) <= run.buffer_capacity
        assert max(counts.values()) - min(counts.values()) <= 1


@pytest.fixture(scope="module")
def margins_fixture():
    with open(FIXTURE_PATH, "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_generated_data_closed_set_and_zero_shot_disjoint(margins_fixture):
    config = SynthConfig.from_json_dict(margins_fixture["synth_config"])
    dataset = generate(config)
    index = DatasetIndex(dataset.records)
    index.verify_closed_set()
    index.verify_zero_shot_disjoint()
    assert not index.zs_chars & index.train_chars
    for key in index.test_class_images:
        assert key in index.train_class_images
    # every zero-shot class is low-resource and has a meaning text to match
    for char in index.zs_chars:
        assert index.meaning_by_char.get(char) is not None
    per_char: dict[str, int] = {}
    for img in index.zs_images:
        per_char[index.by_id[img].char] = per_char.get(index.by_id[img].char, 0) + 1
    assert max(per_char.values()) <= config.zero_shot_max_images


def test_fixed_seed_reproduces_run_bitwise(tmp_path):
    data_dir = str(tmp_path / "data")
    run_generate(tiny_synth(), data_dir)
    manifest, embeddings = dataset_paths(data_dir)
    outputs = []
    for label in ("a", "b"):
        out_dir = str(tmp_path / label)
        # identical config both times; only the artifact directory differs
        cfg = tiny_run(manifest_path=manifest, embeddings_path=embeddings)
        run_training(cfg, out_dir)
        with open(os.path.join(out_dir, "report.json"), "rb") as fh:
            report = json.load(fh)
        report.pop("timings_sec")
        ckpts = [
            open(os.path.join(out_dir, f"checkpoint_stage{t}.zip"), "rb").read()
            for t in (1, 2)
        ]
        outputs.append((json.dumps(report, sort_keys=True), ckpts))
    assert outputs[0][0] == outputs[1][0]
    for c1, c2 in zip(outputs[0][1], outputs[1][1]):
        assert c1 == c2


# -- benchmark ordering directions ------------------------------------------


@pytest.fixture(scope="module")
def benchmark_gaps(margins_fixture, tmp_path_factory):
    """Train all seven modes on every fixture seed and measure ordering gaps."""
    fx = margins_fixture
    root = tmp_path_factory.mktemp("bench")
    per_seed = []
    for seed in fx["seeds"]:
        synth = SynthConfig.from_json_dict({**fx["synth_config"], "seed": seed})
        data_dir = str(root / f"data-s{seed}")
        run_generate(synth, data_dir)
        manifest, embeddings = dataset_paths(data_dir)
        reports = {}
        for mode in MODES:
            cfg = RunConfig(
                mode=mode,
                seed=seed,
                manifest_path=manifest,
                embeddings_path=embeddings,
                **fx["run_overrides"],
            )
            reports[mode], _ = run_training(cfg)
        aa6 = {m: reports[m]["aa"]["top1"][-1] for m in reports}
        fgt = {m: reports[m]["fgt"]["top1"] for m in reports}
        zs1 = {m: reports[m]["zero_shot"]["zs1"] for m in reports}
        per_seed.append(
            {
                "aa6_full_minus_frozen": aa6["full"] - aa6["frozen"],
                "fgt_seq_minus_full": fgt["seq_single_adapter"] - fgt["full"],
                "aa6_gold_minus_full": aa6["gold_routing"] - aa6["full"],
                "aa6_full_minus_mean": aa6["full"] - aa6["mean_proto"],
                "aa6_full_minus_rs": aa6["full"] - aa6["rs_proto"],
                "zs1_full_minus_image_only": zs1["full"] - zs1["image_only_phase1"],
            }
        )
    return per_seed


def _assert_direction(gaps, fixture, key):
    margin = fixture["margins"][key]
    need = fixture["min_pass_seeds"]
    per_seed = [g[key] for g in gaps]
    passing = sum(1 for g in per_seed if g > margin)
    detail = " ".join(f"{g:+.3f}" for g in per_seed)
    assert passing >= need, (
        f"{key}: gap > {margin:+.3f} on {passing}/{len(per_seed)} seeds "
        f"(need {need}); per-seed gaps: {detail}"
    )


def test_adapters_beat_frozen_baseline(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "aa6_full_minus_frozen")


def test_shared_adapter_forgets_more_than_per_script(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "fgt_seq_minus_full")


def test_learned_routing_tracks_gold_routing(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "aa6_gold_minus_full")


def test_auto_prototypes_beat_single_mean(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "aa6_full_minus_mean")


def test_auto_prototypes_beat_random_exemplars(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "aa6_full_minus_rs")


def test_text_supervision_lifts_zero_shot(benchmark_gaps, margins_fixture):
    _assert_direction(benchmark_gaps, margins_fixture, "zs1_full_minus_image_only")
