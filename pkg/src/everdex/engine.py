"""Staged continual onboarding engine.

One stage = onboard one script: Phase-I trains a fresh adapter on that
script's pairs, the replay buffer is rebalanced, Phase-II trains the whole
adapter bank on buffered replay while the router learns script identification
on frozen features, the prototype bank is rebuilt through the inference path,
and the union of observed test splits is evaluated. Ablation modes switch off
individual pieces (see MODE_RULES) without touching the shared machinery.

Everything is deterministic per (config, seed): rng streams are derived from
(seed, purpose, stage), so repeated runs produce bit-identical metrics.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adapter import AdapterParams, adapter_backward, adapter_forward, adapter_init
from .config import (
    MODE_FROZEN,
    MODE_FULL,
    MODE_GOLD,
    MODE_IMAGE_ONLY,
    MODE_MEAN_PROTO,
    MODE_RS_PROTO,
    MODE_SEQ_SINGLE,
    RunConfig,
)
from .data import KIND_IMAGE, DatasetIndex
from .dictionary import (
    STRATEGY_AUTO,
    STRATEGY_MEAN,
    STRATEGY_RANDOM,
    BankConfig,
    PrototypeBank,
    TextDictionary,
    build_bank,
    rank_classes_batch,
    rank_text,
)
from .errors import ContractViolationError, DimensionMismatchError, ProtocolError
from .numerics import CosineSchedule, adamw_init, adamw_step, lr_at
from .objectives import (
    SOURCE_VISUAL,
    ContrastiveBatch,
    PositiveDraw,
    infonce_loss,
    phase2_pair_batches,
    sample_positive,
)
from .provider import AccessTrackingProvider, EmbeddingProvider
from .router import (
    RouterParams,
    route_probs,
    route_select_batch,
    router_ce_loss,
    router_grow,
    router_init,
)

ROUTING_LEARNED = "learned"
ROUTING_GOLD = "gold"
ROUTING_NONE = "none"


@dataclass(frozen=True)
class ModeRules:
    """What a run mode trains and how it routes at inference."""

    trains_adapters: bool
    per_script_adapters: bool
    runs_phase2: bool
    trains_router: bool
    routing: str
    bank_strategy: str = STRATEGY_AUTO
    image_only_positives: bool = False


MODE_RULES: dict[str, ModeRules] = {
    MODE_FULL: ModeRules(True, True, True, True, ROUTING_LEARNED),
    MODE_FROZEN: ModeRules(False, False, False, False, ROUTING_NONE),
    MODE_SEQ_SINGLE: ModeRules(True, False, False, False, ROUTING_NONE),
    MODE_GOLD: ModeRules(True, True, True, False, ROUTING_GOLD),
    MODE_MEAN_PROTO: ModeRules(True, True, True, True, ROUTING_LEARNED, STRATEGY_MEAN),
    MODE_RS_PROTO: ModeRules(True, True, True, True, ROUTING_LEARNED, STRATEGY_RANDOM),
    MODE_IMAGE_ONLY: ModeRules(
        True, True, True, True, ROUTING_LEARNED, STRATEGY_AUTO, image_only_positives=True
    ),
}


@dataclass(frozen=True)
class BufferEntry:
    """Reference to one buffered training image (id + script-aware class)."""

    image_id: str
    script: str
    char: str


@dataclass
class MemoryBuffer:
    capacity: int
    entries: list[BufferEntry] = field(default_factory=list)

    def per_script_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.script] = counts.get(e.script, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.entries)


def _quotas(capacity: int, n_scripts: int) -> list[int]:
    # floor split; the remainder goes to the earliest-observed scripts
    base, rem = divmod(capacity, n_scripts)
    return [base + (1 if i < rem else 0) for i in range(n_scripts)]


def buffer_update(
    buffer: MemoryBuffer,
    stage_entries: list[BufferEntry],
    observed_scripts: list[str],
    rng: np.random.Generator,
) -> MemoryBuffer:
    """Rebalance to per-script quotas; the newest script fills from its stage set.

    Previously buffered entries are retained first (evicted uniformly only when
    a script exceeds its shrunken quota); the new script draws uniformly without
    replacement from the stage training set. Old scripts are never topped up:
    their earlier training pools are no longer accessible.
    """
    if not observed_scripts:
        raise ProtocolError("buffer_update needs at least one observed script")
    new_script = observed_scripts[-1]
    quotas = _quotas(buffer.capacity, len(observed_scripts))
    by_script: dict[str, list[BufferEntry]] = {s: [] for s in observed_scripts}
    for e in buffer.entries:
        if e.script not in by_script:
            raise ProtocolError(f"buffered script {e.script!r} is not in the observed set")
        by_script[e.script].append(e)
    for e in stage_entries:
        if e.script != new_script:
            raise ProtocolError(
                f"stage entry script {e.script!r} does not match the onboarding script {new_script!r}"
            )

    kept: list[BufferEntry] = []
    for i, script in enumerate(observed_scripts):
        pool = stage_entries if script == new_script else by_script[script]
        quota = quotas[i]
        if len(pool) <= quota:
            kept.extend(pool)
        else:
            picks = rng.choice(len(pool), size=quota, replace=False)
            kept.extend(pool[int(j)] for j in np.sort(picks))
    return MemoryBuffer(capacity=buffer.capacity, entries=kept)


def compute_aa(row: list[float]) -> float:
    """Average accuracy over the observed test splits after a stage."""
    if not row:
        raise ProtocolError("cannot average an empty accuracy row")
    return float(sum(row) / len(row))


def compute_fgt(matrix: list[list[float]]) -> float:
    """Mean drop from each split's best pre-final accuracy to its final accuracy.

    Terms are signed (not clamped at zero); requires at least two stages.
    """
    T = len(matrix)
    if T < 2:
        raise ProtocolError("forgetting needs at least two completed stages")
    for t, row in enumerate(matrix, start=1):
        if len(row) != t:
            raise ProtocolError("accuracy matrix must be lower-triangular")
    total = 0.0
    for i in range(T - 1):
        best = max(matrix[t][i] for t in range(i, T - 1))
        total += best - matrix[T - 1][i]
    return float(total / (T - 1))


def _stream_id(purpose: str) -> int:
    return int.from_bytes(hashlib.blake2b(purpose.encode(), digest_size=4).digest(), "big")


class ContinualEngine:
    """Drives the stage-by-stage protocol over a frozen embedding provider."""

    def __init__(self, provider: EmbeddingProvider, index: DatasetIndex, config: RunConfig):
        config.validate()
        if provider.dim != config.dim:
            raise DimensionMismatchError(
                f"provider dim {provider.dim} != configured dim {config.dim}"
            )
        missing = [s for s in config.stage_order if s not in index.train_images_by_script]
        if missing:
            raise ProtocolError(f"stage order names scripts without training data: {missing}")
        index.verify_closed_set()
        self.provider = provider
        self.index = index
        self.config = config
        self.rules = MODE_RULES[config.mode]

        self.stage = 0
        self.observed: list[str] = []
        self.adapters: list[AdapterParams] = []
        self.adapter_scripts: list[str] = []
        self.router: RouterParams | None = None
        self.bank: PrototypeBank | None = None
        self.buffer = MemoryBuffer(capacity=config.buffer_capacity)
        self.accuracy: dict[str, list[list[float]]] = {"top1": [], "top10": []}
        self.timings_sec: list[float] = []
        self.zero_shot: dict[str, float | None] = {"zs1": None, "zs20": None}

    # -- seeded randomness --------------------------------------------------

    def _rng(self, purpose: str, stage: int) -> np.random.Generator:
        seq = np.random.SeedSequence((self.config.seed, _stream_id(purpose), stage))
        return np.random.default_rng(seq)

    def _seed_int(self, purpose: str, stage: int) -> int:
        raw = f"{self.config.seed}/{purpose}/{stage}".encode()
        return int.from_bytes(hashlib.blake2b(raw, digest_size=8).digest(), "big") % (2**63)

    # -- embedding paths ----------------------------------------------------

    def _slot_of_script(self, script: str) -> int:
        try:
            return self.observed.index(script)
        except ValueError:
            raise ProtocolError(f"script {script!r} has not been onboarded") from None

    def _embed_queries(self, ids: list[str], provider) -> np.ndarray:
        """Inference path: route (per mode), adapt, then map to retrieval space."""
        if not ids:
            return np.zeros((0, self.config.dim), dtype=np.float32)
        feats = provider.visual_batch(ids).astype(np.float32)
        if self.rules.routing == ROUTING_NONE or not self.adapters:
            if self.adapters:  # single shared adapter (sequential mode)
                adapted, _ = adapter_forward(feats, self.adapters[0])
            else:
                adapted = feats
            return self.provider.post_map.forward(adapted).astype(np.float32)
        if self.rules.routing == ROUTING_GOLD:
            slots = np.array([self._slot_of_script(self.index.by_id[i].script) for i in ids])
        else:
            probs = route_probs(feats, self.router)
            slots = route_select_batch(probs)
        adapted = np.empty_like(feats)
        for slot in np.unique(slots):
            rows = np.nonzero(slots == slot)[0]
            adapted[rows], _ = adapter_forward(feats[rows], self.adapters[int(slot)])
        return self.provider.post_map.forward(adapted).astype(np.float32)

    # -- Phase I ------------------------------------------------------------

    def _visual_only_draw(self, anchor_id: str, rng: np.random.Generator) -> PositiveDraw:
        rec = self.index.by_id[anchor_id]
        pool = self.index.train_class_images[(rec.script, rec.char)]
        others = [i for i in pool if i != anchor_id]
        pick = anchor_id if not others else others[int(rng.integers(len(others)))]
        return PositiveDraw(SOURCE_VISUAL, pick, KIND_IMAGE)

    def _phase1(self, script: str) -> None:
        cfg = self.config
        train_ids = self.index.train_images_by_script.get(script, [])
        if not train_ids:
            raise ProtocolError(f"script {script!r} has no training images")

        if not self.rules.trains_adapters:
            return
        if self.rules.per_script_adapters or not self.adapters:
            adapter = adapter_init(
                cfg.dim,
                cfg.adapter_rank,
                seed=self._seed_int("adapter-init", self.stage),
                script_id=len(self.adapters),
                alpha=cfg.adapter_alpha,
            )
            self.adapters.append(adapter)
            self.adapter_scripts.append(script if self.rules.per_script_adapters else "*")
        adapter = self.adapters[-1] if self.rules.per_script_adapters else self.adapters[0]
        if cfg.phase1_epochs == 0:
            return

        tracker = AccessTrackingProvider(self.provider)
        opt = adamw_init(adapter.param_dict(), weight_decay=cfg.weight_decay)
        n = len(train_ids)
        steps_per_epoch = math.ceil(n / cfg.batch_size)
        schedule = CosineSchedule(cfg.warmup_ratio, cfg.phase1_epochs * steps_per_epoch)
        rng = self._rng("phase1", self.stage)
        step = 0
        for _ in range(cfg.phase1_epochs):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                chunk = [train_ids[int(i)] for i in order[start : start + cfg.batch_size]]
                step += 1
                self._phase1_step(chunk, adapter, opt, lr_at(schedule, step, cfg.lr), tracker, rng)

        self._check_phase1_access(tracker, script, train_ids)

    def _phase1_step(
        self,
        chunk: list[str],
        adapter: AdapterParams,
        opt,
        lr: float,
        provider: AccessTrackingProvider,
        rng: np.random.Generator,
    ) -> float:
        cfg = self.config
        post_map = self.provider.post_map
        feats = provider.visual_batch(chunk).astype(np.float32)
        a_pre, tape_a = adapter_forward(feats, adapter)
        qa, ptape_a = post_map.forward_with_tape(a_pre)

        if self.rules.image_only_positives:
            draws = [self._visual_only_draw(aid, rng) for aid in chunk]
        else:
            draws = [sample_positive(aid, self.index, rng) for aid in chunk]
        img_rows = [i for i, d in enumerate(draws) if d.kind == KIND_IMAGE]
        txt_rows = [i for i, d in enumerate(draws) if d.kind != KIND_IMAGE]

        candidates = np.empty_like(qa)
        tape_c = ptape_c = None
        if img_rows:
            pos_feats = provider.visual_batch([draws[i].positive_id for i in img_rows])
            c_pre, tape_c = adapter_forward(pos_feats.astype(np.float32), adapter)
            qc, ptape_c = post_map.forward_with_tape(c_pre)
            candidates[img_rows] = qc
        for i in txt_rows:
            candidates[i] = provider.text_embedding(draws[i].positive_id).astype(np.float32)

        batch = ContrastiveBatch(
            anchors=qa, candidates=candidates, candidate_kinds=[d.kind for d in draws]
        )
        loss, g_anchors, g_candidates = infonce_loss(batch, cfg.tau)

        grads = {name: np.zeros_like(p) for name, p in adapter.param_dict().items()}
        g_pre = post_map.backward(g_anchors, ptape_a)
        _, g_params = adapter_backward(g_pre, tape_a, adapter)
        for name in grads:
            grads[name] += g_params[name]
        if img_rows:
            g_pre_c = post_map.backward(g_candidates[img_rows], ptape_c)
            _, g_params_c = adapter_backward(g_pre_c, tape_c, adapter)
            for name in grads:
                grads[name] += g_params_c[name]

        adamw_step(adapter.param_dict(), grads, opt, lr)
        return loss

    def _check_phase1_access(
        self, tracker: AccessTrackingProvider, script: str, train_ids: list[str]
    ) -> None:
        allowed_visual = set(train_ids)
        allowed_text: set[str] = set()
        for _, char in self.index.train_classes(script):
            mid = self.index.meaning_by_char.get(char)
            if mid is not None:
                allowed_text.add(mid)
        for img in train_ids:
            sid = self.index.shape_by_image.get(img)
            if sid is not None:
                allowed_text.add(sid)
        stray_visual = tracker.visual_ids - allowed_visual
        stray_text = tracker.text_ids - allowed_text
        if stray_visual or stray_text:
            examples = sorted(stray_visual | stray_text)[:5]
            raise ContractViolationError(
                f"stage {self.stage} Phase-I touched out-of-stage records: {examples}"
            )

    # -- buffer + Phase II --------------------------------------------------

    def _update_buffer(self, script: str) -> None:
        stage_entries = [
            BufferEntry(image_id=i, script=script, char=self.index.by_id[i].char)
            for i in self.index.train_images_by_script[script]
        ]
        self.buffer = buffer_update(
            self.buffer, stage_entries, self.observed, self._rng("buffer", self.stage)
        )

    def _ensure_router(self) -> None:
        cfg = self.config
        if self.router is None:
            self.router = router_init(
                cfg.dim, cfg.router_hidden, 1, seed=self._seed_int("router-init", self.stage)
            )
        elif self.router.n_scripts < len(self.observed):
            self.router = router_grow(
                self.router, len(self.observed), seed=self._seed_int("router-grow", self.stage)
            )

    def _phase2(self) -> None:
        cfg = self.config
        if not self.rules.runs_phase2:
            return
        if self.rules.trains_router:
            self._ensure_router()
        if cfg.phase2_epochs == 0 or not self.buffer.entries:
            return

        tracker = AccessTrackingProvider(self.provider)
        merged: dict[str, np.ndarray] = {}
        for slot, adapter in enumerate(self.adapters):
            for name, arr in adapter.param_dict().items():
                merged[f"sia{slot}/{name}"] = arr
        opt_adapters = adamw_init(merged, weight_decay=cfg.weight_decay)
        opt_router = (
            adamw_init(self.router.param_dict(), weight_decay=cfg.weight_decay)
            if self.rules.trains_router
            else None
        )

        entries = [(e.image_id, e.script, e.char) for e in self.buffer.entries]
        steps_per_epoch = math.ceil(len(entries) / cfg.batch_size)
        schedule = CosineSchedule(cfg.warmup_ratio, cfg.phase2_epochs * steps_per_epoch)
        rng = self._rng("phase2", self.stage)
        step = 0
        for _ in range(cfg.phase2_epochs):
            for batch_pairs in phase2_pair_batches(entries, rng, cfg.batch_size):
                step += 1
                self._phase2_step(
                    batch_pairs, merged, opt_adapters, opt_router,
                    lr_at(schedule, step, cfg.lr), tracker,
                )

        allowed = {e.image_id for e in self.buffer.entries}
        stray = tracker.visual_ids - allowed
        if stray or tracker.text_ids:
            examples = sorted(stray | tracker.text_ids)[:5]
            raise ContractViolationError(
                f"stage {self.stage} Phase-II touched non-buffer records: {examples}"
            )

    def _phase2_step(
        self,
        batch_pairs: list[tuple[str, str, str]],
        merged: dict[str, np.ndarray],
        opt_adapters,
        opt_router,
        lr: float,
        provider: AccessTrackingProvider,
    ) -> float:
        cfg = self.config
        post_map = self.provider.post_map
        anchor_ids = [a for a, _, _ in batch_pairs]
        positive_ids = [p for _, p, _ in batch_pairs]
        scripts = [s for _, _, s in batch_pairs]
        slots = np.array([self._slot_of_script(s) for s in scripts])

        feats_a = provider.visual_batch(anchor_ids).astype(np.float32)
        feats_p = provider.visual_batch(positive_ids).astype(np.float32)
        qa = np.empty_like(feats_a)
        qc = np.empty_like(feats_p)
        tapes: list[tuple[int, np.ndarray, object, object, object, object]] = []
        for slot in np.unique(slots):
            rows = np.nonzero(slots == slot)[0]
            adapter = self.adapters[int(slot)]
            a_pre, tape_a = adapter_forward(feats_a[rows], adapter)
            qa_rows, ptape_a = post_map.forward_with_tape(a_pre)
            c_pre, tape_c = adapter_forward(feats_p[rows], adapter)
            qc_rows, ptape_c = post_map.forward_with_tape(c_pre)
            qa[rows] = qa_rows
            qc[rows] = qc_rows
            tapes.append((int(slot), rows, tape_a, ptape_a, tape_c, ptape_c))

        batch = ContrastiveBatch(anchors=qa, candidates=qc)
        loss, g_anchors, g_candidates = infonce_loss(batch, cfg.tau)

        grads = {name: np.zeros_like(p) for name, p in merged.items()}
        for slot, rows, tape_a, ptape_a, tape_c, ptape_c in tapes:
            adapter = self.adapters[slot]
            g_pre = post_map.backward(g_anchors[rows], ptape_a)
            _, g_params = adapter_backward(g_pre, tape_a, adapter)
            for name, g in g_params.items():
                grads[f"sia{slot}/{name}"] += g
            g_pre = post_map.backward(g_candidates[rows], ptape_c)
            _, g_params = adapter_backward(g_pre, tape_c, adapter)
            for name, g in g_params.items():
                grads[f"sia{slot}/{name}"] += g
        adamw_step(merged, grads, opt_adapters, lr)

        if opt_router is not None:
            # script-id supervision on frozen pre-insertion features only
            _, r_grads = router_ce_loss(feats_a, slots, self.router)
            adamw_step(
                self.router.param_dict(), r_grads, opt_router, lr * cfg.router_lr_scale
            )
        return loss

    # -- bank + evaluation --------------------------------------------------

    def _rebuild_bank(self) -> None:
        cfg = self.config
        tracker = AccessTrackingProvider(self.provider)
        ids: list[str] = []
        keys: list[tuple[str, str]] = []
        for script in self.observed:
            for key in self.index.train_classes(script):
                imgs = self.index.train_class_images[key]
                ids.extend(imgs)
                keys.extend([key] * len(imgs))
        embeddings = self._embed_queries(ids, tracker)
        bank_config = BankConfig(
            strategy=self.rules.bank_strategy,
            k_max=cfg.bank_k_max,
            sample_cap=cfg.bank_sample_cap,
            random_m=cfg.bank_random_m,
        )
        self.bank = build_bank(embeddings, keys, bank_config, seed=cfg.seed)

        stray = tracker.visual_ids - set(ids)
        if stray or tracker.text_ids:
            raise ContractViolationError(
                f"bank construction touched non-training records: {sorted(stray)[:5]}"
            )

    def evaluate_observed(self) -> dict[str, list[float]]:
        if self.bank is None:
            raise ProtocolError("evaluation requires a built prototype bank")
        tracker = AccessTrackingProvider(self.provider)
        key_to_idx = {key: i for i, key in enumerate(self.bank.class_keys)}
        row1: list[float] = []
        row10: list[float] = []
        allowed: set[str] = set()
        for script in self.observed:
            test_ids = self.index.test_images_by_script.get(script, [])
            if not test_ids:
                raise ProtocolError(f"script {script!r} has no test split")
            allowed.update(test_ids)
            queries = self._embed_queries(test_ids, tracker)
            ranked = rank_classes_batch(queries, self.bank, 10)
            truth = np.array(
                [key_to_idx[(self.index.by_id[i].script, self.index.by_id[i].char)] for i in test_ids]
            )
            row1.append(float(np.mean(ranked[:, 0] == truth)))
            row10.append(float(np.mean(np.any(ranked == truth[:, None], axis=1))))
        stray = tracker.visual_ids - allowed
        if stray or tracker.text_ids:
            raise ContractViolationError(
                f"evaluation touched non-test records: {sorted(stray | tracker.text_ids)[:5]}"
            )
        return {"top1": row1, "top10": row10}

    # -- public protocol ----------------------------------------------------

    def run_stage(self, stage: int, script: str | None = None) -> dict[str, list[float]]:
        """Onboard the next script and return the evaluation row A[t][1..t]."""
        cfg = self.config
        if stage != self.stage + 1:
            raise ProtocolError(
                f"stages advance strictly by one: expected stage {self.stage + 1}, got {stage}"
            )
        if stage > len(cfg.stage_order):
            raise ProtocolError(f"configuration defines only {len(cfg.stage_order)} stages")
        expected = cfg.stage_order[stage - 1]
        if script is not None and script != expected:
            raise ProtocolError(
                f"stage {stage} must onboard {expected!r} under the configured order, got {script!r}"
            )
        script = expected

        start = time.perf_counter()
        self.stage = stage
        self.observed.append(script)
        self._phase1(script)
        if self.rules.runs_phase2:
            self._update_buffer(script)
        self._phase2()
        self._rebuild_bank()
        row = self.evaluate_observed()
        self.accuracy["top1"].append(row["top1"])
        self.accuracy["top10"].append(row["top10"])
        self.timings_sec.append(time.perf_counter() - start)
        return row

    def run_all_stages(self) -> None:
        for t in range(self.stage + 1, len(self.config.stage_order) + 1):
            self.run_stage(t)

    def run_zero_shot(self) -> dict[str, float]:
        """Match zero-shot images against the meaning-text dictionary."""
        self.index.verify_zero_shot_disjoint()
        observed_chars = {key[1] for key in (self.bank.class_keys if self.bank else [])}
        overlap = observed_chars & self.index.zs_chars
        if overlap:
            raise ContractViolationError(
                f"zero-shot classes overlap training classes: {sorted(overlap)[:5]}"
            )
        zs_chars = sorted(self.index.zs_chars)
        if not zs_chars:
            raise ProtocolError("dataset has no zero-shot classes")
        text_ids = []
        for char in zs_chars:
            mid = self.index.meaning_by_char.get(char)
            if mid is None:
                raise ProtocolError(f"zero-shot char {char!r} has no meaning text")
            text_ids.append(mid)
        text_dict = TextDictionary(
            char_ids=zs_chars, embeddings=self.provider.text_batch(text_ids).astype(np.float32)
        )
        queries = self._embed_queries(self.index.zs_images, self.provider)
        hits1 = 0
        hits20 = 0
        for qi, image_id in enumerate(self.index.zs_images):
            true_char = self.index.by_id[image_id].char
            ranked = [c for c, _ in rank_text(queries[qi], text_dict, 20)]
            hits1 += int(ranked[0] == true_char)
            hits20 += int(true_char in ranked)
        n = len(self.index.zs_images)
        if n == 0:
            raise ProtocolError("dataset has no zero-shot images")
        result = {"zs1": hits1 / n, "zs20": hits20 / n}
        self.zero_shot = dict(result)
        return result

    # -- reporting ----------------------------------------------------------

    def report(self) -> dict:
        aa = {
            k: [compute_aa(row) for row in matrix] for k, matrix in self.accuracy.items()
        }
        fgt = {
            k: (compute_fgt(matrix) if len(matrix) >= 2 else None)
            for k, matrix in self.accuracy.items()
        }
        return {
            "run": {
                "seed": self.config.seed,
                "mode": self.config.mode,
                "config_digest": self.config.digest(),
                "stage_order": list(self.config.stage_order),
                "observed_scripts": list(self.observed),
            },
            "accuracy": {k: [list(r) for r in m] for k, m in self.accuracy.items()},
            "aa": aa,
            "fgt": fgt,
            "zero_shot": dict(self.zero_shot),
            "timings_sec": list(self.timings_sec),
        }
