"""Orchestration: compose generator, engine, checkpoints and reports.

These functions are the substance behind the CLI subcommands; they are plain
library calls so tests and notebook-style scripts can drive the same flows.
"""

from __future__ import annotations

import os

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, restore_engine, save_checkpoint
from .config import RunConfig, SynthConfig
from .data import KIND_IMAGE, DatasetIndex
from .dictionary import BankConfig, PrototypeBank, build_bank
from .engine import ContinualEngine, compute_aa
from .errors import ConfigError, DegenerateInputError, DimensionMismatchError, ProtocolError
from .io import (
    read_embeddings,
    write_dataset,
    write_report_csv,
    write_report_json,
)
from .numerics import l2_normalize
from .provider import load_file_provider
from .synthdata import generate, summarize

MANIFEST_NAME = "manifest.jsonl"
EMBEDDINGS_NAME = "embeddings.jsonl"


def dataset_paths(data_dir: str) -> tuple[str, str]:
    return os.path.join(data_dir, MANIFEST_NAME), os.path.join(data_dir, EMBEDDINGS_NAME)


def run_generate(config: SynthConfig, out_dir: str) -> dict:
    """Generate the synthetic benchmark and write its canonical files."""
    dataset = generate(config)
    write_dataset(out_dir, dataset.records, dataset.visual, dataset.texts)
    return summarize(dataset.records)


def load_dataset_dir(
    data_dir: str, post_map_kind: str = "orthogonal", post_map_seed: int = 0
):
    manifest_path, embeddings_path = dataset_paths(data_dir)
    provider, records = load_file_provider(
        manifest_path, embeddings_path, post_map_kind, post_map_seed
    )
    return provider, DatasetIndex(records)


def _resolve_run_inputs(config: RunConfig):
    if not config.manifest_path or not config.embeddings_path:
        raise ConfigError("run config must set manifest_path and embeddings_path")
    provider, records = load_file_provider(
        config.manifest_path,
        config.embeddings_path,
        config.post_map_kind,
        config.post_map_seed,
    )
    return provider, DatasetIndex(records)


def run_training(config: RunConfig, out_dir: str | None = None) -> tuple[dict, list[str]]:
    """Execute every configured stage plus the zero-shot pass; write artifacts.

    Returns (report, checkpoint paths). ``out_dir`` falls back to
    ``config.out_dir``; with neither set, nothing is written.
    """
    config.validate()
    provider, index = _resolve_run_inputs(config)
    engine = ContinualEngine(provider, index, config)
    out_dir = out_dir or config.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    checkpoint_paths: list[str] = []
    for t in range(1, len(config.stage_order) + 1):
        engine.run_stage(t)
        if out_dir:
            path = os.path.join(out_dir, f"checkpoint_stage{t}.zip")
            save_checkpoint(path, Checkpoint.from_engine(engine))
            checkpoint_paths.append(path)
    if index.zs_images:
        engine.run_zero_shot()
    report = engine.report()
    if out_dir:
        write_report_json(os.path.join(out_dir, "report.json"), report)
        write_report_csv(os.path.join(out_dir, "report.csv"), report)
    return report, checkpoint_paths


def run_eval(checkpoint_path: str, data_dir: str) -> dict:
    """Recompute the checkpointed stage's accuracy row on a dataset directory."""
    ckpt = load_checkpoint(checkpoint_path)
    provider, index = load_dataset_dir(
        data_dir, ckpt.config.post_map_kind, ckpt.config.post_map_seed
    )
    if provider.dim != ckpt.config.dim:
        raise DimensionMismatchError(
            f"checkpoint dim {ckpt.config.dim} != dataset dim {provider.dim}"
        )
    observed = set(ckpt.observed_scripts)
    manifest_test_scripts = sorted(index.test_images_by_script)
    unobserved = [s for s in manifest_test_scripts if s not in observed]
    if unobserved:
        raise ProtocolError(
            f"checkpoint from stage {ckpt.stage} (scripts {sorted(observed)}) cannot evaluate "
            f"unobserved scripts {unobserved}"
        )
    engine = restore_engine(ckpt, provider, index)
    row = engine.evaluate_observed()
    return {
        "checkpoint_stage": ckpt.stage,
        "scripts": list(ckpt.observed_scripts),
        "top1": row["top1"],
        "top10": row["top10"],
        "aa": {"top1": compute_aa(row["top1"]), "top10": compute_aa(row["top10"])},
    }


def run_zs(checkpoint_path: str, data_dir: str) -> dict:
    """Zero-shot text-dictionary matching with a checkpointed model."""
    ckpt = load_checkpoint(checkpoint_path)
    provider, index = load_dataset_dir(
        data_dir, ckpt.config.post_map_kind, ckpt.config.post_map_seed
    )
    if provider.dim != ckpt.config.dim:
        raise DimensionMismatchError(
            f"checkpoint dim {ckpt.config.dim} != dataset dim {provider.dim}"
        )
    engine = restore_engine(ckpt, provider, index)
    result = engine.run_zero_shot()
    if not result["zs1"] <= result["zs20"]:
        raise ProtocolError("ZS@1 exceeded ZS@20; ranking is inconsistent")
    return {
        "checkpoint_stage": ckpt.stage,
        "candidates": len(index.zs_chars),
        "queries": len(index.zs_images),
        "zs1": result["zs1"],
        "zs20": result["zs20"],
    }


def build_bank_from_file(
    embeddings_path: str,
    strategy: str = "auto",
    seed: int = 0,
    bank_config: BankConfig | None = None,
) -> tuple[PrototypeBank, dict]:
    """Standalone dictionary construction over an embeddings file.

    Uses image records carrying (script, char) labels; rows are L2-normalized
    before clustering, since the file may hold raw feature-space vectors.
    """
    records = read_embeddings(embeddings_path)
    rows = []
    keys = []
    for rec in records:
        if rec.kind != KIND_IMAGE or rec.script is None or rec.char is None:
            continue
        vec = np.asarray(rec.values, dtype=np.float32)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise DegenerateInputError(f"record {rec.id!r} has a zero-norm vector")
        rows.append(l2_normalize(vec))
        keys.append((rec.script, rec.char))
    if not rows:
        raise ProtocolError(f"{embeddings_path} holds no labeled image records")
    config = bank_config or BankConfig(strategy=strategy)
    bank = build_bank(np.stack(rows), keys, config, seed=seed)
    counts = np.diff(bank.pointers)
    histogram: dict[int, int] = {}
    for c in counts:
        histogram[int(c)] = histogram.get(int(c), 0) + 1
    summary = {
        "classes": bank.n_classes,
        "prototypes": int(bank.pointers[-1]),
        "k_histogram": {str(k): v for k, v in sorted(histogram.items())},
        "strategy": bank.strategy,
        "seed": seed,
    }
    return bank, summary


def save_bank(path: str, bank: PrototypeBank) -> None:
    from .checkpoint import _npz_bytes
    from .io import atomic_write_bytes

    arrays = {
        "prototypes": bank.prototypes,
        "pointers": bank.pointers,
        "scripts": np.array([k[0] for k in bank.class_keys], dtype=np.str_),
        "chars": np.array([k[1] for k in bank.class_keys], dtype=np.str_),
    }
    atomic_write_bytes(path, _npz_bytes(arrays))
