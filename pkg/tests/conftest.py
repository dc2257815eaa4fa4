import numpy as np
import pytest

from everdex.config import RunConfig, SynthConfig
from everdex.data import DatasetIndex
from everdex.provider import EmbeddingProvider, PostMap
from everdex.synthdata import generate


def tiny_synth(seed=0, **overrides):
    """Small two-script dataset; generation and training stay sub-second."""
    kw = dict(
        dim=16,
        scripts=("CS", "WSC"),
        chars_per_script=6,
        share_fraction=0.0,
        signal_dim=4,
        signal_scale=1.0,
        nuisance_dim=4,
        nuisance_scale=1.2,
        style_modes_min=1,
        style_modes_max=2,
        mode_scale=0.5,
        signal_noise=0.2,
        images_per_class_min=6,
        images_per_class_max=10,
        size_skew=1.0,
        noise_scale=0.1,
        test_fraction=0.2,
        zero_shot_chars=4,
        zero_shot_max_images=3,
        seed=seed,
    )
    kw.update(overrides)
    return SynthConfig(**kw)


def tiny_run(**overrides):
    kw = dict(
        stage_order=("CS", "WSC"),
        dim=16,
        adapter_rank=6,
        router_hidden=32,
        phase1_epochs=3,
        phase2_epochs=2,
        batch_size=16,
        lr=5e-3,
        router_lr_scale=10.0,
        buffer_capacity=40,
        seed=0,
    )
    kw.update(overrides)
    return RunConfig(**kw)


def in_memory_provider(dataset, dim, post_map_seed=0):
    post_map = PostMap(dim, seed=post_map_seed)
    return EmbeddingProvider(dim, dataset.visual, dataset.texts, post_map)


@pytest.fixture
def tiny_world():
    """Generated tiny dataset plus provider and index, ready for an engine."""
    cfg = tiny_synth()
    dataset = generate(cfg)
    provider = in_memory_provider(dataset, cfg.dim)
    index = DatasetIndex(dataset.records)
    return cfg, dataset, provider, index


def rng_of(seed):
    return np.random.default_rng(seed)
