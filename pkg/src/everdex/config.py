"""Run configuration: the JSON-schema'd knobs driving a continual run.

Defaults follow the standard recipe (two-phase epochs 6/5, batch 128,
temperature 0.1, AdamW lr 1e-4 / weight decay 0.1, warmup ratio 0.01, buffer
10k, bank caps 32/256). Desk-scale benchmark configs override epochs, rank and
learning rate without changing these defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError

CANONICAL_STAGE_ORDER = ("CS", "WSC", "SAC", "SS", "BI", "OBC")

MODE_FULL = "full"
MODE_FROZEN = "frozen"
MODE_SEQ_SINGLE = "seq_single_adapter"
MODE_GOLD = "gold_routing"
MODE_MEAN_PROTO = "mean_proto"
MODE_RS_PROTO = "rs_proto"
MODE_IMAGE_ONLY = "image_only_phase1"
MODES = (
    MODE_FULL,
    MODE_FROZEN,
    MODE_SEQ_SINGLE,
    MODE_GOLD,
    MODE_MEAN_PROTO,
    MODE_RS_PROTO,
    MODE_IMAGE_ONLY,
)


@dataclass
class RunConfig:
    stage_order: tuple[str, ...] = CANONICAL_STAGE_ORDER
    seed: int = 0
    mode: str = MODE_FULL
    dim: int = 64

    adapter_rank: int = 16
    adapter_alpha: float = 0.5
    router_hidden: int = 256

    phase1_epochs: int = 6
    phase2_epochs: int = 5
    batch_size: int = 128
    tau: float = 0.1
    lr: float = 1e-4
    router_lr_scale: float = 1.0
    weight_decay: float = 0.1
    warmup_ratio: float = 0.01
    buffer_capacity: int = 10_000

    bank_k_max: int = 32
    bank_sample_cap: int = 256
    bank_random_m: int = 8

    post_map_kind: str = "orthogonal"
    post_map_seed: int = 0

    manifest_path: str | None = None
    embeddings_path: str | None = None
    out_dir: str | None = None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if len(self.stage_order) != len(set(self.stage_order)):
            raise ConfigError("stage_order contains duplicate scripts")
        if not self.stage_order:
            raise ConfigError("stage_order must not be empty")
        if not 0 < self.adapter_rank < self.dim:
            raise ConfigError(
                f"adapter_rank must satisfy 0 < rank < dim, got rank={self.adapter_rank}, dim={self.dim}"
            )
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.buffer_capacity < 1:
            raise ConfigError("buffer_capacity must be >= 1")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ConfigError("warmup_ratio must be in [0, 1]")
        if self.router_lr_scale <= 0:
            raise ConfigError("router_lr_scale must be > 0")
        if self.post_map_kind not in ("orthogonal", "identity"):
            raise ConfigError(f"unknown post_map_kind {self.post_map_kind!r}")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["stage_order"] = list(self.stage_order)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "stage_order" in kwargs:
            kwargs["stage_order"] = tuple(kwargs["stage_order"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def digest(self) -> str:
        """Content hash binding reports to the exact configuration."""
        canonical = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class SynthConfig:
    """Knobs for the seeded synthetic multi-script benchmark generator.

    Geometry: character identity lives in a ``signal_dim`` subspace (scaled by
    ``signal_scale``); per-script structured nuisance occupies a separate
    ``nuisance_dim`` subspace at ``nuisance_scale`` (this is what adapters
    learn to suppress); per-class style modes add multi-lobed structure inside
    the signal subspace; each script applies its own rotation blend.
    ``share_fraction`` of each script's characters reuse a cross-script pool
    with shared meaning texts.
    """

    dim: int = 64
    scripts: tuple[str, ...] = CANONICAL_STAGE_ORDER
    chars_per_script: int = 40
    share_fraction: float = 0.10
    signal_dim: int = 8
    signal_scale: float = 1.0
    nuisance_dim: int = 12
    nuisance_scale: float = 2.0
    style_modes_min: int = 1
    style_modes_max: int = 4
    mode_scale: float = 1.0
    signal_noise: float = 0.5
    images_per_class_min: int = 20
    images_per_class_max: int = 30
    size_skew: float = 1.5
    script_transform_strength: float = 1.0
    noise_scale: float = 0.35
    text_noise: float = 0.3
    shape_noise: float = 0.15
    test_fraction: float = 0.2
    zero_shot_chars: int = 30
    zero_shot_max_images: int = 4
    seed: int = 0

    def validate(self) -> None:
        if self.dim < 2 or not 1 <= self.signal_dim <= self.dim:
            raise ConfigError(f"need 1 <= signal_dim <= dim, got {self.signal_dim}/{self.dim}")
        if not 0 <= self.nuisance_dim <= self.dim - self.signal_dim:
            raise ConfigError(
                f"need signal_dim + nuisance_dim <= dim, got {self.signal_dim}+{self.nuisance_dim}/{self.dim}"
            )
        if not self.scripts:
            raise ConfigError("at least one script required")
        if len(self.scripts) != len(set(self.scripts)):
            raise ConfigError("duplicate script labels")
        if self.chars_per_script < 1:
            raise ConfigError("chars_per_script must be >= 1")
        if not 0.0 <= self.share_fraction <= 1.0:
            raise ConfigError("share_fraction must be in [0, 1]")
        if not 1 <= self.style_modes_min <= self.style_modes_max:
            raise ConfigError("invalid style mode range")
        if not 1 <= self.images_per_class_min <= self.images_per_class_max:
            raise ConfigError("invalid images-per-class range")
        if self.size_skew < 0.0:
            raise ConfigError("size_skew must be >= 0")
        if self.signal_noise < 0.0:
            raise ConfigError("signal_noise must be >= 0")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in [0, 1)")
        if self.zero_shot_max_images >= 5:
            raise ConfigError("zero-shot classes must stay under the 5-image threshold")
        if self.zero_shot_chars < 0:
            raise ConfigError("zero_shot_chars must be >= 0")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["scripts"] = list(self.scripts)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config fields: {sorted(unknown)}")
        kwargs = dict(d)
        if "scripts" in kwargs:
            kwargs["scripts"] = tuple(kwargs["scripts"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def load_config_file(path: str, kind: str):
    """Read a JSON config file; ``kind`` selects run vs synth schema."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    if kind == "run":
        return RunConfig.from_json_dict(payload)
    if kind == "synth":
        return SynthConfig.from_json_dict(payload)
    raise ConfigError(f"unknown config kind {kind!r}")
