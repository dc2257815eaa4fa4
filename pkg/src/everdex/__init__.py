"""everdex: continual script-aware embedding retrieval over frozen backbones.

Script-conditioned low-rank residual adapters correct a frozen embedding
space one script at a time; a lightweight router picks the adapter at
inference; retrieval runs against an Auto-K multi-prototype dictionary, with
zero-shot recognition via meaning-text matching.
"""

from .adapter import AdapterParams, adapter_backward, adapter_forward, adapter_init
from .config import (
    CANONICAL_STAGE_ORDER,
    MODES,
    RunConfig,
    SynthConfig,
    load_config_file,
)
from .data import DatasetIndex, ManifestRecord
from .dictionary import (
    BankConfig,
    PrototypeBank,
    TextDictionary,
    auto_k,
    bank_extend,
    build_bank,
    rank_classes,
    rank_text,
    silhouette_cos,
    spherical_kmeans,
)
from .engine import (
    ContinualEngine,
    MemoryBuffer,
    buffer_update,
    compute_aa,
    compute_fgt,
)
from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateInputError,
    DimensionMismatchError,
    EverdexError,
    FormatError,
    NonFiniteError,
    ProtocolError,
)
from .objectives import ContrastiveBatch, infonce_loss, sample_positive
from .provider import EmbeddingProvider, PostMap, load_file_provider
from .router import RouterParams, route_probs, route_select, router_init
from .runner import run_eval, run_generate, run_training, run_zs
from .synthdata import GeneratedDataset, generate, summarize

__version__ = "0.1.0"

__all__ = [
    "AdapterParams",
    "adapter_backward",
    "adapter_forward",
    "adapter_init",
    "CANONICAL_STAGE_ORDER",
    "MODES",
    "RunConfig",
    "SynthConfig",
    "load_config_file",
    "DatasetIndex",
    "ManifestRecord",
    "BankConfig",
    "PrototypeBank",
    "TextDictionary",
    "auto_k",
    "bank_extend",
    "build_bank",
    "rank_classes",
    "rank_text",
    "silhouette_cos",
    "spherical_kmeans",
    "ContinualEngine",
    "MemoryBuffer",
    "buffer_update",
    "compute_aa",
    "compute_fgt",
    "ConfigError",
    "ContractViolationError",
    "DegenerateInputError",
    "DimensionMismatchError",
    "EverdexError",
    "FormatError",
    "NonFiniteError",
    "ProtocolError",
    "ContrastiveBatch",
    "infonce_loss",
    "sample_positive",
    "EmbeddingProvider",
    "PostMap",
    "load_file_provider",
    "RouterParams",
    "route_probs",
    "route_select",
    "router_init",
    "run_eval",
    "run_generate",
    "run_training",
    "run_zs",
    "GeneratedDataset",
    "generate",
    "summarize",
]
