"""Single-file stage checkpoints: a zip archive with a JSON index.

Members: meta.json (config, stage, script bookkeeping), adapters/NNN.npz,
router.npz (when a router exists), bank.npz, buffer.json. Timestamps are
pinned so identical state serializes to identical bytes. The rng "state" is
the (seed, completed stage) pair: every stream the engine uses is derived
from those, which makes replay exact without pickling generator internals.
"""

from __future__ import annotations

import io as _io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np

from .adapter import AdapterParams
from .config import RunConfig
from .dictionary import PrototypeBank
from .engine import BufferEntry, ContinualEngine, MemoryBuffer
from .errors import FormatError
from .io import atomic_write_bytes
from .router import RouterParams

FORMAT_VERSION = 1
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    """Immutable snapshot of engine state after a completed stage."""

    config: RunConfig
    stage: int
    observed_scripts: list[str]
    adapter_scripts: list[str]
    adapters: list[AdapterParams]
    router: RouterParams | None
    bank: PrototypeBank | None
    buffer_entries: list[BufferEntry] = field(default_factory=list)

    @classmethod
    def from_engine(cls, engine: ContinualEngine) -> "Checkpoint":
        return cls(
            config=engine.config,
            stage=engine.stage,
            observed_scripts=list(engine.observed),
            adapter_scripts=list(engine.adapter_scripts),
            adapters=[a.copy() for a in engine.adapters],
            router=engine.router.copy() if engine.router is not None else None,
            bank=engine.bank,
            buffer_entries=list(engine.buffer.entries),
        )


def _npz_bytes(arrays: dict[str, np.ndarray]) -> bytes:
    # np.savez stamps current time into the archive; build the npz by hand so
    # identical state yields identical bytes
    buf = _io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            payload = _io.BytesIO()
            np.lib.format.write_array(payload, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=_FIXED_DATE)
            zf.writestr(info, payload.getvalue())
    return buf.getvalue()


def _read_npz(data: bytes) -> dict[str, np.ndarray]:
    with np.load(_io.BytesIO(data), allow_pickle=False) as npz:
        return {k: npz[k] for k in npz.files}


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "config": ckpt.config.to_json_dict(),
        "stage": ckpt.stage,
        "observed_scripts": ckpt.observed_scripts,
        "adapter_scripts": ckpt.adapter_scripts,
        "adapter_script_ids": [a.script_id for a in ckpt.adapters],
        "has_router": ckpt.router is not None,
        "has_bank": ckpt.bank is not None,
        "bank_strategy": ckpt.bank.strategy if ckpt.bank is not None else None,
        "bank_seed": ckpt.bank.seed if ckpt.bank is not None else None,
        "rng": {"seed": ckpt.config.seed, "completed_stage": ckpt.stage},
    }
    buf = _io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:

        def add(name: str, payload: bytes) -> None:
            # stored (uncompressed) members with pinned timestamps: byte-stable
            # across runs and machines
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            zf.writestr(info, payload)

        add("meta.json", json.dumps(meta, indent=2, sort_keys=True).encode())
        for i, adapter in enumerate(ckpt.adapters):
            add(f"adapters/{i:03d}.npz", _npz_bytes(adapter.param_dict()))
        if ckpt.router is not None:
            add("router.npz", _npz_bytes(ckpt.router.param_dict()))
        if ckpt.bank is not None:
            bank = ckpt.bank
            add(
                "bank.npz",
                _npz_bytes(
                    {
                        "prototypes": bank.prototypes,
                        "pointers": bank.pointers,
                        "scripts": np.array([k[0] for k in bank.class_keys], dtype=np.str_),
                        "chars": np.array([k[1] for k in bank.class_keys], dtype=np.str_),
                    }
                ),
            )
        buffer_rows = [[e.image_id, e.script, e.char] for e in ckpt.buffer_entries]
        add("buffer.json", json.dumps(buffer_rows, separators=(",", ":")).encode())
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str) -> Checkpoint:
    try:
        zf = zipfile.ZipFile(path, "r")
    except FileNotFoundError as exc:
        raise FormatError(f"checkpoint not found: {path}") from exc
    except zipfile.BadZipFile as exc:
        raise FormatError(f"checkpoint {path} is not a readable archive: {exc}") from exc
    with zf:
        names = set(zf.namelist())
        if "meta.json" not in names:
            raise FormatError(f"checkpoint {path} lacks meta.json")
        try:
            meta = json.loads(zf.read("meta.json"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"checkpoint {path} meta.json is invalid: {exc}") from exc
        if meta.get("format_version") != FORMAT_VERSION:
            raise FormatError(
                f"checkpoint {path} has format version {meta.get('format_version')}, expected {FORMAT_VERSION}"
            )
        config = RunConfig.from_json_dict(meta["config"])

        adapters: list[AdapterParams] = []
        script_ids = meta.get("adapter_script_ids", [])
        for i in range(len(meta["adapter_scripts"])):
            member = f"adapters/{i:03d}.npz"
            if member not in names:
                raise FormatError(f"checkpoint {path} lacks {member}")
            arrays = _read_npz(zf.read(member))
            try:
                adapters.append(
                    AdapterParams(
                        script_id=int(script_ids[i]) if i < len(script_ids) else i,
                        ln_gain=arrays["ln_gain"],
                        ln_bias=arrays["ln_bias"],
                        w_gate=arrays["w_gate"],
                        w_value=arrays["w_value"],
                        w_up=arrays["w_up"],
                        alpha=arrays["alpha"],
                    )
                )
            except KeyError as exc:
                raise FormatError(f"checkpoint {path} {member} lacks array {exc}") from exc

        router = None
        if meta.get("has_router"):
            if "router.npz" not in names:
                raise FormatError(f"checkpoint {path} lacks router.npz")
            arrays = _read_npz(zf.read("router.npz"))
            router = RouterParams(
                w_hidden=arrays["w_hidden"],
                b_hidden=arrays["b_hidden"],
                w_head=arrays["w_head"],
                b_head=arrays["b_head"],
            )

        bank = None
        if meta.get("has_bank"):
            if "bank.npz" not in names:
                raise FormatError(f"checkpoint {path} lacks bank.npz")
            arrays = _read_npz(zf.read("bank.npz"))
            keys = [(str(s), str(c)) for s, c in zip(arrays["scripts"], arrays["chars"])]
            bank = PrototypeBank(
                prototypes=arrays["prototypes"],
                pointers=arrays["pointers"],
                class_keys=keys,
                strategy=meta.get("bank_strategy") or "auto",
                seed=int(meta.get("bank_seed") or 0),
            )
            bank.validate()

        if "buffer.json" not in names:
            raise FormatError(f"checkpoint {path} lacks buffer.json")
        buffer_rows = json.loads(zf.read("buffer.json"))
        entries = [BufferEntry(image_id=r[0], script=r[1], char=r[2]) for r in buffer_rows]

    return Checkpoint(
        config=config,
        stage=int(meta["stage"]),
        observed_scripts=list(meta["observed_scripts"]),
        adapter_scripts=list(meta["adapter_scripts"]),
        adapters=adapters,
        router=router,
        bank=bank,
        buffer_entries=entries,
    )


def restore_engine(ckpt: Checkpoint, provider, index) -> ContinualEngine:
    """Rebuild a live engine whose state matches the checkpoint."""
    engine = ContinualEngine(provider, index, ckpt.config)
    engine.stage = ckpt.stage
    engine.observed = list(ckpt.observed_scripts)
    engine.adapters = [a.copy() for a in ckpt.adapters]
    engine.adapter_scripts = list(ckpt.adapter_scripts)
    engine.router = ckpt.router.copy() if ckpt.router is not None else None
    engine.bank = ckpt.bank
    engine.buffer = MemoryBuffer(capacity=ckpt.config.buffer_capacity, entries=list(ckpt.buffer_entries))
    return engine
