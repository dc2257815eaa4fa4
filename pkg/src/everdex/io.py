"""Canonical file formats: embeddings JSONL, manifest JSONL, metric reports.

All writes are atomic (temp file in the destination directory, then rename).
Vectors are serialized as shortest round-trip decimals, so write-then-read is
lossless for float32 payloads.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .data import KIND_IMAGE, KIND_MEANING, KIND_SHAPE, ManifestRecord
from .errors import FormatError

_KINDS = (KIND_IMAGE, KIND_MEANING, KIND_SHAPE)


@dataclass
class EmbeddingRecord:
    """One line of the embeddings file; ``dim`` is carried implicitly by values."""

    id: str
    script: str | None
    char: str | None
    kind: str
    values: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def atomic_write_text(path: str, text: str) -> None:
    """Write-temp-then-rename so readers never observe partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _reject_constant(token: str):
    raise FormatError(f"non-finite JSON constant {token!r} not allowed")


def write_embeddings(path: str, records: list[EmbeddingRecord]) -> None:
    lines = []
    for rec in records:
        vec = np.asarray(rec.values, dtype=np.float64)
        if vec.ndim != 1:
            raise FormatError(f"record {rec.id!r}: values must be a flat vector")
        payload = {
            "id": rec.id,
            "script": rec.script,
            "char": rec.char,
            "kind": rec.kind,
            "dim": int(vec.shape[0]),
            "values": [float(v) for v in vec],
        }
        lines.append(json.dumps(payload, separators=(",", ":")))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_embeddings(path: str) -> list[EmbeddingRecord]:
    records: list[EmbeddingRecord] = []
    seen: set[str] = set()
    dim: int | None = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError as exc:
        raise FormatError(f"embeddings file not found: {path}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line, parse_constant=_reject_constant)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise FormatError(f"{path}:{lineno}: each line must be a JSON object")
            missing = {"id", "script", "char", "kind", "dim", "values"} - set(obj)
            if missing:
                raise FormatError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            if obj["kind"] not in _KINDS:
                raise FormatError(f"{path}:{lineno}: unknown kind {obj['kind']!r}")
            values = obj["values"]
            if not isinstance(values, list) or not all(
                isinstance(v, (int, float)) for v in values
            ):
                raise FormatError(f"{path}:{lineno}: values must be a list of numbers")
            if len(values) != obj["dim"]:
                raise FormatError(
                    f"{path}:{lineno}: dim={obj['dim']} but {len(values)} values present"
                )
            if dim is None:
                dim = int(obj["dim"])
            elif obj["dim"] != dim:
                raise FormatError(
                    f"{path}:{lineno}: inconsistent dim {obj['dim']} (file uses {dim})"
                )
            vec = np.asarray(values, dtype=np.float64)
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}:{lineno}: non-finite values in record {obj['id']!r}")
            if obj["id"] in seen:
                raise FormatError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            seen.add(obj["id"])
            records.append(
                EmbeddingRecord(
                    id=obj["id"],
                    script=obj["script"],
                    char=obj["char"],
                    kind=obj["kind"],
                    values=vec.astype(np.float32),
                )
            )
    return records


def write_manifest(path: str, records: list[ManifestRecord]) -> None:
    lines = [json.dumps(rec.to_json_dict(), separators=(",", ":")) for rec in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_manifest(path: str) -> list[ManifestRecord]:
    out: list[ManifestRecord] = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError as exc:
        raise FormatError(f"manifest file not found: {path}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                out.append(ManifestRecord.from_json_dict(obj))
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_dataset(
    out_dir: str,
    records: list[ManifestRecord],
    visual: dict[str, np.ndarray],
    texts: dict[str, np.ndarray],
) -> tuple[str, str]:
    """Emit manifest.jsonl + embeddings.jsonl for a generated dataset."""
    os.makedirs(out_dir, exist_ok=True)
    emb_records = []
    for rec in records:
        store = visual if rec.kind == KIND_IMAGE else texts
        if rec.id not in store:
            raise FormatError(f"manifest id {rec.id!r} has no backing vector")
        emb_records.append(
            EmbeddingRecord(
                id=rec.id,
                script=rec.script,
                char=rec.char,
                kind=rec.kind,
                values=np.asarray(store[rec.id]),
            )
        )
    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    embeddings_path = os.path.join(out_dir, "embeddings.jsonl")
    write_manifest(manifest_path, records)
    write_embeddings(embeddings_path, emb_records)
    return manifest_path, embeddings_path


def read_dataset(
    manifest_path: str, embeddings_path: str
) -> tuple[list[ManifestRecord], dict[str, np.ndarray], dict[str, np.ndarray], int]:
    """Load manifest + embeddings; every manifest id must resolve to a vector."""
    records = read_manifest(manifest_path)
    emb = read_embeddings(embeddings_path)
    visual: dict[str, np.ndarray] = {}
    texts: dict[str, np.ndarray] = {}
    dim = emb[0].dim if emb else 0
    by_id = {r.id: r for r in emb}
    for rec in records:
        if rec.id not in by_id:
            raise FormatError(f"manifest id {rec.id!r} missing from embeddings file")
        target = visual if rec.kind == KIND_IMAGE else texts
        target[rec.id] = by_id[rec.id].values
    return records, visual, texts, dim


def write_report_json(path: str, report: dict) -> None:
    atomic_write_text(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_report_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise FormatError(f"report file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"report file {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"report file {path} must hold a JSON object")
    return obj


def report_to_csv(report: dict) -> str:
    """Tidy long format: one row per (metric, top_k, stage, split) value."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "top_k", "stage", "split", "value"])
    for k_label, matrix in sorted(report.get("accuracy", {}).items()):
        k = k_label.removeprefix("top")
        for t, row in enumerate(matrix, start=1):
            for i, value in enumerate(row, start=1):
                writer.writerow(["A", k, t, i, repr(float(value))])
    for k_label, values in sorted(report.get("aa", {}).items()):
        k = k_label.removeprefix("top")
        for t, value in enumerate(values, start=1):
            writer.writerow(["AA", k, t, "", repr(float(value))])
    fgt = report.get("fgt") or {}
    for k_label, value in sorted(fgt.items()):
        if value is None:
            continue
        writer.writerow(["FGT", k_label.removeprefix("top"), "", "", repr(float(value))])
    zs = report.get("zero_shot") or {}
    for label in ("zs1", "zs20"):
        if zs.get(label) is not None:
            writer.writerow(["ZS", label.removeprefix("zs"), "", "", repr(float(zs[label]))])
    for t, secs in enumerate(report.get("timings_sec", []), start=1):
        writer.writerow(["stage_seconds", "", t, "", repr(float(secs))])
    return buf.getvalue()


def write_report_csv(path: str, report: dict) -> None:
    atomic_write_text(path, report_to_csv(report))


def format_report(report: dict) -> str:
    """Human-readable rendering of a metrics report."""
    lines = []
    run = report.get("run", {})
    lines.append(
        f"mode={run.get('mode')} seed={run.get('seed')} stages={'->'.join(run.get('stage_order', []))}"
    )
    digest = run.get("config_digest", "")
    if digest:
        lines.append(f"config digest: {digest}")
    for k_label in sorted(report.get("accuracy", {})):
        matrix = report["accuracy"][k_label]
        lines.append(f"accuracy matrix ({k_label}), rows = after stage t:")
        for t, row in enumerate(matrix, start=1):
            cells = " ".join(f"{v:6.4f}" for v in row)
            lines.append(f"  t={t}: {cells}")
    for k_label in sorted(report.get("aa", {})):
        values = " ".join(f"{v:6.4f}" for v in report["aa"][k_label])
        lines.append(f"AA ({k_label}) per stage: {values}")
    fgt = report.get("fgt") or {}
    for k_label in sorted(fgt):
        if fgt[k_label] is not None:
            lines.append(f"FGT ({k_label}): {fgt[k_label]:.4f}")
    zs = report.get("zero_shot") or {}
    if zs.get("zs1") is not None:
        lines.append(f"ZS@1: {zs['zs1']:.4f}  ZS@20: {zs['zs20']:.4f}")
    timings = report.get("timings_sec", [])
    if timings:
        total = sum(timings)
        lines.append(
            "stage seconds: " + " ".join(f"{s:.2f}" for s in timings) + f" (total {total:.2f})"
        )
    return "\n".join(lines)


def verify_report_consistency(report: dict) -> None:
    """AA and FGT must be recomputable from the embedded matrices."""
    from .engine import compute_aa, compute_fgt  # local import avoids a cycle

    for k_label, matrix in report.get("accuracy", {}).items():
        aa = report.get("aa", {}).get(k_label)
        if aa is None or len(aa) != len(matrix):
            raise FormatError(f"report aa[{k_label}] missing or wrong length")
        for t, row in enumerate(matrix, start=1):
            if len(row) != t:
                raise FormatError(f"accuracy matrix {k_label} is not lower-triangular")
            expect = compute_aa(row)
            if not math.isclose(expect, aa[t - 1], rel_tol=0.0, abs_tol=0.0):
                raise FormatError(
                    f"aa[{k_label}][{t}] = {aa[t - 1]} but matrix row gives {expect}"
                )
        fgt = (report.get("fgt") or {}).get(k_label)
        if len(matrix) >= 2:
            expect = compute_fgt(matrix)
            if fgt is None or expect != fgt:
                raise FormatError(f"fgt[{k_label}] = {fgt} but matrix gives {expect}")
