"""Dataset manifest records and the lookup index built over them.

A manifest row ties a sample id to its script, character, modality and split.
Meaning texts are character-level (script is None); shape texts are
instance-level and inherit the script/char of their image.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractViolationError, FormatError

KIND_IMAGE = "image"
KIND_MEANING = "meaning"
KIND_SHAPE = "shape"
KINDS = (KIND_IMAGE, KIND_MEANING, KIND_SHAPE)

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"
SPLIT_ZERO_SHOT = "zero-shot"
SPLITS = (SPLIT_TRAIN, SPLIT_TEST, SPLIT_ZERO_SHOT)


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    script: str | None
    char: str
    kind: str
    split: str

    def to_json_dict(self) -> dict:
        return {"id": self.id, "script": self.script, "char": self.char,
                "kind": self.kind, "split": self.split}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ManifestRecord":
        try:
            rec = cls(id=d["id"], script=d["script"], char=d["char"],
                      kind=d["kind"], split=d["split"])
        except KeyError as exc:
            raise FormatError(f"manifest record missing field {exc}") from exc
        if rec.kind not in KINDS:
            raise FormatError(f"unknown modality kind {rec.kind!r}")
        if rec.split not in SPLITS:
            raise FormatError(f"unknown split {rec.split!r}")
        return rec


class DatasetIndex:
    """Lookup structures over a manifest; iteration orders are deterministic."""

    def __init__(self, records: list[ManifestRecord]):
        self.records = list(records)
        self.by_id: dict[str, ManifestRecord] = {}
        for rec in self.records:
            if rec.id in self.by_id:
                raise FormatError(f"duplicate manifest id {rec.id!r}")
            self.by_id[rec.id] = rec

        self.train_images_by_script: dict[str, list[str]] = {}
        self.test_images_by_script: dict[str, list[str]] = {}
        self.train_class_images: dict[tuple[str, str], list[str]] = {}
        self.test_class_images: dict[tuple[str, str], list[str]] = {}
        self.meaning_by_char: dict[str, str] = {}
        self.shape_by_image: dict[str, str] = {}
        self.zs_images: list[str] = []
        self.zs_chars: set[str] = set()
        self.train_chars: set[str] = set()

        for rec in self.records:
            if rec.kind == KIND_IMAGE:
                if rec.split == SPLIT_TRAIN:
                    self.train_images_by_script.setdefault(rec.script, []).append(rec.id)
                    self.train_class_images.setdefault((rec.script, rec.char), []).append(rec.id)
                    self.train_chars.add(rec.char)
                elif rec.split == SPLIT_TEST:
                    self.test_images_by_script.setdefault(rec.script, []).append(rec.id)
                    self.test_class_images.setdefault((rec.script, rec.char), []).append(rec.id)
                else:
                    self.zs_images.append(rec.id)
                    self.zs_chars.add(rec.char)
            elif rec.kind == KIND_MEANING:
                self.meaning_by_char[rec.char] = rec.id
            else:
                self.shape_by_image[self._image_id_of_shape(rec.id)] = rec.id

    @staticmethod
    def _image_id_of_shape(shape_id: str) -> str:
        # Shape ids are derived from their image id by a "shape:" prefix.
        if shape_id.startswith("shape:"):
            return shape_id[len("shape:"):]
        return shape_id

    @property
    def scripts(self) -> list[str]:
        return sorted(set(self.train_images_by_script) | set(self.test_images_by_script))

    def train_classes(self, script: str) -> list[tuple[str, str]]:
        return sorted(k for k in self.train_class_images if k[0] == script)

    def verify_closed_set(self) -> None:
        """Every test class must appear in the training split of its script."""
        for key in self.test_class_images:
            if key not in self.train_class_images:
                raise ContractViolationError(
                    f"test class {key} has no training images (closed-set constraint)"
                )

    def verify_zero_shot_disjoint(self) -> None:
        """Zero-shot characters must never appear in any training class."""
        overlap = self.zs_chars & self.train_chars
        if overlap:
            raise ContractViolationError(
                f"zero-shot characters overlap the training label space: {sorted(overlap)[:5]}"
            )
