"""Export manifest: what to encode, with which encoder, into which files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


POOLING_MODES = ("cls_token", "pooled_output")
VARIANT_KINDS = ("full", "positive", "negatives", "masks")

_DEFAULT_OUTPUTS = {
    "full": "full.fmat",
    "positive": "positive.fmat",
    "negatives": "negatives.fmat",
    "masks": "masks.fmat",
}


class ManifestError(ValueError):
    """Invalid or inconsistent export manifest."""


@dataclass
class ExportManifest:
    corpus_path: str
    encoder_path: str
    out_dir: str
    pooling: str = "cls_token"
    mask_token: str | None = None       # None: use the encoder's own
    max_length: int | None = None       # None: the encoder's position limit
    batch_size: int = 32
    # per-sample binary keep-masks (1 = token kept), keyed by sample id
    negative_masks: dict[str, list[list[int]]] = field(default_factory=dict)
    requested_masks: dict[str, list[list[int]]] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=lambda: dict(_DEFAULT_OUTPUTS))

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ManifestError(
                f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}"
            )
        unknown = set(self.outputs) - set(VARIANT_KINDS)
        if unknown:
            raise ManifestError(f"unknown variant kinds in outputs: {sorted(unknown)}")
        missing = set(VARIANT_KINDS) - set(self.outputs)
        if missing:
            raise ManifestError(f"outputs missing variant kinds: {sorted(missing)}")
        if len(set(self.outputs.values())) != len(self.outputs):
            raise ManifestError(
                f"output paths must be distinct per variant kind: {self.outputs}"
            )
        if self.batch_size < 1:
            raise ManifestError(f"batch_size must be >= 1, got {self.batch_size}")

    @staticmethod
    def load(path) -> "ExportManifest":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        try:
            return ExportManifest(**raw)
        except TypeError as exc:
            raise ManifestError(str(exc)) from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.__dict__, f, indent=2, sort_keys=True)
