"""Frozen-encoder feature extraction.

Reads a tokenized rationale corpus (JSON lines with ``id``, ``tokens``,
``label``, ``rationale``, ``split``), runs a frozen pretrained encoder over
four kinds of inputs, and writes one FMAT file per kind:

* ``full``       the complete token sequence, one row per corpus sample;
* ``positive``   the rationale tokens as a standalone subsequence;
* ``negatives``  manifest-supplied negative rationale subsequences;
* ``masks``      full-length sequences with the dropped tokens replaced by
                 the encoder's mask token (length-preserving perturbations).

Variant rows are keyed ``{sample_id}:{mask_hash}`` in the sidecar so a
consumer can look them up by (sample, binary keep-mask).  Inference runs
once, in eval mode, with gradients disabled; the output is deterministic
for fixed encoder weights.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .fmat import write_fmat
from .manifest import ExportManifest


class ExportError(RuntimeError):
    """Encoder loading or encoding failed."""


def mask_hash(mask: Sequence[int]) -> str:
    """Hash of the binary keep-mask; matches the consumer's keying scheme."""
    bits = "".join("1" if b else "0" for b in mask)
    return hashlib.sha256(bits.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CorpusRow:
    id: str
    tokens: tuple[str, ...]
    rationale: tuple[int, ...]


def load_corpus(path) -> list[CorpusRow]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                rows.append(CorpusRow(
                    id=str(rec["id"]),
                    tokens=tuple(rec["tokens"]),
                    rationale=tuple(rec["rationale"]),
                ))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ExportError(f"{path}:{lineno}: bad corpus record: {exc}") from exc
    return rows


class Encoder:
    """A frozen pretrained transformer behind a words -> vector interface."""

    def __init__(self, manifest: ExportManifest):
        from transformers import AutoModel, AutoTokenizer

        try:
            self.tokenizer = AutoTokenizer.from_pretrained(manifest.encoder_path)
            self.model = AutoModel.from_pretrained(manifest.encoder_path)
        except Exception as exc:
            raise ExportError(
                f"cannot load encoder from {manifest.encoder_path!r}: {exc}"
            ) from exc
        self.model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        if len(self.tokenizer) > self.model.config.vocab_size:
            raise ExportError(
                f"tokenizer/encoder vocabulary mismatch: tokenizer has "
                f"{len(self.tokenizer)} entries, encoder embeds "
                f"{self.model.config.vocab_size}"
            )
        self.pooling = manifest.pooling
        self.batch_size = manifest.batch_size
        self.max_length = (
            manifest.max_length
            or int(self.model.config.max_position_embeddings)
        )
        self.mask_token = manifest.mask_token or self.tokenizer.mask_token

    @property
    def hidden_size(self) -> int:
        return int(self.model.config.hidden_size)

    def encode(self, docs: list[list[str]]) -> tuple[np.ndarray, list[bool]]:
        """Pooled vectors for word-level documents, plus truncation flags."""
        out_rows = []
        truncated = []
        for start in range(0, len(docs), self.batch_size):
            batch = docs[start:start + self.batch_size]
            enc = self.tokenizer(
                batch,
                is_split_into_words=True,
                padding=True,
                truncation=True,
                max_length=self.max_length,
                return_tensors="pt",
            )
            for i, words in enumerate(batch):
                covered = {w for w in enc.word_ids(i) if w is not None}
                truncated.append(len(covered) < len(words))
            with torch.no_grad():
                result = self.model(**enc)
            if self.pooling == "pooled_output":
                pooled = getattr(result, "pooler_output", None)
                if pooled is None:
                    raise ExportError(
                        "encoder has no pooled output; use pooling=cls_token"
                    )
            else:
                pooled = result.last_hidden_state[:, 0]
            out_rows.append(pooled.double().cpu().numpy())
        return np.vstack(out_rows), truncated


def _subsequence(tokens: Sequence[str], mask: Sequence[int]) -> list[str]:
    return [t for t, keep in zip(tokens, mask) if keep]


def _masked_in_place(tokens: Sequence[str], mask: Sequence[int],
                     mask_token: str) -> list[str]:
    return [t if keep else mask_token for t, keep in zip(tokens, mask)]


def _check_masks(sample: CorpusRow, masks: list[list[int]]) -> None:
    for m in masks:
        if len(m) != len(sample.tokens):
            raise ExportError(
                f"sample {sample.id}: mask length {len(m)} != "
                f"{len(sample.tokens)} tokens"
            )


def export(manifest: ExportManifest) -> dict[str, Path]:
    """Encode every variant kind and write the FMAT files.

    Returns the mapping of variant kind to output path for the kinds that
    produced at least one row (``full`` always does).
    """
    corpus = load_corpus(manifest.corpus_path)
    if not corpus:
        raise ExportError(f"empty corpus: {manifest.corpus_path}")
    encoder = Encoder(manifest)
    out_dir = Path(manifest.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs: dict[str, tuple[list[str], list[list[str]]]] = {}

    jobs["full"] = ([s.id for s in corpus], [list(s.tokens) for s in corpus])

    pos_ids, pos_docs = [], []
    for s in corpus:
        if any(s.rationale):
            pos_ids.append(f"{s.id}:{mask_hash(s.rationale)}")
            pos_docs.append(_subsequence(s.tokens, s.rationale))
    jobs["positive"] = (pos_ids, pos_docs)

    neg_ids, neg_docs = [], []
    for s in corpus:
        masks = manifest.negative_masks.get(s.id, [])
        _check_masks(s, masks)
        for m in masks:
            neg_ids.append(f"{s.id}:{mask_hash(m)}")
            neg_docs.append(_subsequence(s.tokens, m))
    jobs["negatives"] = (neg_ids, neg_docs)

    mask_ids, mask_docs = [], []
    if manifest.requested_masks:
        if encoder.mask_token is None:
            raise ExportError("masked variants requested but the encoder "
                              "tokenizer declares no mask token")
        for s in corpus:
            masks = manifest.requested_masks.get(s.id, [])
            _check_masks(s, masks)
            for m in masks:
                mask_ids.append(f"{s.id}:{mask_hash(m)}")
                mask_docs.append(
                    _masked_in_place(s.tokens, m, encoder.mask_token)
                )
    jobs["masks"] = (mask_ids, mask_docs)

    written: dict[str, Path] = {}
    for kind, (row_ids, docs) in jobs.items():
        if not docs:
            continue
        values, truncated = encoder.encode(docs)
        assert values.shape == (len(row_ids), encoder.hidden_size)
        warnings = [
            {"row_id": rid, "reason": "truncated to encoder input limit"}
            for rid, t in zip(row_ids, truncated) if t
        ]
        path = out_dir / manifest.outputs[kind]
        write_fmat(
            values, row_ids, path,
            source=f"encoder={manifest.encoder_path} "
                   f"pooling={manifest.pooling} kind={kind}",
            warnings=warnings,
        )
        written[kind] = path
    return written
