"""Loading, consensus-merging, filtering and splitting of rationale-annotated corpora.

The on-disk corpus format is UTF-8 JSON lines.  Each line holds one
multi-annotator record::

    {"id": str, "tokens": [str], "label_votes": [str],
     "annotator_masks": [[0|1]], "split": "train"|"test"}   # split optional

A sidecar ``labels.json`` lists the ordered class names and the subset of
classes that carry rationales.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class CorpusError(Exception):
    """Malformed corpus file or record."""


class LabelError(CorpusError):
    """Class name not present in the label space."""


@dataclass(frozen=True)
class LabelSpace:
    names: tuple[str, ...]
    rationale_bearing: frozenset[int]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise LabelError(f"duplicate class names: {self.names}")
        bad = [k for k in self.rationale_bearing if not 0 <= k < len(self.names)]
        if bad:
            raise LabelError(f"rationale_bearing indices out of range: {bad}")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LabelError(f"unknown class name: {name!r}") from None

    @staticmethod
    def load(path) -> "LabelSpace":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        return LabelSpace(tuple(raw["names"]), frozenset(raw["rationale_bearing"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {"names": list(self.names),
                 "rationale_bearing": sorted(self.rationale_bearing)},
                f,
            )


@dataclass(frozen=True)
class RawSample:
    """Pre-consensus record with one label vote and one mask per annotator."""

    id: str
    tokens: tuple[str, ...]
    label_votes: tuple[str, ...]
    annotator_masks: tuple[tuple[int, ...], ...]
    split: Optional[str] = None

    def __post_init__(self):
        p = len(self.tokens)
        if p < 1:
            raise CorpusError(f"sample {self.id}: empty token sequence")
        if not self.label_votes:
            raise CorpusError(f"sample {self.id}: no label votes")
        for mask in self.annotator_masks:
            if len(mask) != p:
                raise CorpusError(
                    f"sample {self.id}: mask length {len(mask)} != {p} tokens"
                )


@dataclass(frozen=True)
class TokenizedSample:
    """Consensus-merged sample: one label, one binary rationale mask."""

    id: str
    tokens: tuple[str, ...]
    label: int
    rationale: tuple[int, ...]
    split: Optional[str] = None

    def __post_init__(self):
        if len(self.rationale) != len(self.tokens):
            raise CorpusError(
                f"sample {self.id}: rationale length {len(self.rationale)} "
                f"!= {len(self.tokens)} tokens"
            )

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def rationale_size(self) -> int:
        return sum(self.rationale)


def tokenize(text: str) -> tuple[str, ...]:
    """Whitespace-and-punctuation splitter for corpora that ship raw text."""
    pattern = f"([\\s{re.escape(string.punctuation)}])"
    return tuple(t for t in re.split(pattern, text) if t and not t.isspace())


def load_corpus(path, schema: str = "jsonl") -> list[RawSample]:
    """Read one RawSample per line, preserving order."""
    if schema != "jsonl":
        raise CorpusError(f"unknown corpus schema: {schema!r}")
    samples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            try:
                sample = RawSample(
                    id=str(rec["id"]),
                    tokens=tuple(rec["tokens"]),
                    label_votes=tuple(rec["label_votes"]),
                    annotator_masks=tuple(tuple(m) for m in rec["annotator_masks"]),
                    split=rec.get("split"),
                )
            except KeyError as exc:
                raise CorpusError(f"{path}:{lineno}: missing field {exc}") from exc
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            samples.append(sample)
    return samples


def save_corpus(samples: Iterable[RawSample], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            rec = {
                "id": s.id,
                "tokens": list(s.tokens),
                "label_votes": list(s.label_votes),
                "annotator_masks": [list(m) for m in s.annotator_masks],
            }
            if s.split is not None:
                rec["split"] = s.split
            f.write(json.dumps(rec) + "\n")


def consensus(sample: RawSample, labels: LabelSpace) -> Optional[TokenizedSample]:
    """Strict-majority merge of annotator votes and masks.

    The label must win strictly more than half of the votes, otherwise the
    sample is dropped (returns None).  A token is a rationale token iff
    strictly more than half of the annotator masks mark it.
    """
    n_votes = len(sample.label_votes)
    counts: dict[str, int] = {}
    for vote in sample.label_votes:
        counts[vote] = counts.get(vote, 0) + 1
    winner = max(counts, key=counts.get)
    if counts[winner] * 2 <= n_votes:
        return None
    label = labels.index(winner)

    p = len(sample.tokens)
    n_masks = len(sample.annotator_masks)
    rationale = tuple(
        1 if sum(mask[i] for mask in sample.annotator_masks) * 2 > n_masks else 0
        for i in range(p)
    ) if n_masks else (0,) * p
    return TokenizedSample(
        id=sample.id,
        tokens=sample.tokens,
        label=label,
        rationale=rationale,
        split=sample.split,
    )


def consensus_corpus(
    samples: Iterable[RawSample], labels: LabelSpace
) -> list[TokenizedSample]:
    merged = (consensus(s, labels) for s in samples)
    return [s for s in merged if s is not None]


def filter_classes(
    samples: Sequence[TokenizedSample],
    keep: set[int],
    labels: LabelSpace,
) -> tuple[list[TokenizedSample], LabelSpace, dict[int, int]]:
    """Drop samples outside ``keep`` and re-index labels densely.

    Returns the filtered samples, the reduced label space, and the
    old-index -> new-index mapping.
    """
    if not keep:
        raise CorpusError("keep set is empty")
    mapping = {old: new for new, old in enumerate(sorted(keep))}
    kept = [
        replace(s, label=mapping[s.label]) for s in samples if s.label in keep
    ]
    if not kept:
        raise CorpusError("filtering emptied the corpus")
    new_labels = LabelSpace(
        names=tuple(labels.names[old] for old in sorted(keep)),
        rationale_bearing=frozenset(
            mapping[k] for k in labels.rationale_bearing if k in keep
        ),
    )
    return kept, new_labels, mapping


def split(
    samples: Sequence[TokenizedSample],
    train_fraction: float,
    seed: int,
) -> list[TokenizedSample]:
    """Assign train/test splits, stratified by label, deterministic in seed.

    Samples that already carry an explicit split keep it.
    """
    if not samples:
        raise CorpusError("cannot split an empty corpus")
    if not 0.0 < train_fraction < 1.0:
        raise CorpusError(f"train_fraction must be in (0,1), got {train_fraction}")

    out: list[Optional[TokenizedSample]] = list(samples)
    unassigned = [i for i, s in enumerate(samples) if s.split not in ("train", "test")]
    rng = np.random.default_rng(seed)
    by_label: dict[int, list[int]] = {}
    for i in unassigned:
        by_label.setdefault(samples[i].label, []).append(i)
    for label in sorted(by_label):
        idx = np.array(by_label[label])
        rng.shuffle(idx)
        n_train = int(round(train_fraction * len(idx)))
        for pos, i in enumerate(idx):
            out[i] = replace(samples[i], split="train" if pos < n_train else "test")
    return out  # type: ignore[return-value]
