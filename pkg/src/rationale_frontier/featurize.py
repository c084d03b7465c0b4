"""Token sequences -> fixed-dimension real vectors, plus rationale variants.

Two featurization routes share one interface:

* TF-IDF unigrams, L2-normalized, projected onto the top-k right singular
  directions of the training matrix (latent semantic analysis).
* Imported encoder features read from FMAT files written by an external
  embedding exporter.

FMAT is a tiny binary format: magic ``FMAT``, little-endian u32 version=1,
u64 rows, u64 cols, then rows*cols IEEE-754 f32 values row-major.  A JSON
sidecar carries ``row_ids`` and a free-form ``source`` string.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import TokenizedSample

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1


class FormatError(Exception):
    """Corrupt or truncated FMAT file."""


class RankError(ValueError):
    """Requested SVD dimension exceeds the achievable rank."""


class CoverageError(KeyError):
    """A masked-variant feature row was requested but never precomputed."""


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (rows, cols), float
    row_ids: list[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if self.values.shape[0] != len(self.row_ids):
            raise ValueError(
                f"{self.values.shape[0]} rows but {len(self.row_ids)} row ids"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def store_feature_matrix(mat: FeatureMatrix, path, source: str = "") -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(FMAT_MAGIC)
        f.write(struct.pack("<I", FMAT_VERSION))
        f.write(struct.pack("<QQ", mat.rows, mat.cols))
        f.write(mat.values.astype("<f4").tobytes(order="C"))
    sidecar = {"row_ids": mat.row_ids, "source": source}
    with open(path.with_suffix(path.suffix + ".json"), "w", encoding="utf-8") as f:
        json.dump(sidecar, f)


def load_feature_matrix(path) -> FeatureMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != FMAT_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0: {data[:4]!r}")
    if len(data) < 24:
        raise FormatError(f"{path}: truncated header at byte {len(data)}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != FMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    rows, cols = struct.unpack_from("<QQ", data, 8)
    expected = 24 + rows * cols * 4
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload length {len(data) - 24} bytes at byte 24, "
            f"expected {rows}x{cols}x4 = {rows * cols * 4}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=24).reshape(rows, cols)
    with open(path.with_suffix(path.suffix + ".json"), encoding="utf-8") as f:
        sidecar = json.load(f)
    return FeatureMatrix(values=values.astype(np.float64), row_ids=sidecar["row_ids"])


# ---------------------------------------------------------------------------
# TF-IDF + truncated SVD
# ---------------------------------------------------------------------------

@dataclass
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray            # (V,)
    svd_basis: np.ndarray      # (V, k), orthonormal columns
    k: int

    def transform(self, tokens: Sequence[str]) -> np.ndarray:
        """Project one document; out-of-vocabulary tokens contribute nothing."""
        row = np.zeros(len(self.vocabulary))
        for tok in tokens:
            j = self.vocabulary.get(tok)
            if j is not None:
                row[j] += 1.0
        row *= self.idf
        norm = np.linalg.norm(row)
        if norm > 0:
            row /= norm
        return row @ self.svd_basis


def _seeded_truncated_svd(X: np.ndarray, k: int, seed: int = 0,
                          oversample: int = 10, power_iters: int = 4) -> np.ndarray:
    """Top-k right singular directions via seeded subspace iteration.

    Returns a (cols, k) matrix with orthonormal columns, sign-fixed so the
    largest-magnitude entry of each column is positive.
    """
    n, v = X.shape
    l = min(k + oversample, v, n)
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((v, l))
    Y = X @ omega
    Q, _ = np.linalg.qr(Y)
    for _ in range(power_iters):
        Z, _ = np.linalg.qr(X.T @ Q)
        Q, _ = np.linalg.qr(X @ Z)
    B = Q.T @ X
    _, _, Vt = np.linalg.svd(B, full_matrices=False)
    basis = Vt[:k].T
    # deterministic sign convention
    for j in range(basis.shape[1]):
        i = np.argmax(np.abs(basis[:, j]))
        if basis[i, j] < 0:
            basis[:, j] *= -1
    return basis


def tfidf_fit(samples: Sequence[TokenizedSample], k: int, seed: int = 0) -> TfIdfModel:
    """Fit vocabulary, smoothed idf and an SVD basis on the training split only.

    idf(t) = ln((1+N)/(1+df(t))) + 1; rows are L2-normalized before SVD.
    """
    if not samples:
        raise ValueError("empty training set")
    vocab_set: set[str] = set()
    for s in samples:
        vocab_set.update(s.tokens)
    vocabulary = {tok: j for j, tok in enumerate(sorted(vocab_set))}
    n, v = len(samples), len(vocabulary)
    max_k = min(v, n)
    if not 1 <= k <= max_k:
        raise RankError(f"k={k} not achievable; valid range is 1..{max_k}")

    df = np.zeros(v)
    counts = np.zeros((n, v))
    for i, s in enumerate(samples):
        for tok in s.tokens:
            counts[i, vocabulary[tok]] += 1.0
        for tok in set(s.tokens):
            df[vocabulary[tok]] += 1.0
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0

    X = counts * idf
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    X /= norms
    basis = _seeded_truncated_svd(X, k, seed=seed)
    return TfIdfModel(vocabulary=vocabulary, idf=idf, svd_basis=basis, k=k)


# ---------------------------------------------------------------------------
# Rationale variants
# ---------------------------------------------------------------------------

@dataclass
class RationaleVariantSet:
    sample_id: str
    label: int
    positive: np.ndarray            # (d,)
    negatives: np.ndarray           # (m-1, d)

    @property
    def m(self) -> int:
        return 1 + self.negatives.shape[0]

    def stacked(self) -> np.ndarray:
        """Positive row first, then the negatives: shape (m, d)."""
        return np.vstack([self.positive[None, :], self.negatives])


def _sample_seed(seed: int, sample_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def sample_negatives(
    sample: TokenizedSample, m: int, seed: int
) -> list[tuple[int, ...]]:
    """Draw m-1 uniformly random token-position sets of the rationale's size.

    A draw identical (as a position set) to the positive rationale is
    rejected and redrawn, up to 100 attempts, then accepted.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    p = sample.num_tokens
    size = min(sample.rationale_size, p)
    positive = frozenset(i for i, r in enumerate(sample.rationale) if r)
    rng = np.random.default_rng(_sample_seed(seed, sample.id))
    negatives = []
    for _ in range(m - 1):
        for _attempt in range(100):
            draw = rng.choice(p, size=size, replace=False)
            positions = frozenset(int(i) for i in draw)
            if positions != positive:
                break
        negatives.append(tuple(sorted(positions)))
    return negatives


def build_variants(
    samples: Sequence[TokenizedSample],
    featurizer,
    m: int,
    seed: int,
) -> list[RationaleVariantSet]:
    """Featurize the positive rationale and m-1 negative draws per sample.

    Samples with empty rationales are excluded (they still contribute to the
    cross-entropy loss elsewhere).  Token subsequences keep original order.
    """
    out = []
    for s in samples:
        if s.rationale_size == 0:
            continue
        pos_tokens = tuple(t for t, r in zip(s.tokens, s.rationale) if r)
        positive = featurizer.transform_tokens(s, pos_tokens)
        neg_rows = []
        for positions in sample_negatives(s, m, seed):
            neg_tokens = tuple(s.tokens[i] for i in positions)
            neg_rows.append(featurizer.transform_tokens(s, neg_tokens))
        d = positive.shape[0]
        negatives = np.vstack(neg_rows) if neg_rows else np.zeros((0, d))
        out.append(
            RationaleVariantSet(
                sample_id=s.id, label=s.label, positive=positive, negatives=negatives
            )
        )
    return out


# ---------------------------------------------------------------------------
# Featurizer interface shared by the pipeline and the explainers
# ---------------------------------------------------------------------------

def mask_hash(mask: Sequence[int]) -> str:
    bits = "".join("1" if b else "0" for b in mask)
    return hashlib.sha256(bits.encode()).hexdigest()[:16]


class TfidfFeaturizer:
    """Featurizes any token subsequence as a standalone document."""

    def __init__(self, model: TfIdfModel):
        self.model = model

    @property
    def dim(self) -> int:
        return self.model.k

    def transform_tokens(self, sample: TokenizedSample, tokens) -> np.ndarray:
        return self.model.transform(tokens)

    def transform_mask(self, sample: TokenizedSample, mask) -> np.ndarray:
        kept = tuple(t for t, keep in zip(sample.tokens, mask) if keep)
        return self.model.transform(kept)


class ImportedFeaturizer:
    """Feature rows precomputed by an external encoder exporter.

    Full-text rows are keyed by sample id; masked-variant rows by
    (sample_id, mask-hash).  Variant rows for arbitrary token subsequences
    must have been exported ahead of time.
    """

    def __init__(self, full: FeatureMatrix,
                 variants: Optional[FeatureMatrix] = None):
        self.full = {rid: full.values[i] for i, rid in enumerate(full.row_ids)}
        self.variant_rows: dict[str, np.ndarray] = {}
        if variants is not None:
            for i, rid in enumerate(variants.row_ids):
                self.variant_rows[rid] = variants.values[i]
        self._dim = full.cols

    @property
    def dim(self) -> int:
        return self._dim

    def transform_full(self, sample_id: str) -> np.ndarray:
        return self.full[sample_id]

    def transform_tokens(self, sample: TokenizedSample, tokens) -> np.ndarray:
        mask = _tokens_to_mask(sample, tokens)
        return self.transform_mask(sample, mask)

    def transform_mask(self, sample: TokenizedSample, mask) -> np.ndarray:
        if all(mask):
            return self.full[sample.id]
        key = f"{sample.id}:{mask_hash(mask)}"
        try:
            return self.variant_rows[key]
        except KeyError:
            raise CoverageError(
                f"no precomputed row for sample {sample.id} mask-hash "
                f"{mask_hash(mask)}"
            ) from None


def _tokens_to_mask(sample: TokenizedSample, tokens) -> tuple[int, ...]:
    """Recover a presence mask from an in-order token subsequence."""
    mask = [0] * sample.num_tokens
    it = iter(enumerate(sample.tokens))
    for tok in tokens:
        for i, t in it:
            if t == tok:
                mask[i] = 1
                break
        else:
            raise ValueError(f"tokens are not a subsequence of sample {sample.id}")
    return tuple(mask)
