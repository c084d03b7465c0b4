"""Prediction scoring and explanation quality metrics.

Plausibility is the average precision (step-wise AUPRC) of the continuous
token scores against the binary human rationale.  Faithfulness follows the
comprehensiveness/sufficiency pair, averaged over the top 1/5/10/20/50%
token bins (sufficiency is negated so higher is better for both).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .explain import Explanation, ModelFn


class ShapeError(ValueError):
    """Score / rationale length mismatch."""


DEFAULT_FRACTIONS = (0.01, 0.05, 0.10, 0.20, 0.50)


@dataclass(frozen=True)
class FaithfulnessBins:
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS

    def __post_init__(self):
        fr = self.fractions
        if not fr or any(not 0 < q <= 1 for q in fr):
            raise ValueError(f"fractions must lie in (0, 1]: {fr}")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValueError(f"fractions must be strictly increasing: {fr}")


@dataclass
class MetricReport:
    accuracy: float
    per_class_recall: list[float]
    mean_auprc: float
    auprc_skipped: int
    sufficiency_aopc: float
    comprehensiveness_aopc: float


def _ranked_indices(scores: Sequence[float]) -> np.ndarray:
    """Token indices by score descending, ties broken by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(len(scores)), -scores))


def auprc(scores: Sequence[float], rationale: Sequence[int]) -> float:
    """Average precision of the score ranking against the binary rationale.

    AP = sum_k (R_k - R_{k-1}) * P_k over prefix cut-points of the ranking.
    """
    if len(scores) != len(rationale):
        raise ShapeError(f"{len(scores)} scores vs {len(rationale)} rationale bits")
    rationale = np.asarray(rationale)
    n_pos = int(rationale.sum())
    if n_pos == 0:
        raise ValueError("rationale has no positive token; skip upstream")
    order = _ranked_indices(scores)
    hits = 0
    ap = 0.0
    for rank, idx in enumerate(order, start=1):
        if rationale[idx]:
            hits += 1
            ap += (1.0 / n_pos) * (hits / rank)
    return ap


def top_token_set(scores: Sequence[float], fraction: float) -> np.ndarray:
    """Indices of the ceil(fraction * p) highest-scored tokens."""
    p = len(scores)
    count = math.ceil(fraction * p)
    return _ranked_indices(scores)[:count]


def faithfulness(
    model_fn: ModelFn,
    explanation: Explanation,
    k: int,
    bins: FaithfulnessBins = FaithfulnessBins(),
) -> tuple[float, float]:
    """(sufficiency AOPC, comprehensiveness AOPC) for one sample.

    For each bin, comprehensiveness is the class-probability drop when the
    top tokens are removed; sufficiency is minus the drop when only the top
    tokens are kept.
    """
    p = len(explanation.scores)
    full = np.ones(p, dtype=bool)
    base = model_fn(full)[k]
    suff_terms, comp_terms = [], []
    for q in bins.fractions:
        top = top_token_set(explanation.scores, q)
        removed = full.copy()
        removed[top] = False
        comp_terms.append(base - model_fn(removed)[k])
        only = ~removed
        suff_terms.append(-(base - model_fn(only)[k]))
    return float(np.mean(suff_terms)), float(np.mean(comp_terms))


def classification_report(
    weights, X_test: np.ndarray, y_test: np.ndarray
) -> tuple[float, list[float]]:
    """Argmax accuracy and per-class recall."""
    from .model import predict

    if X_test.shape[0] == 0:
        raise ValueError("empty test set")
    preds = predict(weights, X_test).argmax(axis=1)
    accuracy = float((preds == y_test).mean())
    recalls = []
    for k in range(weights.num_classes):
        members = y_test == k
        recalls.append(
            float((preds[members] == k).mean()) if members.any() else float("nan")
        )
    return accuracy, recalls


def mean_plausibility(
    explanations: Sequence[Explanation],
    rationales: dict[str, Sequence[int]],
    gold_labels: dict[str, int],
    rationale_bearing: Sequence[int],
) -> tuple[float, int]:
    """Mean AUPRC over samples whose gold class bears a non-empty rationale.

    Returns (mean, skipped count).
    """
    values = []
    skipped = 0
    bearing = set(rationale_bearing)
    for e in explanations:
        rat = rationales[e.sample_id]
        if gold_labels[e.sample_id] not in bearing or not any(rat):
            skipped += 1
            continue
        values.append(auprc(e.scores, rat))
    mean = float(np.mean(values)) if values else float("nan")
    return mean, skipped
