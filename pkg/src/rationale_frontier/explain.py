"""Model-agnostic local saliency over token-presence masks.

Both explainers see the classifier only through ``model_fn``, a callable
taking a binary presence mask of length p and returning the class
probability vector.  How a mask turns into features (token deletion for
TF-IDF, precomputed masked rows for imported embeddings) lives in the
featurizers; see :func:`mask_model_fn`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ModelFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Explanation:
    sample_id: str
    class_index: int
    scores: tuple[float, ...]

    def __post_init__(self):
        if not all(np.isfinite(self.scores)):
            raise ValueError(f"non-finite saliency scores for {self.sample_id}")


@dataclass(frozen=True)
class PerturbationConfig:
    num_samples: int = 1000
    kernel_width: float = 0.25
    ridge_strength: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_samples < 2:
            raise ValueError("num_samples must be >= 2")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be > 0")


def lime_explain(
    model_fn: ModelFn,
    p: int,
    k: int,
    cfg: PerturbationConfig,
    sample_id: str = "",
    weight_scale: float = 1.0,
) -> Explanation:
    """Local ridge surrogate fitted on randomly token-removed variants.

    Each perturbation removes a uniform count in {1..p} of uniformly chosen
    positions.  Sample weight is exp(-(r / kernel_width)^2) with r the
    fraction of removed tokens; weights are normalized to sum to one so the
    ridge solution is invariant to rescaling them.  Every token is a
    surrogate feature; scores are the surrogate coefficients.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.num_samples
    Z = np.ones((n, p))
    targets = np.empty(n)
    weights = np.empty(n)
    for i in range(n):
        n_removed = int(rng.integers(1, p + 1))
        removed = rng.choice(p, size=n_removed, replace=False)
        mask = np.ones(p, dtype=bool)
        mask[removed] = False
        Z[i, removed] = 0.0
        targets[i] = model_fn(mask)[k]
        r = n_removed / p
        weights[i] = weight_scale * np.exp(-((r / cfg.kernel_width) ** 2))
    weights /= weights.sum()

    # weighted ridge with an unpenalized intercept column
    A = np.hstack([Z, np.ones((n, 1))])
    sw = np.sqrt(weights)
    Aw = A * sw[:, None]
    yw = targets * sw
    reg = np.eye(p + 1) * cfg.ridge_strength
    reg[p, p] = 0.0
    coef = np.linalg.solve(Aw.T @ Aw + reg, Aw.T @ yw)
    return Explanation(sample_id=sample_id, class_index=k, scores=tuple(coef[:p]))


def shapley_explain(
    model_fn: ModelFn,
    p: int,
    k: int,
    permutations: int = 2000,
    seed: int = 0,
    sample_id: str = "",
) -> tuple[Explanation, np.ndarray]:
    """Monte-Carlo permutation estimate of Shapley values.

    The coalition game is v(S) = model_fn(S)[k] over token-presence sets.
    Returns the explanation and the per-token Monte-Carlo standard error.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    rng = np.random.default_rng(seed)
    sums = np.zeros(p)
    sq_sums = np.zeros(p)
    for _ in range(permutations):
        order = rng.permutation(p)
        mask = np.zeros(p, dtype=bool)
        v_prev = model_fn(mask)[k]
        contrib = np.empty(p)
        for i in order:
            mask[i] = True
            v_cur = model_fn(mask)[k]
            contrib[i] = v_cur - v_prev
            v_prev = v_cur
        sums += contrib
        sq_sums += contrib ** 2
    mean = sums / permutations
    var = np.maximum(sq_sums / permutations - mean ** 2, 0.0)
    stderr = np.sqrt(var / permutations)
    return (
        Explanation(sample_id=sample_id, class_index=k, scores=tuple(mean)),
        stderr,
    )


def mask_model_fn(weights, featurizer, sample) -> ModelFn:
    """Bind a trained classifier and a featurizer into a mask-level model."""
    from .model import predict

    def fn(mask: np.ndarray) -> np.ndarray:
        row = featurizer.transform_mask(sample, np.asarray(mask, dtype=bool))
        return predict(weights, row)

    return fn


def save_explanations(explanations: Sequence[Explanation], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in explanations:
            f.write(
                json.dumps(
                    {
                        "sample_id": e.sample_id,
                        "class_index": e.class_index,
                        "scores": list(e.scores),
                    }
                )
                + "\n"
            )


def load_explanations(path) -> list[Explanation]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                Explanation(
                    sample_id=rec["sample_id"],
                    class_index=rec["class_index"],
                    scores=tuple(rec["scores"]),
                )
            )
    return out
