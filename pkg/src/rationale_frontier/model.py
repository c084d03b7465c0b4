"""Multinomial logistic regression under a weighted pair of losses.

The scalarized training objective is

    w1 * CE(X, y) + w2 * CRL(variants) + (1 / (2 C)) * sum_k ||theta_k||^2

where CE is the mean cross-entropy of the softmax classifier, CRL is the
contrastive rationale loss (the positive rationale's logit against the
log-sum-exp of all variant logits at the gold class), and the L2 term
excludes the intercepts.  Both losses are convex in (theta, bias), so a
deterministic full-batch quasi-Newton solve from theta = 0 finds the global
optimum of every weighted problem independently of solve order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .featurize import RationaleVariantSet


class NumericError(ValueError):
    """Non-finite values encountered in inputs or during optimization."""


class DivergenceError(NumericError):
    """The optimizer produced a non-finite objective."""


@dataclass
class ClassifierWeights:
    theta: np.ndarray   # (|C|, d)
    bias: np.ndarray    # (|C|,)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.bias))):
            raise NumericError("non-finite classifier weights")

    @property
    def num_classes(self) -> int:
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.theta.shape[1]

    def logits(self, X: np.ndarray) -> np.ndarray:
        return X @ self.theta.T + self.bias

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "num_classes": self.num_classes,
                    "dim": self.dim,
                    "bias": self.bias.tolist(),
                    "theta": self.theta.tolist(),
                },
                f,
            )

    @staticmethod
    def load(path) -> "ClassifierWeights":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        w = ClassifierWeights(
            theta=np.array(raw["theta"]), bias=np.array(raw["bias"])
        )
        if w.num_classes != raw["num_classes"] or w.dim != raw["dim"]:
            raise NumericError(f"{path}: header/payload shape mismatch")
        return w


@dataclass
class TrainingProblem:
    X: np.ndarray                           # (N, d) full-text features
    y: np.ndarray                           # (N,) class indices
    variants: Sequence[RationaleVariantSet]
    num_classes: int
    l2_strength: float = 0.0                # 1 / C
    w: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        w1, w2 = self.w
        if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-9:
            raise ValueError(f"trade-off weights must lie on the simplex: {self.w}")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be >= 0")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def predict(weights: ClassifierWeights, x: np.ndarray) -> np.ndarray:
    """Softmax probabilities for one feature row or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input features")
    return np.exp(_log_softmax(weights.logits(x)))


def cross_entropy(
    weights: ClassifierWeights, X: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean negative log-likelihood; returns (loss, d_theta, d_bias)."""
    n = X.shape[0]
    log_probs = _log_softmax(weights.logits(X))
    loss = -log_probs[np.arange(n), y].mean()
    probs = np.exp(log_probs)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, delta.T @ X, delta.sum(axis=0)


def contrastive_rationale_loss(
    weights: ClassifierWeights, variants: Sequence[RationaleVariantSet]
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean contrastive loss over variant sets; returns (loss, d_theta, d_bias).

    For each set with gold class k the loss term is
    -ln(exp(g(pos)_k) / sum_j exp(g(var_j)_k)), the sum running over all m
    variants including the positive.  The per-class intercept cancels inside
    the ratio, so d_bias is identically zero.
    """
    d_theta = np.zeros_like(weights.theta)
    d_bias = np.zeros_like(weights.bias)
    if not variants:
        return 0.0, d_theta, d_bias
    total = 0.0
    for vs in variants:
        k = vs.label
        rows = vs.stacked()                       # (m, d), positive first
        logits = rows @ weights.theta[k]          # bias cancels in the ratio
        shifted = logits - logits.max()
        lse = np.log(np.exp(shifted).sum())
        total += lse - shifted[0]
        p = np.exp(shifted - lse)                 # softmax over variants
        d_theta[k] += p @ rows - rows[0]
    n = len(variants)
    return total / n, d_theta / n, d_bias


def scalarized_objective(
    problem: TrainingProblem, weights: ClassifierWeights
) -> tuple[float, np.ndarray, np.ndarray]:
    """w1*CE + w2*CRL + L2 penalty (intercepts excluded); returns gradients."""
    w1, w2 = problem.w
    value = 0.0
    d_theta = np.zeros_like(weights.theta)
    d_bias = np.zeros_like(weights.bias)
    if w1 != 0.0:
        ce, g_t, g_b = cross_entropy(weights, problem.X, problem.y)
        value += w1 * ce
        d_theta += w1 * g_t
        d_bias += w1 * g_b
    if w2 != 0.0:
        crl, g_t, g_b = contrastive_rationale_loss(weights, problem.variants)
        value += w2 * crl
        d_theta += w2 * g_t
        d_bias += w2 * g_b
    if problem.l2_strength > 0.0:
        value += 0.5 * problem.l2_strength * float((weights.theta ** 2).sum())
        d_theta += problem.l2_strength * weights.theta
    return value, d_theta, d_bias


@dataclass
class TrainResult:
    weights: ClassifierWeights
    converged: bool
    iterations: int
    final_loss: float
    objective_trace: list[float]


def train(
    problem: TrainingProblem,
    tol: float = 1e-4,
    max_iter: int = 1000,
    history: int = 10,
) -> TrainResult:
    """Full-batch L-BFGS with Armijo backtracking, started from theta = 0.

    Stops when the gradient infinity-norm drops to tol, otherwise returns
    the best iterate seen within max_iter.  Fully deterministic.
    """
    n_classes = problem.num_classes
    dim = problem.X.shape[1]
    shape_t = (n_classes, dim)

    def pack(theta, bias):
        return np.concatenate([theta.ravel(), bias])

    def unpack(z):
        return z[: n_classes * dim].reshape(shape_t), z[n_classes * dim:]

    def value_grad(z):
        theta, bias = unpack(z)
        w = ClassifierWeights(theta=theta, bias=bias)
        val, g_t, g_b = scalarized_objective(problem, w)
        if not np.isfinite(val):
            raise DivergenceError("non-finite objective during optimization")
        return val, pack(g_t, g_b)

    it = 0
    z = np.zeros(n_classes * dim + n_classes)
    f, g = value_grad(z)
    trace = [f]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    best_z, best_f = z.copy(), f
    converged = False
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        direction = _lbfgs_direction(g, s_hist, y_hist)
        slope = float(g @ direction)
        if slope >= 0:  # safeguard: fall back to steepest descent
            direction = -g
            slope = float(g @ direction)
        step = 1.0
        accepted = False
        for _ in range(60):
            z_new = z + step * direction
            f_new, g_new = value_grad(z_new)
            if f_new <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        s = z_new - z
        yv = g_new - g
        if float(s @ yv) > 1e-12:
            s_hist.append(s)
            y_hist.append(yv)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
        z, f, g = z_new, f_new, g_new
        trace.append(f)
        if f < best_f:
            best_f, best_z = f, z.copy()
    if np.max(np.abs(g)) <= tol:
        converged = True
    theta, bias = unpack(best_z if best_f < f else z)
    final = min(best_f, f)
    return TrainResult(
        weights=ClassifierWeights(theta=theta, bias=bias),
        converged=converged,
        iterations=it,
        final_loss=final,
        objective_trace=trace,
    )


def _lbfgs_direction(g, s_hist, y_hist):
    """Two-loop recursion for the L-BFGS descent direction."""
    q = -g.copy()
    if not s_hist:
        return q
    alphas = []
    rhos = [1.0 / float(s @ y) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    s_last, y_last = s_hist[-1], y_hist[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def select_regularization(
    X: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    grid: Sequence[float],
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Pick C by k-fold cross-validated accuracy at w = (1, 0).

    Ties break toward stronger regularization (smaller C).  The chosen C is
    then frozen for every trade-off weight.
    """
    if not grid:
        raise ValueError("empty regularization grid")
    if folds < 2:
        raise ValueError("folds must be >= 2")
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_of = np.empty(n, dtype=int)
    for pos, i in enumerate(order):
        fold_of[i] = pos % folds

    candidates = sorted(set(grid))
    best_c, best_acc = None, -1.0
    for c in candidates:
        accs = []
        for fold in range(folds):
            val = fold_of == fold
            problem = TrainingProblem(
                X=X[~val], y=y[~val], variants=[], num_classes=num_classes,
                l2_strength=1.0 / c, w=(1.0, 0.0),
            )
            weights = train(problem).weights
            preds = predict(weights, X[val]).argmax(axis=1)
            accs.append(float((preds == y[val]).mean()))
        mean_acc = float(np.mean(accs))
        if mean_acc > best_acc + 1e-12:
            best_acc, best_c = mean_acc, c
    return best_c
