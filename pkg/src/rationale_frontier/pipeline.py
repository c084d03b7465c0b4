"""End-to-end orchestration: corpus -> features -> frontier -> explanations
-> metrics -> reports.

A run writes everything under ``out_dir``::

    config.json            exact snapshot of the resolved configuration
    corpus.jsonl           tokenized, consensus-merged samples with splits
    labels.json            reduced label space
    train.fmat/test.fmat   feature matrices (plus .json sidecars)
    frontier.json          ordered frontier points
    weights/model_XXX.json trained classifier per frontier point
    explanations/model_XXX.jsonl
    metrics.json           per-model test metrics
    selection.json         baseline/chosen indices
    report.csv, summary.json

All stages are deterministic given the seeds in the configuration.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import corpus as corpus_mod
from . import moo
from .corpus import LabelSpace, TokenizedSample
from .explain import (
    Explanation,
    PerturbationConfig,
    lime_explain,
    load_explanations,
    mask_model_fn,
    save_explanations,
    shapley_explain,
)
from .featurize import (
    FeatureMatrix,
    ImportedFeaturizer,
    TfidfFeaturizer,
    build_variants,
    load_feature_matrix,
    store_feature_matrix,
    tfidf_fit,
)
from .metrics import (
    FaithfulnessBins,
    MetricReport,
    classification_report,
    faithfulness,
    mean_plausibility,
)
from .model import (
    ClassifierWeights,
    TrainingProblem,
    contrastive_rationale_loss,
    cross_entropy,
    predict,
    select_regularization,
    train,
)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    corpus_path: str
    labels_path: str
    out_dir: str
    featurizer: dict = field(default_factory=lambda: {"kind": "tfidf", "k": 200})
    keep_classes: Optional[list[int]] = None
    train_fraction: float = 0.8
    split_seed: int = 0
    m: int = 3
    variant_seed: int = 0
    c_reg: Optional[float] = None
    c_grid: list[float] = field(default_factory=lambda: [0.01, 0.1, 1.0, 10.0, 100.0])
    cv_folds: int = 5
    cv_seed: int = 0
    budget: int = 30
    gap_tol: float = 1e-3
    tol: float = 1e-4
    max_iter: int = 1000
    explainer: str = "lime"
    lime_samples: int = 1000
    lime_kernel_width: float = 0.25
    lime_ridge: float = 1.0
    shapley_permutations: int = 2000
    explain_seed: int = 0
    subset_size: Optional[int] = None
    subset_seed: int = 0
    bins: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.10, 0.20, 0.50])
    faithfulness_class: str = "predicted"
    max_acc_drop: float = 0.01
    manual_override: Optional[int] = None
    include_degenerate: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.budget < 2:
            raise ConfigError(f"budget must be >= 2, got {self.budget}")
        if self.explainer not in ("lime", "shapley"):
            raise ConfigError(f"unknown explainer: {self.explainer!r}")
        if self.featurizer.get("kind") not in ("tfidf", "imported"):
            raise ConfigError(f"unknown featurizer: {self.featurizer!r}")
        if self.faithfulness_class not in ("predicted", "gold"):
            raise ConfigError(f"faithfulness_class: {self.faithfulness_class!r}")

    @staticmethod
    def load(path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        try:
            return ExperimentConfig(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(dataclasses.asdict(self), f, indent=2, sort_keys=True)


@dataclass
class RunArtifact:
    directory: Path
    frontier: moo.Frontier
    baseline_index: int
    chosen_index: int


# ---------------------------------------------------------------------------
# Stage: corpus + features
# ---------------------------------------------------------------------------

def _prepare_corpus(cfg: ExperimentConfig):
    raw = corpus_mod.load_corpus(cfg.corpus_path)
    labels = LabelSpace.load(cfg.labels_path)
    samples = corpus_mod.consensus_corpus(raw, labels)
    if cfg.keep_classes is not None:
        samples, labels, _ = corpus_mod.filter_classes(
            samples, set(cfg.keep_classes), labels
        )
    samples = corpus_mod.split(samples, cfg.train_fraction, cfg.split_seed)
    train_set = [s for s in samples if s.split == "train"]
    test_set = [s for s in samples if s.split == "test"]
    return train_set, test_set, labels


def _build_featurizer(cfg: ExperimentConfig, train_set):
    spec = cfg.featurizer
    if spec["kind"] == "tfidf":
        model = tfidf_fit(train_set, k=spec["k"], seed=spec.get("seed", 0))
        return TfidfFeaturizer(model)
    full = load_feature_matrix(spec["full_fmat"])
    paths = spec.get("variants_fmat")
    variants = None
    if paths:
        if isinstance(paths, str):
            paths = [paths]
        mats = [load_feature_matrix(p) for p in paths]
        variants = FeatureMatrix(
            values=np.vstack([m.values for m in mats]),
            row_ids=[r for m in mats for r in m.row_ids],
        )
    return ImportedFeaturizer(full, variants)


def _feature_rows(featurizer, samples) -> FeatureMatrix:
    if isinstance(featurizer, ImportedFeaturizer):
        rows = [featurizer.transform_full(s.id) for s in samples]
    else:
        rows = [featurizer.transform_tokens(s, s.tokens) for s in samples]
    return FeatureMatrix(values=np.array(rows), row_ids=[s.id for s in samples])


def stage_featurize(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    train_set, test_set, labels = _prepare_corpus(cfg)
    labels.save(out / "labels.json")
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as f:
        for s in train_set + test_set:
            f.write(
                json.dumps(
                    {
                        "id": s.id,
                        "tokens": list(s.tokens),
                        "label": s.label,
                        "rationale": list(s.rationale),
                        "split": s.split,
                    }
                )
                + "\n"
            )
    featurizer = _build_featurizer(cfg, train_set)
    store_feature_matrix(_feature_rows(featurizer, train_set), out / "train.fmat",
                         source=cfg.featurizer["kind"])
    store_feature_matrix(_feature_rows(featurizer, test_set), out / "test.fmat",
                         source=cfg.featurizer["kind"])


def _load_tokenized(out: Path) -> list[TokenizedSample]:
    samples = []
    with open(out / "corpus.jsonl", encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            samples.append(
                TokenizedSample(
                    id=rec["id"],
                    tokens=tuple(rec["tokens"]),
                    label=rec["label"],
                    rationale=tuple(rec["rationale"]),
                    split=rec["split"],
                )
            )
    return samples


def _run_state(cfg: ExperimentConfig):
    out = Path(cfg.out_dir)
    samples = _load_tokenized(out)
    labels = LabelSpace.load(out / "labels.json")
    train_set = [s for s in samples if s.split == "train"]
    test_set = [s for s in samples if s.split == "test"]
    featurizer = _build_featurizer(cfg, train_set)
    X_train = load_feature_matrix(out / "train.fmat")
    X_test = load_feature_matrix(out / "test.fmat")
    return out, train_set, test_set, labels, featurizer, X_train, X_test


# ---------------------------------------------------------------------------
# Stage: frontier
# ---------------------------------------------------------------------------

def stage_frontier(cfg: ExperimentConfig) -> moo.Frontier:
    out, train_set, _, labels, featurizer, X_train, _ = _run_state(cfg)
    y_train = np.array([s.label for s in train_set])
    num_classes = len(labels.names)
    variants = build_variants(train_set, featurizer, cfg.m, cfg.variant_seed)

    c_reg = cfg.c_reg
    if c_reg is None:
        c_reg = select_regularization(
            X_train.values, y_train, num_classes, cfg.c_grid,
            folds=cfg.cv_folds, seed=cfg.cv_seed,
        )
    l2 = 1.0 / c_reg

    weights_dir = out / "weights"
    weights_dir.mkdir(exist_ok=True)
    counter = [0]

    def solve(w):
        problem = TrainingProblem(
            X=X_train.values, y=y_train, variants=variants,
            num_classes=num_classes, l2_strength=l2, w=w,
        )
        result = train(problem, tol=cfg.tol, max_iter=cfg.max_iter)
        ce = float(cross_entropy(result.weights, X_train.values, y_train)[0])
        crl = float(contrastive_rationale_loss(result.weights, variants)[0])
        ref = f"weights/model_{counter[0]:03d}.json"
        result.weights.save(out / ref)
        counter[0] += 1
        return moo.ObjectivePoint(f1=ce, f2=crl, w=w, solution_ref=ref)

    frontier = moo.nise(solve, budget=cfg.budget, gap_tol=cfg.gap_tol)
    moo.save_frontier(frontier, out / "frontier.json")
    with open(out / "regularization.json", "w", encoding="utf-8") as f:
        json.dump({"c_reg": c_reg}, f)
    return frontier


# ---------------------------------------------------------------------------
# Stage: explanations
# ---------------------------------------------------------------------------

def _explanation_subset(cfg: ExperimentConfig, test_set, labels) -> list:
    eligible = [
        s for s in test_set
        if s.label in labels.rationale_bearing and s.rationale_size > 0
    ]
    if cfg.subset_size is None or cfg.subset_size >= len(eligible):
        return eligible
    rng = np.random.default_rng(cfg.subset_seed)
    idx = rng.choice(len(eligible), size=cfg.subset_size, replace=False)
    return [eligible[i] for i in sorted(idx)]


def _explain_sample(cfg: ExperimentConfig, weights, featurizer, sample, k):
    fn = mask_model_fn(weights, featurizer, sample)
    if cfg.explainer == "lime":
        pcfg = PerturbationConfig(
            num_samples=cfg.lime_samples,
            kernel_width=cfg.lime_kernel_width,
            ridge_strength=cfg.lime_ridge,
            seed=cfg.explain_seed,
        )
        return lime_explain(fn, sample.num_tokens, k, pcfg, sample_id=sample.id)
    expl, _ = shapley_explain(
        fn, sample.num_tokens, k, permutations=cfg.shapley_permutations,
        seed=cfg.explain_seed, sample_id=sample.id,
    )
    return expl


def stage_explain(cfg: ExperimentConfig) -> None:
    out, _, test_set, labels, featurizer, _, _ = _run_state(cfg)
    frontier = moo.load_frontier(out / "frontier.json")
    subset = _explanation_subset(cfg, test_set, labels)
    expl_dir = out / "explanations"
    expl_dir.mkdir(exist_ok=True)
    for i, point in enumerate(frontier.points):
        weights = ClassifierWeights.load(out / point.solution_ref)
        explanations = [
            _explain_sample(cfg, weights, featurizer, s, s.label) for s in subset
        ]
        save_explanations(explanations, expl_dir / f"model_{i:03d}.jsonl")


# ---------------------------------------------------------------------------
# Stage: evaluation
# ---------------------------------------------------------------------------

def stage_evaluate(cfg: ExperimentConfig) -> list[MetricReport]:
    out, _, test_set, labels, featurizer, _, X_test = _run_state(cfg)
    frontier = moo.load_frontier(out / "frontier.json")
    y_test = np.array([s.label for s in test_set])
    subset = _explanation_subset(cfg, test_set, labels)
    by_id = {s.id: s for s in subset}
    rationales = {s.id: s.rationale for s in subset}
    gold = {s.id: s.label for s in subset}
    bins = FaithfulnessBins(tuple(cfg.bins))

    reports = []
    for i, point in enumerate(frontier.points):
        weights = ClassifierWeights.load(out / point.solution_ref)
        accuracy, recalls = classification_report(weights, X_test.values, y_test)
        explanations = load_explanations(out / "explanations" / f"model_{i:03d}.jsonl")
        auprc_mean, skipped = mean_plausibility(
            explanations, rationales, gold, labels.rationale_bearing
        )
        suff_vals, comp_vals = [], []
        for e in explanations:
            s = by_id[e.sample_id]
            fn = mask_model_fn(weights, featurizer, s)
            if cfg.faithfulness_class == "predicted":
                k = int(np.argmax(fn(np.ones(s.num_tokens, dtype=bool))))
            else:
                k = e.class_index
            sv, cv = faithfulness(fn, e, k, bins)
            suff_vals.append(sv)
            comp_vals.append(cv)
        reports.append(
            MetricReport(
                accuracy=accuracy,
                per_class_recall=recalls,
                mean_auprc=auprc_mean,
                auprc_skipped=skipped,
                sufficiency_aopc=float(np.mean(suff_vals)) if suff_vals else 0.0,
                comprehensiveness_aopc=float(np.mean(comp_vals)) if comp_vals else 0.0,
            )
        )
    with open(out / "metrics.json", "w", encoding="utf-8") as f:
        json.dump([dataclasses.asdict(r) for r in reports], f, indent=2)
    return reports


def _load_metrics(out: Path) -> list[MetricReport]:
    with open(out / "metrics.json", encoding="utf-8") as f:
        return [MetricReport(**r) for r in json.load(f)]


# ---------------------------------------------------------------------------
# Stage: selection + report
# ---------------------------------------------------------------------------

def select_model(
    frontier: moo.Frontier,
    metrics: Sequence[MetricReport],
    max_acc_drop: float = 0.01,
    manual_override: Optional[int] = None,
) -> tuple[int, int, bool]:
    """(baseline index, chosen index, warning flag).

    The baseline is the w1 = 1 point.  The chosen model maximizes test
    mean AUPRC among non-degenerate points whose accuracy is within
    ``max_acc_drop`` of the baseline's.  ``manual_override`` bypasses the
    policy.
    """
    baseline_index = None
    for i, p in enumerate(frontier.points):
        if p.w[0] == 1.0:
            baseline_index = i
            break
    if baseline_index is None:
        raise ValueError("frontier has no w1=1 baseline point")
    if manual_override is not None:
        return baseline_index, manual_override, False

    base_acc = metrics[baseline_index].accuracy
    feasible = [
        i for i, p in enumerate(frontier.points)
        if p.w[0] > 0.0
        and metrics[i].accuracy >= base_acc - max_acc_drop
        and np.isfinite(metrics[i].mean_auprc)
    ]
    if not feasible:
        return baseline_index, baseline_index, True
    chosen = max(feasible, key=lambda i: (metrics[i].mean_auprc, -i))
    return baseline_index, chosen, False


def stage_select(cfg: ExperimentConfig) -> tuple[int, int]:
    out = Path(cfg.out_dir)
    frontier = moo.load_frontier(out / "frontier.json")
    metrics = _load_metrics(out)
    baseline, chosen, warn = select_model(
        frontier, metrics, cfg.max_acc_drop, cfg.manual_override
    )
    with open(out / "selection.json", "w", encoding="utf-8") as f:
        json.dump(
            {"baseline_index": baseline, "chosen_index": chosen,
             "no_feasible_point": warn},
            f,
            indent=2,
        )
    return baseline, chosen


def _delta_row(point, report: MetricReport, base: MetricReport) -> dict:
    auprc_delta = (report.mean_auprc - base.mean_auprc) * 100.0
    rel = auprc_delta / (base.mean_auprc * 100.0) * 100.0 if base.mean_auprc else 0.0
    return {
        "w1": point.w[0],
        "acc_pct_delta": (report.accuracy - base.accuracy) * 100.0,
        "auprc_pct_delta": auprc_delta,
        "auprc_rel_pct_delta": rel,
        "suff_delta": report.sufficiency_aopc - base.sufficiency_aopc,
        "comp_delta": report.comprehensiveness_aopc - base.comprehensiveness_aopc,
    }


def emit_report(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out_dir)
    frontier = moo.load_frontier(out / "frontier.json")
    metrics = _load_metrics(out)
    with open(out / "selection.json", encoding="utf-8") as f:
        selection = json.load(f)
    baseline = selection["baseline_index"]
    chosen = selection["chosen_index"]
    base = metrics[baseline]

    columns = ["w1", "acc_pct_delta", "auprc_pct_delta", "auprc_rel_pct_delta",
               "suff_delta", "comp_delta"]
    with open(out / "report.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for i, point in enumerate(frontier.points):
            if point.w[0] == 0.0 and not cfg.include_degenerate:
                continue
            row = _delta_row(point, metrics[i], base)
            writer.writerow([repr(row[c]) for c in columns])

    summary = {
        "baseline_index": baseline,
        "chosen_index": chosen,
        "baseline": dataclasses.asdict(base),
        "chosen": dataclasses.asdict(metrics[chosen]),
        "chosen_deltas": _delta_row(frontier.points[chosen], metrics[chosen], base),
    }
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Full chain
# ---------------------------------------------------------------------------

_STAGES = ("featurize", "frontier", "explain", "evaluate", "select", "report")


def run_stage(cfg: ExperimentConfig, stage: str):
    fns = {
        "featurize": stage_featurize,
        "frontier": stage_frontier,
        "explain": stage_explain,
        "evaluate": stage_evaluate,
        "select": stage_select,
        "report": emit_report,
    }
    if stage not in fns:
        raise ConfigError(f"unknown stage: {stage!r}")
    try:
        return fns[stage](cfg)
    except ConfigError:
        raise
    except Exception as exc:
        marker = Path(cfg.out_dir) / "INCOMPLETE"
        try:
            marker.write_text(f"failed at stage {stage}: {exc}\n")
        except OSError:
            pass
        raise StageError(stage, exc) from exc


def run_experiment(cfg: ExperimentConfig) -> RunArtifact:
    """Execute every stage in order and return the run artifact."""
    for stage in _STAGES:
        run_stage(cfg, stage)
    out = Path(cfg.out_dir)
    marker = out / "INCOMPLETE"
    if marker.exists():
        marker.unlink()
    frontier = moo.load_frontier(out / "frontier.json")
    with open(out / "selection.json", encoding="utf-8") as f:
        selection = json.load(f)
    return RunArtifact(
        directory=out,
        frontier=frontier,
        baseline_index=selection["baseline_index"],
        chosen_index=selection["chosen_index"],
    )
