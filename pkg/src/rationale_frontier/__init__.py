"""Contrastive rationale training with Pareto frontier exploration of the
performance / explanation-plausibility trade-off for text classifiers."""

from .corpus import LabelSpace, RawSample, TokenizedSample
from .featurize import FeatureMatrix, RationaleVariantSet, TfIdfModel
from .model import ClassifierWeights, TrainingProblem
from .moo import Frontier, ObjectivePoint
from .explain import Explanation, PerturbationConfig
from .metrics import FaithfulnessBins, MetricReport
from .pipeline import ExperimentConfig, RunArtifact

__all__ = [
    "LabelSpace", "RawSample", "TokenizedSample",
    "FeatureMatrix", "RationaleVariantSet", "TfIdfModel",
    "ClassifierWeights", "TrainingProblem",
    "Frontier", "ObjectivePoint",
    "Explanation", "PerturbationConfig",
    "FaithfulnessBins", "MetricReport",
    "ExperimentConfig", "RunArtifact",
]

__version__ = "0.1.0"
