"""Classifier harness: models, metrics and evaluation protocols."""

from .metrics import EvalReport, auc_score, confusion_counts, report_from_scores, youden_index
from .models import KINDS, ModelSpec, Prediction, Standardizer, TrainedModel, predict, train
from .protocols import (
    DegenerateFoldsError,
    ExperimentSummary,
    GridSearchResult,
    WeightedResult,
    balanced_experiment,
    evaluate,
    grid_search_cv,
    stratified_folds,
    stratified_split,
    weighted_experiment,
)

__all__ = [
    "EvalReport", "auc_score", "confusion_counts", "report_from_scores", "youden_index",
    "KINDS", "ModelSpec", "Prediction", "Standardizer", "TrainedModel", "predict", "train",
    "DegenerateFoldsError", "ExperimentSummary", "GridSearchResult", "WeightedResult",
    "balanced_experiment", "evaluate", "grid_search_cv", "stratified_folds",
    "stratified_split", "weighted_experiment",
]
