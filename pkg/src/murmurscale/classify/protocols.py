"""Cross-validation, grid search and the balanced / class-weighted evaluation protocols."""

from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metrics import EvalReport, auc_score, report_from_scores
from .models import ModelSpec, TrainedModel, train

__all__ = [
    "DegenerateFoldsError",
    "stratified_folds",
    "stratified_split",
    "grid_points",
    "GridSearchResult",
    "grid_search_cv",
    "evaluate",
    "ExperimentSummary",
    "balanced_experiment",
    "WeightedResult",
    "weighted_experiment",
    "matrix_arrays",
    "derive_seed",
    "METRIC_FIELDS",
]

METRIC_FIELDS = ("accuracy", "sensitivity", "specificity", "auc", "f1_absent", "f1_present")


class DegenerateFoldsError(ValueError):
    """A class has too few rows for the requested stratified split."""


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from a tuple of integers."""
    return int(np.random.default_rng(list(parts)).integers(2**63 - 1))


def matrix_arrays(matrix, feature_names=None):
    """``(X, y, ids, dropped)`` from a FeatureMatrix, keeping labeled complete rows."""
    labeled = matrix.labeled()
    names = tuple(feature_names or labeled.feature_names)
    X = labeled.X(names)
    y = labeled.y().astype(int)
    ok = np.all(np.isfinite(X), axis=1)
    ids = [i for i, keep in zip(labeled.ids, ok) if keep]
    dropped = [i for i, keep in zip(labeled.ids, ok) if not keep]
    return X[ok], y[ok], ids, dropped


def stratified_folds(y, folds: int, rng) -> np.ndarray:
    """Fold index per row, each class dealt round-robin after a shuffle."""
    y = np.asarray(y).astype(int)
    if folds < 2:
        raise ValueError("need at least two folds")
    assignment = np.empty(len(y), dtype=int)
    for c in (0, 1):
        idx = np.where(y == c)[0]
        if len(idx) < folds:
            raise DegenerateFoldsError(
                f"class {c} has {len(idx)} rows, fewer than the {folds} folds requested"
            )
        assignment[rng.permutation(idx)] = np.arange(len(idx)) % folds
    return assignment


def stratified_split(y, test_fraction: float, rng):
    """Per-class shuffled split; returns sorted ``(train_idx, test_idx)``."""
    y = np.asarray(y).astype(int)
    test = []
    for c in (0, 1):
        idx = rng.permutation(np.where(y == c)[0])
        k = int(round(test_fraction * len(idx)))
        if k < 1 or k >= len(idx):
            raise DegenerateFoldsError(
                f"class {c} with {len(idx)} rows cannot be split at fraction {test_fraction}"
            )
        test.extend(idx[:k])
    test = np.sort(np.asarray(test))
    return np.setdiff1d(np.arange(len(y)), test), test


def grid_points(grid: dict) -> list[dict]:
    """Cartesian product of a grid in key order, last key varying fastest."""
    if not grid:
        raise ValueError("grid is empty")
    keys = list(grid)
    for k in keys:
        if len(grid[k]) == 0:
            raise ValueError(f"grid entry {k!r} has no values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def evaluate(model: TrainedModel, X, y) -> EvalReport:
    pred = model.predict(X)
    return report_from_scores(y, pred.scores, pred.labels)


@dataclass
class GridSearchResult:
    best_params: dict
    best_index: int
    best_score: float
    table: list[dict]


def _cv_point(args):
    spec, point, X, y, assignment, folds = args
    s = spec.with_params(**point)
    scores = []
    for f in range(folds):
        tr, va = assignment != f, assignment == f
        model = train(s, X[tr], y[tr])
        scores.append(auc_score(y[va], model.decision(X[va])))
    return scores


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def grid_search_cv(spec: ModelSpec, grid: dict, X, y, folds: int = 5, metric: str = "auc",
                   seed: int = 0, workers: int = 1) -> GridSearchResult:
    """Stratified k-fold search maximising mean validation AUC.

    ``grid`` maps hyperparameter names (or ``class_weights``/``seed``) to
    value lists.  The first grid point wins ties.
    """
    if metric != "auc":
        raise ValueError("only metric='auc' is supported")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    points = grid_points(grid)
    for p in points:  # validate names before any fitting
        spec.with_params(**p)
    assignment = stratified_folds(y, folds, np.random.default_rng(seed))
    results = _map(_cv_point, [(spec, p, X, y, assignment, folds) for p in points], workers)
    table, best, best_score = [], 0, -np.inf
    for k, (p, scores) in enumerate(zip(points, results)):
        mean = float(np.mean(scores))
        table.append({"index": k, "params": p, "mean_auc": mean, "fold_auc": scores})
        if mean > best_score:
            best, best_score = k, mean
    return GridSearchResult(points[best], best, best_score, table)


@dataclass
class ExperimentSummary:
    spec: dict
    seed: int
    repetitions: int
    mean: dict
    sd: dict
    reports: list[EvalReport] = field(default_factory=list)
    record: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "seed": self.seed,
            "repetitions": self.repetitions,
            "mean": self.mean,
            "sd": self.sd,
            "reports": [r.to_dict() for r in self.reports],
            "record": self.record,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _summarise(reports: list[EvalReport]):
    mean, sd = {}, {}
    for name in METRIC_FIELDS:
        vals = np.array([getattr(r, name) for r in reports if getattr(r, name) is not None])
        mean[name] = float(vals.mean()) if len(vals) else None
        sd[name] = float(vals.std(ddof=1)) if len(vals) > 1 else None
    return mean, sd


def _balanced_rep(args):
    X, y, spec, seed, rep, test_fraction, val_fraction = args
    rng = np.random.default_rng([seed, rep])
    pos, neg = np.where(y == 1)[0], np.where(y == 0)[0]
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    keep = np.sort(np.concatenate([minority, rng.choice(majority, len(minority), replace=False)]))
    Xs, ys = X[keep], y[keep]
    tr, te = stratified_split(ys, test_fraction, rng)
    inner_tr, inner_va = stratified_split(ys[tr], val_fraction, rng)
    fit_idx, val_idx = tr[inner_tr], tr[inner_va]
    s = spec.with_params(seed=derive_seed(seed, rep))
    model = train(s, Xs[fit_idx], ys[fit_idx], validation=(Xs[val_idx], ys[val_idx]))
    return evaluate(model, Xs[te], ys[te])


def balanced_experiment(data, spec: ModelSpec, repetitions: int = 100, seed: int = 0,
                        test_fraction: float = 0.2, val_fraction: float = 0.2,
                        workers: int = 1, feature_names=None) -> ExperimentSummary:
    """Repeated majority-subsampled evaluation; reports mean and sample sd per metric.

    Repetition ``r`` draws everything from ``default_rng([seed, r])``, so the
    summary does not depend on ``workers``.  ``data`` is a FeatureMatrix or
    an ``(X, y)`` pair.
    """
    X, y, dropped = _as_arrays(data, feature_names)
    counts = np.bincount(y, minlength=2)
    if counts.min() < 10:
        raise ValueError(f"minority class has {counts.min()} rows; at least 10 are needed")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    jobs = [(X, y, spec, seed, r, test_fraction, val_fraction) for r in range(repetitions)]
    reports = _map(_balanced_rep, jobs, workers)
    mean, sd = _summarise(reports)
    record = {"n_rows": int(len(y)), "class_counts": counts.tolist(), "dropped_rows": dropped,
              "data_hash": data_hash(X, y)}
    return ExperimentSummary(spec.to_dict(), seed, repetitions, mean, sd, reports, record)


@dataclass
class WeightedResult:
    report: EvalReport
    chosen_weights: tuple
    selection: str
    table: list[dict]
    spec: dict
    seed: int
    record: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "chosen_weights": list(self.chosen_weights),
            "selection": self.selection,
            "table": self.table,
            "spec": self.spec,
            "seed": self.seed,
            "record": self.record,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _youden_point(args):
    spec, w, Xf, yf, Xv, yv = args
    model = train(spec.with_params(class_weights=w), Xf, yf, validation=(Xv, yv))
    return evaluate(model, Xv, yv).youden, model


def weighted_experiment(data, spec: ModelSpec, weight_grid, seed: int = 0,
                        test_fraction: float = 0.2, val_fraction: float = 0.2, folds: int = 5,
                        selection: str | None = None, workers: int = 1,
                        feature_names=None) -> WeightedResult:
    """Class-weight search on the full (imbalanced) data, then a held-out test.

    ``selection="auc"`` (default for every kind except the network) picks the
    weight pair by stratified CV AUC on the training split and refits on it.
    ``selection="youden"`` (default for the network) fits each pair on an
    inner training split and keeps the one with the largest Youden index on
    the validation split.  Ties go to the earlier grid entry.
    """
    X, y, dropped = _as_arrays(data, feature_names)
    weight_grid = [tuple(float(v) for v in w) for w in weight_grid]
    if not weight_grid:
        raise ValueError("weight grid is empty")
    selection = selection or ("youden" if spec.kind == "NeuralNet" else "auc")
    rng = np.random.default_rng([seed, 0])
    tr, te = stratified_split(y, test_fraction, rng)
    base = spec.with_params(seed=derive_seed(seed, 1))
    if selection == "auc":
        gs = grid_search_cv(base, {"class_weights": weight_grid}, X[tr], y[tr], folds=folds,
                            seed=derive_seed(seed, 2), workers=workers)
        chosen = gs.best_params["class_weights"]
        inner_tr, inner_va = stratified_split(y[tr], val_fraction, rng)
        model = train(base.with_params(class_weights=chosen), X[tr], y[tr],
                      validation=(X[tr][inner_va], y[tr][inner_va]))
        table = [{"weights": list(r["params"]["class_weights"]), "score": r["mean_auc"]}
                 for r in gs.table]
    elif selection == "youden":
        inner_tr, inner_va = stratified_split(y[tr], val_fraction, rng)
        fit, val = tr[inner_tr], tr[inner_va]
        jobs = [(base, w, X[fit], y[fit], X[val], y[val]) for w in weight_grid]
        results = _map(_youden_point, jobs, workers)
        scores = [r[0] for r in results]
        best = int(np.argmax(scores))  # first maximum
        chosen, model = weight_grid[best], results[best][1]
        table = [{"weights": list(w), "score": float(sc)} for w, sc in zip(weight_grid, scores)]
    else:
        raise ValueError(f"selection must be 'auc' or 'youden', got {selection!r}")
    report = evaluate(model, X[te], y[te])
    record = {"n_rows": int(len(y)), "class_counts": np.bincount(y, minlength=2).tolist(),
              "dropped_rows": dropped, "data_hash": data_hash(X, y)}
    return WeightedResult(report, tuple(chosen), selection, table, spec.to_dict(), seed, record)


def _as_arrays(data, feature_names):
    if isinstance(data, tuple):
        X, y = data
        X = np.asarray(X, dtype=float)
        y = np.asarray(y).astype(int)
        return X, y, []
    X, y, _, dropped = matrix_arrays(data, feature_names)
    return X, y, dropped


def data_hash(X, y) -> str:
    """SHA-256 of the float64 feature bytes followed by the int64 labels."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    return h.hexdigest()
