"""Classification metrics with "present" (label 1) as the positive class."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..stats import average_ranks

__all__ = ["EvalReport", "auc_score", "confusion_counts", "youden_index", "report_from_scores"]


def auc_score(y, scores) -> float | None:
    """Rank-statistic AUC: P(score of a random positive > score of a random negative).

    Ties count one half.  Returns None when ``y`` holds a single class.
    """
    y = np.asarray(y).astype(int)
    s = np.asarray(scores, dtype=float)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = average_ranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def confusion_counts(y, labels) -> dict[str, int]:
    y = np.asarray(y).astype(int)
    p = np.asarray(labels).astype(int)
    return {
        "tp": int(np.sum((y == 1) & (p == 1))),
        "fn": int(np.sum((y == 1) & (p == 0))),
        "tn": int(np.sum((y == 0) & (p == 0))),
        "fp": int(np.sum((y == 0) & (p == 1))),
    }


def _ratio(a: float, b: float) -> float:
    return float(a / b) if b else 0.0


def _f1(tp: int, fp: int, fn: int) -> float:
    return _ratio(2 * tp, 2 * tp + fp + fn)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    sensitivity: float
    specificity: float
    auc: float | None
    f1_absent: float
    f1_present: float
    confusion: dict
    n_test: int

    @classmethod
    def from_confusion(cls, confusion: dict, auc: float | None = None) -> "EvalReport":
        tp, fn, tn, fp = (confusion[k] for k in ("tp", "fn", "tn", "fp"))
        n = tp + fn + tn + fp
        return cls(
            accuracy=_ratio(tp + tn, n),
            sensitivity=_ratio(tp, tp + fn),
            specificity=_ratio(tn, tn + fp),
            auc=auc,
            f1_absent=_f1(tn, fn, fp),
            f1_present=_f1(tp, fp, fn),
            confusion=dict(confusion),
            n_test=n,
        )

    @property
    def youden(self) -> float:
        return self.sensitivity + self.specificity - 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)


def youden_index(y, labels) -> float:
    c = confusion_counts(y, labels)
    return EvalReport.from_confusion(c).youden


def report_from_scores(y, scores, labels) -> EvalReport:
    return EvalReport.from_confusion(confusion_counts(y, labels), auc_score(y, scores))
