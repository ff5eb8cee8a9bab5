"""Confusion matrices and the six-metric classification report.

Binary reports use a designated positive class; multiclass reports
macro-average precision/recall/F1/CSI over one-vs-rest splits and use the
multiclass generalization of the Matthews coefficient, which reduces to
the binary formula at two classes. Any 0/0 ratio is defined as 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError, EvaluationError

METRIC_ORDER = ("accuracy", "precision", "recall", "f1", "csi", "mcc")


@dataclass
class ConfusionMatrix:
    """Counts[true_class, predicted_class]."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DataFormatError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise DataFormatError("confusion matrix counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassStats:
    label: int
    precision: float
    recall: float
    f1: float
    csi: float


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    csi: float
    mcc: float
    averaging: str  # "binary" or "macro"
    per_class: list[ClassStats] = field(default_factory=list)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_ORDER}


def confusion(
    labels: Sequence[int], predictions: Sequence[int], num_classes: int
) -> ConfusionMatrix:
    """Tally (true, predicted) pairs into a num_classes x num_classes grid."""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise DataFormatError(
            f"labels ({labels.shape}) and predictions ({predictions.shape}) differ in length"
        )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    if labels.size:
        if labels.min() < 0 or labels.max() >= num_classes:
            raise DataFormatError(f"labels must lie in [0, {num_classes})")
        if predictions.min() < 0 or predictions.max() >= num_classes:
            raise DataFormatError(f"predictions must lie in [0, {num_classes})")
        np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts)


def _safe_div(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def _one_vs_rest(counts: np.ndarray, k: int) -> tuple[int, int, int, int]:
    tp = int(counts[k, k])
    fn = int(counts[k, :].sum()) - tp
    fp = int(counts[:, k].sum()) - tp
    tn = int(counts.sum()) - tp - fn - fp
    return tp, tn, fp, fn


def _binary_mcc(tp: int, tn: int, fp: int, fn: int) -> float:
    denom = math.sqrt(
        float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn)
    )
    return _safe_div(float(tp) * tn - float(fp) * fn, denom)


def _multiclass_mcc(counts: np.ndarray) -> float:
    c = counts.astype(np.float64)
    s = c.sum()
    trace = np.trace(c)
    t = c.sum(axis=1)  # true-class totals
    p = c.sum(axis=0)  # predicted-class totals
    numerator = trace * s - float(t @ p)
    denominator = math.sqrt(max(s * s - float(p @ p), 0.0)) * math.sqrt(
        max(s * s - float(t @ t), 0.0)
    )
    return _safe_div(numerator, denominator)


def metrics(cm: ConfusionMatrix, positive_class: Optional[int] = None) -> MetricsReport:
    """Derive the six scalar metrics from a confusion matrix.

    Two classes: the formulas apply to the designated positive class
    (default 1). More classes: macro averages, with MCC computed from the
    full matrix.
    """
    if cm.total == 0:
        raise EvaluationError("cannot compute metrics from an empty confusion matrix")
    counts = cm.counts
    num_classes = cm.num_classes
    accuracy = _safe_div(float(np.trace(counts)), float(cm.total))

    per_class = []
    for k in range(num_classes):
        tp, tn, fp, fn = _one_vs_rest(counts, k)
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        csi = _safe_div(tp, tp + fn + fp)
        per_class.append(ClassStats(k, precision, recall, f1, csi))

    if num_classes == 2:
        pos = 1 if positive_class is None else positive_class
        if pos not in (0, 1):
            raise EvaluationError(f"positive class must be 0 or 1, got {pos}")
        stats = per_class[pos]
        tp, tn, fp, fn = _one_vs_rest(counts, pos)
        return MetricsReport(
            accuracy=accuracy,
            precision=stats.precision,
            recall=stats.recall,
            f1=stats.f1,
            csi=stats.csi,
            mcc=_binary_mcc(tp, tn, fp, fn),
            averaging="binary",
            per_class=per_class,
        )

    return MetricsReport(
        accuracy=accuracy,
        precision=float(np.mean([s.precision for s in per_class])),
        recall=float(np.mean([s.recall for s in per_class])),
        f1=float(np.mean([s.f1 for s in per_class])),
        csi=float(np.mean([s.csi for s in per_class])),
        mcc=_multiclass_mcc(counts),
        averaging="macro",
        per_class=per_class,
    )
