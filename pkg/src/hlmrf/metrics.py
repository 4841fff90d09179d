"""Evaluation metrics: categorical accuracy over label groups, areas
under ROC and precision-recall curves, and regression errors."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import DataError, StructureError

__all__ = [
    "MetricReport",
    "categorical_accuracy",
    "auc_roc",
    "auc_pr",
    "regression_errors",
]


@dataclass
class MetricReport:
    accuracy: float | None = None
    auc_roc: float | None = None
    auc_pr_positive: float | None = None
    auc_pr_negative: float | None = None
    mse: float | None = None
    mae: float | None = None

    def rows(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)
                if getattr(self, f.name) is not None]


def categorical_accuracy(predictions, truth, label_groups) -> float:
    """Fraction of groups whose highest-scoring label matches the truth's
    single 1-hot label; argmax ties go to the lowest label index."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    groups = [np.asarray(g, dtype=np.int64) for g in label_groups]
    if not groups:
        raise DataError("no label groups to score")
    hits = 0
    for g in groups:
        if g.size == 0:
            raise DataError("empty label group")
        t = truth[g]
        if np.count_nonzero(t == 1.0) != 1:
            raise DataError("each group's truth must have exactly one label set to 1")
        if int(np.argmax(predictions[g])) == int(np.argmax(t)):
            hits += 1
    return hits / len(groups)


def _tie_averaged_ranks(scores):
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _check_binary(labels):
    labels = np.asarray(labels)
    pos = int((labels == 1).sum())
    neg = int((labels == 0).sum())
    if pos + neg != labels.size:
        raise DataError("labels must be 0 or 1")
    if pos == 0 or neg == 0:
        raise DataError("need at least one positive and one negative label")
    return pos, neg


def auc_roc(scores, labels) -> float:
    """Normalized Mann-Whitney rank statistic; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise StructureError("scores and labels must have equal length")
    pos, neg = _check_binary(labels)
    ranks = _tie_averaged_ranks(scores)
    u = ranks[labels == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def auc_pr(scores, labels, positive_class: int = 1) -> float:
    """Area under the precision-recall step curve, summed linearly in
    recall. ``positive_class=0`` scores the negative class, ranking by
    descending (1 - score)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise StructureError("scores and labels must have equal length")
    _check_binary(labels)
    if positive_class == 0:
        scores = 1.0 - scores
        labels = 1 - labels
    elif positive_class != 1:
        raise ValueError("positive_class must be 0 or 1")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    total_pos = int((labels == 1).sum())
    area = 0.0
    tp = 0
    seen = 0
    prev_recall = 0.0
    i = 0
    n = scores.size
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int((sorted_labels[i:j + 1] == 1).sum())
        seen += j - i + 1
        recall = tp / total_pos
        precision = tp / seen
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(area)


def regression_errors(predictions, truth):
    """(mean squared error, mean absolute error) on the [0, 1] scale."""
    predictions = np.asarray(predictions, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predictions.shape != truth.shape:
        raise StructureError("predictions and truth must have equal length")
    diff = predictions - truth
    return float(np.mean(diff * diff)), float(np.mean(np.abs(diff)))
