"""Evaluation metrics: AUROC and F1-Macro for the tag task, Accuracy,
CS(theta), and MAE (in difficulty-index units) for the difficulty task,
plus ROC curve export.

Conventions, recorded in every report:
* AUROC uses the Mann-Whitney formulation with midranks for ties; labels
  with no positives or no negatives are undefined and skipped from the
  macro average.
* F1 defines every 0/0 as 0, so all labels enter the macro average.
* Metrics take probabilities, never logits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float | None:
    """Mann-Whitney AUROC: (R+ - n+(n+ + 1)/2) / (n+ * n-).

    Returns None when the labels are degenerate (no positives or no
    negatives), which callers skip from macro averages.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos + n_neg != len(labels):
        raise DataError("labels must be binary 0/1")
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(scores)
    r_pos = float(np.sum(ranks[labels == 1]))
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def f1_macro(probabilities, labels, threshold: float = 0.5):
    """Per-label F1 at the given threshold plus the unweighted macro mean.

    Predictions are prob >= threshold.  Precision, recall, and F1 each
    treat 0/0 as 0, so no label is ever skipped.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold {threshold} must be in [0, 1]")
    probs = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    y = np.atleast_2d(np.asarray(labels))
    if probs.shape != y.shape:
        raise DataError("probability and label matrices must match")
    preds = probs >= threshold
    per_label: list[float] = []
    for k in range(y.shape[1]):
        tp = int(np.sum(preds[:, k] & (y[:, k] == 1)))
        fp = int(np.sum(preds[:, k] & (y[:, k] == 0)))
        fn = int(np.sum(~preds[:, k] & (y[:, k] == 1)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_label.append(f1)
    return per_label, float(np.mean(per_label))


def accuracy(pred_indices, true_indices) -> float:
    pred = np.asarray(pred_indices)
    true = np.asarray(true_indices)
    if len(pred) != len(true):
        raise DataError("prediction and truth lengths differ")
    if len(pred) == 0:
        raise DataError("empty inputs")
    return float(np.mean(pred == true))


def cs(pred_indices, true_indices, theta: int) -> float:
    """Cumulative score: percent of samples within theta index levels,
    computed as (100 * count) / N so it matches integer-count oracles
    bit-for-bit."""
    if theta < 0:
        raise DataError("theta must be >= 0")
    pred = np.asarray(pred_indices)
    true = np.asarray(true_indices)
    if len(pred) != len(true):
        raise DataError("prediction and truth lengths differ")
    if len(pred) == 0:
        raise DataError("empty inputs")
    within = int(np.sum(np.abs(pred - true) <= theta))
    return 100.0 * within / len(pred)


def mae(pred_indices, true_indices) -> float:
    """Mean absolute error in difficulty-index units (level steps)."""
    pred = np.asarray(pred_indices, dtype=np.float64)
    true = np.asarray(true_indices, dtype=np.float64)
    if len(pred) != len(true):
        raise DataError("prediction and truth lengths differ")
    if len(pred) == 0:
        raise DataError("empty inputs")
    return float(np.mean(np.abs(pred - true)))


@dataclass(frozen=True)
class RocCurve:
    """ROC points from (0,0) to (1,1); thresholds descend, first is +inf."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    def area(self) -> float:
        return float(np.trapezoid(self.tpr, self.fpr))


def roc_points(scores, labels) -> RocCurve:
    """ROC curve with one point per distinct score, descending.

    The trapezoidal area under the returned curve equals the Mann-Whitney
    AUROC (ties grouped into single steps produce the midrank diagonal).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC undefined: need at least one positive and one negative")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.concatenate([distinct, [len(scores) - 1]])
    tp_cum = np.cumsum(sorted_labels == 1)[cut]
    fp_cum = np.cumsum(sorted_labels == 0)[cut]
    thresholds = np.concatenate([[np.inf], sorted_scores[cut]])
    tpr = np.concatenate([[0.0], tp_cum / n_pos])
    fpr = np.concatenate([[0.0], fp_cum / n_neg])
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr)


@dataclass
class TagEval:
    per_label_auroc: dict[str, float | None]
    per_label_f1: dict[str, float]
    macro_auroc: float | None
    macro_f1: float
    threshold: float
    skipped_labels: list[str]

    def to_dict(self) -> dict:
        return {
            "macro_auroc": self.macro_auroc,
            "macro_f1": self.macro_f1,
            "threshold": self.threshold,
            "skipped_labels": self.skipped_labels,
            "per_label_auroc": self.per_label_auroc,
            "per_label_f1": self.per_label_f1,
        }


@dataclass
class DifficultyEval:
    accuracy: float
    cs: dict[int, float]
    mae: float
    num_evaluated: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "cs": {str(t): v for t, v in self.cs.items()},
            "mae": self.mae,
            "num_evaluated": self.num_evaluated,
        }


@dataclass
class EvalReport:
    tag: TagEval | None = None
    difficulty: DifficultyEval | None = None
    roc: dict[str, RocCurve] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.to_dict() if self.tag else None,
            "difficulty": self.difficulty.to_dict() if self.difficulty else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self) -> str:
        lines = []
        if self.tag:
            lines.append(f"{'Tag task':<22}{'value':>10}")
            au = self.tag.macro_auroc
            lines.append(f"{'  macro AUROC':<22}{'n/a' if au is None else f'{au:.4f}':>10}")
            lines.append(f"{'  macro F1':<22}{self.tag.macro_f1:>10.4f}")
            if self.tag.skipped_labels:
                lines.append(f"  AUROC skipped: {', '.join(self.tag.skipped_labels)}")
        if self.difficulty:
            lines.append(f"{'Difficulty task':<22}{'value':>10}")
            lines.append(f"{'  accuracy':<22}{self.difficulty.accuracy:>10.4f}")
            for theta, v in sorted(self.difficulty.cs.items()):
                lines.append(f"{'  CS(' + str(theta) + ')':<22}{v:>10.2f}")
            lines.append(f"{'  MAE (levels)':<22}{self.difficulty.mae:>10.4f}")
        return "\n".join(lines)


def evaluate_tags(probabilities, labels, label_names, threshold: float = 0.5) -> TagEval:
    """Per-label AUROC/F1 plus macros over a (N, K) probability matrix."""
    probs = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels)
    per_f1, macro_f1 = f1_macro(probs, y, threshold)
    per_auroc: dict[str, float | None] = {}
    skipped: list[str] = []
    defined: list[float] = []
    for k, name in enumerate(label_names):
        a = auroc(probs[:, k], y[:, k])
        per_auroc[name] = a
        if a is None:
            skipped.append(name)
        else:
            defined.append(a)
    return TagEval(
        per_label_auroc=per_auroc,
        per_label_f1=dict(zip(label_names, per_f1)),
        macro_auroc=float(np.mean(defined)) if defined else None,
        macro_f1=macro_f1,
        threshold=threshold,
        skipped_labels=skipped,
    )


def evaluate_difficulty(pred_indices, true_indices, thetas=(3, 5)) -> DifficultyEval:
    pred = np.asarray(pred_indices)
    true = np.asarray(true_indices)
    return DifficultyEval(
        accuracy=accuracy(pred, true),
        cs={int(t): cs(pred, true, int(t)) for t in thetas},
        mae=mae(pred, true),
        num_evaluated=len(pred),
    )


def write_roc_csv(curves: dict[str, RocCurve], path: str | Path) -> None:
    """Export ROC curves as CSV rows (label, threshold, fpr, tpr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "threshold", "fpr", "tpr"])
        for label, curve in curves.items():
            for t, f, s in zip(curve.thresholds, curve.fpr, curve.tpr):
                writer.writerow([label, repr(float(t)), repr(float(f)), repr(float(s))])
