"""Classification metrics: confusion counts, scalar scores, and AUROC.

Positive class is "faulty" (label 1). Zero-denominator metrics return 0
rather than erroring so published degenerate rows (all-negative predictors)
reproduce as-is. AUROC uses the tie-aware Mann-Whitney formulation because
fault-free images score an exact 0, making heavy ties the normal case.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateLabels, EmptyMatrix, LengthMismatch


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float | None = None

    def to_dict(self, confusion: ConfusionMatrix | None = None) -> dict:
        d = {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auroc": self.auroc,
        }
        if confusion is not None:
            d["confusion"] = confusion.to_dict()
        return d


@dataclass(frozen=True)
class ScoredLabel:
    """Score (higher = more faulty) paired with the ground-truth label."""

    score: float
    label: int

    def __post_init__(self):
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def compute_metrics(cm: ConfusionMatrix) -> MetricReport:
    """Accuracy, precision, recall, F1 from counts; AUROC left unset."""
    if cm.total == 0:
        raise EmptyMatrix("metrics need at least one counted sample")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return MetricReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def compute_auroc(items: Sequence[ScoredLabel]) -> float:
    """Probability a random positive outscores a random negative, ties half.

    Computed from midranks (equivalent to pairwise enumeration, without the
    quadratic pass): AUROC = (R_pos - P(P+1)/2) / (P*N).
    """
    scores = np.array([it.score for it in items], dtype=np.float64)
    labels = np.array([it.label for it in items], dtype=np.int64)
    pos = int(labels.sum())
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise DegenerateLabels("AUROC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[labels == 1].sum())
    return (rank_sum_pos - pos * (pos + 1) / 2.0) / (pos * neg)


def confusion_from_predictions(
    predicted: Sequence[int], actual: Sequence[int]
) -> ConfusionMatrix:
    """Tally counts with 1 = faulty = positive."""
    if len(predicted) != len(actual):
        raise LengthMismatch(f"{len(predicted)} predictions vs {len(actual)} labels")
    if len(predicted) == 0:
        raise EmptyMatrix("need at least one prediction")
    tp = fp = tn = fn = 0
    for p, a in zip(predicted, actual):
        if p not in (0, 1) or a not in (0, 1):
            raise ValueError(f"labels must be 0/1, got predicted={p!r} actual={a!r}")
        if p == 1 and a == 1:
            tp += 1
        elif p == 1 and a == 0:
            fp += 1
        elif p == 0 and a == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)
