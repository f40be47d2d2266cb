"""Confusion counts, metrics, threshold sweeps and fold aggregation.

By default the *benign* class is the positive class: TP counts benign URLs
predicted benign and TN counts phishing URLs predicted phishing. Pass
``positive=1`` to score phishing as positive instead.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .lbp import label_from_score

BENIGN, PHISHING = 0, 1


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["degenerate"] = list(self.degenerate)
        return d


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    counts: ConfusionCounts
    metrics: MetricSet
    tpr: float
    fpr: float


def confusion(predictions: Mapping[str, int], truth: Mapping[str, int], positive: int = BENIGN) -> ConfusionCounts:
    missing_pred = sorted(set(truth) - set(predictions))
    missing_truth = sorted(set(predictions) - set(truth))
    if missing_pred or missing_truth:
        raise EvaluationError(
            f"key mismatch: no prediction for {missing_pred[:10]}, no truth for {missing_truth[:10]}"
        )
    tp = fp = tn = fn = 0
    for url, actual in truth.items():
        pred = predictions[url]
        if pred == positive:
            if actual == positive:
                tp += 1
            else:
                fp += 1
        elif actual == positive:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def _ratio(num: float, den: float, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def metrics(c: ConfusionCounts) -> MetricSet:
    if c.total <= 0:
        raise EvaluationError("cannot compute metrics on empty counts")
    flags: list[str] = []
    accuracy = (c.tp + c.tn) / c.total
    precision = _ratio(c.tp, c.tp + c.fp, "precision", flags)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", flags)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", flags)
    return MetricSet(accuracy, precision, recall, f1, tuple(flags))


def default_grid() -> list[float]:
    return [round(i / 10, 1) for i in range(11)]


def threshold_sweep(
    scores, truth: Mapping[str, int], thresholds: Sequence[float] | None = None,
    positive: int = BENIGN, tie_to_phishing: bool = True,
) -> tuple[list[SweepRow], float]:
    """Re-classify stored phishing scores at each threshold.

    ``scores`` is a ``url -> phish_score`` mapping or anything with a
    ``phish_score`` attribute holding one. Returns the rows and the threshold
    with the highest F1 (earliest wins a tie).
    """
    scores = getattr(scores, "phish_score", scores)
    thresholds = default_grid() if thresholds is None else list(thresholds)
    if not thresholds:
        raise EvaluationError("empty threshold grid")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise EvaluationError("thresholds must be strictly increasing")
    missing = sorted(set(truth) - set(scores))
    if missing:
        raise EvaluationError(f"no phish score for {missing[:10]}")

    rows = []
    for t in thresholds:
        preds = {u: label_from_score(scores[u], t, tie_to_phishing) for u in truth}
        c = confusion(preds, truth, positive)
        rows.append(SweepRow(
            float(t), c, metrics(c),
            tpr=c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0,
            fpr=c.fp / (c.fp + c.tn) if c.fp + c.tn else 0.0,
        ))
    best = max(rows, key=lambda r: (r.metrics.f1, -r.threshold))
    return rows, best.threshold


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1", "tpr", "fpr"])
        for r in rows:
            m = r.metrics
            w.writerow([
                r.threshold, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn,
                repr(m.accuracy), repr(m.precision), repr(m.recall), repr(m.f1), repr(r.tpr), repr(r.fpr),
            ])


def aggregate_cv(per_fold: Sequence[MetricSet]) -> tuple[MetricSet, list[dict]]:
    """Unweighted mean over folds, plus one table row per fold."""
    if not per_fold:
        raise EvaluationError("need at least one fold")
    n = len(per_fold)
    mean = MetricSet(
        accuracy=sum(m.accuracy for m in per_fold) / n,
        precision=sum(m.precision for m in per_fold) / n,
        recall=sum(m.recall for m in per_fold) / n,
        f1=sum(m.f1 for m in per_fold) / n,
    )
    table = [{"fold": i, **m.as_dict()} for i, m in enumerate(per_fold)]
    return mean, table
