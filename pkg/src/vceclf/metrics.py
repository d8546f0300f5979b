"""Evaluation metrics: confusion counts, one-vs-rest precision/recall/F1/
specificity, rank-based AUC, balanced accuracy and the combined score used
for model selection.

Conventions:
  * hard predictions are the row argmax, ties going to the lowest index;
  * 0/0 ratios are reported as 0;
  * a class with no positives or no negatives has no AUC (``None``) and is
    left out of the mean AUC;
  * classes with no true samples are left out of balanced accuracy and of
    the macro averages.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .catalog import ClassCatalog

PER_CLASS_KEYS = ("precision", "recall", "f1", "specificity", "auc")
AGGREGATE_KEYS = (
    "balanced_accuracy",
    "mean_auc",
    "combined_score",
    "macro_precision",
    "macro_f1",
    "macro_specificity",
)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    specificity: float
    auc: Optional[float]


@dataclass(frozen=True)
class AggregateMetrics:
    balanced_accuracy: float
    mean_auc: float
    combined_score: float
    macro_precision: float
    macro_f1: float
    macro_specificity: float


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[str, ClassMetrics]
    aggregate: AggregateMetrics

    def to_dict(self) -> dict:
        return {
            "per_class": {name: asdict(m) for name, m in self.per_class.items()},
            "aggregate": asdict(self.aggregate),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        per_class = {}
        for name, fields in data["per_class"].items():
            missing = set(PER_CLASS_KEYS) - set(fields)
            if missing:
                raise ValueError(f"class {name!r} is missing fields {sorted(missing)}")
            per_class[name] = ClassMetrics(**{k: fields[k] for k in PER_CLASS_KEYS})
        agg = data["aggregate"]
        missing = set(AGGREGATE_KEYS) - set(agg)
        if missing:
            raise ValueError(f"aggregate block is missing fields {sorted(missing)}")
        return cls(per_class, AggregateMetrics(**{k: agg[k] for k in AGGREGATE_KEYS}))


def _labels(x, name: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be a 1-D integer label vector")
    return arr.astype(np.int64)


def confusion(preds, truth, k: int) -> np.ndarray:
    """K x K counts; entry (i, j) = samples of true class i predicted as j."""
    preds = _labels(preds, "preds")
    truth = _labels(truth, "truth")
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.size} predictions vs {truth.size} labels")
    for name, arr in (("preds", preds), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise ValueError(f"{name} contains labels outside 0..{k - 1}")
    return np.bincount(truth * k + preds, minlength=k * k).reshape(k, k)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def per_class_prfs(cm: np.ndarray) -> dict[str, np.ndarray]:
    cm = np.asarray(cm, dtype=np.int64)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    tn = cm.sum() - tp - fp - fn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return {
        "precision": precision,
        "recall": recall,
        "f1": _ratio(2.0 * precision * recall, precision + recall),
        "specificity": _ratio(tn, tn + fp),
    }


def balanced_accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm, dtype=np.int64)
    support = cm.sum(axis=1)
    if support.sum() == 0:
        raise ValueError("balanced accuracy is undefined for an empty confusion matrix")
    recall = per_class_prfs(cm)["recall"]
    return float(np.mean(recall[support > 0]))


def auc_ovr(scores, truth_binary) -> Optional[float]:
    """Mann-Whitney AUC with mid-ranked ties; ``None`` when one side is empty."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(truth_binary).astype(bool)
    if scores.shape != pos.shape or scores.ndim != 1:
        raise ValueError("scores and truth must be 1-D and of equal length")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    below = np.cumsum(counts) - counts
    midrank = below + (counts + 1) / 2.0
    rank_sum = midrank[inverse.ravel()][pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def ovr_aucs(probs, truth) -> list[Optional[float]]:
    probs = np.asarray(probs, dtype=np.float64)
    truth = _labels(truth, "truth")
    return [auc_ovr(probs[:, c], truth == c) for c in range(probs.shape[1])]


def _mean_defined(aucs: Sequence[Optional[float]]) -> float:
    defined = [a for a in aucs if a is not None]
    if not defined:
        raise ValueError("no class has a defined AUC (need positives and negatives)")
    return float(np.mean(defined))


def mean_auc(probs, truth) -> float:
    return _mean_defined(ovr_aucs(probs, truth))


def combined_score(bal_acc: float, mean_auc_: float) -> float:
    for name, v in (("balanced accuracy", bal_acc), ("mean AUC", mean_auc_)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return (bal_acc + mean_auc_) / 2.0


def predict_labels(probs) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return np.argmax(np.asarray(probs), axis=1)


def evaluate(probs, truth, catalog: ClassCatalog) -> MetricsReport:
    probs = np.asarray(probs, dtype=np.float64)
    truth = _labels(truth, "truth")
    k = len(catalog)
    if probs.ndim != 2 or probs.shape[1] != k:
        raise ValueError(f"probabilities must be N x {k}, got shape {probs.shape}")
    if probs.shape[0] != truth.size:
        raise ValueError(f"{probs.shape[0]} probability rows but {truth.size} labels")

    cm = confusion(predict_labels(probs), truth, k)
    prfs = per_class_prfs(cm)
    aucs = ovr_aucs(probs, truth)
    supported = cm.sum(axis=1) > 0

    bal = balanced_accuracy(cm)
    mauc = _mean_defined(aucs)
    per_class = {
        name: ClassMetrics(
            precision=float(prfs["precision"][c]),
            recall=float(prfs["recall"][c]),
            f1=float(prfs["f1"][c]),
            specificity=float(prfs["specificity"][c]),
            auc=aucs[c],
        )
        for c, name in enumerate(catalog.names)
    }
    aggregate = AggregateMetrics(
        balanced_accuracy=bal,
        mean_auc=mauc,
        combined_score=combined_score(bal, mauc),
        macro_precision=float(np.mean(prfs["precision"][supported])),
        macro_f1=float(np.mean(prfs["f1"][supported])),
        macro_specificity=float(np.mean(prfs["specificity"][supported])),
    )
    return MetricsReport(per_class, aggregate)
