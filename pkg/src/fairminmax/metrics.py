"""Group fairness and utility metrics for binary classifiers."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionSet:
    soft_scores: np.ndarray
    true_labels: np.ndarray
    group_ids: np.ndarray
    threshold: float = 0.5
    n_groups: int | None = None

    def __post_init__(self):
        s = np.asarray(self.soft_scores, dtype=np.float64).reshape(-1)
        y = np.asarray(self.true_labels).reshape(-1).astype(np.int64)
        z = np.asarray(self.group_ids).reshape(-1).astype(np.int64)
        if not (s.size == y.size == z.size):
            raise MetricError(f"length mismatch: scores {s.size}, labels {y.size}, groups {z.size}")
        if z.size and z.min() < 0:
            raise MetricError("group ids must be non-negative")
        object.__setattr__(self, "soft_scores", s)
        object.__setattr__(self, "true_labels", y)
        object.__setattr__(self, "group_ids", z)
        if self.n_groups is None:
            object.__setattr__(self, "n_groups", int(z.max()) + 1 if z.size else 0)

    @property
    def hard_labels(self) -> np.ndarray:
        # score exactly at the threshold counts as positive
        return (self.soft_scores >= self.threshold).astype(np.int64)

    def __len__(self):
        return self.soft_scores.size


def _rates(values, mask_for, cells, describe):
    rates = []
    for cell in cells:
        mask = mask_for(cell)
        if not mask.any():
            raise MetricError(f"empty cell: {describe(cell)}")
        rates.append(values[mask].mean())
    return rates


def _pairwise_gap(rates) -> float:
    return float(sum(abs(a - b) for a, b in combinations(rates, 2)))


def _values(preds: PredictionSet, mode: str) -> np.ndarray:
    if mode == "hard":
        return preds.hard_labels.astype(np.float64)
    if mode == "soft":
        return preds.soft_scores
    raise ValueError(f"mode must be 'hard' or 'soft', got {mode!r}")


def group_rates(preds: PredictionSet, mode: str = "hard") -> list[float]:
    v = _values(preds, mode)
    return _rates(v, lambda g: preds.group_ids == g, range(preds.n_groups), lambda g: f"group {g}")


def delta_dp(preds: PredictionSet, mode: str = "hard") -> float:
    """Sum over unordered group pairs of |P(Yhat=1|Z=g) - P(Yhat=1|Z=h)|."""
    return _pairwise_gap(group_rates(preds, mode))


def delta_eo(preds: PredictionSet, mode: str = "hard") -> float:
    """Pairwise positive-rate gaps within each true-label slice, summed over y in {0, 1}."""
    v = _values(preds, mode)
    total = 0.0
    for y in (0, 1):
        rates = _rates(
            v,
            lambda g: (preds.group_ids == g) & (preds.true_labels == y),
            range(preds.n_groups),
            lambda g: f"group {g}, y={y}",
        )
        total += _pairwise_gap(rates)
    return total


def accuracy(preds: PredictionSet) -> float:
    if len(preds) == 0:
        raise MetricError("accuracy of an empty prediction set")
    return float(np.mean(preds.hard_labels == preds.true_labels))


def roc_curve(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) points sweeping the threshold down through each distinct score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    order = np.argsort(-scores, kind="mergesort")
    s, l = scores[order], labels[order]
    # last index of each run of tied scores
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(l)[ends]
    fp = np.cumsum(~l)[ends]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    return fpr, tpr


def auc_trapezoid(fpr, tpr) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def auc_pairwise(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties counted 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    pos, neg = scores[labels], scores[~labels]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def groupwise_roc_auc(preds: PredictionSet) -> dict[int, tuple[tuple[np.ndarray, np.ndarray], float]]:
    """Per group: ((FPR, TPR), AUC) with the trapezoidal rule."""
    out = {}
    for g in range(preds.n_groups):
        mask = preds.group_ids == g
        y = preds.true_labels[mask]
        if y.size == 0 or y.min() == y.max():
            raise MetricError(f"group {g} needs both positive and negative labels for a ROC curve")
        fpr, tpr = roc_curve(preds.soft_scores[mask], y)
        out[g] = ((fpr, tpr), auc_trapezoid(fpr, tpr))
    return out


def summarize(preds: PredictionSet) -> dict:
    """Hard-mode accuracy, Delta_DP, Delta_EO and per-group AUC (NaN where undefined)."""
    row = {"accuracy": accuracy(preds), "delta_dp": delta_dp(preds)}
    try:
        row["delta_eo"] = delta_eo(preds)
    except MetricError:
        row["delta_eo"] = float("nan")
    for g in range(preds.n_groups):
        mask = preds.group_ids == g
        y = preds.true_labels[mask]
        if y.size and y.min() != y.max():
            fpr, tpr = roc_curve(preds.soft_scores[mask], y)
            row[f"auc_g{g}"] = auc_trapezoid(fpr, tpr)
        else:
            row[f"auc_g{g}"] = float("nan")
    return row
