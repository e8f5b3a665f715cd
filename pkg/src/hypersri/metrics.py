"""Classification metrics, hand-rolled so the tests can check them against
an independent brute-force confusion-matrix implementation."""

from __future__ import annotations

import numpy as np

from .errors import Empty, LengthMismatch


def _as_pair(preds, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if p.shape != y.shape or p.ndim != 1:
        raise LengthMismatch(f"preds {p.shape} vs labels {y.shape}")
    if p.size == 0:
        raise Empty("no predictions")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _as_pair(preds, labels)
    return float(np.mean(p == y))


def confusion_matrix(preds, labels, n_classes: int | None = None) -> np.ndarray:
    """Rows are true classes, columns predictions; row sums equal supports."""
    p, y = _as_pair(preds, labels)
    if n_classes is None:
        n_classes = int(max(p.max(), y.max())) + 1
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y, p), 1)
    return cm


def macro_f1(preds, labels) -> float:
    """Mean per-class F1 over classes present in preds or labels.

    A class with zero precision + recall contributes F1 = 0.
    """
    p, y = _as_pair(preds, labels)
    classes = np.union1d(np.unique(p), np.unique(y))
    f1s = []
    for c in classes:
        tp = int(np.sum((p == c) & (y == c)))
        fp = int(np.sum((p == c) & (y != c)))
        fn = int(np.sum((p != c) & (y == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall)
                   if precision + recall else 0.0)
    return float(np.mean(f1s))
