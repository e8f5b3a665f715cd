"""Numpy implementations of the hot kernels.

These are the reference semantics; the compiled module in `_kernels.pyx`
must match them. Both operate on C-contiguous arrays prepared by the
wrappers in `__init__`.
"""

from __future__ import annotations

import numpy as np


def content_diff_means(frames: np.ndarray) -> np.ndarray:
    """Mean absolute per-pixel, per-channel difference between consecutive frames.

    frames: (T, h, w, 3) uint8. Returns float64 (T,) with out[0] = 0.
    Integer accumulation keeps the result exact, so the two backends agree
    bit for bit.
    """
    n = frames.shape[0]
    out = np.zeros(n, dtype=np.float64)
    if n < 2:
        return out
    diffs = np.abs(frames[1:].astype(np.int64) - frames[:-1].astype(np.int64))
    out[1:] = diffs.reshape(n - 1, -1).mean(axis=1)
    return out


def knn_indices(x: np.ndarray, m: int) -> np.ndarray:
    """For each row of x (N, C), the m nearest *other* rows.

    Ordered by squared Euclidean distance, ties broken by lower row index.
    Returns int64 (N, m).
    """
    n = x.shape[0]
    out = np.empty((n, m), dtype=np.int64)
    if m == 0:
        return out
    idx = np.arange(n)
    for v in range(n):
        diff = x - x[v]
        d2 = np.einsum("nc,nc->n", diff, diff)
        d2[v] = np.inf
        order = np.lexsort((idx, d2))
        out[v] = order[:m]
    return out
