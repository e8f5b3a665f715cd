"""Kernel backend selection.

The compiled extension (`_kernels`, built from the .pyx source) is used when
it imported successfully; otherwise the numpy implementations take over with
identical semantics. Set HYPERSRI_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels_np

_FORCE_FALLBACK = os.environ.get("HYPERSRI_PURE_PYTHON", "") not in ("", "0")

if _FORCE_FALLBACK:
    _impl = kernels_np
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = kernels_np
        BACKEND = "numpy"


def content_diff_means(frames: np.ndarray) -> np.ndarray:
    frames = np.ascontiguousarray(frames, dtype=np.uint8)
    return _impl.content_diff_means(frames)


def knn_indices(x: np.ndarray, m: int) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _impl.knn_indices(x, int(m))
