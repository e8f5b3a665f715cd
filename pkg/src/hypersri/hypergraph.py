"""k-NN hypergraph construction and the spectral convolution layer.

For every vertex v and every k in k_list there is one hyperedge holding v
and its k-1 nearest neighbors (Euclidean, ties to the lower index), so
E = N * len(k_list). Propagation uses the symmetric normalization
A = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}; one layer computes
LeakyReLU(A X Theta), and the backward pass is written out analytically.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _accel
from .errors import (
    DegenerateFeaturesWarning,
    EmptyVideoGroup,
    FormatError,
    ShapeMismatch,
    TooFewVertices,
    ValidationError,
    ZeroDegreeVertex,
)

DEFAULT_K_LIST = (3, 4, 5)


@dataclass
class Hypergraph:
    """Dense incidence matrix with hyperedge weights and cached degrees."""

    h: np.ndarray  # (N, E), entries 0/1
    w: np.ndarray  # (E,), positive
    dv: np.ndarray = field(init=False)  # weighted vertex degrees
    de: np.ndarray = field(init=False)  # hyperedge cardinalities

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.h.ndim != 2:
            raise ShapeMismatch(f"incidence must be 2-D, got {self.h.shape}")
        if self.w.shape != (self.h.shape[1],):
            raise ShapeMismatch("one weight per hyperedge required")
        if np.any(self.w <= 0):
            raise ValidationError("hyperedge weights must be positive")
        self.de = self.h.sum(axis=0)
        if np.any(self.de < 1):
            raise ValidationError("every hyperedge must contain a vertex")
        self.dv = self.h @ self.w
        if np.any(self.dv <= 0):
            raise ZeroDegreeVertex("every vertex must belong to a hyperedge")

    @property
    def n_vertices(self) -> int:
        return self.h.shape[0]

    @property
    def n_edges(self) -> int:
        return self.h.shape[1]


def build_knn_hypergraph(x: np.ndarray, k_list: Sequence[int] = DEFAULT_K_LIST) -> Hypergraph:
    """One hyperedge per (vertex, k): the vertex plus its k-1 nearest neighbors."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch(f"features must be (N, C), got {x.shape}")
    k_list = [int(k) for k in k_list]
    if not k_list or any(k < 1 for k in k_list):
        raise ValidationError("k_list entries must be >= 1")
    n = x.shape[0]
    if n < max(k_list):
        raise TooFewVertices(f"{n} vertices cannot support k = {max(k_list)}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features must be finite")
    if n > 1 and np.all(x == x[0]):
        warnings.warn(
            "all feature vectors coincide; neighbors chosen by index only",
            DegenerateFeaturesWarning,
            stacklevel=2,
        )
    neighbors = _accel.knn_indices(x, max(k_list) - 1)
    h = np.zeros((n, n * len(k_list)), dtype=np.float64)
    for ki, k in enumerate(k_list):
        base = ki * n
        for v in range(n):
            h[v, base + v] = 1.0
            h[neighbors[v, : k - 1], base + v] = 1.0
    return Hypergraph(h=h, w=np.ones(n * len(k_list)))


def propagation_matrix(g: Hypergraph) -> np.ndarray:
    """A = Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}; symmetric and non-negative.

    Computed as C C^T with C = Dv^{-1/2} H sqrt(W/De) so symmetry holds to
    rounding error regardless of matrix size.
    """
    c = g.h * (1.0 / np.sqrt(g.dv))[:, None] * np.sqrt(g.w / g.de)[None, :]
    return c @ c.T


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def _leaky_grad(pre: np.ndarray, slope: float) -> np.ndarray:
    # derivative at exactly 0 is taken as 1
    return np.where(pre >= 0, 1.0, slope)


def hgnn_forward(g: Hypergraph, x: np.ndarray, theta: np.ndarray, slope: float = 0.01) -> np.ndarray:
    """One spectral layer: LeakyReLU(A x theta)."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if x.shape[0] != g.n_vertices:
        raise ShapeMismatch(f"features rows {x.shape[0]} != vertices {g.n_vertices}")
    if theta.ndim != 2 or theta.shape[0] != x.shape[1]:
        raise ShapeMismatch(f"theta {theta.shape} does not match features {x.shape}")
    a = propagation_matrix(g)
    return _leaky(a @ x @ theta, slope)


def hgnn_backward(
    g: Hypergraph,
    x: np.ndarray,
    theta: np.ndarray,
    upstream_grad: np.ndarray,
    slope: float = 0.01,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum(upstream * Y) w.r.t. x and theta."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    if upstream_grad.shape != (x.shape[0], theta.shape[1]):
        raise ShapeMismatch(
            f"upstream {upstream_grad.shape} != ({x.shape[0]}, {theta.shape[1]})"
        )
    a = propagation_matrix(g)
    ax = a @ x
    pre = ax @ theta
    gated = upstream_grad * _leaky_grad(pre, slope)
    grad_theta = ax.T @ gated
    grad_x = a.T @ gated @ theta.T
    return grad_x, grad_theta


def predict_heads(
    y: np.ndarray,
    video_membership: np.ndarray,
    heads: Mapping[str, tuple[np.ndarray, np.ndarray]],
) -> dict[str, np.ndarray]:
    """Mean-pool vertex rows per video, then apply each linear head.

    `video_membership[i]` is the video index of vertex i; every video index
    in [0, max+1) must own at least one vertex.
    """
    y = np.asarray(y, dtype=np.float64)
    membership = np.asarray(video_membership, dtype=np.int64)
    if membership.shape != (y.shape[0],):
        raise ShapeMismatch("one membership entry per vertex required")
    n_videos = int(membership.max()) + 1 if membership.size else 0
    if n_videos == 0:
        raise EmptyVideoGroup("no vertices")
    counts = np.bincount(membership, minlength=n_videos)
    if np.any(counts == 0):
        missing = int(np.nonzero(counts == 0)[0][0])
        raise EmptyVideoGroup(f"video {missing} has no vertices")
    pooled = np.zeros((n_videos, y.shape[1]))
    np.add.at(pooled, membership, y)
    pooled /= counts[:, None]
    out = {}
    for name, (w, b) in heads.items():
        if w.shape[0] != y.shape[1]:
            raise ShapeMismatch(f"head {name}: weight rows {w.shape[0]} != channels {y.shape[1]}")
        out[name] = pooled @ w + b
    return out


def pool_by_video(y: np.ndarray, video_membership: np.ndarray) -> np.ndarray:
    membership = np.asarray(video_membership, dtype=np.int64)
    n_videos = int(membership.max()) + 1
    counts = np.bincount(membership, minlength=n_videos)
    pooled = np.zeros((n_videos, y.shape[1]))
    np.add.at(pooled, membership, y)
    return pooled / counts[:, None]


def hypergraph_to_json(g: Hypergraph) -> str:
    pairs = [[int(v), int(e)] for v, e in np.argwhere(g.h > 0)]
    obj = {
        "n_vertices": g.n_vertices,
        "n_edges": g.n_edges,
        "incidence": pairs,
        "weights": [float(w) for w in g.w],
    }
    return json.dumps(obj, sort_keys=True) + "\n"


def hypergraph_from_json(text: str) -> Hypergraph:
    try:
        obj = json.loads(text)
        n, e = int(obj["n_vertices"]), int(obj["n_edges"])
        h = np.zeros((n, e))
        for v, ei in obj["incidence"]:
            h[int(v), int(ei)] = 1.0
        w = np.asarray([float(x) for x in obj["weights"]])
    except (KeyError, TypeError, ValueError, IndexError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad hypergraph JSON: {exc}") from exc
    return Hypergraph(h=h, w=w)
