"""Desk-scale multimodal stack with hand-rolled backprop.

Components: a frozen deterministic frame featurizer (stands in for a
pretrained visual encoder), a learned-query single-head cross-attention
block, a two-layer projector, a feature mixer that produces frame-level
vectors for the hypergraph branch, and a one-block autoregressive language
model with tied output embedding. Every trainable component has an explicit
forward returning a cache and a backward consuming it; gradients are checked
against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    MismatchedDimensions,
    NonFinite,
    ShapeMismatch,
    TokenOutOfVocab,
    ValidationError,
)
from .utils import rng_for

HEAD_CLASSES = {"engagement": 2, "emotion": 3, "emr": 3}


@dataclass(frozen=True)
class ModelDims:
    frames: int = 8
    patch_grid: tuple[int, int] = (2, 2)
    f_c: int = 16          # visual channels per patch token
    n_queries: int = 8
    c_q: int = 16          # query channels (= attention width)
    proj_hidden: int = 32
    c_p: int = 16          # projector output; must equal lm_d (prefix tokens)
    mix_out: int = 64      # frame-level channel width fed to the hypergraph
    hg_out: int = 16
    vocab: int = 16
    lm_d: int = 16
    lm_ff: int = 32
    max_text: int = 24
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.c_p != self.lm_d:
            raise ValidationError("c_p must equal lm_d (projected tokens are LM prefix)")
        if self.vocab > 64 or self.n_queries + self.max_text > 32:
            raise ValidationError("toy scale exceeded: vocab <= 64, context <= 32")

    @property
    def f_l(self) -> int:
        return self.patch_grid[0] * self.patch_grid[1]

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "patch_grid": list(self.patch_grid),
            "f_c": self.f_c,
            "n_queries": self.n_queries,
            "c_q": self.c_q,
            "proj_hidden": self.proj_hidden,
            "c_p": self.c_p,
            "mix_out": self.mix_out,
            "hg_out": self.hg_out,
            "vocab": self.vocab,
            "lm_d": self.lm_d,
            "lm_ff": self.lm_ff,
            "max_text": self.max_text,
            "leaky_slope": self.leaky_slope,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelDims":
        obj = dict(obj)
        if "patch_grid" in obj:
            obj["patch_grid"] = tuple(obj["patch_grid"])
        return cls(**obj)


# ---------------------------------------------------------------------------
# Frozen visual featurizer

_PATCH_STATS = 9  # mean RGB + mean |dx| and |dy| per channel


@dataclass(frozen=True)
class FrameEncoder:
    """Fixed random projection of per-patch color/gradient statistics."""

    grid: tuple[int, int]
    w: np.ndarray  # (9, f_c)
    b: np.ndarray  # (f_c,)


def make_encoder(dims: ModelDims, seed: int) -> FrameEncoder:
    rng = rng_for(seed, "frame-encoder")
    w = rng.normal(0.0, 1.0 / np.sqrt(_PATCH_STATS), size=(_PATCH_STATS, dims.f_c))
    b = rng.normal(0.0, 0.1, size=dims.f_c)
    return FrameEncoder(grid=dims.patch_grid, w=w, b=b)


def _patch_edges(n: int, parts: int) -> list[int]:
    return [round(i * n / parts) for i in range(parts + 1)]


def _patch_stats(patch: np.ndarray) -> np.ndarray:
    sub = patch.astype(np.float64) / 255.0
    stats = np.empty(_PATCH_STATS)
    stats[0:3] = sub.mean(axis=(0, 1))
    if sub.shape[1] > 1:
        stats[3:6] = np.abs(sub[:, 1:] - sub[:, :-1]).mean(axis=(0, 1))
    else:
        stats[3:6] = 0.0
    if sub.shape[0] > 1:
        stats[6:9] = np.abs(sub[1:] - sub[:-1]).mean(axis=(0, 1))
    else:
        stats[6:9] = 0.0
    return stats


def encode_frames(frames: np.ndarray, enc: FrameEncoder) -> np.ndarray:
    """(n, h, w, 3) uint8 -> (n, f_l, f_c). Patch-local, so a change in one
    patch moves only that patch's row."""
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise MismatchedDimensions(f"expected (n, h, w, 3), got {frames.shape}")
    gh, gw = enc.grid
    n, h, w, _ = frames.shape
    if h < gh or w < gw:
        raise MismatchedDimensions(f"frame {h}x{w} too small for grid {gh}x{gw}")
    rows = _patch_edges(h, gh)
    cols = _patch_edges(w, gw)
    out = np.empty((n, gh * gw, enc.w.shape[1]))
    for i in range(n):
        p = 0
        for r in range(gh):
            for c in range(gw):
                patch = frames[i, rows[r] : rows[r + 1], cols[c] : cols[c + 1]]
                out[i, p] = _patch_stats(patch) @ enc.w + enc.b
                p += 1
    return out


# ---------------------------------------------------------------------------
# Parameters

PARAM_SHAPES = None  # built per-dims in init_params

STAGE1_TRAINABLE = (
    "query_bank",
    "attn_wk",
    "attn_wv",
    "attn_wo",
    "proj_w1",
    "proj_b1",
    "proj_w2",
    "proj_b2",
    "lm_emb",
    "lm_wq",
    "lm_wk",
    "lm_wv",
    "lm_wo",
    "lm_ff_w1",
    "lm_ff_b1",
    "lm_ff_w2",
    "lm_ff_b2",
)
QUERY_ATTENTION_PARAMS = ("query_bank", "attn_wk", "attn_wv", "attn_wo")
STAGE2_EXTRA = (
    "mix_w",
    "mix_b",
    "hg_theta",
    "head_engagement_w",
    "head_engagement_b",
    "head_emotion_w",
    "head_emotion_b",
    "head_emr_w",
    "head_emr_b",
)
FROZEN_IN_STAGE1 = STAGE2_EXTRA


def _param_shapes(d: ModelDims) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "query_bank": (d.n_queries, d.c_q),
        "attn_wk": (d.f_c, d.c_q),
        "attn_wv": (d.f_c, d.c_q),
        "attn_wo": (d.c_q, d.c_q),
        "proj_w1": (d.c_q, d.proj_hidden),
        "proj_b1": (d.proj_hidden,),
        "proj_w2": (d.proj_hidden, d.c_p),
        "proj_b2": (d.c_p,),
        "mix_w": (d.f_c + d.c_p, d.mix_out),
        "mix_b": (d.mix_out,),
        "lm_emb": (d.vocab, d.lm_d),
        "lm_wq": (d.lm_d, d.lm_d),
        "lm_wk": (d.lm_d, d.lm_d),
        "lm_wv": (d.lm_d, d.lm_d),
        "lm_wo": (d.lm_d, d.lm_d),
        "lm_ff_w1": (d.lm_d, d.lm_ff),
        "lm_ff_b1": (d.lm_ff,),
        "lm_ff_w2": (d.lm_ff, d.lm_d),
        "lm_ff_b2": (d.lm_d,),
        "hg_theta": (d.mix_out, d.hg_out),
    }
    for name, k in HEAD_CLASSES.items():
        shapes[f"head_{name}_w"] = (d.hg_out, k)
        shapes[f"head_{name}_b"] = (k,)
    return shapes


@dataclass
class ModelParams:
    dims: ModelDims
    seed: int
    encoder: FrameEncoder
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def param_count(self) -> int:
        return int(sum(t.size for t in self.tensors.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(
            dims=self.dims,
            seed=self.seed,
            encoder=self.encoder,
            tensors={k: v.copy() for k, v in self.tensors.items()},
        )


def init_params(dims: ModelDims, seed: int) -> ModelParams:
    rng = rng_for(seed, "model-init")
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(dims).items():
        if name.endswith("_b") or name.endswith("_b1") or name.endswith("_b2"):
            tensors[name] = np.zeros(shape)
        elif name == "query_bank":
            tensors[name] = rng.normal(0.0, 1.0, size=shape)
        elif name == "lm_emb":
            tensors[name] = rng.normal(0.0, 0.3, size=shape)
        else:
            tensors[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
    return ModelParams(dims=dims, seed=seed, encoder=make_encoder(dims, seed), tensors=tensors)


def zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors.items()}


# ---------------------------------------------------------------------------
# Numerics

def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, x, slope * x)


def _leaky_grad(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre >= 0, 1.0, slope)


def _softmax_backward(p: np.ndarray, d_p: np.ndarray) -> np.ndarray:
    return p * (d_p - (d_p * p).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# Cross-attention over visual tokens

def attend_forward(t: dict, fv_flat: np.ndarray):
    """Learned queries attend over flattened visual tokens (single head)."""
    q = t["query_bank"]
    if fv_flat.ndim != 2 or fv_flat.shape[1] != t["attn_wk"].shape[0]:
        raise ShapeMismatch(f"visual tokens {fv_flat.shape} do not match attn_wk")
    scale = 1.0 / np.sqrt(q.shape[1])
    k = fv_flat @ t["attn_wk"]
    v = fv_flat @ t["attn_wv"]
    p = _softmax_rows(q @ k.T * scale)
    ctx = p @ v
    out = ctx @ t["attn_wo"]
    return out, (fv_flat, k, v, p, ctx, scale)


def attend_backward(t: dict, cache, d_out: np.ndarray, grads: dict) -> None:
    fv_flat, k, v, p, ctx, scale = cache
    grads["attn_wo"] += ctx.T @ d_out
    d_ctx = d_out @ t["attn_wo"].T
    d_p = d_ctx @ v.T
    d_v = p.T @ d_ctx
    d_scores = _softmax_backward(p, d_p)
    d_q = d_scores @ k * scale
    d_k = d_scores.T @ t["query_bank"] * scale
    grads["query_bank"] += d_q
    grads["attn_wk"] += fv_flat.T @ d_k
    grads["attn_wv"] += fv_flat.T @ d_v


def cross_attend(params: ModelParams, fv: np.ndarray) -> np.ndarray:
    """Public surface: (frames, f_l, f_c) or pre-flattened tokens -> (Q, c_q)."""
    fv_flat = fv.reshape(-1, fv.shape[-1])
    out, _ = attend_forward(params.tensors, fv_flat)
    return out


# ---------------------------------------------------------------------------
# Projector (two-layer perceptron)

def projector_forward(t: dict, a: np.ndarray, slope: float):
    pre = a @ t["proj_w1"] + t["proj_b1"]
    hid = _leaky(pre, slope)
    out = hid @ t["proj_w2"] + t["proj_b2"]
    return out, (a, pre, hid, slope)


def projector_backward(t: dict, cache, d_out: np.ndarray, grads: dict) -> np.ndarray:
    a, pre, hid, slope = cache
    grads["proj_w2"] += hid.T @ d_out
    grads["proj_b2"] += d_out.sum(axis=0)
    d_hid = d_out @ t["proj_w2"].T
    d_pre = d_hid * _leaky_grad(pre, slope)
    grads["proj_w1"] += a.T @ d_pre
    grads["proj_b1"] += d_pre.sum(axis=0)
    return d_pre @ t["proj_w1"].T


def project(params: ModelParams, attended: np.ndarray) -> np.ndarray:
    if attended.shape[-1] != params.tensors["proj_w1"].shape[0]:
        raise ShapeMismatch(f"attended {attended.shape} does not match projector")
    out, _ = projector_forward(params.tensors, attended, params.dims.leaky_slope)
    return out


# ---------------------------------------------------------------------------
# Feature mixer: pooled visual + pooled projected queries -> frame-level rows

def mixer_forward(t: dict, fv: np.ndarray, fp: np.ndarray):
    """fv (n_frames, f_l, f_c), fp (Q, c_p) -> (n_frames, mix_out)."""
    fv_pool = fv.mean(axis=1)
    fp_pool = fp.mean(axis=0)
    z = np.concatenate(
        [fv_pool, np.broadcast_to(fp_pool, (fv.shape[0], fp_pool.shape[0]))], axis=1
    )
    out = z @ t["mix_w"] + t["mix_b"]
    return out, (z, fv.shape[0], fp.shape)


def mixer_backward(t: dict, cache, d_out: np.ndarray, grads: dict) -> np.ndarray:
    """Returns d_fp (gradient w.r.t. the projected queries)."""
    z, n_frames, fp_shape = cache
    grads["mix_w"] += z.T @ d_out
    grads["mix_b"] += d_out.sum(axis=0)
    d_z = d_out @ t["mix_w"].T
    f_c = z.shape[1] - fp_shape[1]
    d_fp_pool = d_z[:, f_c:].sum(axis=0)
    return np.broadcast_to(d_fp_pool / fp_shape[0], fp_shape).copy()


def mix_and_pool(params: ModelParams, fp: np.ndarray, fv: np.ndarray) -> np.ndarray:
    if fv.shape[-1] + fp.shape[-1] != params.tensors["mix_w"].shape[0]:
        raise ShapeMismatch(
            f"fv {fv.shape} + fp {fp.shape} do not match mixer input width"
        )
    out, _ = mixer_forward(params.tensors, fv, fp)
    return out


# ---------------------------------------------------------------------------
# One-block decoder LM with tied output embedding

def lm_forward(t: dict, prefix: np.ndarray, tokens: np.ndarray):
    """Prefix rows (projected queries) then embedded tokens; causal attention.

    Returns logits for predicting tokens[i] from everything before it.
    """
    emb = t["lm_emb"]
    vocab, d = emb.shape
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ShapeMismatch("tokens must be a non-empty 1-D sequence")
    if tokens.min() < 0 or tokens.max() >= vocab:
        raise TokenOutOfVocab(f"token outside [0, {vocab})")
    if prefix.ndim != 2 or prefix.shape[1] != d:
        raise ShapeMismatch(f"prefix {prefix.shape} does not match LM width {d}")
    n_pre = prefix.shape[0]
    x = np.concatenate([prefix, emb[tokens]], axis=0)
    s = x.shape[0]
    scale = 1.0 / np.sqrt(d)
    q = x @ t["lm_wq"]
    k = x @ t["lm_wk"]
    v = x @ t["lm_wv"]
    scores = q @ k.T * scale
    scores[np.triu_indices(s, k=1)] = -np.inf
    p = _softmax_rows(scores)
    ctx = p @ v
    h1 = x + ctx @ t["lm_wo"]
    fpre = h1 @ t["lm_ff_w1"] + t["lm_ff_b1"]
    f = _leaky(fpre, 0.01)
    h2 = h1 + f @ t["lm_ff_w2"] + t["lm_ff_b2"]
    rows = slice(n_pre - 1, n_pre - 1 + tokens.size)
    logits = h2[rows] @ emb.T
    cache = (tokens, n_pre, x, q, k, v, p, ctx, h1, fpre, f, h2, scale)
    return logits, cache


def lm_backward(t: dict, cache, d_logits: np.ndarray, grads: dict) -> np.ndarray:
    """Returns the gradient w.r.t. the prefix rows."""
    tokens, n_pre, x, q, k, v, p, ctx, h1, fpre, f, h2, scale = cache
    emb = t["lm_emb"]
    s = x.shape[0]
    rows = slice(n_pre - 1, n_pre - 1 + tokens.size)

    d_h2 = np.zeros_like(h2)
    d_h2[rows] = d_logits @ emb
    grads["lm_emb"] += d_logits.T @ h2[rows]

    d_ffn_out = d_h2
    grads["lm_ff_w2"] += f.T @ d_ffn_out
    grads["lm_ff_b2"] += d_ffn_out.sum(axis=0)
    d_f = d_ffn_out @ t["lm_ff_w2"].T
    d_fpre = d_f * _leaky_grad(fpre, 0.01)
    grads["lm_ff_w1"] += h1.T @ d_fpre
    grads["lm_ff_b1"] += d_fpre.sum(axis=0)
    d_h1 = d_h2 + d_fpre @ t["lm_ff_w1"].T

    d_att = d_h1
    grads["lm_wo"] += ctx.T @ d_att
    d_ctx = d_att @ t["lm_wo"].T
    d_p = d_ctx @ v.T
    d_v = p.T @ d_ctx
    d_scores = _softmax_backward(p, d_p)
    d_q = d_scores @ k * scale
    d_k = d_scores.T @ q * scale
    grads["lm_wq"] += x.T @ d_q
    grads["lm_wk"] += x.T @ d_k
    grads["lm_wv"] += x.T @ d_v
    d_x = d_h1 + d_q @ t["lm_wq"].T + d_k @ t["lm_wk"].T + d_v @ t["lm_wv"].T

    np.add.at(grads["lm_emb"], tokens, d_x[n_pre:])
    return d_x[:n_pre]


# ---------------------------------------------------------------------------
# Losses

def itg_loss(logits: np.ndarray, targets: Sequence[int]) -> float:
    """Mean teacher-forced cross-entropy over token positions."""
    loss, _ = itg_loss_grad(logits, targets)
    return loss


def itg_loss_grad(logits: np.ndarray, targets) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeMismatch(f"logits must be (T, V), got {logits.shape}")
    n, vocab = logits.shape
    if targets.shape != (n,):
        raise ShapeMismatch(f"{n} logit rows vs {targets.shape} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= vocab):
        raise TokenOutOfVocab(f"target token outside [0, {vocab})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    nll = lse - shifted[np.arange(n), targets]
    probs = _softmax_rows(logits)
    probs[np.arange(n), targets] -= 1.0
    return float(nll.mean()), probs / n


def ce_loss_grad(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean multinomial cross-entropy over rows; grad has the 1/n built in."""
    return itg_loss_grad(logits, labels)


def combined_loss(l_itg: float, l_ce: float, lam: float) -> float:
    """l_itg + lam * l_ce."""
    if lam < 0:
        raise ValidationError("lambda must be >= 0")
    if not (np.isfinite(l_itg) and np.isfinite(l_ce)):
        raise NonFinite(f"non-finite loss terms ({l_itg}, {l_ce})")
    return float(l_itg + lam * l_ce)


def heads_forward(t: dict, pooled: np.ndarray) -> dict[str, np.ndarray]:
    return {
        name: pooled @ t[f"head_{name}_w"] + t[f"head_{name}_b"]
        for name in HEAD_CLASSES
    }
