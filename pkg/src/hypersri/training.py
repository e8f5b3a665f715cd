"""Two-stage training: warm-up on caption generation, then joint fine-tuning
with the hypergraph classification branch gated on.

Stage 1 updates only the query bank, attention maps, projector, and LM on
the text-generation loss; the mixer, hypergraph weights, and heads stay
bit-identical. Stage 2 rebuilds a k-NN hypergraph over every batch's
frame-level features, adds lambda-weighted classification cross-entropy,
and updates everything. Plain gradient descent with decoupled weight decay
and a cosine schedule; fully deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import model as M
from .errors import (
    DivergenceDetected,
    FormatError,
    ShapeMismatch,
    ValidationError,
)
from .hypergraph import (
    Hypergraph,
    build_knn_hypergraph,
    hgnn_backward,
    hgnn_forward,
    pool_by_video,
)
from .tensorio import read_tensor_file, write_tensor_file
from .utils import rng_for

INDICATORS = tuple(M.HEAD_CLASSES)


@dataclass
class TrainConfig:
    seed: int = 0
    lam: float = 0.1
    stage1_epochs: int = 10
    stage2_epochs: int = 20
    stage1_lr: float = 1e-4
    stage2_lr: float = 2e-5
    weight_decay: float = 0.02
    stage1_warmup_epochs: float = 0.5
    stage2_warmup_epochs: float = 1.0
    batch_size: int = 8
    k_list: tuple[int, ...] = (3, 4, 5)
    freeze_query_attention_stage2: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise ValidationError("epoch counts must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        self.k_list = tuple(int(k) for k in self.k_list)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "lambda": self.lam,
            "stage1_epochs": self.stage1_epochs,
            "stage2_epochs": self.stage2_epochs,
            "stage1_lr": self.stage1_lr,
            "stage2_lr": self.stage2_lr,
            "weight_decay": self.weight_decay,
            "stage1_warmup_epochs": self.stage1_warmup_epochs,
            "stage2_warmup_epochs": self.stage2_warmup_epochs,
            "batch_size": self.batch_size,
            "k_list": list(self.k_list),
            "freeze_query_attention_stage2": self.freeze_query_attention_stage2,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        if "k_list" in obj:
            obj["k_list"] = tuple(obj["k_list"])
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(obj) - known
        if unknown:
            raise FormatError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass
class VideoExample:
    video_id: str
    fv: np.ndarray              # (frames, f_l, f_c)
    caption: np.ndarray         # (T,) int64 token ids
    labels: dict[str, int]      # indicator -> class (population level)


@dataclass
class TaskData:
    """Training corpus: examples plus a train / held-out split by video id."""

    examples: list[VideoExample]
    train_ids: list[str]
    held_ids: list[str]
    group_labels: dict[str, dict[str, dict[str, int]]] = field(default_factory=dict)
    # group_labels[group_id][video_id][indicator] -> class (per-demographic table)

    def by_id(self, video_id: str) -> VideoExample:
        return self._index()[video_id]

    def _index(self) -> dict[str, VideoExample]:
        if not hasattr(self, "_idx"):
            self._idx = {ex.video_id: ex for ex in self.examples}
        return self._idx

    def subset(self, ids: Sequence[str]) -> list[VideoExample]:
        return [self.by_id(v) for v in ids]


def cosine_lr(step: int, total_steps: int, warmup_steps: int, peak: float) -> float:
    """Linear ramp to `peak` over the warm-up, cosine decay to 0 at the last step."""
    if total_steps <= 0:
        return peak
    if warmup_steps > 0 and step < warmup_steps:
        return peak * (step + 1) / warmup_steps
    span = max(1, total_steps - 1 - warmup_steps)
    progress = min(1.0, (step - warmup_steps) / span)
    return peak * 0.5 * (1.0 + math.cos(math.pi * progress))


def _sgd_update(params: M.ModelParams, grads: dict, trainable: Sequence[str],
                lr: float, weight_decay: float) -> None:
    for name in trainable:
        p = params.tensors[name]
        p -= lr * grads[name]
        p -= lr * weight_decay * p


def _itg_video_forward(t: dict, ex: VideoExample, slope: float):
    fv_flat = ex.fv.reshape(-1, ex.fv.shape[-1])
    att_out, att_cache = M.attend_forward(t, fv_flat)
    fp, proj_cache = M.projector_forward(t, att_out, slope)
    logits, lm_cache = M.lm_forward(t, fp, ex.caption)
    return fp, (att_cache, proj_cache, lm_cache), logits


def _project_back(t: dict, caches, d_fp: np.ndarray, grads: dict) -> None:
    att_cache, proj_cache, _ = caches
    d_att = M.projector_backward(t, proj_cache, d_fp, grads)
    M.attend_backward(t, att_cache, d_att, grads)


def stage1_batch(params: M.ModelParams, batch: list[VideoExample]) -> tuple[float, dict]:
    """Mean caption loss over the batch and its gradients."""
    t = params.tensors
    slope = params.dims.leaky_slope
    grads = M.zero_grads(params)
    total = 0.0
    for ex in batch:
        fp, caches, logits = _itg_video_forward(t, ex, slope)
        loss, d_logits = M.itg_loss_grad(logits, ex.caption)
        total += loss
        d_fp = M.lm_backward(t, caches[2], d_logits / len(batch), grads)
        _project_back(t, caches, d_fp, grads)
    return total / len(batch), grads


def ce_batch_forward(params: M.ModelParams, batch: list[VideoExample],
                     fps: list[np.ndarray], k_list: Sequence[int]):
    """Hypergraph branch forward for a batch; returns loss and caches."""
    t = params.tensors
    slope = params.dims.leaky_slope
    rows = []
    mix_caches = []
    for ex, fp in zip(batch, fps):
        out, cache = M.mixer_forward(t, ex.fv, fp)
        rows.append(out)
        mix_caches.append(cache)
    x = np.concatenate(rows, axis=0)
    membership = np.repeat(np.arange(len(batch)), params.dims.frames)
    g = build_knn_hypergraph(x, k_list)
    y = hgnn_forward(g, x, t["hg_theta"], slope)
    pooled = pool_by_video(y, membership)
    logits = M.heads_forward(t, pooled)
    losses = []
    d_pooled = np.zeros_like(pooled)
    head_grads: dict[str, np.ndarray] = {}
    for name in INDICATORS:
        labels = np.array([ex.labels[name] for ex in batch], dtype=np.int64)
        loss, d_logit = M.ce_loss_grad(logits[name], labels)
        losses.append(loss)
        head_grads[name] = d_logit / len(INDICATORS)
        d_pooled += head_grads[name] @ t[f"head_{name}_w"].T
    ce = float(np.mean(losses))
    cache = (x, membership, g, y, pooled, mix_caches, head_grads, d_pooled)
    return ce, cache


def ce_batch_backward(params: M.ModelParams, batch: list[VideoExample], cache,
                      scale: float, grads: dict) -> list[np.ndarray]:
    """Backward through heads, pooling, hypergraph layer, and mixer.

    Returns per-video gradients w.r.t. fp, scaled by `scale` (= lambda).
    The hypergraph structure is treated as a constant of the step.
    """
    t = params.tensors
    x, membership, g, y, pooled, mix_caches, head_grads, d_pooled = cache
    for name in INDICATORS:
        grads[f"head_{name}_w"] += scale * (pooled.T @ head_grads[name])
        grads[f"head_{name}_b"] += scale * head_grads[name].sum(axis=0)
    counts = np.bincount(membership, minlength=len(batch))
    d_y = (scale * d_pooled / counts[:, None])[membership]
    d_x, d_theta = hgnn_backward(g, x, t["hg_theta"], d_y, params.dims.leaky_slope)
    grads["hg_theta"] += d_theta
    d_fps = []
    n = params.dims.frames
    for i, mix_cache in enumerate(mix_caches):
        d_fps.append(M.mixer_backward(t, mix_cache, d_x[i * n : (i + 1) * n], grads))
    return d_fps


@dataclass
class StageMetrics:
    initial_loss: float
    epoch_losses: list[float]
    final_loss: float
    held_accuracy: list[dict[str, float]] = field(default_factory=list)


def _check_finite(loss: float, epoch: int) -> None:
    if not np.isfinite(loss):
        raise DivergenceDetected(f"non-finite loss at epoch {epoch}")


def _batches(ids: list[str], batch_size: int, rng: np.random.Generator) -> list[list[str]]:
    order = [ids[i] for i in rng.permutation(len(ids))]
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def _mean_itg(params: M.ModelParams, examples: list[VideoExample]) -> float:
    t = params.tensors
    slope = params.dims.leaky_slope
    losses = []
    for ex in examples:
        _, _, logits = _itg_video_forward(t, ex, slope)
        losses.append(M.itg_loss(logits, ex.caption))
    return float(np.mean(losses))


def train_stage1(params: M.ModelParams, data: TaskData, cfg: TrainConfig
                 ) -> tuple[M.ModelParams, StageMetrics]:
    """Warm-up: caption loss only; hypergraph branch parameters untouched."""
    params = params.copy()
    train = data.subset(data.train_ids)
    initial = _mean_itg(params, train)
    steps_per_epoch = math.ceil(len(train) / cfg.batch_size)
    total_steps = cfg.stage1_epochs * steps_per_epoch
    warmup = round(cfg.stage1_warmup_epochs * steps_per_epoch)
    curve = []
    step = 0
    for epoch in range(cfg.stage1_epochs):
        rng = rng_for(cfg.seed, "stage1-order", epoch)
        epoch_losses = []
        for batch_ids in _batches(data.train_ids, cfg.batch_size, rng):
            batch = data.subset(batch_ids)
            loss, grads = stage1_batch(params, batch)
            _check_finite(loss, epoch)
            lr = cosine_lr(step, total_steps, warmup, cfg.stage1_lr)
            _sgd_update(params, grads, M.STAGE1_TRAINABLE, lr, cfg.weight_decay)
            epoch_losses.append(loss)
            step += 1
        curve.append(float(np.mean(epoch_losses)))
    final = _mean_itg(params, train)
    _check_finite(final, cfg.stage1_epochs)
    return params, StageMetrics(initial_loss=initial, epoch_losses=curve, final_loss=final)


def predict(params: M.ModelParams, examples: list[VideoExample],
            k_list: Sequence[int]) -> dict[str, np.ndarray]:
    """Per-video class predictions from the hypergraph branch."""
    t = params.tensors
    slope = params.dims.leaky_slope
    fps = []
    for ex in examples:
        fp, _, _ = _itg_video_forward(t, ex, slope)
        fps.append(fp)
    rows = [M.mixer_forward(t, ex.fv, fp)[0] for ex, fp in zip(examples, fps)]
    x = np.concatenate(rows, axis=0)
    membership = np.repeat(np.arange(len(examples)), params.dims.frames)
    g = build_knn_hypergraph(x, k_list)
    y = hgnn_forward(g, x, t["hg_theta"], slope)
    pooled = pool_by_video(y, membership)
    logits = M.heads_forward(t, pooled)
    return {name: np.argmax(logits[name], axis=1) for name in INDICATORS}


def held_accuracy(params: M.ModelParams, data: TaskData, k_list: Sequence[int]
                  ) -> dict[str, float]:
    held = data.subset(data.held_ids)
    preds = predict(params, held, k_list)
    out = {}
    for name in INDICATORS:
        labels = np.array([ex.labels[name] for ex in held])
        out[name] = float(np.mean(preds[name] == labels))
    out["mean"] = float(np.mean([out[n] for n in INDICATORS]))
    return out


def train_stage2(params: M.ModelParams, data: TaskData, cfg: TrainConfig
                 ) -> tuple[M.ModelParams, StageMetrics]:
    """Joint fine-tuning with the hypergraph branch gated on."""
    params = params.copy()
    train = data.subset(data.train_ids)
    trainable = list(M.STAGE1_TRAINABLE) + list(M.STAGE2_EXTRA)
    if cfg.freeze_query_attention_stage2:
        trainable = [n for n in trainable if n not in M.QUERY_ATTENTION_PARAMS]
    steps_per_epoch = math.ceil(len(train) / cfg.batch_size)
    total_steps = cfg.stage2_epochs * steps_per_epoch
    warmup = round(cfg.stage2_warmup_epochs * steps_per_epoch)

    initial = _combined_over(params, train, cfg)
    curve = []
    held_curve = []
    step = 0
    for epoch in range(cfg.stage2_epochs):
        rng = rng_for(cfg.seed, "stage2-order", epoch)
        epoch_losses = []
        for batch_ids in _batches(data.train_ids, cfg.batch_size, rng):
            batch = data.subset(batch_ids)
            loss = _stage2_step(params, batch, cfg, trainable,
                                cosine_lr(step, total_steps, warmup, cfg.stage2_lr))
            _check_finite(loss, epoch)
            epoch_losses.append(loss)
            step += 1
        curve.append(float(np.mean(epoch_losses)))
        held_curve.append(held_accuracy(params, data, cfg.k_list))
    final = _combined_over(params, train, cfg)
    _check_finite(final, cfg.stage2_epochs)
    return params, StageMetrics(
        initial_loss=initial, epoch_losses=curve, final_loss=final,
        held_accuracy=held_curve,
    )


def _stage2_step(params: M.ModelParams, batch: list[VideoExample],
                 cfg: TrainConfig, trainable: Sequence[str], lr: float) -> float:
    t = params.tensors
    slope = params.dims.leaky_slope
    grads = M.zero_grads(params)

    fps = []
    caches = []
    itg_losses = []
    d_logits_list = []
    for ex in batch:
        fp, cache, logits = _itg_video_forward(t, ex, slope)
        loss, d_logits = M.itg_loss_grad(logits, ex.caption)
        fps.append(fp)
        caches.append(cache)
        itg_losses.append(loss)
        d_logits_list.append(d_logits)
    itg = float(np.mean(itg_losses))

    ce, ce_cache = ce_batch_forward(params, batch, fps, cfg.k_list)
    if cfg.lam > 0:
        d_fps_ce = ce_batch_backward(params, batch, ce_cache, cfg.lam, grads)
    else:
        d_fps_ce = [np.zeros_like(fp) for fp in fps]

    for ex, cache, d_logits, d_fp_ce in zip(batch, caches, d_logits_list, d_fps_ce):
        d_fp = M.lm_backward(t, cache[2], d_logits / len(batch), grads) + d_fp_ce
        _project_back(t, cache, d_fp, grads)

    _sgd_update(params, grads, trainable, lr, cfg.weight_decay)
    return M.combined_loss(itg, ce, cfg.lam)


def _combined_over(params: M.ModelParams, examples: list[VideoExample],
                   cfg: TrainConfig) -> float:
    t = params.tensors
    slope = params.dims.leaky_slope
    fps = []
    itg_losses = []
    for ex in examples:
        fp, _, logits = _itg_video_forward(t, ex, slope)
        fps.append(fp)
        itg_losses.append(M.itg_loss(logits, ex.caption))
    ce, _ = ce_batch_forward(params, examples, fps, cfg.k_list)
    return M.combined_loss(float(np.mean(itg_losses)), ce, cfg.lam)


# ---------------------------------------------------------------------------
# Checkpoints: JSON manifest line + float64 LE tensors in manifest order

CHECKPOINT_KIND = "hypersri-checkpoint"


def save_checkpoint(path, params: M.ModelParams, stage: int, cfg: TrainConfig | None = None) -> None:
    header = {
        "kind": CHECKPOINT_KIND,
        "stage": int(stage),
        "seed": int(params.seed),
        "dims": params.dims.to_dict(),
    }
    if cfg is not None:
        header["train_config"] = cfg.to_dict()
    write_tensor_file(path, header, params.tensors)


def load_checkpoint(path) -> tuple[M.ModelParams, dict]:
    manifest, tensors = read_tensor_file(path)
    if manifest.get("kind") != CHECKPOINT_KIND:
        raise FormatError(f"{path}: not a checkpoint file")
    dims = M.ModelDims.from_dict(manifest["dims"])
    seed = int(manifest["seed"])
    params = M.ModelParams(dims=dims, seed=seed, encoder=M.make_encoder(dims, seed),
                           tensors=tensors)
    expected = set(M._param_shapes(dims))
    if set(tensors) != expected:
        raise FormatError(f"{path}: tensor names do not match model dims")
    for name, shape in M._param_shapes(dims).items():
        if tensors[name].shape != shape:
            raise ShapeMismatch(f"{path}: {name} has shape {tensors[name].shape}, want {shape}")
    return params, manifest
