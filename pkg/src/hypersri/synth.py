"""Seeded synthetic data with planted ground truth for every pipeline stage.

Three generators, driven by one JSON spec:

* `gen_cohort` — audience profiles plus EEG/gaze streams whose windowed
  indicator values hit planted per-cell targets. Band powers are obtained by
  inverting the indicator formulas with a fixed total upper-alpha power of
  10 units, which is feasible for any engagement target in (0, 1) and
  emotion target in (-100, 100).
* `gen_frames` — piecewise-constant color blocks with planted cut indices;
  consecutive scenes differ by >= 100 content-value units and optional
  intra-scene noise stays below the detector's absolute floor.
* `gen_model_task` — clustered 8-frame videos, captions that follow the
  cluster identity, and class labels that are functions of the cluster, so
  neighbor smoothing over the feature hypergraph is informative.

Every generator is a pure function of (spec, seed); per-entity seeds are
derived with a fixed 64-bit hash so outputs are order-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import (
    AudienceProfile,
    CohortData,
    GroupingResult,
    SceneWindow,
    group_by_demographics,
    save_profiles_csv,
)
from .errors import InvalidSpec
from .model import ModelDims, encode_frames, make_encoder
from .scenes import write_frames_bin
from .signals import (
    EegStream,
    GazeStream,
    Indicator,
    CLASS_PROPORTIONS,
    save_eeg_csv,
    save_gaze_csv,
)
from .tensorio import write_tensor_file
from .training import TaskData, VideoExample
from .utils import canonical_json, rng_for, write_text

ALPHA_TOTAL = 10.0  # fixed a2 + a3 used when inverting the indicator formulas

# Class-interior representative values used in proportions mode. Engagement
# representatives scale with the configured threshold.
EMOTION_REPS = (-25.0, 0.0, 25.0)
EMR_REPS = (0.2, 0.5, 0.8)


# ---------------------------------------------------------------------------
# Spec parsing


@dataclass
class CohortSpec:
    participants: int = 30
    female_fraction: float = 0.5
    age_min: int = 18
    age_max: int = 45
    videos: int = 2
    scenes_per_video: int = 3
    scene_seconds: float = 2.0
    samples_per_scene: int = 10
    noise: float = 0.0
    engagement_threshold: float = 0.5
    mode: str = "proportions"  # or "means"
    means: dict = field(default_factory=dict)  # indicator -> planted mean
    group_jitter: dict = field(default_factory=dict)  # indicator -> jitter scale
    proportions: dict = field(default_factory=dict)  # indicator -> class shares

    def __post_init__(self):
        if self.participants < 1:
            raise InvalidSpec("cohort.participants must be >= 1")
        if not 0 <= self.female_fraction <= 1:
            raise InvalidSpec("cohort.female_fraction must be in [0, 1]")
        if self.age_min > self.age_max or self.age_min < 0:
            raise InvalidSpec("cohort age range invalid")
        if self.videos < 1 or self.scenes_per_video < 1:
            raise InvalidSpec("cohort needs at least one video and scene")
        if self.samples_per_scene < 1:
            raise InvalidSpec("cohort.samples_per_scene must be >= 1")
        if self.noise < 0:
            raise InvalidSpec("cohort.noise must be >= 0")
        if not 0 < self.engagement_threshold < 1:
            raise InvalidSpec("cohort.engagement_threshold must be in (0, 1) "
                              "(band-power streams bound engagement to [0, 1])")
        if self.mode not in ("proportions", "means"):
            raise InvalidSpec(f"unknown cohort mode {self.mode!r}")
        if self.mode == "means":
            for key in ("engagement", "emotion", "emr"):
                if key not in self.means:
                    raise InvalidSpec(f"cohort.means missing {key!r}")
            if not 0 < float(self.means["engagement"]) < 1:
                raise InvalidSpec("planted engagement mean must be in (0, 1)")
            if not -100 < float(self.means["emotion"]) < 100:
                raise InvalidSpec("planted emotion mean must be in (-100, 100)")
            if not 0 <= float(self.means["emr"]) <= 1:
                raise InvalidSpec("planted emr mean must be in [0, 1]")


@dataclass
class VideosSpec:
    count: int = 2
    frames: int = 80
    height: int = 24
    width: int = 32
    fps: float = 10.0
    noise_amplitude: int = 0
    min_scene_len: int = 10
    max_scene_len: int = 30
    cuts: dict = field(default_factory=dict)  # video_id -> explicit cut list

    def __post_init__(self):
        if self.count < 1 or self.frames < 1:
            raise InvalidSpec("videos.count and videos.frames must be >= 1")
        if self.height < 1 or self.width < 1:
            raise InvalidSpec("videos dimensions must be >= 1")
        if self.noise_amplitude < 0 or self.noise_amplitude > 6:
            raise InvalidSpec("videos.noise_amplitude must be in [0, 6] to stay "
                              "below the detector floor")
        if self.min_scene_len < 1 or self.max_scene_len < self.min_scene_len:
            raise InvalidSpec("videos scene length range invalid")
        for vid, cuts in self.cuts.items():
            if not cuts or cuts[0] != 0:
                raise InvalidSpec(f"videos.cuts[{vid}]: must start with 0")
            if any(b - a < self.min_scene_len for a, b in zip(cuts, cuts[1:])):
                raise InvalidSpec(f"videos.cuts[{vid}]: spacing below min_scene_len")
            if cuts[-1] >= self.frames or self.frames - cuts[-1] < 1:
                raise InvalidSpec(f"videos.cuts[{vid}]: cut beyond frame count")


@dataclass
class ModelTaskSpec:
    videos: int = 36
    clusters: int = 9
    held_fraction: float = 0.25
    frame_height: int = 16
    frame_width: int = 16
    caption_len: int = 6
    caption_style: str = "sequential"
    pixel_noise: int = 8
    n_groups: int = 4
    group_flip_rate: float = 0.25
    shuffle_labels: bool = False
    dims: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.videos < self.clusters:
            raise InvalidSpec("model_task.videos must be >= clusters")
        if self.clusters < 1:
            raise InvalidSpec("model_task.clusters must be >= 1")
        if not 0 < self.held_fraction < 1:
            raise InvalidSpec("model_task.held_fraction must be in (0, 1)")
        if self.caption_len < 1:
            raise InvalidSpec("model_task.caption_len must be >= 1")
        if not 0 <= self.group_flip_rate <= 1:
            raise InvalidSpec("model_task.group_flip_rate must be in [0, 1]")
        if self.n_groups < 1:
            raise InvalidSpec("model_task.n_groups must be >= 1")
        if self.caption_style not in ("sequential", "random"):
            raise InvalidSpec(f"unknown caption_style {self.caption_style!r}")

    def model_dims(self) -> ModelDims:
        dims = ModelDims.from_dict(self.dims) if self.dims else ModelDims()
        if self.caption_len > dims.max_text:
            raise InvalidSpec("model_task.caption_len exceeds the LM text budget")
        return dims


@dataclass
class SynthSpec:
    seed: int = 0
    cohort: CohortSpec | None = None
    videos: VideosSpec | None = None
    model_task: ModelTaskSpec | None = None

    @classmethod
    def from_dict(cls, obj: dict) -> "SynthSpec":
        if not isinstance(obj, dict):
            raise InvalidSpec("spec must be a JSON object")
        unknown = set(obj) - {"seed", "cohort", "videos", "model_task"}
        if unknown:
            raise InvalidSpec(f"unknown spec sections: {sorted(unknown)}")
        try:
            return cls(
                seed=int(obj.get("seed", 0)),
                cohort=CohortSpec(**obj["cohort"]) if "cohort" in obj else None,
                videos=VideosSpec(**obj["videos"]) if "videos" in obj else None,
                model_task=ModelTaskSpec(**obj["model_task"]) if "model_task" in obj else None,
            )
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path) -> "SynthSpec":
        with open(path, "r", encoding="utf-8") as f:
            try:
                obj = json.load(f)
            except json.JSONDecodeError as exc:
                raise InvalidSpec(f"{path}: {exc}") from exc
        return cls.from_dict(obj)


# ---------------------------------------------------------------------------
# Cohort generation


def _engagement_reps(threshold: float) -> tuple[float, float]:
    return (0.5 * threshold, threshold + 0.5 * (1.0 - threshold))


def _stratified_classes(n: int, proportions, rng: np.random.Generator) -> np.ndarray:
    """Exact largest-remainder class counts, then a seeded shuffle."""
    p = np.asarray(proportions, dtype=np.float64)
    p = p / p.sum()
    raw = p * n
    counts = np.floor(raw).astype(int)
    remainder = n - counts.sum()
    if remainder:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    labels = np.repeat(np.arange(len(p)), counts)
    return labels[rng.permutation(n)]


def _bresenham_gaze(n: int, p: float) -> np.ndarray:
    """Deterministic 0/1 pattern with exactly floor(n*p) ones, evenly spread."""
    j = np.arange(n + 1)
    marks = np.floor(j * p + 1e-9)
    return (marks[1:] - marks[:-1]) >= 1


def _invert_band_powers(en: np.ndarray, em: np.ndarray) -> tuple[np.ndarray, ...]:
    en = np.clip(en, 1e-3, 1 - 1e-3)
    em = np.clip(em, -100 + 1e-3, 100 - 1e-3)
    a3 = (ALPHA_TOTAL + ALPHA_TOTAL * em / 100.0) / 2.0
    a2 = ALPHA_TOTAL - a3
    beta_total = ALPHA_TOTAL * en / (1.0 - en)
    b2 = beta_total / 2.0
    b3 = beta_total - b2
    return a2, a3, b2, b3


@dataclass
class CohortTruth:
    grouping: GroupingResult
    windows: dict[str, list[SceneWindow]]
    cells: dict[str, dict[str, dict]]  # indicator -> "gid|vid|scene" -> {class, value}
    engagement_threshold: float

    def to_dict(self) -> dict:
        return {
            "groups": {g.group_id: list(g.participant_ids) for g in self.grouping.groups},
            "unassigned": list(self.grouping.unassigned),
            "windows": {
                vid: [[w.t1, w.t2] for w in ws] for vid, ws in self.windows.items()
            },
            "cells": self.cells,
            "engagement_threshold": self.engagement_threshold,
        }


def gen_cohort(spec: SynthSpec) -> tuple[CohortData, CohortTruth]:
    if spec.cohort is None:
        raise InvalidSpec("spec has no cohort section")
    c = spec.cohort
    seed = spec.seed

    n_female = round(c.participants * c.female_fraction)
    rng_age = rng_for(seed, "cohort-ages")
    profiles = []
    for i in range(c.participants):
        profiles.append(
            AudienceProfile(
                participant_id=f"p{i:04d}",
                gender="female" if i < n_female else "male",
                age=int(rng_age.integers(c.age_min, c.age_max + 1)),
            )
        )
    grouping = group_by_demographics(profiles)
    group_of = {
        pid: g.group_id for g in grouping.groups for pid in g.participant_ids
    }

    video_ids = [f"v{i:03d}" for i in range(c.videos)]
    windows = {
        vid: [
            SceneWindow(vid, s, s * c.scene_seconds, (s + 1) * c.scene_seconds)
            for s in range(c.scenes_per_video)
        ]
        for vid in video_ids
    }

    en_reps = _engagement_reps(c.engagement_threshold)
    reps = {
        Indicator.ENGAGEMENT: en_reps,
        Indicator.EMOTION: EMOTION_REPS,
        Indicator.EMR: EMR_REPS,
    }
    group_ids = sorted(g.group_id for g in grouping.groups)
    cell_keys = [
        f"{gid}|{vid}|{s}"
        for gid in group_ids
        for vid in video_ids
        for s in range(c.scenes_per_video)
    ]

    cells: dict[str, dict[str, dict]] = {}
    for indicator in Indicator:
        table: dict[str, dict] = {}
        if c.mode == "proportions":
            props = c.proportions.get(indicator.value, CLASS_PROPORTIONS[indicator])
            classes = _stratified_classes(
                len(cell_keys), props, rng_for(seed, "cohort-classes", indicator.value)
            )
            for key, cls_label in zip(cell_keys, classes):
                table[key] = {"class": int(cls_label),
                              "value": float(reps[indicator][cls_label])}
        else:
            base = float(c.means[indicator.value])
            jitter = float(c.group_jitter.get(indicator.value, 0.0))
            for gid in group_ids:
                off = 0.0
                if jitter:
                    off = jitter * float(
                        rng_for(seed, "cohort-jitter", indicator.value, gid).uniform(-1, 1)
                    )
                for vid in video_ids:
                    for s in range(c.scenes_per_video):
                        table[f"{gid}|{vid}|{s}"] = {"class": -1, "value": base + off}
        cells[indicator.value] = table

    defaults = {
        Indicator.ENGAGEMENT: en_reps[0],
        Indicator.EMOTION: EMOTION_REPS[1],
        Indicator.EMR: EMR_REPS[1],
    }

    def cell_value(indicator: Indicator, pid: str, vid: str, s: int) -> float:
        gid = group_of.get(pid)
        if gid is None:
            return defaults[indicator]
        return cells[indicator.value][f"{gid}|{vid}|{s}"]["value"]

    eeg: dict[tuple[str, str], EegStream] = {}
    gaze: dict[tuple[str, str], GazeStream] = {}
    n_samp = c.samples_per_scene
    dt = c.scene_seconds / n_samp
    for p in profiles:
        for vid in video_ids:
            rng = rng_for(seed, "cohort-stream", p.participant_id, vid)
            t_parts, en_parts, em_parts, gaze_parts = [], [], [], []
            for s in range(c.scenes_per_video):
                t0 = s * c.scene_seconds
                t_parts.append(t0 + (np.arange(n_samp) + 0.5) * dt)
                en_target = cell_value(Indicator.ENGAGEMENT, p.participant_id, vid, s)
                em_target = cell_value(Indicator.EMOTION, p.participant_id, vid, s)
                emr_target = cell_value(Indicator.EMR, p.participant_id, vid, s)
                if c.noise > 0:
                    en_parts.append(en_target + c.noise * 0.05 * rng.standard_normal(n_samp))
                    em_parts.append(em_target + c.noise * 5.0 * rng.standard_normal(n_samp))
                    emr_target = float(np.clip(
                        emr_target + c.noise * 0.05 * rng.standard_normal(), 0.0, 1.0
                    ))
                else:
                    en_parts.append(np.full(n_samp, en_target))
                    em_parts.append(np.full(n_samp, em_target))
                gaze_parts.append(_bresenham_gaze(n_samp, emr_target))
            t = np.concatenate(t_parts)
            a2, a3, b2, b3 = _invert_band_powers(
                np.concatenate(en_parts), np.concatenate(em_parts)
            )
            eeg[(p.participant_id, vid)] = EegStream(
                t=t, a1=np.full(t.size, 4.0), a2=a2, a3=a3,
                b1=np.full(t.size, 3.0), b2=b2, b3=b3,
            )
            gaze[(p.participant_id, vid)] = GazeStream(
                t=t.copy(), on_screen=np.concatenate(gaze_parts)
            )

    cohort = CohortData(profiles=profiles, eeg=eeg, gaze=gaze)
    truth = CohortTruth(
        grouping=grouping,
        windows=windows,
        cells=cells,
        engagement_threshold=c.engagement_threshold,
    )
    return cohort, truth


# ---------------------------------------------------------------------------
# Frame sequences with planted cuts


def _scene_colors(n_scenes: int, rng: np.random.Generator) -> np.ndarray:
    """Alternating dark/bright colors; consecutive scenes differ by >= 100."""
    colors = np.empty((n_scenes, 3), dtype=np.int64)
    for k in range(n_scenes):
        if k % 2 == 0:
            colors[k] = rng.integers(0, 61, size=3)
        else:
            colors[k] = rng.integers(180, 256, size=3)
    return colors


def _planted_cuts(v: VideosSpec, rng: np.random.Generator) -> list[int]:
    cuts = [0]
    pos = 0
    while True:
        step = int(rng.integers(v.min_scene_len, v.max_scene_len + 1))
        pos += step
        if v.frames - pos < v.min_scene_len:
            break
        cuts.append(pos)
    return cuts


def gen_frames(spec: SynthSpec) -> dict[str, tuple[np.ndarray, list[int]]]:
    """Per video: (frames uint8 (T, h, w, 3), planted cut indices)."""
    if spec.videos is None:
        raise InvalidSpec("spec has no videos section")
    v = spec.videos
    out = {}
    for i in range(v.count):
        vid = f"v{i:03d}"
        rng = rng_for(spec.seed, "frames", vid)
        cuts = [int(x) for x in v.cuts[vid]] if vid in v.cuts else _planted_cuts(v, rng)
        colors = _scene_colors(len(cuts), rng)
        frames = np.empty((v.frames, v.height, v.width, 3), dtype=np.int64)
        bounds = cuts + [v.frames]
        for k in range(len(cuts)):
            frames[bounds[k] : bounds[k + 1]] = colors[k]
        if v.noise_amplitude:
            noise = rng.integers(-v.noise_amplitude, v.noise_amplitude + 1, size=frames.shape)
            frames = frames + noise
        out[vid] = (np.clip(frames, 0, 255).astype(np.uint8), cuts)
    return out


# ---------------------------------------------------------------------------
# Model task: clustered videos, captions, labels


def _cluster_labels(cluster: int) -> dict[str, int]:
    return {
        "engagement": cluster % 2,
        "emotion": cluster % 3,
        "emr": (cluster // 3) % 3,
    }


def _cluster_captions(n_clusters: int, vocab: int, length: int, seed: int,
                      style: str = "sequential") -> list[list[int]]:
    """One caption template per cluster.

    "sequential" starts each cluster at a distinct token and counts upward
    mod vocab: the continuation rule is shared across clusters, and the
    start token identifies the cluster, so the visual prefix carries real
    signal at every position. "random" draws i.i.d. tokens.
    """
    captions: list[list[int]] = []
    seen = set()
    for c in range(n_clusters):
        attempt = 0
        while True:
            if style == "sequential":
                start = (c * 5 + 1 + attempt) % vocab
                cap = [(start + j) % vocab for j in range(length)]
            else:
                rng = rng_for(seed, "task-caption", c, attempt)
                cap = [int(x) for x in rng.integers(0, vocab, size=length)]
            if tuple(cap) not in seen:
                seen.add(tuple(cap))
                captions.append(cap)
                break
            attempt += 1
    return captions


def _cluster_frames(spec_mt: ModelTaskSpec, dims: ModelDims, cluster: int,
                    rng: np.random.Generator, base_seed: int) -> np.ndarray:
    gh, gw = dims.patch_grid
    h, w = spec_mt.frame_height, spec_mt.frame_width
    n_clusters = spec_mt.clusters
    # cluster signature: a mild brightness ramp over the cluster index plus
    # strong per-patch color offsets, so cluster centroids land in general
    # position in patch-statistic space (any labeling of them is separable)
    base = 70 + (110 * cluster) // max(1, n_clusters - 1)
    sig_rng = rng_for(base_seed, "task-palette", cluster)
    patch_offsets = sig_rng.integers(-65, 66, size=(gh, gw, 3))
    frame = np.empty((h, w, 3), dtype=np.int64)
    row_edges = [round(i * h / gh) for i in range(gh + 1)]
    col_edges = [round(i * w / gw) for i in range(gw + 1)]
    for r in range(gh):
        for c in range(gw):
            frame[row_edges[r]:row_edges[r + 1], col_edges[c]:col_edges[c + 1]] = (
                base + patch_offsets[r, c]
            )
    frames = np.repeat(frame[None], dims.frames, axis=0)
    if spec_mt.pixel_noise:
        frames = frames + rng.integers(
            -spec_mt.pixel_noise, spec_mt.pixel_noise + 1, size=frames.shape
        )
    return np.clip(frames, 0, 255).astype(np.uint8)


@dataclass
class ModelTaskTruth:
    clusters: dict[str, int]
    captions_by_cluster: list[list[int]]


def gen_model_task(spec: SynthSpec) -> tuple[TaskData, ModelDims, ModelTaskTruth]:
    if spec.model_task is None:
        raise InvalidSpec("spec has no model_task section")
    mt = spec.model_task
    dims = mt.model_dims()
    seed = spec.seed
    encoder = make_encoder(dims, derive_encoder_seed(seed))
    captions = _cluster_captions(mt.clusters, dims.vocab, mt.caption_len, seed,
                                 style=mt.caption_style)

    video_ids = [f"m{i:03d}" for i in range(mt.videos)]
    clusters = {vid: i % mt.clusters for i, vid in enumerate(video_ids)}

    examples = []
    for vid in video_ids:
        c = clusters[vid]
        rng = rng_for(seed, "task-video", vid)
        frames = _cluster_frames(mt, dims, c, rng, seed)
        fv = encode_frames(frames, encoder)
        examples.append(
            VideoExample(
                video_id=vid,
                fv=fv,
                caption=np.asarray(captions[c], dtype=np.int64),
                labels=_cluster_labels(c),
            )
        )

    if mt.shuffle_labels:
        rng = rng_for(seed, "task-shuffle")
        perm = rng.permutation(len(examples))
        shuffled = [examples[i].labels for i in perm]
        for ex, labels in zip(examples, shuffled):
            ex.labels = labels

    # stratified split: at least one held-out video per cluster
    held: list[str] = []
    for c in range(mt.clusters):
        members = [vid for vid in video_ids if clusters[vid] == c]
        rng = rng_for(seed, "task-split", c)
        order = [members[i] for i in rng.permutation(len(members))]
        n_held = max(1, round(mt.held_fraction * len(members)))
        held.extend(order[:n_held])
    held = sorted(held)
    train = [vid for vid in video_ids if vid not in set(held)]

    group_labels: dict[str, dict[str, dict[str, int]]] = {}
    n_classes = {"engagement": 2, "emotion": 3, "emr": 3}
    base_labels = {ex.video_id: ex.labels for ex in examples}
    for j in range(mt.n_groups):
        gid = f"grp{j}"
        table: dict[str, dict[str, int]] = {}
        for vid in video_ids:
            labels = dict(base_labels[vid])
            for name in labels:
                rng = rng_for(seed, "task-group", gid, vid, name)
                if rng.uniform() < mt.group_flip_rate:
                    others = [k for k in range(n_classes[name]) if k != labels[name]]
                    labels[name] = int(others[rng.integers(0, len(others))])
            table[vid] = labels
        group_labels[gid] = table

    data = TaskData(examples=examples, train_ids=train, held_ids=held,
                    group_labels=group_labels)
    truth = ModelTaskTruth(clusters=clusters, captions_by_cluster=captions)
    return data, dims, truth


def derive_encoder_seed(seed: int) -> int:
    # the featurizer is frozen; its seed only needs to be fixed per spec seed
    return seed


# ---------------------------------------------------------------------------
# On-disk layout


def save_model_task(outdir, data: TaskData, dims: ModelDims, seed: int,
                    truth: ModelTaskTruth | None = None) -> None:
    outdir = Path(outdir)
    obj = {
        "kind": "model-task",
        "seed": seed,
        "dims": dims.to_dict(),
        "video_ids": [ex.video_id for ex in data.examples],
        "captions": {ex.video_id: [int(t) for t in ex.caption] for ex in data.examples},
        "labels": {ex.video_id: ex.labels for ex in data.examples},
        "group_labels": data.group_labels,
        "split": {"train": data.train_ids, "held": data.held_ids},
    }
    if truth is not None:
        obj["clusters"] = truth.clusters
    write_text(outdir / "task.json", canonical_json(obj) + "\n")
    write_tensor_file(
        outdir / "features.bin",
        {"kind": "model-task-features", "video_ids": [ex.video_id for ex in data.examples]},
        {ex.video_id: ex.fv for ex in data.examples},
    )


def load_model_task(taskdir) -> tuple[TaskData, ModelDims, dict]:
    from .tensorio import read_tensor_file

    taskdir = Path(taskdir)
    with open(taskdir / "task.json", "r", encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("kind") != "model-task":
        raise InvalidSpec(f"{taskdir}/task.json is not a model task file")
    dims = ModelDims.from_dict(obj["dims"])
    _, tensors = read_tensor_file(taskdir / "features.bin")
    examples = []
    for vid in obj["video_ids"]:
        if vid not in tensors:
            raise InvalidSpec(f"features.bin missing video {vid}")
        examples.append(
            VideoExample(
                video_id=vid,
                fv=tensors[vid],
                caption=np.asarray(obj["captions"][vid], dtype=np.int64),
                labels={k: int(v) for k, v in obj["labels"][vid].items()},
            )
        )
    data = TaskData(
        examples=examples,
        train_ids=list(obj["split"]["train"]),
        held_ids=list(obj["split"]["held"]),
        group_labels={
            gid: {vid: {k: int(v) for k, v in labels.items()}
                  for vid, labels in table.items()}
            for gid, table in obj.get("group_labels", {}).items()
        },
    )
    return data, dims, obj


def generate_to_dir(spec: SynthSpec, outdir) -> dict:
    """Materialize every requested section under `outdir`; returns the truth."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    planted: dict = {"seed": spec.seed}

    if spec.cohort is not None:
        cohort, truth = gen_cohort(spec)
        save_profiles_csv(outdir / "profiles.csv", cohort.profiles)
        for (pid, vid), stream in sorted(cohort.eeg.items()):
            save_eeg_csv(outdir / "eeg" / f"{pid}__{vid}.csv", stream)
        for (pid, vid), stream in sorted(cohort.gaze.items()):
            save_gaze_csv(outdir / "gaze" / f"{pid}__{vid}.csv", stream)
        for vid, ws in sorted(truth.windows.items()):
            obj = {
                "video_id": vid,
                "windows": [
                    {"scene_index": w.scene_index, "t1": w.t1, "t2": w.t2} for w in ws
                ],
            }
            write_text(outdir / "scenes" / f"{vid}.windows.json",
                       canonical_json(obj) + "\n")
        planted["cohort"] = truth.to_dict()

    if spec.videos is not None:
        frames_by_vid = gen_frames(spec)
        cuts_truth = {}
        for vid, (frames, cuts) in sorted(frames_by_vid.items()):
            write_frames_bin(
                outdir / "videos" / f"{vid}.bin",
                outdir / "videos" / f"{vid}.meta.json",
                frames, vid, fps=spec.videos.fps,
            )
            cuts_truth[vid] = cuts
        planted["video_cuts"] = cuts_truth

    if spec.model_task is not None:
        data, dims, truth = gen_model_task(spec)
        save_model_task(outdir / "model_task", data, dims, spec.seed, truth)
        planted["model_task_clusters"] = truth.clusters

    write_text(outdir / "planted.json", canonical_json(planted) + "\n")
    return planted
