"""Adaptive scene-cut detection, keyframing, and the 8-frame video summary.

The content metric is the mean absolute RGB difference between consecutive
frames (0..255). A frame is a cut when that value is both large in absolute
terms and large relative to the rolling mean of its neighborhood, and the
previous cut is far enough back. Each scene is represented by its middle
frame; the storyboard is reduced (or padded) to exactly 8 keyframes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .errors import (
    EmptySequence,
    EmptyStoryboard,
    FormatError,
    MismatchedDimensions,
)

DEFAULT_ADAPTIVE_THRESHOLD = 2.0
DEFAULT_MIN_SCENE_LEN = 10
DEFAULT_WINDOW_WIDTH = 2
DEFAULT_MIN_CONTENT_VAL = 15.0
SUMMARY_FRAMES = 8


def as_frame_array(frames) -> np.ndarray:
    """Validate and stack frames into a (T, h, w, 3) uint8 array."""
    if isinstance(frames, np.ndarray):
        arr = frames
    else:
        items = list(frames)
        if not items:
            raise EmptySequence("no frames")
        shapes = {np.asarray(f).shape for f in items}
        if len(shapes) != 1:
            raise MismatchedDimensions(f"frames disagree on shape: {sorted(shapes)}")
        arr = np.stack([np.asarray(f) for f in items])
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise MismatchedDimensions(f"expected (T, h, w, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        raise FormatError(f"frames must be uint8, got {arr.dtype}")
    if arr.shape[0] == 0:
        raise EmptySequence("no frames")
    return arr


def content_values(frames) -> np.ndarray:
    """cv[i] = mean |frame_i - frame_{i-1}| over pixels and channels; cv[0] = 0."""
    arr = as_frame_array(frames)
    if arr.shape[0] < 2:
        raise EmptySequence("need at least two frames for content values")
    return _accel.content_diff_means(arr)


@dataclass
class SceneList:
    """Cut frame indices (always starting with 0) over `frame_count` frames."""

    cuts: list[int]
    frame_count: int

    def __post_init__(self):
        if self.frame_count <= 0:
            raise EmptySequence("no frames")
        if not self.cuts or self.cuts[0] != 0:
            raise FormatError("cuts must start with 0")
        if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
            raise FormatError("cuts must be strictly increasing")
        if self.cuts[-1] >= self.frame_count:
            raise FormatError("cut index beyond frame count")

    def scenes(self) -> list[tuple[int, int]]:
        ends = self.cuts[1:] + [self.frame_count]
        return list(zip(self.cuts, ends))


def adaptive_detect(
    frames,
    adaptive_threshold: float = DEFAULT_ADAPTIVE_THRESHOLD,
    min_scene_len: int = DEFAULT_MIN_SCENE_LEN,
    window_width: int = DEFAULT_WINDOW_WIDTH,
    min_content_val: float = DEFAULT_MIN_CONTENT_VAL,
) -> SceneList:
    """Single left-to-right scan; a cut must clear all three tests.

    ratio(i) = cv[i] / mean(cv over up to `window_width` frames on each side
    of i, excluding i; out-of-range neighbors are dropped). The denominator
    is floored at 1e-6.
    """
    arr = as_frame_array(frames)
    n = arr.shape[0]
    if n < 2:
        return SceneList(cuts=[0], frame_count=n)
    cv = _accel.content_diff_means(arr)
    cuts = [0]
    last_cut = 0
    for i in range(1, n):
        if i - last_cut < min_scene_len:
            continue
        if cv[i] < min_content_val:
            continue
        lo = max(0, i - window_width)
        hi = min(n - 1, i + window_width)
        neighbors = np.concatenate([cv[lo:i], cv[i + 1 : hi + 1]])
        denom = max(float(neighbors.mean()), 1e-6) if neighbors.size else 1e-6
        if cv[i] / denom >= adaptive_threshold:
            cuts.append(i)
            last_cut = i
    return SceneList(cuts=cuts, frame_count=n)


def keyframe_indices(scene_list: SceneList) -> list[int]:
    """Middle frame of each scene [start, end): floor((start + end - 1) / 2)."""
    return [(start + end - 1) // 2 for start, end in scene_list.scenes()]


def select_8(keyframes: list[int]) -> list[int]:
    """Reduce or pad a keyframe list to exactly 8 sorted entries.

    With more than 8, picks positions round(k*(m-1)/7) for k = 0..7 (uniform
    coverage, first and last kept). With fewer, repeats entries cyclically
    and sorts.
    """
    m = len(keyframes)
    if m == 0:
        raise EmptyStoryboard("no keyframes")
    if m >= SUMMARY_FRAMES:
        positions = [round(k * (m - 1) / (SUMMARY_FRAMES - 1)) for k in range(SUMMARY_FRAMES)]
        return [keyframes[p] for p in positions]
    return sorted(keyframes[k % m] for k in range(SUMMARY_FRAMES))


@dataclass
class Storyboard:
    video_id: str
    cuts: list[int]
    frame_count: int
    keyframes: list[int] = field(default_factory=list)
    selected8: list[int] = field(default_factory=list)


def make_storyboard(video_id: str, scene_list: SceneList) -> Storyboard:
    keyframes = keyframe_indices(scene_list)
    return Storyboard(
        video_id=video_id,
        cuts=list(scene_list.cuts),
        frame_count=scene_list.frame_count,
        keyframes=keyframes,
        selected8=select_8(keyframes),
    )


# ---------------------------------------------------------------------------
# Raw planar RGB frame files with a JSON sidecar


def write_frames_bin(bin_path, meta_path, frames: np.ndarray, video_id: str,
                     fps: float | None = None) -> None:
    arr = as_frame_array(frames)
    Path(bin_path).parent.mkdir(parents=True, exist_ok=True)
    # planar layout: per frame, full R plane then G then B
    with open(bin_path, "wb") as f:
        f.write(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)).tobytes())
    meta = {
        "video_id": video_id,
        "h": int(arr.shape[1]),
        "w": int(arr.shape[2]),
        "frame_count": int(arr.shape[0]),
    }
    if fps is not None:
        meta["fps"] = float(fps)
    Path(meta_path).parent.mkdir(parents=True, exist_ok=True)
    with open(meta_path, "w", encoding="utf-8", newline="") as f:
        json.dump(meta, f, sort_keys=True)
        f.write("\n")


def read_frames_bin(bin_path, meta_path) -> tuple[np.ndarray, dict]:
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    try:
        h, w, n = int(meta["h"]), int(meta["w"]), int(meta["frame_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{meta_path}: {exc}") from exc
    raw = np.fromfile(bin_path, dtype=np.uint8)
    expected = n * 3 * h * w
    if raw.size != expected:
        raise FormatError(
            f"{bin_path}: expected {expected} bytes for {n}x3x{h}x{w}, got {raw.size}"
        )
    frames = raw.reshape(n, 3, h, w).transpose(0, 2, 3, 1).copy()
    return frames, meta


def storyboard_to_json(sb: Storyboard) -> str:
    obj = {
        "video_id": sb.video_id,
        "frame_count": sb.frame_count,
        "cuts": sb.cuts,
        "keyframes": sb.keyframes,
        "selected8": sb.selected8,
    }
    return json.dumps(obj, sort_keys=True) + "\n"


def storyboard_from_json(path) -> Storyboard:
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    try:
        return Storyboard(
            video_id=obj["video_id"],
            cuts=[int(c) for c in obj["cuts"]],
            frame_count=int(obj["frame_count"]),
            keyframes=[int(k) for k in obj["keyframes"]],
            selected8=[int(k) for k in obj["selected8"]],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
