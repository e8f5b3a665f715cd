"""Per-timestamp viewer-response indicators from band powers and gaze.

Engagement is the beta share of the (upper-alpha + beta) power budget,
emotion is the normalized alpha3/alpha2 asymmetry scaled to +-100, and the
eye-movement ratio is the fraction of gaze samples landing on screen inside
a window. `classify` maps indicator values to the discrete classes used by
the classification task.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyWindow,
    FormatError,
    NonFiniteValue,
    ZeroDenominator,
)


class Indicator(str, Enum):
    ENGAGEMENT = "engagement"
    EMOTION = "emotion"
    EMR = "emr"


INDICATOR_ORDER = (Indicator.ENGAGEMENT, Indicator.EMOTION, Indicator.EMR)

CLASS_NAMES = {
    Indicator.ENGAGEMENT: ("non-cognitive", "cognitive"),
    Indicator.EMOTION: ("negative", "neutral", "positive"),
    Indicator.EMR: ("not attended", "partially attended", "fully attended"),
}

# Reference class proportions of the source data distribution, used by the
# synthetic generators and the random baseline.
CLASS_PROPORTIONS = {
    Indicator.ENGAGEMENT: (0.550, 0.450),
    Indicator.EMOTION: (0.297, 0.390, 0.312),
    Indicator.EMR: (0.293, 0.416, 0.290),
}


@dataclass(frozen=True)
class BandPowerSample:
    """One timestamped reading of the six band powers (all non-negative)."""

    t: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    b3: float


@dataclass(frozen=True)
class GazeSample:
    t: float
    on_screen: bool


@dataclass(frozen=True)
class SriClass:
    indicator: Indicator
    label: int
    name: str


def compute_engagement(s: BandPowerSample) -> float:
    """(b2+b3) / (a3+a2+b2+b3); always in [0, 1]."""
    denom = s.a2 + s.a3 + s.b2 + s.b3
    if denom == 0:
        raise ZeroDenominator("a2+a3+b2+b3 is zero")
    return (s.b2 + s.b3) / denom


def compute_emotion(s: BandPowerSample) -> float:
    """(a3-a2) / (a3+a2) * 100; always in [-100, 100]."""
    denom = s.a2 + s.a3
    if denom == 0:
        raise ZeroDenominator("a2+a3 is zero")
    return (s.a3 - s.a2) / denom * 100.0


def compute_emr(gaze: "GazeStream | Iterable[GazeSample]", window: tuple[float, float]) -> float:
    """Fraction of gaze samples inside [t1, t2) that are on screen.

    Uniformly sampled gaze is treated as a time proxy.
    """
    t1, t2 = window
    if not t2 > t1:
        raise EmptyWindow(f"window [{t1}, {t2}) is empty")
    stream = gaze if isinstance(gaze, GazeStream) else GazeStream.from_samples(gaze)
    lo = np.searchsorted(stream.t, t1, side="left")
    hi = np.searchsorted(stream.t, t2, side="left")
    if hi == lo:
        raise EmptyWindow(f"no gaze samples in [{t1}, {t2})")
    return float(np.count_nonzero(stream.on_screen[lo:hi]) / (hi - lo))


def classify(indicator: Indicator, value: float, engagement_threshold: float = 1.0) -> SriClass:
    """Map an indicator value to its discrete class.

    Engagement splits at `engagement_threshold` (the published split point is
    1.0, but aggregated engagement may live on another scale, so it is
    configurable). Emotion boundaries are -6/+6 with the boundary values
    assigned to neutral so the three ranges partition the reals; EMR splits
    at 0.45 and 0.6.
    """
    indicator = Indicator(indicator)
    if not math.isfinite(value):
        raise NonFiniteValue(f"{indicator.value} value {value!r} is not finite")
    if indicator is Indicator.ENGAGEMENT:
        label = 0 if value < engagement_threshold else 1
    elif indicator is Indicator.EMOTION:
        if value < -6.0:
            label = 0
        elif value <= 6.0:
            label = 1
        else:
            label = 2
    else:
        if value < 0.45:
            label = 0
        elif value < 0.6:
            label = 1
        else:
            label = 2
    return SriClass(indicator, label, CLASS_NAMES[indicator][label])


# ---------------------------------------------------------------------------
# Array-backed streams and their CSV format


@dataclass
class EegStream:
    """Column arrays for one participant's band-power stream."""

    t: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        cols = [self.t, self.a1, self.a2, self.a3, self.b1, self.b2, self.b3]
        n = len(self.t)
        if any(len(c) != n for c in cols):
            raise FormatError("EEG columns have unequal lengths")
        if n and np.any(np.diff(self.t) <= 0):
            raise FormatError("EEG timestamps must be strictly increasing")
        for name in ("a1", "a2", "a3", "b1", "b2", "b3"):
            if n and np.any(getattr(self, name) < 0):
                raise FormatError(f"negative band power in column {name}")

    def __len__(self) -> int:
        return len(self.t)

    def samples(self) -> list[BandPowerSample]:
        return [
            BandPowerSample(*(float(getattr(self, f)[i]) for f in
                              ("t", "a1", "a2", "a3", "b1", "b2", "b3")))
            for i in range(len(self))
        ]


@dataclass
class GazeStream:
    t: np.ndarray
    on_screen: np.ndarray

    def __post_init__(self):
        if len(self.t) != len(self.on_screen):
            raise FormatError("gaze columns have unequal lengths")
        if len(self.t) and np.any(np.diff(self.t) <= 0):
            raise FormatError("gaze timestamps must be strictly increasing")
        self.on_screen = np.asarray(self.on_screen, dtype=bool)

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_samples(cls, samples: Iterable[GazeSample]) -> "GazeStream":
        items = list(samples)
        return cls(
            t=np.array([s.t for s in items], dtype=np.float64),
            on_screen=np.array([s.on_screen for s in items], dtype=bool),
        )


def engagement_series(stream: EegStream) -> np.ndarray:
    denom = stream.a2 + stream.a3 + stream.b2 + stream.b3
    bad = np.nonzero(denom == 0)[0]
    if bad.size:
        raise ZeroDenominator(f"a2+a3+b2+b3 is zero at sample {bad[0]}")
    return (stream.b2 + stream.b3) / denom


def emotion_series(stream: EegStream) -> np.ndarray:
    denom = stream.a2 + stream.a3
    bad = np.nonzero(denom == 0)[0]
    if bad.size:
        raise ZeroDenominator(f"a2+a3 is zero at sample {bad[0]}")
    return (stream.a3 - stream.a2) / denom * 100.0


EEG_HEADER = ["t", "a1", "a2", "a3", "b1", "b2", "b3"]
GAZE_HEADER = ["t", "on_screen"]


def _read_csv(path, expected_header: Sequence[str]) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if header != list(expected_header):
            raise FormatError(f"{path}: expected header {','.join(expected_header)}")
        return [row for row in reader if row]


def load_eeg_csv(path) -> EegStream:
    rows = _read_csv(path, EEG_HEADER)
    try:
        data = np.array([[float(x) for x in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        data = data.reshape(0, 7)
    if data.shape[1] != 7:
        raise FormatError(f"{path}: expected 7 columns")
    return EegStream(*(data[:, i] for i in range(7)))


def save_eeg_csv(path, stream: EegStream) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(EEG_HEADER)
        for i in range(len(stream)):
            w.writerow([repr(float(getattr(stream, c)[i])) for c in EEG_HEADER])


def load_gaze_csv(path) -> GazeStream:
    rows = _read_csv(path, GAZE_HEADER)
    try:
        t = np.array([float(r[0]) for r in rows], dtype=np.float64)
        on = np.array([int(r[1]) for r in rows], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if np.any((on != 0) & (on != 1)):
        raise FormatError(f"{path}: on_screen must be 0 or 1")
    return GazeStream(t=t, on_screen=on.astype(bool))


def save_gaze_csv(path, stream: GazeStream) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(GAZE_HEADER)
        for i in range(len(stream)):
            w.writerow([repr(float(stream.t[i])), int(stream.on_screen[i])])
