"""Demographic grouping and group-level indicator aggregation.

Participants are partitioned into same-gender groups of 5-20 with an age
span of at most 5 years. Group values are grand means over the group's
in-window samples; with ragged per-participant sample counts the mean is
taken per participant first, then across participants, so no single
participant dominates (both orders coincide when counts are equal).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FormatError, MissingParticipantData
from .signals import (
    CLASS_NAMES,
    INDICATOR_ORDER,
    EegStream,
    GazeStream,
    Indicator,
    SriClass,
    classify,
    emotion_series,
    engagement_series,
)

GENDERS = ("female", "male")


@dataclass(frozen=True)
class AudienceProfile:
    participant_id: str
    gender: str
    age: int

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise FormatError(f"unknown gender {self.gender!r}")
        if self.age < 0:
            raise FormatError(f"negative age for {self.participant_id}")


@dataclass(frozen=True)
class SceneWindow:
    video_id: str
    scene_index: int
    t1: float
    t2: float

    def __post_init__(self):
        if not self.t1 < self.t2:
            raise FormatError(
                f"scene {self.scene_index} of {self.video_id}: t1 must be < t2"
            )


@dataclass(frozen=True)
class Group:
    group_id: str
    gender: str
    participant_ids: tuple[str, ...]
    min_age: int
    max_age: int


@dataclass
class GroupingResult:
    groups: list[Group]
    unassigned: list[str]


@dataclass(frozen=True)
class AggregatedSri:
    video_id: str
    scene_index: int
    group_id: str
    indicator: Indicator
    value: float
    class_label: SriClass

    def to_json_obj(self) -> dict:
        return {
            "video_id": self.video_id,
            "scene_index": self.scene_index,
            "group_id": self.group_id,
            "indicator": self.indicator.value,
            "value": self.value,
            "label": self.class_label.label,
            "class_name": self.class_label.name,
        }


def group_by_demographics(
    profiles: Sequence[AudienceProfile],
    min_size: int = 5,
    max_size: int = 20,
    max_age_span: int = 5,
) -> GroupingResult:
    """Greedy single-pass partition per gender over age-sorted participants.

    Opens a group at the youngest unassigned participant and extends while
    the age span stays within `max_age_span` and the size below `max_size`.
    Groups smaller than `min_size` land in `unassigned`.
    """
    if not profiles:
        raise FormatError("no profiles to group")
    groups: list[Group] = []
    unassigned: list[str] = []
    for gender in GENDERS:
        members = sorted(
            (p for p in profiles if p.gender == gender),
            key=lambda p: (p.age, p.participant_id),
        )
        current: list[AudienceProfile] = []
        seq = 0

        def close(batch: list[AudienceProfile]):
            nonlocal seq
            if len(batch) >= min_size:
                groups.append(
                    Group(
                        group_id=f"{gender}-{seq:03d}",
                        gender=gender,
                        participant_ids=tuple(p.participant_id for p in batch),
                        min_age=batch[0].age,
                        max_age=batch[-1].age,
                    )
                )
                seq += 1
            else:
                unassigned.extend(p.participant_id for p in batch)

        for p in members:
            if current and (p.age - current[0].age > max_age_span or len(current) >= max_size):
                close(current)
                current = []
            current.append(p)
        if current:
            close(current)
    return GroupingResult(groups=groups, unassigned=unassigned)


def aggregate(
    values: Mapping[str, tuple[np.ndarray, np.ndarray]],
    group: Group,
    window: tuple[float, float],
) -> float:
    """Two-level mean of `values[pid] = (t, x)` over the group in [t1, t2)."""
    t1, t2 = window
    participant_means = []
    for pid in group.participant_ids:
        if pid not in values:
            raise MissingParticipantData(f"participant {pid} has no data")
        t, x = values[pid]
        lo = np.searchsorted(t, t1, side="left")
        hi = np.searchsorted(t, t2, side="left")
        if hi == lo:
            raise MissingParticipantData(
                f"participant {pid} has no samples in [{t1}, {t2})"
            )
        participant_means.append(float(np.mean(x[lo:hi])))
    return float(np.mean(participant_means))


@dataclass
class CohortData:
    """Profiles plus per (participant, video) signal streams."""

    profiles: list[AudienceProfile]
    eeg: dict[tuple[str, str], EegStream]
    gaze: dict[tuple[str, str], GazeStream]


def emit_records(
    cohort: CohortData,
    scenes: Mapping[str, Sequence[SceneWindow]],
    grouping: GroupingResult | None = None,
    engagement_threshold: float = 1.0,
    video_ids: Sequence[str] | None = None,
) -> list[AggregatedSri]:
    """One record per (group x video x scene x indicator), deterministically ordered."""
    if grouping is None:
        grouping = group_by_demographics(cohort.profiles)
    if video_ids is None:
        video_ids = sorted(scenes)

    records: list[AggregatedSri] = []
    for video_id in video_ids:
        # Per-participant series for this video, computed once.
        en: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        em: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        emr: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for p in cohort.profiles:
            key = (p.participant_id, video_id)
            if key in cohort.eeg:
                stream = cohort.eeg[key]
                en[p.participant_id] = (stream.t, engagement_series(stream))
                em[p.participant_id] = (stream.t, emotion_series(stream))
            if key in cohort.gaze:
                g = cohort.gaze[key]
                emr[p.participant_id] = (g.t, g.on_screen.astype(np.float64))
        series = {
            Indicator.ENGAGEMENT: en,
            Indicator.EMOTION: em,
            Indicator.EMR: emr,
        }
        for window in sorted(scenes[video_id], key=lambda s: s.scene_index):
            for group in sorted(grouping.groups, key=lambda g: g.group_id):
                for indicator in INDICATOR_ORDER:
                    value = aggregate(series[indicator], group, (window.t1, window.t2))
                    label = classify(indicator, value, engagement_threshold)
                    records.append(
                        AggregatedSri(
                            video_id=video_id,
                            scene_index=window.scene_index,
                            group_id=group.group_id,
                            indicator=indicator,
                            value=value,
                            class_label=label,
                        )
                    )
    return records


# ---------------------------------------------------------------------------
# File formats

PROFILE_HEADER = ["participant_id", "gender", "age"]


def load_profiles_csv(path) -> list[AudienceProfile]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != PROFILE_HEADER:
            raise FormatError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
        out = []
        seen = set()
        for row in reader:
            if not row:
                continue
            try:
                profile = AudienceProfile(row[0], row[1], int(row[2]))
            except (IndexError, ValueError) as exc:
                raise FormatError(f"{path}: bad row {row!r}") from exc
            if profile.participant_id in seen:
                raise FormatError(f"{path}: duplicate participant {profile.participant_id}")
            seen.add(profile.participant_id)
            out.append(profile)
    if not out:
        raise FormatError(f"{path}: no profiles")
    return out


def save_profiles_csv(path, profiles: Sequence[AudienceProfile]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(PROFILE_HEADER)
        for p in profiles:
            w.writerow([p.participant_id, p.gender, p.age])


def save_records_jsonl(path, records: Sequence[AggregatedSri]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for r in records:
            f.write(json.dumps(r.to_json_obj(), sort_keys=True))
            f.write("\n")


def load_records_jsonl(path) -> list[AggregatedSri]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                indicator = Indicator(obj["indicator"])
                records.append(
                    AggregatedSri(
                        video_id=obj["video_id"],
                        scene_index=int(obj["scene_index"]),
                        group_id=obj["group_id"],
                        indicator=indicator,
                        value=float(obj["value"]),
                        class_label=SriClass(
                            indicator, int(obj["label"]),
                            CLASS_NAMES[indicator][int(obj["label"])],
                        ),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return records


def windows_from_json(path) -> tuple[str, list[SceneWindow]]:
    """Read `{"video_id": ..., "windows": [{"scene_index", "t1", "t2"}, ...]}`."""
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    try:
        video_id = obj["video_id"]
        windows = [
            SceneWindow(video_id, int(w["scene_index"]), float(w["t1"]), float(w["t2"]))
            for w in obj["windows"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return video_id, windows
