"""Daily behavioral featurization: raw events -> fixed 37-feature vectors.

The feature dictionary (order and names) is frozen; see docs/data_dictionary.md.
All operations are pure functions over immutable inputs and are trivially
parallel across participant-days.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence

import numpy as np

from .events import (
    ActivitySample,
    AmbientSoundSample,
    ACTIVITY_TYPES,
    CommunicationEvent,
    DistressLevel,
    K10Response,
    LightSample,
    LocationFix,
    ScreenEvent,
    SensorEvent,
    ValidationError,
    categorize_k10,
    day_bounds_ms,
    score_k10,
)

EARTH_RADIUS_KM = 6371.0088

ACTIVITY_NOMINAL_PERIOD_S = 60.0  # design sampling period; also the tail credit
LOUD_THRESHOLD_DB = 50.0  # strictly greater-than counts as loud

STAT_NAMES = ("min", "max", "mean", "std", "p25", "p50", "p75")

COMM_FEATURES = (
    "comm_calls_in",
    "comm_calls_out",
    "comm_call_duration_s",
    "comm_texts_in",
    "comm_texts_out",
    "comm_unique_contacts",
)
LOCATION_FEATURES = ("loc_total_km",)
SOUND_FEATURES = (
    tuple(f"snd_db_{s}" for s in STAT_NAMES)
    + tuple(f"snd_hz_{s}" for s in STAT_NAMES)
    + ("snd_frac_above_50db",)
)
ACTIVITY_FEATURES = ("act_transitions",) + tuple(f"act_dur_{t}_s" for t in ACTIVITY_TYPES)
LIGHT_FEATURES = tuple(f"light_{s}" for s in STAT_NAMES)
SCREEN_FEATURES = ("screen_on_s",)

# Frozen dictionary order: communication, location, sound, activity, light, screen.
FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "communication": COMM_FEATURES,
    "location": LOCATION_FEATURES,
    "sound": SOUND_FEATURES,
    "activity": ACTIVITY_FEATURES,
    "light": LIGHT_FEATURES,
    "screen": SCREEN_FEATURES,
}
FEATURE_NAMES: tuple[str, ...] = sum(FEATURE_GROUPS.values(), ())
assert len(FEATURE_NAMES) == 37


@dataclass(frozen=True)
class SummaryStats:
    """Order statistics of one numeric channel over a day."""

    min: float
    max: float
    mean: float
    std: float
    p25: float
    p50: float
    p75: float

    def prefixed(self, prefix: str) -> dict[str, float]:
        return {
            f"{prefix}{name}": getattr(self, name) for name in STAT_NAMES
        }


def summary_stats(values: Sequence[float]) -> SummaryStats:
    """Min/max/mean/population-std and linearly interpolated quartiles.

    Percentile q is read at rank q*(n-1) between order statistics (the
    "inclusive" convention); std divides by n, not n-1.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("values", "must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("values", "must be finite")
    p25, p50, p75 = np.percentile(arr, [25, 50, 75])
    return SummaryStats(
        min=float(arr.min()),
        max=float(arr.max()),
        mean=float(arr.mean()),
        std=float(arr.std()),
        p25=float(p25),
        p50=float(p50),
        p75=float(p75),
    )


def haversine_km(p1: tuple[float, float], p2: tuple[float, float]) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    lat1, lon1 = p1
    lat2, lon2 = p2
    for name, lat in (("p1.lat", lat1), ("p2.lat", lat2)):
        if not -90 <= lat <= 90:
            raise ValidationError(name, f"latitude {lat} outside [-90, 90]")
    for name, lon in (("p1.lon", lon1), ("p2.lon", lon2)):
        if not -180 <= lon <= 180:
            raise ValidationError(name, f"longitude {lon} outside [-180, 180]")
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return EARTH_RADIUS_KM * 2 * math.asin(min(1.0, math.sqrt(a)))


def total_distance_km(fixes: Sequence[tuple[int, LocationFix]]) -> float:
    """Sum of consecutive great-circle hops over a time-ordered (at_ms, fix) trace."""
    last_ms = None
    for i, (at_ms, _fix) in enumerate(fixes):
        if last_ms is not None and at_ms < last_ms:
            raise ValidationError(f"fixes[{i}]", "fixes must be time-ordered")
        last_ms = at_ms
    total = 0.0
    for (_, a), (_, b) in zip(fixes, fixes[1:]):
        total += haversine_km((a.lat, a.lon), (b.lat, b.lon))
    return total


def communication_features(events: Sequence[CommunicationEvent]) -> dict[str, float]:
    """Counts, summed call time, and distinct one-way contact tokens."""
    calls_in = calls_out = texts_in = texts_out = 0
    duration = 0.0
    contacts = set()
    for ev in events:
        contacts.add(ev.contact_token)
        if ev.kind == "call_in":
            calls_in += 1
            duration += ev.duration_s
        elif ev.kind == "call_out":
            calls_out += 1
            duration += ev.duration_s
        elif ev.kind == "text_in":
            texts_in += 1
        else:
            texts_out += 1
    return {
        "comm_calls_in": float(calls_in),
        "comm_calls_out": float(calls_out),
        "comm_call_duration_s": float(duration),
        "comm_texts_in": float(texts_in),
        "comm_texts_out": float(texts_out),
        "comm_unique_contacts": float(len(contacts)),
    }


def activity_features(samples: Sequence[tuple[int, ActivitySample]]) -> dict[str, float]:
    """Transition count plus per-type dwell time.

    Each sample holds its state until the next sample; the last sample gets the
    nominal 60 s period, so durations total (span between first and last) + 60 s.
    """
    feats = {"act_transitions": 0.0}
    for t in ACTIVITY_TYPES:
        feats[f"act_dur_{t}_s"] = 0.0
    if not samples:
        return feats
    last_ms = None
    for i, (at_ms, _s) in enumerate(samples):
        if last_ms is not None and at_ms < last_ms:
            raise ValidationError(f"samples[{i}]", "samples must be time-ordered")
        last_ms = at_ms
    transitions = 0
    for i, (at_ms, sample) in enumerate(samples):
        if i + 1 < len(samples):
            dwell_s = (samples[i + 1][0] - at_ms) / 1000.0
            if samples[i + 1][1].activity != sample.activity:
                transitions += 1
        else:
            dwell_s = ACTIVITY_NOMINAL_PERIOD_S
        feats[f"act_dur_{sample.activity}_s"] += dwell_s
    feats["act_transitions"] = float(transitions)
    return feats


def sound_features(samples: Sequence[AmbientSoundSample]) -> dict[str, float]:
    """Decibel and dominant-frequency summaries plus the loud-sample fraction."""
    if not samples:
        return {}
    db = [s.decibels for s in samples]
    hz = [s.dominant_frequency_hz for s in samples]
    feats = summary_stats(db).prefixed("snd_db_")
    feats.update(summary_stats(hz).prefixed("snd_hz_"))
    loud = sum(1 for v in db if v > LOUD_THRESHOLD_DB)
    feats["snd_frac_above_50db"] = loud / len(db)
    return feats


def light_features(samples: Sequence[LightSample]) -> dict[str, float]:
    if not samples:
        return {}
    return summary_stats([s.lux for s in samples]).prefixed("light_")


def screen_time_s(
    events: Sequence[tuple[int, ScreenEvent]], day_bounds: tuple[int, int]
) -> float:
    """Total screen-on seconds intersected with the [start, end) day window.

    States must alternate. A leading `off` is counted as on-since-day-start; an
    `on` with no following `off` is closed at day end.
    """
    start_ms, end_ms = day_bounds
    intervals: list[tuple[int, int]] = []
    open_ms = None
    prev_state = None
    for i, (at_ms, ev) in enumerate(events):
        if ev.state == prev_state:
            raise ValidationError(f"events[{i}]", "screen states must alternate on/off")
        prev_state = ev.state
        if ev.state == "on":
            open_ms = at_ms
        else:
            intervals.append((start_ms if open_ms is None else open_ms, at_ms))
            open_ms = None
    if open_ms is not None:
        intervals.append((open_ms, end_ms))
    total_ms = 0
    for lo, hi in intervals:
        total_ms += max(0, min(hi, end_ms) - max(lo, start_ms))
    return total_ms / 1000.0


@dataclass(frozen=True)
class DailyFeatureVector:
    """One participant-day in frozen dictionary order; absent groups land in `missing`."""

    participant: str
    local_day: date
    features: dict[str, float]  # present features only, in dictionary order
    missing: tuple[str, ...]  # absent features, in dictionary order


def featurize_day(
    events: Iterable[SensorEvent],
    *,
    participant: str,
    local_day: date,
    tz_offset_minutes: int,
) -> DailyFeatureVector:
    """Aggregate one participant-day of events into the 37-feature vector.

    Groups with no events that day are recorded in `missing` rather than
    zero-filled, so downstream imputation can distinguish absent sensors from
    genuinely quiet days.
    """
    ordered = sorted(events, key=lambda e: e.at.at_ms)
    comm: list[CommunicationEvent] = []
    fixes: list[tuple[int, LocationFix]] = []
    sound: list[AmbientSoundSample] = []
    activity: list[tuple[int, ActivitySample]] = []
    light: list[LightSample] = []
    screen: list[tuple[int, ScreenEvent]] = []
    for ev in ordered:
        if ev.participant != participant:
            raise ValidationError(
                "participant", f"event for {ev.participant!r} mixed into {participant!r}"
            )
        if ev.at.local_day() != local_day:
            raise ValidationError(
                "at_ms", f"event on {ev.at.local_day()} mixed into {local_day}"
            )
        p = ev.payload
        if isinstance(p, CommunicationEvent):
            comm.append(p)
        elif isinstance(p, LocationFix):
            fixes.append((ev.at.at_ms, p))
        elif isinstance(p, AmbientSoundSample):
            sound.append(p)
        elif isinstance(p, ActivitySample):
            activity.append((ev.at.at_ms, p))
        elif isinstance(p, LightSample):
            light.append(p)
        elif isinstance(p, ScreenEvent):
            screen.append((ev.at.at_ms, p))

    present: dict[str, float] = {}
    if comm:
        present.update(communication_features(comm))
    if fixes:
        present["loc_total_km"] = total_distance_km(fixes)
    if sound:
        present.update(sound_features(sound))
    if activity:
        present.update(activity_features(activity))
    if light:
        present.update(light_features(light))
    if screen:
        bounds = day_bounds_ms(local_day, tz_offset_minutes)
        present["screen_on_s"] = screen_time_s(screen, bounds)

    features = {name: present[name] for name in FEATURE_NAMES if name in present}
    missing = tuple(name for name in FEATURE_NAMES if name not in present)
    return DailyFeatureVector(
        participant=participant, local_day=local_day, features=features, missing=missing
    )


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix joined to questionnaire labels, with per-row provenance."""

    feature_names: tuple[str, ...]
    rows: np.ndarray  # (n_samples, n_features) float64
    k10_scores: np.ndarray  # (n_samples,) int64
    levels: tuple[DistressLevel, ...]
    provenance: tuple[tuple[str, date], ...]

    @classmethod
    def build(cls, feature_names, rows, k10_scores, levels, provenance) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=float).reshape(len(levels), len(feature_names))
        k10_scores = np.asarray(k10_scores, dtype=np.int64)
        ds = cls(
            feature_names=tuple(feature_names),
            rows=rows,
            k10_scores=k10_scores,
            levels=tuple(levels),
            provenance=tuple(provenance),
        )
        ds.check()
        return ds

    @property
    def n_samples(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def check(self) -> None:
        n = self.rows.shape[0]
        if not (
            len(self.k10_scores) == n == len(self.levels) == len(self.provenance)
        ):
            raise ValidationError("rows", "row/label/provenance lengths disagree")
        if self.rows.shape[1] != len(self.feature_names):
            raise ValidationError("rows", "row width does not match feature names")
        if n and not np.all(np.isfinite(self.rows)):
            raise ValidationError("rows", "matrix contains non-finite values")
        for i, (score, level) in enumerate(zip(self.k10_scores, self.levels)):
            if categorize_k10(int(score)) != level:
                raise ValidationError(f"levels[{i}]", "level does not match its score")

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=int)
        return LabeledDataset(
            feature_names=self.feature_names,
            rows=self.rows[indices],
            k10_scores=self.k10_scores[indices],
            levels=tuple(self.levels[i] for i in indices),
            provenance=tuple(self.provenance[i] for i in indices),
        )

    def select_features(self, names: Sequence[str]) -> "LabeledDataset":
        index = {name: i for i, name in enumerate(self.feature_names)}
        cols = [index[name] for name in names]
        return LabeledDataset(
            feature_names=tuple(names),
            rows=self.rows[:, cols],
            k10_scores=self.k10_scores,
            levels=self.levels,
            provenance=self.provenance,
        )


def assemble_dataset(
    vectors: Iterable[DailyFeatureVector], emas: Iterable[K10Response]
) -> LabeledDataset:
    """Join already-featurized days to questionnaire labels.

    A (participant, day) becomes a row iff it has a response and at least one
    feature present. Missing features are imputed with that participant's mean
    for the feature over their included days, falling back to 0 when the
    participant never reports the feature. Rows are ordered by (participant,
    day). For duplicate responses on one day, the last one given wins.
    """
    labels: dict[tuple[str, date], K10Response] = {}
    for ema in emas:
        labels[(ema.participant, ema.at.local_day())] = ema

    by_key = {(v.participant, v.local_day): v for v in vectors}
    kept_keys = sorted(key for key, v in by_key.items() if key in labels and v.features)

    n, d = len(kept_keys), len(FEATURE_NAMES)
    matrix = np.full((n, d), np.nan)
    for r, key in enumerate(kept_keys):
        vec = by_key[key]
        for c, name in enumerate(FEATURE_NAMES):
            if name in vec.features:
                matrix[r, c] = vec.features[name]

    # participant-mean imputation, then zero for never-observed features
    participants = [pid for pid, _ in kept_keys]
    for pid in dict.fromkeys(participants):
        rows = [i for i, p in enumerate(participants) if p == pid]
        block = matrix[rows]
        observed = ~np.isnan(block)
        with np.errstate(invalid="ignore"):
            col_means = np.where(
                observed.any(axis=0),
                np.nansum(np.where(observed, block, 0.0), axis=0)
                / np.maximum(observed.sum(axis=0), 1),
                0.0,
            )
        fill = np.where(np.isnan(block), col_means[None, :], block)
        matrix[rows] = fill

    scores = [score_k10(labels[key].items) for key in kept_keys]
    levels = tuple(categorize_k10(s) for s in scores)
    return LabeledDataset.build(
        feature_names=FEATURE_NAMES,
        rows=matrix,
        k10_scores=scores,
        levels=levels,
        provenance=tuple(kept_keys),
    )


def build_dataset(
    events: Iterable[SensorEvent], emas: Iterable[K10Response]
) -> LabeledDataset:
    """Featurize raw events per participant-day and join to labels.

    See assemble_dataset for the join, imputation, and ordering rules.
    """
    by_day: dict[tuple[str, date], list[SensorEvent]] = {}
    tz_by_participant: dict[str, int] = {}
    for ev in events:
        key = (ev.participant, ev.at.local_day())
        by_day.setdefault(key, []).append(ev)
        tz_by_participant.setdefault(ev.participant, ev.at.tz_offset_minutes)

    vectors = [
        featurize_day(
            evs, participant=pid, local_day=day, tz_offset_minutes=tz_by_participant[pid]
        )
        for (pid, day), evs in by_day.items()
    ]
    return assemble_dataset(vectors, emas)
