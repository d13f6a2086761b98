"""Synthetic cohort generator with a tunable planted signal.

Each participant has a latent daily distress level following a bounded random
walk. Channel means shift by sensitivity * signal_strength * (latent - 30)/20
* span, so signal_strength 0 makes every channel independent of the latent
level. Questionnaire responses are a noisy rounding of the latent level.

Determinism: every random draw comes from a stream seeded by
(master seed, participant index, stream tag[, day index]), so any subset of
participants or days can be generated independently, in any order, with
identical results.

Effect directions (lower mobility, fewer contacts, more screen time, lower
light, quieter surroundings, more stillness under higher distress) are
simulator conventions chosen to mirror the qualitative literature; magnitudes
are free parameters, documented here and frozen by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from typing import Iterator

import numpy as np

from .events import (
    ActivitySample,
    AmbientSoundSample,
    ACTIVITY_TYPES,
    CommunicationEvent,
    K10Response,
    K10_MAX,
    K10_MIN,
    LightSample,
    LocationFix,
    ScreenEvent,
    SensorEvent,
    Timestamp,
    ValidationError,
    anonymize_contact,
    day_bounds_ms,
)

_TAG_PROFILE, _TAG_WALK, _TAG_DAY = 0, 1, 2

_DAY_S = 86_400
_MERIDIAN_KM_PER_DEG = 111.19492664455873  # pi * R / 180

WALK_STEP_STD = 3.0
BASELINE_RANGE = (12.0, 30.0)
K10_NOISE_STD = 1.2

TZ_CHOICES = (-480, -420, -300, -240, -180, 0, 60, 120, 330, 480, 540, 600)

# Per-channel planted effect: baseline range across participants, signed
# sensitivity range (magnitude drawn per profile), full-signal span, and the
# day-to-day noise std around the shifted mean.
_CHANNELS: dict[str, dict[str, tuple[float, float] | float]] = {
    "calls_in": {"base": (2.5, 4.0), "sens": (-0.9, -0.6), "span": 3.0, "noise": 0.45},
    "calls_out": {"base": (2.5, 4.0), "sens": (-0.9, -0.6), "span": 3.0, "noise": 0.45},
    "texts_in": {"base": (8.0, 12.0), "sens": (-0.9, -0.6), "span": 8.0, "noise": 1.2},
    "texts_out": {"base": (8.0, 12.0), "sens": (-0.9, -0.6), "span": 8.0, "noise": 1.2},
    "contacts": {"base": (10.0, 14.0), "sens": (-0.8, -0.5), "span": 8.0, "noise": 1.2},
    "distance_km": {"base": (12.0, 18.0), "sens": (-0.9, -0.6), "span": 14.0, "noise": 2.1},
    "screen_h": {"base": (3.5, 5.5), "sens": (0.6, 0.9), "span": 4.5, "noise": 0.65},
    "sound_db": {"base": (47.0, 51.0), "sens": (-0.9, -0.6), "span": 10.0, "noise": 1.5},
    "lux": {"base": (280.0, 360.0), "sens": (-0.8, -0.5), "span": 240.0, "noise": 36.0},
    "still_frac": {"base": (0.55, 0.65), "sens": (0.5, 0.8), "span": 0.3, "noise": 0.045},
}

CHANNEL_NAMES = tuple(_CHANNELS)

# share of non-still time per remaining activity type
_NON_STILL_MIX = {
    "walking": 0.35,
    "running": 0.10,
    "in_vehicle": 0.25,
    "on_bicycle": 0.10,
    "unknown": 0.20,
}

ACTIVITY_SWITCH_PROB = 0.02  # per sample; deliberately independent of distress
CONTACT_POOL = 30
CALL_DURATION_LOG_MEAN = math.log(120.0)
CALL_DURATION_LOG_STD = 0.8
SOUND_SAMPLE_STD_DB = 6.0
EMA_LOCAL_MINUTE = 20 * 60 + 30  # submitted around 20:30 local


@dataclass(frozen=True)
class SimConfig:
    n_participants: int = 10
    n_days: int = 30
    signal_strength: float = 1.0
    seed: int = 0
    start_day: date = date(2026, 1, 5)
    light_period_s: int = 60  # field cadence is 6 s; thinned by default for desk scale
    sound_period_s: int = 300
    activity_period_s: int = 60
    location_period_s: int = 300
    participant_ids: tuple[str, ...] | None = None  # e.g. server-assigned ids

    def validate(self) -> "SimConfig":
        if self.n_participants < 1:
            raise ValidationError("n_participants", "must be >= 1")
        if self.n_days < 1:
            raise ValidationError("n_days", "must be >= 1")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValidationError("signal_strength", "must be in [0, 1]")
        for name in ("light_period_s", "sound_period_s", "activity_period_s", "location_period_s"):
            if getattr(self, name) < 1:
                raise ValidationError(name, "must be >= 1 second")
        if self.participant_ids is not None and len(self.participant_ids) != self.n_participants:
            raise ValidationError("participant_ids", "must match n_participants")
        return self

    def to_dict(self) -> dict:
        return {
            "n_participants": self.n_participants,
            "n_days": self.n_days,
            "signal_strength": self.signal_strength,
            "seed": self.seed,
            "start_day": self.start_day.isoformat(),
            "light_period_s": self.light_period_s,
            "sound_period_s": self.sound_period_s,
            "activity_period_s": self.activity_period_s,
            "location_period_s": self.location_period_s,
        }


@dataclass(frozen=True)
class ParticipantProfile:
    id: str
    index: int
    tz_offset_minutes: int
    salt: bytes
    baseline_latent: float
    baselines: dict[str, float]
    sensitivities: dict[str, float]  # signed, in [-1, 1]
    noise_scales: dict[str, float]
    home_lat: float
    home_lon: float
    activity_mix: dict[str, float]  # non-still shares, sums to 1


def default_participant_id(index: int) -> str:
    return f"sim-{index:04d}"


def build_profile(config: SimConfig, index: int) -> ParticipantProfile:
    rng = np.random.default_rng([config.seed, index, _TAG_PROFILE])
    baselines, sensitivities, noise_scales = {}, {}, {}
    for name, ch in _CHANNELS.items():
        lo, hi = ch["base"]
        baselines[name] = float(rng.uniform(lo, hi))
        slo, shi = ch["sens"]
        sensitivities[name] = float(rng.uniform(slo, shi))
        noise_scales[name] = float(ch["noise"] * rng.uniform(0.8, 1.2))
    mix = {t: s * rng.uniform(0.7, 1.3) for t, s in _NON_STILL_MIX.items()}
    total = sum(mix.values())
    pid = (
        config.participant_ids[index]
        if config.participant_ids is not None
        else default_participant_id(index)
    )
    return ParticipantProfile(
        id=pid,
        index=index,
        tz_offset_minutes=int(rng.choice(TZ_CHOICES)),
        salt=rng.bytes(16),
        baseline_latent=float(rng.uniform(*BASELINE_RANGE)),
        baselines=baselines,
        sensitivities=sensitivities,
        noise_scales=noise_scales,
        home_lat=float(rng.uniform(-45.0, 45.0)),
        home_lon=float(rng.uniform(-170.0, 170.0)),
        activity_mix={t: s / total for t, s in mix.items()},
    )


def latent_distress_walk(profile: ParticipantProfile, n_days: int, seed: int) -> np.ndarray:
    """Reflected random walk in [10, 50] starting at the profile baseline."""
    if n_days < 1:
        raise ValidationError("n_days", "must be >= 1")
    rng = np.random.default_rng([seed, profile.index, _TAG_WALK])
    out = np.empty(n_days)
    level = profile.baseline_latent
    for i in range(n_days):
        out[i] = level
        level += rng.normal(0.0, WALK_STEP_STD)
        while not K10_MIN <= level <= K10_MAX:
            if level < K10_MIN:
                level = 2 * K10_MIN - level
            else:
                level = 2 * K10_MAX - level
    return out


def _channel_mean(profile: ParticipantProfile, name: str, latent: float, signal: float,
                  rng: np.random.Generator) -> float:
    shift = (
        profile.sensitivities[name] * signal * (latent - 30.0) / 20.0 * _CHANNELS[name]["span"]
    )
    return profile.baselines[name] + shift + rng.normal(0.0, profile.noise_scales[name])


def _k10_items(latent: float, rng: np.random.Generator) -> tuple[int, ...]:
    """Ten 1-5 ratings whose sum is a noisy rounding of the latent level."""
    target = int(np.clip(round(latent + rng.normal(0.0, K10_NOISE_STD)), K10_MIN, K10_MAX))
    extra = target - K10_MIN
    base, rem = divmod(extra, 10)
    bumped = rng.permutation(10) < rem
    return tuple(1 + base + (1 if bumped[i] else 0) for i in range(10))


def simulate_day(
    profile: ParticipantProfile,
    latent: float,
    local_day: date,
    *,
    config: SimConfig,
    day_index: int,
) -> tuple[list[SensorEvent], K10Response]:
    """One participant-day of raw events plus the day's questionnaire response."""
    if not K10_MIN <= latent <= K10_MAX:
        raise ValidationError("latent", f"latent {latent} outside [10, 50]")
    rng = np.random.default_rng([config.seed, profile.index, _TAG_DAY, day_index])
    signal = config.signal_strength
    start_ms, end_ms = day_bounds_ms(local_day, profile.tz_offset_minutes)
    tz = profile.tz_offset_minutes

    def ts(at_ms: int) -> Timestamp:
        return Timestamp(at_ms=int(at_ms), tz_offset_minutes=tz)

    def ev(at_ms: int, payload) -> SensorEvent:
        return SensorEvent(participant=profile.id, at=ts(at_ms), payload=payload)

    events: list[SensorEvent] = []

    # --- communication: Poisson counts, shrinking active contact circle
    n_contacts = int(np.clip(round(_channel_mean(profile, "contacts", latent, signal, rng)),
                             1, CONTACT_POOL))
    def comm_events(kind: str, channel: str, durations: bool) -> None:
        lam = max(0.05, _channel_mean(profile, channel, latent, signal, rng))
        for _ in range(rng.poisson(lam)):
            contact = int(rng.integers(0, n_contacts))
            token = anonymize_contact(f"contact-{contact}", profile.salt)
            duration = (
                max(1.0, float(np.round(rng.lognormal(CALL_DURATION_LOG_MEAN,
                                                      CALL_DURATION_LOG_STD), 1)))
                if durations
                else 0.0
            )
            at = int(rng.integers(start_ms, end_ms))
            events.append(ev(at, CommunicationEvent(kind=kind, duration_s=duration,
                                                    contact_token=token)))

    comm_events("call_in", "calls_in", durations=True)
    comm_events("call_out", "calls_out", durations=True)
    comm_events("text_in", "texts_in", durations=False)
    comm_events("text_out", "texts_out", durations=False)

    # --- location: meridian zigzag around home covering the day's target distance
    target_km = max(0.2, _channel_mean(profile, "distance_km", latent, signal, rng))
    n_fixes = _DAY_S // config.location_period_s
    hop_deg = target_km / max(1, n_fixes - 1) / _MERIDIAN_KM_PER_DEG
    phase = int(rng.integers(0, config.location_period_s * 1000))
    for i in range(n_fixes):
        lat = profile.home_lat + (hop_deg if i % 2 else 0.0)
        at = start_ms + phase + i * config.location_period_s * 1000
        events.append(ev(at, LocationFix(lat=lat, lon=profile.home_lon,
                                         accuracy_m=float(rng.uniform(5.0, 50.0)))))

    # --- ambient sound: gaussian around the day's level, neutral dominant freq
    day_db = float(np.clip(_channel_mean(profile, "sound_db", latent, signal, rng), 20.0, 90.0))
    n_snd = _DAY_S // config.sound_period_s
    phase = int(rng.integers(0, config.sound_period_s * 1000))
    db = np.clip(rng.normal(day_db, SOUND_SAMPLE_STD_DB, n_snd), 0.0, 140.0)
    hz = np.maximum(0.0, rng.normal(500.0, 350.0, n_snd))
    for i in range(n_snd):
        at = start_ms + phase + i * config.sound_period_s * 1000
        events.append(ev(at, AmbientSoundSample(decibels=float(db[i]),
                                                dominant_frequency_hz=float(hz[i]))))

    # --- activity: sticky Markov chain whose stationary mix tilts toward still
    still = float(np.clip(_channel_mean(profile, "still_frac", latent, signal, rng),
                          0.05, 0.92))
    types = list(ACTIVITY_TYPES)
    mix = np.array([still if t == "still" else (1 - still) * profile.activity_mix[t]
                    for t in types])
    mix /= mix.sum()
    n_act = _DAY_S // config.activity_period_s
    switches = rng.random(n_act) < ACTIVITY_SWITCH_PROB
    switches[0] = True
    seg_ids = np.cumsum(switches) - 1
    seg_states = rng.choice(len(types), size=int(seg_ids[-1]) + 1, p=mix)
    states = seg_states[seg_ids]
    conf = rng.uniform(0.6, 1.0, n_act)
    phase = int(rng.integers(0, config.activity_period_s * 1000))
    for i in range(n_act):
        at = start_ms + phase + i * config.activity_period_s * 1000
        events.append(ev(at, ActivitySample(activity=types[int(states[i])],
                                            confidence=float(conf[i]))))

    # --- light: positive gaussian around the day's level
    day_lux = max(5.0, _channel_mean(profile, "lux", latent, signal, rng))
    n_light = _DAY_S // config.light_period_s
    phase = int(rng.integers(0, config.light_period_s * 1000))
    lux = np.maximum(0.0, rng.normal(day_lux, 0.5 * day_lux, n_light))
    for i in range(n_light):
        at = start_ms + phase + i * config.light_period_s * 1000
        events.append(ev(at, LightSample(lux=float(lux[i]))))

    # --- screen: disjoint on-intervals totalling the day's target
    target_on_s = float(np.clip(_channel_mean(profile, "screen_h", latent, signal, rng),
                                0.2, 15.0)) * 3600.0
    n_sessions = max(3, int(rng.poisson(14.0)))
    on_lengths = np.maximum(2.0, rng.dirichlet(np.ones(n_sessions)) * target_on_s)
    total_off = _DAY_S - float(on_lengths.sum())
    gaps = rng.dirichlet(np.ones(n_sessions + 1)) * max(total_off - n_sessions, n_sessions)
    cursor = float(start_ms)
    for i in range(n_sessions):
        cursor += max(1.0, gaps[i]) * 1000.0
        on_at = int(cursor)
        cursor += on_lengths[i] * 1000.0
        off_at = int(cursor)
        if off_at >= end_ms:
            break
        events.append(ev(on_at, ScreenEvent(state="on")))
        events.append(ev(off_at, ScreenEvent(state="off")))

    # --- questionnaire, answered in the evening
    ema_minute = EMA_LOCAL_MINUTE + int(rng.integers(-60, 61))
    ema_at = start_ms + ema_minute * 60_000
    response = K10Response(participant=profile.id, at=ts(ema_at),
                           items=_k10_items(latent, rng))

    events.sort(key=lambda e: e.at.at_ms)
    return events, response


@dataclass(frozen=True)
class SimulatedDay:
    participant: str
    local_day: date
    latent: float
    events: list[SensorEvent] = field(repr=False)
    response: K10Response


def iter_days(config: SimConfig) -> Iterator[SimulatedDay]:
    """Lazily generate every participant-day; order is (participant, day)."""
    config.validate()
    for p_idx in range(config.n_participants):
        profile = build_profile(config, p_idx)
        walk = latent_distress_walk(profile, config.n_days, config.seed)
        for d_idx in range(config.n_days):
            local_day = config.start_day + timedelta(days=d_idx)
            events, response = simulate_day(
                profile, float(walk[d_idx]), local_day, config=config, day_index=d_idx
            )
            yield SimulatedDay(
                participant=profile.id,
                local_day=local_day,
                latent=float(walk[d_idx]),
                events=events,
                response=response,
            )


def generate_cohort(config: SimConfig) -> list[SimulatedDay]:
    """Materialize the whole cohort; prefer iter_days for large configs."""
    return list(iter_days(config))


def with_participant_ids(config: SimConfig, ids: list[str]) -> SimConfig:
    return replace(config, participant_ids=tuple(ids)).validate()
