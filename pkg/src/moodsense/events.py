"""Canonical data model: sensor events, daily questionnaire responses, distress levels.

Everything here is an immutable value type plus pure functions; instances are
safe to share across threads. Validation is explicit (`validate_event`) rather
than baked into constructors so that wire decoding can report precise field
paths.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import date, timedelta
from enum import IntEnum
from typing import Union

K10_ITEMS = 10
K10_MIN = 10
K10_MAX = 50

TZ_OFFSET_MIN = -720
TZ_OFFSET_MAX = 840

COMM_KINDS = ("call_in", "call_out", "text_in", "text_out")
TEXT_KINDS = ("text_in", "text_out")
ACTIVITY_TYPES = ("still", "walking", "running", "in_vehicle", "on_bicycle", "unknown")
SCREEN_STATES = ("on", "off")

CONTACT_TOKEN_BYTES = 16
SALT_BYTES = 16

_EPOCH = date(1970, 1, 1)
_DAY_MS = 86_400_000
_PARTICIPANT_ID_RE = re.compile(r"^[A-Za-z0-9_-]{8,64}$")


class ValidationError(ValueError):
    """A field failed validation; `field` is a dotted path into the record."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


def _require_int(value, field: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(field, f"expected an integer, got {type(value).__name__}")
    return value


def _require_number(value, field: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(field, f"expected a number, got {type(value).__name__}")
    if value != value or value in (float("inf"), float("-inf")):
        raise ValidationError(field, "must be finite")
    return float(value)


def validate_participant_id(pid, field: str = "participant") -> str:
    if not isinstance(pid, str):
        raise ValidationError(field, f"expected a string, got {type(pid).__name__}")
    if not _PARTICIPANT_ID_RE.fullmatch(pid):
        raise ValidationError(field, "must be 8-64 URL-safe characters [A-Za-z0-9_-]")
    return pid


@dataclass(frozen=True)
class Timestamp:
    """Epoch milliseconds UTC plus the participant's fixed UTC offset."""

    at_ms: int
    tz_offset_minutes: int

    def local_day(self) -> date:
        shifted = self.at_ms + self.tz_offset_minutes * 60_000
        return _EPOCH + timedelta(days=shifted // _DAY_MS)


def validate_timestamp(ts: Timestamp, field: str = "at") -> Timestamp:
    at_ms = _require_int(ts.at_ms, "at_ms")
    if at_ms < 0:
        raise ValidationError("at_ms", "must be >= 0")
    off = _require_int(ts.tz_offset_minutes, "tz_offset_min")
    if not TZ_OFFSET_MIN <= off <= TZ_OFFSET_MAX:
        raise ValidationError(
            "tz_offset_min", f"must be in [{TZ_OFFSET_MIN}, {TZ_OFFSET_MAX}]"
        )
    return ts


def day_bounds_ms(local_day: date, tz_offset_minutes: int) -> tuple[int, int]:
    """UTC epoch-ms bounds [start, end) of one participant-local calendar day."""
    days = (local_day - _EPOCH).days
    start = days * _DAY_MS - tz_offset_minutes * 60_000
    return start, start + _DAY_MS


@dataclass(frozen=True)
class CommunicationEvent:
    kind: str  # one of COMM_KINDS
    duration_s: float  # 0 for texts, > 0 for calls
    contact_token: bytes  # 16-byte one-way token; raw identity never stored


@dataclass(frozen=True)
class LocationFix:
    lat: float
    lon: float
    accuracy_m: float


@dataclass(frozen=True)
class AmbientSoundSample:
    decibels: float
    dominant_frequency_hz: float


@dataclass(frozen=True)
class ActivitySample:
    activity: str  # one of ACTIVITY_TYPES
    confidence: float


@dataclass(frozen=True)
class LightSample:
    lux: float


@dataclass(frozen=True)
class ScreenEvent:
    state: str  # "on" | "off"


Payload = Union[
    CommunicationEvent,
    LocationFix,
    AmbientSoundSample,
    ActivitySample,
    LightSample,
    ScreenEvent,
]


@dataclass(frozen=True)
class SensorEvent:
    participant: str
    at: Timestamp
    payload: Payload

    @property
    def kind(self) -> str:
        """Wire kind string; communication events carry their own sub-kind."""
        p = self.payload
        if isinstance(p, CommunicationEvent):
            return p.kind
        if isinstance(p, LocationFix):
            return "location"
        if isinstance(p, AmbientSoundSample):
            return "sound"
        if isinstance(p, ActivitySample):
            return "activity"
        if isinstance(p, LightSample):
            return "light"
        if isinstance(p, ScreenEvent):
            return "screen"
        raise TypeError(f"unknown payload type {type(p).__name__}")


@dataclass(frozen=True)
class K10Response:
    participant: str
    at: Timestamp
    items: tuple[int, ...]  # exactly 10 ratings, each in [1, 5]


class DistressLevel(IntEnum):
    """Four-band distress category; the int value is the class index."""

    LOW = 0
    MODERATE = 1
    HIGH = 2
    VERY_HIGH = 3

    @property
    def wire_name(self) -> str:
        return _LEVEL_WIRE_NAMES[self]

    @classmethod
    def from_wire(cls, name: str) -> "DistressLevel":
        try:
            return _LEVEL_FROM_WIRE[name]
        except KeyError:
            raise ValidationError("level", f"unknown distress level {name!r}") from None


_LEVEL_WIRE_NAMES = {
    DistressLevel.LOW: "low",
    DistressLevel.MODERATE: "moderate",
    DistressLevel.HIGH: "high",
    DistressLevel.VERY_HIGH: "very_high",
}
_LEVEL_FROM_WIRE = {v: k for k, v in _LEVEL_WIRE_NAMES.items()}


def score_k10(items) -> int:
    """Sum the ten 1-5 item ratings; the total lies in [10, 50]."""
    items = tuple(items)
    if len(items) != K10_ITEMS:
        raise ValidationError("items", f"expected exactly {K10_ITEMS} items, got {len(items)}")
    total = 0
    for i, item in enumerate(items):
        v = _require_int(item, f"items[{i}]")
        if not 1 <= v <= 5:
            raise ValidationError(f"items[{i}]", f"rating {v} outside [1, 5]")
        total += v
    return total


def categorize_k10(score: int) -> DistressLevel:
    """Map a total score to its distress band: 10-15, 16-21, 22-29, 30-50."""
    score = _require_int(score, "score")
    if not K10_MIN <= score <= K10_MAX:
        raise ValidationError("score", f"score {score} outside [{K10_MIN}, {K10_MAX}]")
    if score <= 15:
        return DistressLevel.LOW
    if score <= 21:
        return DistressLevel.MODERATE
    if score <= 29:
        return DistressLevel.HIGH
    return DistressLevel.VERY_HIGH


def anonymize_contact(raw_contact: str, salt: bytes) -> bytes:
    """One-way 16-byte contact token: SHA-256(salt || contact), truncated.

    Deterministic per (contact, salt); different salts give unrelated tokens,
    so tokens from different participants cannot be joined.
    """
    if not isinstance(raw_contact, str) or not raw_contact:
        raise ValidationError("raw_contact", "must be a non-empty string")
    if not isinstance(salt, (bytes, bytearray)) or len(salt) != SALT_BYTES:
        raise ValidationError("salt", f"must be exactly {SALT_BYTES} bytes")
    digest = hashlib.sha256(bytes(salt) + raw_contact.encode("utf-8")).digest()
    return digest[:CONTACT_TOKEN_BYTES]


def _validate_payload(payload: Payload) -> None:
    if isinstance(payload, CommunicationEvent):
        if payload.kind not in COMM_KINDS:
            raise ValidationError("kind", f"unknown communication kind {payload.kind!r}")
        dur = _require_number(payload.duration_s, "body.duration_s")
        if dur < 0:
            raise ValidationError("body.duration_s", "must be >= 0")
        is_text = payload.kind in TEXT_KINDS
        if is_text and dur != 0:
            raise ValidationError("body.duration_s", "texts must have duration_s == 0")
        if not is_text and dur == 0:
            raise ValidationError("body.duration_s", "calls must have duration_s > 0")
        tok = payload.contact_token
        if not isinstance(tok, (bytes, bytearray)) or len(tok) != CONTACT_TOKEN_BYTES:
            raise ValidationError(
                "body.contact_token", f"must be exactly {CONTACT_TOKEN_BYTES} bytes"
            )
    elif isinstance(payload, LocationFix):
        lat = _require_number(payload.lat, "body.lat")
        if not -90 <= lat <= 90:
            raise ValidationError("body.lat", f"latitude {lat} outside [-90, 90]")
        lon = _require_number(payload.lon, "body.lon")
        if not -180 <= lon <= 180:
            raise ValidationError("body.lon", f"longitude {lon} outside [-180, 180]")
        acc = _require_number(payload.accuracy_m, "body.accuracy_m")
        if acc < 0:
            raise ValidationError("body.accuracy_m", "must be >= 0")
    elif isinstance(payload, AmbientSoundSample):
        db = _require_number(payload.decibels, "body.decibels")
        if not 0 <= db <= 140:
            raise ValidationError("body.decibels", f"decibels {db} outside [0, 140]")
        hz = _require_number(payload.dominant_frequency_hz, "body.dominant_frequency_hz")
        if hz < 0:
            raise ValidationError("body.dominant_frequency_hz", "must be >= 0")
    elif isinstance(payload, ActivitySample):
        if payload.activity not in ACTIVITY_TYPES:
            raise ValidationError("body.activity", f"unknown activity {payload.activity!r}")
        conf = _require_number(payload.confidence, "body.confidence")
        if not 0 <= conf <= 1:
            raise ValidationError("body.confidence", f"confidence {conf} outside [0, 1]")
    elif isinstance(payload, LightSample):
        lux = _require_number(payload.lux, "body.lux")
        if lux < 0:
            raise ValidationError("body.lux", "must be >= 0")
    elif isinstance(payload, ScreenEvent):
        if payload.state not in SCREEN_STATES:
            raise ValidationError("body.state", f"state must be one of {SCREEN_STATES}")
    else:
        raise ValidationError("body", f"unknown payload type {type(payload).__name__}")


def validate_event(event: SensorEvent) -> SensorEvent:
    """Return the event unchanged iff every type invariant holds."""
    validate_participant_id(event.participant)
    validate_timestamp(event.at)
    _validate_payload(event.payload)
    return event


def validate_k10_response(response: K10Response) -> K10Response:
    validate_participant_id(response.participant)
    validate_timestamp(response.at)
    score_k10(response.items)
    return response
