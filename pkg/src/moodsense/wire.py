"""Canonical JSON forms for every ingest/export record.

One schema is used everywhere: request bodies, the on-disk append-only
segments, and dataset exports. Encoders emit keys in a fixed order and
`dumps_canonical` is byte-stable, so identical data always serializes to
identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
from datetime import date
from typing import Iterator

from .events import (
    ActivitySample,
    AmbientSoundSample,
    CommunicationEvent,
    COMM_KINDS,
    DistressLevel,
    K10Response,
    LightSample,
    LocationFix,
    ScreenEvent,
    SensorEvent,
    Timestamp,
    ValidationError,
    validate_event,
    validate_k10_response,
)

EVENT_KINDS = COMM_KINDS + ("location", "sound", "activity", "light", "screen")

DATASET_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1


def dumps_canonical(obj) -> str:
    """Compact, key-order-preserving JSON with a trailing newline."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False) + "\n"


def event_to_dict(event: SensorEvent) -> dict:
    p = event.payload
    if isinstance(p, CommunicationEvent):
        body = {"duration_s": p.duration_s, "contact_token": p.contact_token.hex()}
    elif isinstance(p, LocationFix):
        body = {"lat": p.lat, "lon": p.lon, "accuracy_m": p.accuracy_m}
    elif isinstance(p, AmbientSoundSample):
        body = {"decibels": p.decibels, "dominant_frequency_hz": p.dominant_frequency_hz}
    elif isinstance(p, ActivitySample):
        body = {"activity": p.activity, "confidence": p.confidence}
    elif isinstance(p, LightSample):
        body = {"lux": p.lux}
    elif isinstance(p, ScreenEvent):
        body = {"state": p.state}
    else:
        raise TypeError(f"unknown payload type {type(p).__name__}")
    return {
        "participant": event.participant,
        "at_ms": event.at.at_ms,
        "tz_offset_min": event.at.tz_offset_minutes,
        "kind": event.kind,
        "body": body,
    }


def _take(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"{path}{key}", "missing required field")
    return obj[key]


def _reject_extra(obj: dict, allowed, path: str) -> None:
    extra = set(obj) - set(allowed)
    if extra:
        raise ValidationError(f"{path}{sorted(extra)[0]}", "unexpected field")


def _require_hex_token(value, field: str) -> bytes:
    if not isinstance(value, str):
        raise ValidationError(field, "expected a hex string")
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise ValidationError(field, "invalid hex encoding") from None
    return raw


def event_from_dict(obj) -> SensorEvent:
    """Decode and fully validate one wire event; raises ValidationError."""
    if not isinstance(obj, dict):
        raise ValidationError("event", "expected a JSON object")
    _reject_extra(obj, ("participant", "at_ms", "tz_offset_min", "kind", "body"), "")
    participant = _take(obj, "participant", "")
    at_ms = _take(obj, "at_ms", "")
    tz = _take(obj, "tz_offset_min", "")
    kind = _take(obj, "kind", "")
    body = _take(obj, "body", "")
    if kind not in EVENT_KINDS:
        raise ValidationError("kind", f"unknown kind {kind!r}")
    if not isinstance(body, dict):
        raise ValidationError("body", "expected a JSON object")

    if kind in COMM_KINDS:
        _reject_extra(body, ("duration_s", "contact_token"), "body.")
        payload = CommunicationEvent(
            kind=kind,
            duration_s=_take(body, "duration_s", "body."),
            contact_token=_require_hex_token(
                _take(body, "contact_token", "body."), "body.contact_token"
            ),
        )
    elif kind == "location":
        _reject_extra(body, ("lat", "lon", "accuracy_m"), "body.")
        payload = LocationFix(
            lat=_take(body, "lat", "body."),
            lon=_take(body, "lon", "body."),
            accuracy_m=_take(body, "accuracy_m", "body."),
        )
    elif kind == "sound":
        _reject_extra(body, ("decibels", "dominant_frequency_hz"), "body.")
        payload = AmbientSoundSample(
            decibels=_take(body, "decibels", "body."),
            dominant_frequency_hz=_take(body, "dominant_frequency_hz", "body."),
        )
    elif kind == "activity":
        _reject_extra(body, ("activity", "confidence"), "body.")
        payload = ActivitySample(
            activity=_take(body, "activity", "body."),
            confidence=_take(body, "confidence", "body."),
        )
    elif kind == "light":
        _reject_extra(body, ("lux",), "body.")
        payload = LightSample(lux=_take(body, "lux", "body."))
    else:  # screen
        _reject_extra(body, ("state",), "body.")
        payload = ScreenEvent(state=_take(body, "state", "body."))

    event = SensorEvent(
        participant=participant,
        at=Timestamp(at_ms=at_ms, tz_offset_minutes=tz),
        payload=payload,
    )
    return validate_event(event)


def ema_to_dict(response: K10Response) -> dict:
    return {
        "participant": response.participant,
        "at_ms": response.at.at_ms,
        "tz_offset_min": response.at.tz_offset_minutes,
        "items": list(response.items),
    }


def ema_from_dict(obj) -> K10Response:
    if not isinstance(obj, dict):
        raise ValidationError("ema", "expected a JSON object")
    _reject_extra(obj, ("participant", "at_ms", "tz_offset_min", "items"), "")
    items = _take(obj, "items", "")
    if not isinstance(items, list):
        raise ValidationError("items", "expected a list")
    response = K10Response(
        participant=_take(obj, "participant", ""),
        at=Timestamp(
            at_ms=_take(obj, "at_ms", ""),
            tz_offset_minutes=_take(obj, "tz_offset_min", ""),
        ),
        items=tuple(items),
    )
    return validate_k10_response(response)


def read_jsonl(path) -> Iterator[dict]:
    """Stream one parsed object per non-empty line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def dataset_to_dict(dataset) -> dict:
    """LabeledDataset -> plain JSON-ready dict (fixed key order)."""
    return {
        "schema_version": DATASET_SCHEMA_VERSION,
        "feature_names": list(dataset.feature_names),
        "rows": [[float(v) for v in row] for row in dataset.rows],
        "k10_scores": [int(s) for s in dataset.k10_scores],
        "levels": [level.wire_name for level in dataset.levels],
        "provenance": [
            {"participant": pid, "local_day": day.isoformat()}
            for pid, day in dataset.provenance
        ],
    }


def dataset_from_dict(obj):
    from .features import LabeledDataset  # local import to avoid a cycle

    if not isinstance(obj, dict):
        raise ValidationError("dataset", "expected a JSON object")
    version = obj.get("schema_version")
    if version != DATASET_SCHEMA_VERSION:
        raise ValidationError("schema_version", f"unsupported version {version!r}")
    provenance = tuple(
        (p["participant"], date.fromisoformat(p["local_day"])) for p in obj["provenance"]
    )
    return LabeledDataset.build(
        feature_names=tuple(obj["feature_names"]),
        rows=obj["rows"],
        k10_scores=obj["k10_scores"],
        levels=tuple(DistressLevel.from_wire(name) for name in obj["levels"]),
        provenance=provenance,
    )


def dataset_to_csv(dataset) -> str:
    """Header: feature names, then k10_score, level, participant, day."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(dataset.feature_names) + ["k10_score", "level", "participant", "day"])
    for row, score, level, (pid, day) in zip(
        dataset.rows, dataset.k10_scores, dataset.levels, dataset.provenance
    ):
        writer.writerow(
            [repr(float(v)) for v in row]
            + [int(score), level.wire_name, pid, day.isoformat()]
        )
    return buf.getvalue()


def dataset_from_csv(text: str):
    from .features import LabeledDataset

    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[-4:] != ["k10_score", "level", "participant", "day"]:
        raise ValidationError("csv", "unexpected trailing columns in header")
    names = tuple(header[:-4])
    rows, scores, levels, prov = [], [], [], []
    for record in reader:
        values, tail = record[: len(names)], record[len(names):]
        rows.append([float(v) for v in values])
        scores.append(int(tail[0]))
        levels.append(DistressLevel.from_wire(tail[1]))
        prov.append((tail[2], date.fromisoformat(tail[3])))
    return LabeledDataset.build(
        feature_names=names,
        rows=rows,
        k10_scores=scores,
        levels=tuple(levels),
        provenance=tuple(prov),
    )
