"""Core data model: scoring, banding, timestamps, payload validation."""

from __future__ import annotations

import hashlib
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moodsense.events import (
    ActivitySample,
    AmbientSoundSample,
    CommunicationEvent,
    DistressLevel,
    K10Response,
    LightSample,
    LocationFix,
    ScreenEvent,
    SensorEvent,
    Timestamp,
    ValidationError,
    anonymize_contact,
    categorize_k10,
    day_bounds_ms,
    score_k10,
    validate_event,
    validate_k10_response,
)

# Band edges frozen independently of the implementation.
EXPECTED_BANDS = {
    **{s: DistressLevel.LOW for s in range(10, 16)},
    **{s: DistressLevel.MODERATE for s in range(16, 22)},
    **{s: DistressLevel.HIGH for s in range(22, 30)},
    **{s: DistressLevel.VERY_HIGH for s in range(30, 51)},
}


def test_band_for_every_possible_score():
    for score in range(10, 51):
        assert categorize_k10(score) is EXPECTED_BANDS[score], score


def test_band_edges():
    assert categorize_k10(15) is DistressLevel.LOW
    assert categorize_k10(16) is DistressLevel.MODERATE
    assert categorize_k10(21) is DistressLevel.MODERATE
    assert categorize_k10(22) is DistressLevel.HIGH
    assert categorize_k10(29) is DistressLevel.HIGH
    assert categorize_k10(30) is DistressLevel.VERY_HIGH


@pytest.mark.parametrize("score", [9, 51, 0, -3, 1000])
def test_band_rejects_out_of_range(score):
    with pytest.raises(ValidationError):
        categorize_k10(score)


def test_band_rejects_non_int():
    with pytest.raises(ValidationError):
        categorize_k10(15.0)
    with pytest.raises(ValidationError):
        categorize_k10(True)


def test_score_is_item_sum():
    assert score_k10([1] * 10) == 10
    assert score_k10([5] * 10) == 50
    assert score_k10([1, 2, 3, 4, 5, 1, 2, 3, 4, 5]) == 30


@pytest.mark.parametrize(
    "items",
    [
        [1] * 9,
        [1] * 11,
        [],
        [1, 1, 1, 1, 1, 1, 1, 1, 1, 6],
        [0, 1, 1, 1, 1, 1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1.0, 1, 1, 1, 1, 1],
        [True] + [1] * 9,
    ],
)
def test_score_rejects_bad_items(items):
    with pytest.raises(ValidationError):
        score_k10(items)


@given(st.lists(st.integers(min_value=1, max_value=5), min_size=10, max_size=10))
def test_score_band_partition(items):
    score = score_k10(items)
    assert 10 <= score <= 50
    level = categorize_k10(score)
    assert level is EXPECTED_BANDS[score]


@given(st.integers(min_value=10, max_value=49))
def test_band_monotone_in_score(score):
    assert categorize_k10(score) <= categorize_k10(score + 1)


def test_level_wire_names_round_trip():
    for level in DistressLevel:
        assert DistressLevel.from_wire(level.wire_name) is level
    assert DistressLevel.VERY_HIGH.wire_name == "very_high"
    with pytest.raises(ValidationError):
        DistressLevel.from_wire("severe")


def test_level_order_matches_class_index():
    assert [int(level) for level in DistressLevel] == [0, 1, 2, 3]
    assert DistressLevel.LOW < DistressLevel.VERY_HIGH


# -- timestamps ---------------------------------------------------------------


def test_local_day_applies_offset():
    # 2026-01-05 23:30 UTC is already Jan 6 at UTC+120
    at_ms = (date(2026, 1, 5) - date(1970, 1, 1)).days * 86_400_000 + 23 * 3_600_000 + 1_800_000
    assert Timestamp(at_ms, 0).local_day() == date(2026, 1, 5)
    assert Timestamp(at_ms, 120).local_day() == date(2026, 1, 6)
    assert Timestamp(at_ms, -720).local_day() == date(2026, 1, 5)


def test_local_day_midnight_is_inclusive_start():
    start, end = day_bounds_ms(date(2026, 1, 5), -300)
    assert Timestamp(start, -300).local_day() == date(2026, 1, 5)
    assert Timestamp(end - 1, -300).local_day() == date(2026, 1, 5)
    assert Timestamp(end, -300).local_day() == date(2026, 1, 6)


@given(
    st.integers(min_value=0, max_value=4_000_000_000_000),
    st.integers(min_value=-720, max_value=840),
)
def test_day_bounds_contain_exactly_their_day(at_ms, tz):
    day = Timestamp(at_ms, tz).local_day()
    start, end = day_bounds_ms(day, tz)
    assert start <= at_ms < end
    assert end - start == 86_400_000


# -- contact anonymization ----------------------------------------------------


def test_anonymize_contact_matches_direct_digest():
    salt = bytes(range(16))
    token = anonymize_contact("alice", salt)
    assert token == hashlib.sha256(salt + b"alice").digest()[:16]
    assert len(token) == 16


def test_anonymize_contact_deterministic_and_salt_sensitive():
    s1 = b"a" * 16
    s2 = b"b" * 16
    assert anonymize_contact("x", s1) == anonymize_contact("x", s1)
    assert anonymize_contact("x", s1) != anonymize_contact("x", s2)
    assert anonymize_contact("x", s1) != anonymize_contact("y", s1)


def test_anonymize_contact_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        anonymize_contact("", b"a" * 16)
    with pytest.raises(ValidationError):
        anonymize_contact("x", b"a" * 15)
    with pytest.raises(ValidationError):
        anonymize_contact("x", "not-bytes")  # type: ignore[arg-type]


# -- event validation ---------------------------------------------------------

TS = Timestamp(1_760_000_000_000, 60)
TOKEN = b"t" * 16


def ev(payload):
    return SensorEvent("participant-1", TS, payload)


def test_valid_events_pass():
    for payload in [
        CommunicationEvent("call_in", 12.5, TOKEN),
        CommunicationEvent("text_out", 0.0, TOKEN),
        LocationFix(52.3, 4.9, 10.0),
        AmbientSoundSample(45.0, 440.0),
        ActivitySample("walking", 0.9),
        LightSample(300.0),
        ScreenEvent("on"),
    ]:
        assert validate_event(ev(payload)) is not None


@pytest.mark.parametrize(
    "payload,field",
    [
        (CommunicationEvent("call_in", 0.0, TOKEN), "body.duration_s"),
        (CommunicationEvent("text_in", 3.0, TOKEN), "body.duration_s"),
        (CommunicationEvent("call_in", -1.0, TOKEN), "body.duration_s"),
        (CommunicationEvent("call_in", 5.0, b"short"), "body.contact_token"),
        (CommunicationEvent("email", 5.0, TOKEN), "kind"),
        (LocationFix(91.0, 0.0, 1.0), "body.lat"),
        (LocationFix(0.0, -181.0, 1.0), "body.lon"),
        (LocationFix(0.0, 0.0, -1.0), "body.accuracy_m"),
        (AmbientSoundSample(-0.1, 100.0), "body.decibels"),
        (AmbientSoundSample(140.1, 100.0), "body.decibels"),
        (AmbientSoundSample(50.0, -1.0), "body.dominant_frequency_hz"),
        (AmbientSoundSample(float("nan"), 100.0), "body.decibels"),
        (ActivitySample("flying", 0.5), "body.activity"),
        (ActivitySample("still", 1.5), "body.confidence"),
        (LightSample(-0.5), "body.lux"),
        (ScreenEvent("dim"), "body.state"),
    ],
)
def test_invalid_payloads_name_the_field(payload, field):
    with pytest.raises(ValidationError) as exc:
        validate_event(ev(payload))
    assert exc.value.field == field


def test_boundary_payload_values_pass():
    validate_event(ev(AmbientSoundSample(0.0, 0.0)))
    validate_event(ev(AmbientSoundSample(140.0, 0.0)))
    validate_event(ev(LocationFix(90.0, 180.0, 0.0)))
    validate_event(ev(LocationFix(-90.0, -180.0, 0.0)))
    validate_event(ev(ActivitySample("unknown", 0.0)))
    validate_event(ev(LightSample(0.0)))


def test_event_rejects_bad_participant_and_timestamp():
    good = CommunicationEvent("call_in", 1.0, TOKEN)
    with pytest.raises(ValidationError):
        validate_event(SensorEvent("bad id!", TS, good))
    with pytest.raises(ValidationError):
        validate_event(SensorEvent("participant-1", Timestamp(-1, 0), good))
    with pytest.raises(ValidationError):
        validate_event(SensorEvent("participant-1", Timestamp(0, 900), good))


def test_event_kind_property():
    assert ev(CommunicationEvent("text_in", 0.0, TOKEN)).kind == "text_in"
    assert ev(LocationFix(0.0, 0.0, 1.0)).kind == "location"
    assert ev(AmbientSoundSample(1.0, 1.0)).kind == "sound"
    assert ev(ActivitySample("still", 0.5)).kind == "activity"
    assert ev(LightSample(1.0)).kind == "light"
    assert ev(ScreenEvent("off")).kind == "screen"


def test_k10_response_validation():
    good = K10Response("participant-1", TS, tuple([3] * 10))
    assert validate_k10_response(good) is good
    with pytest.raises(ValidationError):
        validate_k10_response(K10Response("participant-1", TS, tuple([3] * 9)))
    with pytest.raises(ValidationError):
        validate_k10_response(K10Response("p!", TS, tuple([3] * 10)))
