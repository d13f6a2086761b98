"""Append-only participant/event/EMA store backed by JSONL segment files.

Layout under the data directory:

    participants.jsonl          one record per registration, arrival order
    events/<participant>.jsonl  sensor events, arrival order
    ema/<participant>.jsonl     questionnaire responses, arrival order

Nothing is ever rewritten; the in-memory index is rebuilt from the files at
startup. Appends are serialized per participant (one writer, many readers);
EMA queries apply last-write-wins per local day by arrival order.

Identifiers and bearer tokens come from `secrets` unless a seed is supplied,
in which case they are drawn from a seeded stream so a replayed run assigns
the same ids.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .events import (
    DistressLevel,
    K10Response,
    SensorEvent,
    TZ_OFFSET_MAX,
    TZ_OFFSET_MIN,
    ValidationError,
    _require_int,
    categorize_k10,
    score_k10,
)
from .features import LabeledDataset, build_dataset
from .wire import (
    dumps_canonical,
    ema_from_dict,
    ema_to_dict,
    event_from_dict,
    event_to_dict,
)

PARTICIPANT_ID_HEX = 16
TOKEN_BYTES = 32


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    token: str  # 32-byte secret, hex; never logged or exported
    tz_offset_minutes: int
    created_at_ms: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "token": self.token,
            "tz_offset_min": self.tz_offset_minutes,
            "created_at_ms": self.created_at_ms,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ParticipantRecord":
        return cls(
            id=obj["id"],
            token=obj["token"],
            tz_offset_minutes=obj["tz_offset_min"],
            created_at_ms=obj["created_at_ms"],
        )


class EventStore:
    """Filesystem-backed store; safe for concurrent use from one process."""

    def __init__(self, data_dir: str | Path, *, seed: int | None = None, clock=None):
        self.data_dir = Path(data_dir)
        (self.data_dir / "events").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "ema").mkdir(parents=True, exist_ok=True)
        self._clock = clock if clock is not None else (lambda: int(time.time() * 1000))
        self._rng = np.random.default_rng([seed]) if seed is not None else None
        self._registry_lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._participants: dict[str, ParticipantRecord] = {}
        self._by_token: dict[str, ParticipantRecord] = {}
        self._load()

    # ------------------------------------------------------------ startup

    def _load(self) -> None:
        path = self.data_dir / "participants.jsonl"
        if not path.exists():
            return
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = ParticipantRecord.from_dict(json.loads(line))
                    self._participants[rec.id] = rec
                    self._by_token[rec.token] = rec

    def _lock_for(self, pid: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(pid, threading.Lock())

    def _random_hex(self, n_bytes: int) -> str:
        if self._rng is None:
            return secrets.token_hex(n_bytes)
        return self._rng.bytes(n_bytes).hex()

    @staticmethod
    def _append_line(path: Path, line: str) -> None:
        with path.open("a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()

    # ------------------------------------------------------------ registration

    def register_participant(self, tz_offset_minutes: int) -> ParticipantRecord:
        off = _require_int(tz_offset_minutes, "tz_offset_min")
        if not TZ_OFFSET_MIN <= off <= TZ_OFFSET_MAX:
            raise ValidationError(
                "tz_offset_min", f"must be in [{TZ_OFFSET_MIN}, {TZ_OFFSET_MAX}]"
            )
        with self._registry_lock:
            while True:
                pid = "p" + self._random_hex(PARTICIPANT_ID_HEX // 2)
                token = self._random_hex(TOKEN_BYTES)
                if pid not in self._participants and token not in self._by_token:
                    break
            rec = ParticipantRecord(
                id=pid, token=token, tz_offset_minutes=off, created_at_ms=self._clock()
            )
            self._append_line(
                self.data_dir / "participants.jsonl", dumps_canonical(rec.to_dict())
            )
            self._participants[pid] = rec
            self._by_token[token] = rec
            return rec

    def participant(self, pid: str) -> ParticipantRecord:
        try:
            return self._participants[pid]
        except KeyError:
            raise ValidationError("participant", f"unknown participant {pid!r}") from None

    def participant_ids(self) -> list[str]:
        return list(self._participants)

    def by_token(self, token: str) -> ParticipantRecord | None:
        return self._by_token.get(token)

    # ------------------------------------------------------------ writes

    def append_events(self, events: Sequence[SensorEvent]) -> int:
        """Persist pre-validated events, all for one registered participant."""
        if not events:
            return 0
        pid = events[0].participant
        self.participant(pid)
        for ev in events:
            if ev.participant != pid:
                raise ValidationError("participant", "batch spans multiple participants")
        lines = "".join(dumps_canonical(event_to_dict(ev)) for ev in events)
        with self._lock_for(pid):
            self._append_line(self.data_dir / "events" / f"{pid}.jsonl", lines)
        return len(events)

    def submit_ema(self, response: K10Response) -> tuple[int, DistressLevel]:
        """Persist one response; returns (score, level). Last write per day wins."""
        self.participant(response.participant)
        score = score_k10(response.items)
        with self._lock_for(response.participant):
            self._append_line(
                self.data_dir / "ema" / f"{response.participant}.jsonl",
                dumps_canonical(ema_to_dict(response)),
            )
        return score, categorize_k10(score)

    # ------------------------------------------------------------ reads

    def _read_events(self, pid: str) -> Iterable[SensorEvent]:
        path = self.data_dir / "events" / f"{pid}.jsonl"
        if not path.exists():
            return
        with self._lock_for(pid):
            lines = path.read_text(encoding="utf-8").splitlines()
        for line in lines:
            if line.strip():
                yield event_from_dict(json.loads(line))

    def _read_emas(self, pid: str) -> list[K10Response]:
        """All stored responses, last-write-wins per local day, ordered by day."""
        path = self.data_dir / "ema" / f"{pid}.jsonl"
        if not path.exists():
            return []
        with self._lock_for(pid):
            lines = path.read_text(encoding="utf-8").splitlines()
        latest: dict[date, K10Response] = {}
        for line in lines:
            if line.strip():
                resp = ema_from_dict(json.loads(line))
                latest[resp.at.local_day()] = resp
        return [latest[d] for d in sorted(latest)]

    def query_events(
        self,
        pid: str,
        from_day: date,
        to_day: date,
        kinds: set[str] | None = None,
    ) -> list[SensorEvent]:
        """Events whose local day is in [from_day, to_day], timestamp-ascending."""
        self.participant(pid)
        if to_day < from_day:
            raise ValidationError("to_day", "day range is empty")
        out = [
            ev
            for ev in self._read_events(pid)
            if from_day <= ev.at.local_day() <= to_day
            and (kinds is None or ev.kind in kinds)
        ]
        out.sort(key=lambda ev: ev.at.at_ms)  # stable: arrival order breaks ties
        return out

    def query_emas(self, pid: str) -> list[K10Response]:
        self.participant(pid)
        return self._read_emas(pid)

    # ------------------------------------------------------------ export

    def export_dataset(self, cohort: Sequence[str]) -> LabeledDataset:
        """Labeled dataset over all stored data for the given participants."""
        if not cohort:
            raise ValidationError("cohort", "must name at least one participant")
        for pid in cohort:
            self.participant(pid)

        def all_events():
            for pid in cohort:
                yield from self._read_events(pid)

        emas = [resp for pid in cohort for resp in self._read_emas(pid)]
        return build_dataset(all_events(), emas)
