"""HTTP ingestion service over the event store.

Endpoints (bodies UTF-8 JSON):

    POST /v1/participants {"tz_offset_minutes": int}         -> {"id", "token"}
    POST /v1/events       (Bearer) {"events": [...]}         -> {"accepted", "errors"}
    POST /v1/ema          (Bearer) {"at": ms, "items": [..]} -> {"score", "level"}
    GET  /v1/ema          (Bearer)                           -> {"scores": [...]}
    GET  /v1/events?participant=&from_day=&to_day=&kinds=    -> {"events": [...]}
    GET  /v1/dataset?participants=a,b,c                      -> labeled dataset JSON
    GET  /v1/healthz                                         -> {"ok": true}

Auth is a bearer token: per-participant tokens from registration, plus one
admin token for read endpoints. A participant may read only their own events;
the dataset export is admin-only. Event timestamps are client-supplied and
never overwritten; receive time is kept in the access log only. Batches are
accepted partially: invalid items are reported per index, valid ones are
appended atomically.
"""

from __future__ import annotations

import threading
from datetime import date

import uvicorn
from fastapi import Depends, FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .events import (
    K10Response,
    Timestamp,
    ValidationError,
    categorize_k10,
    score_k10,
    validate_k10_response,
)
from .store import EventStore, ParticipantRecord
from .wire import EVENT_KINDS, dataset_to_dict, dumps_canonical, event_from_dict, event_to_dict


def create_app(store: EventStore, admin_token: str) -> FastAPI:
    app = FastAPI(title="sensing-ingest", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def bearer(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer ") or not header[7:].strip():
            raise HTTPException(status_code=401, detail="missing bearer token")
        return header[7:].strip()

    def participant_auth(token: str = Depends(bearer)) -> ParticipantRecord:
        rec = store.by_token(token)
        if rec is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return rec

    def read_auth(token: str = Depends(bearer)) -> ParticipantRecord | None:
        """Admin token -> None (full read access); else the token's participant."""
        if token == admin_token:
            return None
        rec = store.by_token(token)
        if rec is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return rec

    @app.get("/v1/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.post("/v1/participants")
    async def register(request: Request) -> dict:
        body = await request.json()
        if not isinstance(body, dict) or "tz_offset_minutes" not in body:
            raise HTTPException(status_code=400, detail="expected {tz_offset_minutes}")
        try:
            rec = store.register_participant(body["tz_offset_minutes"])
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return {"id": rec.id, "token": rec.token}

    @app.post("/v1/events")
    async def submit_events(
        request: Request, rec: ParticipantRecord = Depends(participant_auth)
    ) -> dict:
        body = await request.json()
        if not isinstance(body, dict) or not isinstance(body.get("events"), list):
            raise HTTPException(status_code=400, detail="expected {events: [...]}")
        valid, errors = [], []
        for index, obj in enumerate(body["events"]):
            try:
                event = event_from_dict(obj)
            except ValidationError as exc:
                errors.append({"index": index, "message": str(exc)})
                continue
            except (TypeError, AttributeError):
                errors.append({"index": index, "message": "event must be an object"})
                continue
            if event.participant != rec.id:
                raise HTTPException(
                    status_code=403, detail=f"event {index} is for another participant"
                )
            if event.at.tz_offset_minutes != rec.tz_offset_minutes:
                errors.append(
                    {
                        "index": index,
                        "message": "tz_offset_min does not match registered offset",
                    }
                )
                continue
            valid.append(event)
        accepted = store.append_events(valid) if valid else 0
        return {"accepted": accepted, "errors": errors}

    @app.post("/v1/ema")
    async def submit_ema(
        request: Request, rec: ParticipantRecord = Depends(participant_auth)
    ) -> dict:
        body = await request.json()
        if not isinstance(body, dict) or "at" not in body or "items" not in body:
            raise HTTPException(status_code=400, detail="expected {at, items}")
        items = body["items"]
        if not isinstance(items, list):
            raise HTTPException(status_code=400, detail="items must be a list")
        response = K10Response(
            participant=rec.id,
            at=Timestamp(at_ms=body["at"], tz_offset_minutes=rec.tz_offset_minutes),
            items=tuple(items),
        )
        try:
            validate_k10_response(response)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        score, level = store.submit_ema(response)
        return {"score": score, "level": level.wire_name}

    @app.get("/v1/ema")
    def ema_history(rec: ParticipantRecord = Depends(participant_auth)) -> dict:
        scores = []
        for resp in store.query_emas(rec.id):
            score = score_k10(resp.items)
            scores.append(
                {
                    "day": resp.at.local_day().isoformat(),
                    "score": score,
                    "level": categorize_k10(score).wire_name,
                }
            )
        return {"scores": scores}

    @app.get("/v1/events")
    def query_events(
        participant: str,
        from_day: str,
        to_day: str,
        kinds: str | None = None,
        rec: ParticipantRecord | None = Depends(read_auth),
    ) -> dict:
        if rec is not None and rec.id != participant:
            raise HTTPException(status_code=403, detail="not your event stream")
        try:
            lo, hi = date.fromisoformat(from_day), date.fromisoformat(to_day)
        except ValueError:
            raise HTTPException(status_code=400, detail="days must be YYYY-MM-DD") from None
        kind_set = None
        if kinds is not None:
            kind_set = {k for k in kinds.split(",") if k}
            unknown = kind_set - set(EVENT_KINDS)
            if unknown:
                raise HTTPException(status_code=400, detail=f"unknown kinds {sorted(unknown)}")
        try:
            events = store.query_events(participant, lo, hi, kind_set)
        except ValidationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return {"events": [event_to_dict(ev) for ev in events]}

    @app.get("/v1/dataset")
    def dataset(
        participants: str, rec: ParticipantRecord | None = Depends(read_auth)
    ) -> Response:
        if rec is not None:
            raise HTTPException(status_code=403, detail="dataset export is admin-only")
        cohort = [p for p in participants.split(",") if p]
        try:
            ds = store.export_dataset(cohort)
        except ValidationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return Response(
            content=dumps_canonical(dataset_to_dict(ds)), media_type="application/json"
        )

    return app


class ServerThread:
    """Run the app in a background uvicorn server; for tests and tooling."""

    def __init__(self, app: FastAPI, host: str = "127.0.0.1", port: int = 0):
        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self, timeout_s: float = 10.0) -> str:
        self._thread.start()
        import time as _time

        deadline = _time.monotonic() + timeout_s
        while not self._server.started:
            if _time.monotonic() > deadline:
                raise RuntimeError("server did not start in time")
            _time.sleep(0.01)
        sock = self._server.servers[0].sockets[0]
        host, port = sock.getsockname()[:2]
        return f"http://{host}:{port}"

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)
