"""Command-line entry point tying the modules into reproducible workflows.

Subcommands: simulate | serve | featurize | train | evaluate | report.

Every artifact-producing run writes a manifest (<primary output>.manifest.json)
recording the subcommand, the fully resolved config, the master seed, and
sha256 hashes of all inputs and outputs. Manifests contain no wall-clock
timestamps and store paths exactly as given, so a replayed run produces a
byte-identical manifest.

Exit codes: 0 success, 1 runtime failure (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import date
from pathlib import Path

import numpy as np

from .events import DistressLevel, ValidationError
from .features import (
    DailyFeatureVector,
    LabeledDataset,
    assemble_dataset,
    build_dataset,
    featurize_day,
)
from .models import FAMILIES, ModelSpec
from .pipeline import (
    EvaluationReport,
    accuracy_of,
    class_weights,
    confusion_matrix,
    evaluate,
    select_top_k,
    undersample,
    zscore_normalize,
)
from .simulate import SimConfig, iter_days, with_participant_ids
from .store import EventStore
from .wire import (
    MANIFEST_SCHEMA_VERSION,
    REPORT_SCHEMA_VERSION,
    dataset_from_csv,
    dataset_from_dict,
    dataset_to_csv,
    dataset_to_dict,
    dumps_canonical,
    ema_from_dict,
    ema_to_dict,
    event_from_dict,
    event_to_dict,
    read_jsonl,
)

THREE_CLASS_KEEP = {DistressLevel.LOW, DistressLevel.MODERATE, DistressLevel.HIGH}


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_path: str | Path,
    *,
    subcommand: str,
    config: dict,
    seed: int | None,
    inputs: dict[str, str],
    outputs: dict[str, str],
) -> Path:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "inputs": {
            name: {"path": str(p), "sha256": file_sha256(p)}
            for name, p in sorted(inputs.items())
        },
        "outputs": {
            name: {"path": str(p), "sha256": file_sha256(p)}
            for name, p in sorted(outputs.items())
        },
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(dumps_canonical(manifest), encoding="utf-8")
    return path


def _load_dataset(path: str) -> LabeledDataset:
    if path.endswith(".csv"):
        return dataset_from_csv(Path(path).read_text(encoding="utf-8"))
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))


# ------------------------------------------------------------------ simulate


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = SimConfig(
        n_participants=args.participants,
        n_days=args.days,
        signal_strength=args.signal,
        seed=args.seed,
        start_day=date.fromisoformat(args.start_day),
        light_period_s=args.light_period,
        sound_period_s=args.sound_period,
        activity_period_s=args.activity_period,
        location_period_s=args.location_period,
    ).validate()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    poster = None
    if args.post:
        poster = _CohortPoster(args.post)
        ids = poster.register_cohort(config)
        config = with_participant_ids(config, ids)

    events_path = out_dir / "events.jsonl"
    ema_path = out_dir / "ema.jsonl"
    participants: list[str] = []
    with events_path.open("w", encoding="utf-8") as ef, ema_path.open(
        "w", encoding="utf-8"
    ) as mf:
        for day in iter_days(config):
            if day.participant not in participants:
                participants.append(day.participant)
            event_dicts = [event_to_dict(ev) for ev in day.events]
            for obj in event_dicts:
                ef.write(dumps_canonical(obj))
            mf.write(dumps_canonical(ema_to_dict(day.response)))
            if poster is not None:
                poster.post_day(day, event_dicts)

    participants_path = out_dir / "participants.json"
    participants_path.write_text(
        dumps_canonical({"participants": participants}), encoding="utf-8"
    )
    write_manifest(
        events_path,
        subcommand="simulate",
        config={**config.to_dict(), "participants": participants, "post": bool(args.post)},
        seed=args.seed,
        inputs={},
        outputs={
            "events": str(events_path),
            "ema": str(ema_path),
            "participants": str(participants_path),
        },
    )
    print(f"wrote {events_path} and {ema_path} for {len(participants)} participants")
    return 0


class _CohortPoster:
    """Registers participants and uploads one batch per simulated day."""

    def __init__(self, base_url: str):
        import httpx

        self._client = httpx.Client(base_url=base_url, timeout=60.0)
        self._tokens: dict[str, str] = {}

    def register_cohort(self, config: SimConfig) -> list[str]:
        from .simulate import build_profile

        ids = []
        for idx in range(config.n_participants):
            profile = build_profile(config, idx)
            resp = self._client.post(
                "/v1/participants",
                json={"tz_offset_minutes": profile.tz_offset_minutes},
            )
            resp.raise_for_status()
            body = resp.json()
            ids.append(body["id"])
            self._tokens[body["id"]] = body["token"]
        return ids

    def post_day(self, day, event_dicts: list[dict]) -> None:
        headers = {"Authorization": f"Bearer {self._tokens[day.participant]}"}
        resp = self._client.post(
            "/v1/events", json={"events": event_dicts}, headers=headers
        )
        resp.raise_for_status()
        body = resp.json()
        if body["errors"] or body["accepted"] != len(event_dicts):
            raise RuntimeError(f"upload rejected events: {body['errors'][:3]}")
        ema = ema_to_dict(day.response)
        resp = self._client.post(
            "/v1/ema", json={"at": ema["at_ms"], "items": ema["items"]}, headers=headers
        )
        resp.raise_for_status()


# ------------------------------------------------------------------ serve


def _cmd_serve(args: argparse.Namespace) -> int:
    import secrets

    import uvicorn

    from .service import create_app

    data_dir = Path(args.data_dir or os.environ.get("MOODSENSE_DATA", "./data"))
    data_dir.mkdir(parents=True, exist_ok=True)
    store = EventStore(data_dir, seed=args.seed)
    admin_token = args.admin_token or os.environ.get("MOODSENSE_ADMIN_TOKEN")
    if not admin_token:
        admin_token = (
            np.random.default_rng([args.seed, 1]).bytes(32).hex()
            if args.seed is not None
            else secrets.token_hex(32)
        )
    token_path = data_dir / "admin_token"
    token_path.write_text(admin_token + "\n", encoding="utf-8")
    token_path.chmod(0o600)

    port = args.port if args.port is not None else int(os.environ.get("MOODSENSE_PORT", "8600"))
    config = {
        "data_dir": str(data_dir),
        "host": args.host,
        "port": port,
        "seeded_ids": args.seed is not None,
    }
    manifest_base = data_dir / "serve"
    (data_dir / "serve.config.json").write_text(dumps_canonical(config), encoding="utf-8")
    write_manifest(
        manifest_base,
        subcommand="serve",
        config=config,
        seed=args.seed,
        inputs={},
        outputs={"config": str(data_dir / "serve.config.json")},
    )
    print(f"admin token written to {token_path}")
    uvicorn.run(create_app(store, admin_token), host=args.host, port=port, log_level="info")
    return 0


# ------------------------------------------------------------------ featurize


class _NotGrouped(Exception):
    """Events file interleaves participant-days; streaming grouping impossible."""


def _iter_events_grouped(path: str):
    """Yield ((participant, local_day), events) for contiguous runs.

    Raises _NotGrouped when a run key reappears later in the file; the caller
    then falls back to full in-memory grouping.
    """
    seen: set = set()
    key = None
    bucket: list = []
    for obj in read_jsonl(path):
        ev = event_from_dict(obj)
        k = (ev.participant, ev.at.local_day())
        if k != key:
            if k in seen:
                raise _NotGrouped()
            if key is not None:
                yield key, bucket
            seen.add(k)
            key, bucket = k, []
        bucket.append(ev)
    if key is not None:
        yield key, bucket


def _featurize_files(events_path: str, ema_path: str) -> LabeledDataset:
    emas = [ema_from_dict(obj) for obj in read_jsonl(ema_path)]
    try:
        vectors: list[DailyFeatureVector] = []
        for (pid, day), events in _iter_events_grouped(events_path):
            vectors.append(
                featurize_day(
                    events,
                    participant=pid,
                    local_day=day,
                    tz_offset_minutes=events[0].at.tz_offset_minutes,
                )
            )
        return assemble_dataset(vectors, emas)
    except _NotGrouped:
        events = [event_from_dict(obj) for obj in read_jsonl(events_path)]
        return build_dataset(events, emas)


def _cmd_featurize(args: argparse.Namespace) -> int:
    inputs: dict[str, str] = {}
    if args.store:
        store = EventStore(args.store)
        cohort = (
            [p for p in args.cohort.split(",") if p] if args.cohort else store.participant_ids()
        )
        dataset = store.export_dataset(cohort)
        for pid in cohort:
            for sub in ("events", "ema"):
                p = Path(args.store) / sub / f"{pid}.jsonl"
                if p.exists():
                    inputs[f"{sub}/{pid}"] = str(p)
        config = {"store": args.store, "cohort": cohort}
    else:
        if not (args.events and args.ema):
            print("featurize: need --store DIR or both --events and --ema", file=sys.stderr)
            return 2
        dataset = _featurize_files(args.events, args.ema)
        inputs = {"events": args.events, "ema": args.ema}
        config = {"events": args.events, "ema": args.ema}

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(dumps_canonical(dataset_to_dict(dataset)), encoding="utf-8")
    outputs = {"dataset": str(out_path)}
    if args.csv:
        Path(args.csv).write_text(dataset_to_csv(dataset), encoding="utf-8")
        outputs["csv"] = args.csv
    write_manifest(
        out_path,
        subcommand="featurize",
        config=config,
        seed=None,
        inputs=inputs,
        outputs=outputs,
    )
    print(f"dataset: {dataset.n_samples} rows x {dataset.n_features} features -> {out_path}")
    return 0


# ------------------------------------------------------------------ train


def _cmd_train(args: argparse.Namespace) -> int:
    from . import models as _models

    dataset = _load_dataset(args.dataset)
    if args.classes == 3:
        dataset = undersample(dataset, THREE_CLASS_KEEP, args.seed)
    normalized, _ = zscore_normalize(dataset, args.scope)
    selected_ds, selected = select_top_k(normalized, args.top_k)
    weights = class_weights(dataset.levels)
    weight_arr = np.ones(max(int(lvl) for lvl in weights) + 1)
    for lvl, w in weights.items():
        weight_arr[int(lvl)] = w
    spec = ModelSpec(family=args.family, seed=args.seed)
    y = np.asarray([int(lvl) for lvl in dataset.levels])
    model = _models.train(spec.family, spec, selected_ds.rows, y, weight_arr)
    pred = _models.predict(model, selected_ds.rows)
    classes = sorted({int(lvl) for lvl in dataset.levels})
    pos = {c: i for i, c in enumerate(classes)}
    cm = confusion_matrix([pos[t] for t in y], [pos[p] for p in pred], len(classes))
    out = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "mode": "train",
        "family": args.family,
        "hyperparams": spec.hyperparams(),
        "seed": args.seed,
        "config": {"scope": args.scope, "top_k": args.top_k, "classes": args.classes},
        "classes": [DistressLevel(c).wire_name for c in classes],
        "selected": list(selected),
        "class_weights": {DistressLevel(c).wire_name: w for c, w in sorted(
            ((int(lvl), w) for lvl, w in weights.items())
        )},
        "training_accuracy": accuracy_of(cm),
        "confusion": cm.tolist(),
        "n_samples": dataset.n_samples,
    }
    out_path = Path(args.out)
    out_path.write_text(dumps_canonical(out), encoding="utf-8")
    write_manifest(
        out_path,
        subcommand="train",
        config=out["config"] | {"family": args.family, "dataset": args.dataset},
        seed=args.seed,
        inputs={"dataset": args.dataset},
        outputs={"report": str(out_path)},
    )
    print(f"training accuracy {out['training_accuracy']:.3f} -> {out_path}")
    return 0


# ------------------------------------------------------------------ evaluate


def _cmd_evaluate(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.dataset)
    if args.classes == 3:
        dataset = undersample(dataset, THREE_CLASS_KEEP, args.seed)
    families = list(FAMILIES) if args.family == "all" else [args.family]
    reports: dict[str, EvaluationReport] = {}
    for family in families:
        spec = ModelSpec(family=family, seed=args.seed)
        reports[family] = evaluate(
            dataset,
            spec,
            k=args.folds,
            seed=args.seed,
            scope=args.scope,
            top_k=args.top_k,
            paper_mode=args.paper_mode,
        )
    if len(reports) == 1:
        payload = next(iter(reports.values())).to_dict()
    else:
        payload = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "reports": {family: rep.to_dict() for family, rep in reports.items()},
        }
    out_path = Path(args.out)
    out_path.write_text(dumps_canonical(payload), encoding="utf-8")
    outputs = {"report": str(out_path)}
    if args.table:
        table = "\n\n".join(
            f"{family}: mean_accuracy={rep.mean_accuracy:.4f} "
            f"macro_recall={rep.macro_recall:.4f}\n{rep.confusion_table()}"
            for family, rep in reports.items()
        )
        Path(args.table).write_text(table + "\n", encoding="utf-8")
        outputs["table"] = args.table
    write_manifest(
        out_path,
        subcommand="evaluate",
        config={
            "dataset": args.dataset,
            "family": args.family,
            "folds": args.folds,
            "scope": args.scope,
            "top_k": args.top_k,
            "classes": args.classes,
            "paper_mode": args.paper_mode,
        },
        seed=args.seed,
        inputs={"dataset": args.dataset},
        outputs=outputs,
    )
    for family, rep in reports.items():
        print(
            f"{family}: mean_accuracy={rep.mean_accuracy:.4f} "
            f"accuracy={rep.accuracy:.4f} macro_recall={rep.macro_recall:.4f}"
        )
    return 0


# ------------------------------------------------------------------ report


def _render_report(obj: dict) -> str:
    cm = np.asarray(obj["confusion"], dtype=np.int64)
    stated = obj.get("accuracy", obj.get("training_accuracy"))
    if stated is None or abs(accuracy_of(cm) - stated) > 1e-12:
        raise ValidationError("accuracy", "stated accuracy does not match confusion matrix")
    names = obj["classes"] if isinstance(obj.get("classes"), list) else [
        str(i) for i in range(cm.shape[0])
    ]
    width = max(len(str(n)) for n in names + ["true\\pred"])
    cell = max(width, max(len(str(int(v))) for v in cm.flat))
    lines = [" ".join(["true\\pred".rjust(width)] + [str(n).rjust(cell) for n in names])]
    for i, name in enumerate(names):
        lines.append(
            " ".join([str(name).rjust(width)] + [str(int(v)).rjust(cell) for v in cm[i]])
        )
    summary = [f"accuracy={accuracy_of(cm):.4f}"]
    if "macro_recall" in obj:
        summary.append(f"macro_recall={obj['macro_recall']:.4f}")
    if "mean_accuracy" in obj:
        summary.append(f"mean_accuracy={obj['mean_accuracy']:.4f}")
    return "\n".join(lines) + "\n" + " ".join(summary)


def _cmd_report(args: argparse.Namespace) -> int:
    with open(args.report, encoding="utf-8") as fh:
        obj = json.load(fh)
    blocks = obj["reports"].values() if "reports" in obj else [obj]
    rendered = "\n\n".join(_render_report(b) for b in blocks)
    print(rendered)
    if args.out:
        Path(args.out).write_text(rendered + "\n", encoding="utf-8")
        write_manifest(
            Path(args.out),
            subcommand="report",
            config={"report": args.report},
            seed=None,
            inputs={"report": args.report},
            outputs={"table": args.out},
        )
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moodsense",
        description="Passive-sensing pipeline: simulate, ingest, featurize, classify.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--participants", type=int, default=10)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--start-day", default="2026-01-05")
    p.add_argument("--light-period", type=int, default=60,
                   help="seconds between light samples (6 = full design cadence)")
    p.add_argument("--sound-period", type=int, default=300)
    p.add_argument("--activity-period", type=int, default=60)
    p.add_argument("--location-period", type=int, default=300)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--post", metavar="URL", default=None,
                   help="also register + upload the cohort to a running service")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="run the ingestion service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--seed", type=int, default=None,
                   help="seed id/token generation for replayable runs")
    p.add_argument("--admin-token", default=None)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("featurize", help="build a labeled dataset from raw events")
    p.add_argument("--events", default=None, help="events JSONL file")
    p.add_argument("--ema", default=None, help="EMA JSONL file")
    p.add_argument("--store", default=None, help="store data directory")
    p.add_argument("--cohort", default=None, help="comma-separated participant ids")
    p.add_argument("--out", required=True, help="dataset JSON output path")
    p.add_argument("--csv", default=None, help="also write dataset as CSV")
    p.set_defaults(func=_cmd_featurize)

    def add_analysis_flags(p):
        p.add_argument("--dataset", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scope", choices=["per_participant", "global"],
                       default="per_participant")
        p.add_argument("--top-k", type=int, default=25)
        p.add_argument("--classes", type=int, choices=[3, 4], default=4,
                       help="3 drops the top band and rebalances before analysis")
        p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit one model on the full dataset")
    add_analysis_flags(p)
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="cross-validated evaluation")
    add_analysis_flags(p)
    p.add_argument("--family", choices=list(FAMILIES) + ["all"], required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--paper-mode", action="store_true",
                   help="fit selection/normalization once on all data (leaky variant)")
    p.add_argument("--table", default=None, help="also write a plain-text table")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="render a report JSON as a text table")
    p.add_argument("--report", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
