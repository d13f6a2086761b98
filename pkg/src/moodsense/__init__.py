"""Passive-sensing behavioral monitoring: ingest, featurize, label, classify."""

from .events import (
    DistressLevel,
    K10Response,
    SensorEvent,
    Timestamp,
    ValidationError,
    anonymize_contact,
    categorize_k10,
    score_k10,
    validate_event,
)
from .features import (
    FEATURE_NAMES,
    LabeledDataset,
    build_dataset,
    featurize_day,
    haversine_km,
    summary_stats,
)
from .models import ModelSpec
from .pipeline import EvaluationReport, evaluate
from .simulate import SimConfig, generate_cohort, iter_days
from .store import EventStore
from .wire import dumps_canonical

__version__ = "1.0.0"

__all__ = [
    "DistressLevel",
    "EvaluationReport",
    "EventStore",
    "FEATURE_NAMES",
    "K10Response",
    "LabeledDataset",
    "ModelSpec",
    "SensorEvent",
    "SimConfig",
    "Timestamp",
    "ValidationError",
    "anonymize_contact",
    "build_dataset",
    "categorize_k10",
    "dumps_canonical",
    "evaluate",
    "featurize_day",
    "generate_cohort",
    "haversine_km",
    "iter_days",
    "score_k10",
    "summary_stats",
    "validate_event",
    "__version__",
]
