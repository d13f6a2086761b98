"""Analysis protocol: normalization, correlation-based feature selection,
class weighting, undersampling, stratified cross-validation, evaluation.

Every step is deterministic given its seed. In the default evaluation mode all
fitted quantities (normalization params, selected features, class weights, the
model itself) come from the training split only; `paper_mode` deliberately fits
normalization and selection once on the full dataset before cross-validating,
reproducing a common but leaky variant for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import DistressLevel, ValidationError
from .features import LabeledDataset
from . import models as _models
from .wire import dumps_canonical

REPORT_SCHEMA_VERSION = 1

DEFAULT_TOP_K = 25
DEFAULT_FOLDS = 5


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature z-score parameters, either global or per participant.

    Zero-variance features map to 0. Participants unseen at fit time fall back
    to the global parameters.
    """

    scope: str  # "per_participant" | "global"
    feature_names: tuple[str, ...]
    global_mean: np.ndarray
    global_std: np.ndarray
    per_participant: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def _params_for(self, participant: str) -> tuple[np.ndarray, np.ndarray]:
        if self.scope == "global":
            return self.global_mean, self.global_std
        return self.per_participant.get(participant, (self.global_mean, self.global_std))

    def transform(self, dataset: LabeledDataset) -> LabeledDataset:
        rows = np.empty_like(dataset.rows)
        for i in range(dataset.n_samples):
            mean, std = self._params_for(dataset.provenance[i][0])
            safe = np.where(std > 0, std, 1.0)
            rows[i] = (dataset.rows[i] - mean) / safe
        return LabeledDataset(
            feature_names=dataset.feature_names,
            rows=rows,
            k10_scores=dataset.k10_scores,
            levels=dataset.levels,
            provenance=dataset.provenance,
        )

    def invert(self, dataset: LabeledDataset) -> LabeledDataset:
        rows = np.empty_like(dataset.rows)
        for i in range(dataset.n_samples):
            mean, std = self._params_for(dataset.provenance[i][0])
            safe = np.where(std > 0, std, 1.0)
            rows[i] = dataset.rows[i] * safe + mean
        return LabeledDataset(
            feature_names=dataset.feature_names,
            rows=rows,
            k10_scores=dataset.k10_scores,
            levels=dataset.levels,
            provenance=dataset.provenance,
        )


def zscore_normalize(
    dataset: LabeledDataset, scope: str = "per_participant"
) -> tuple[LabeledDataset, NormalizationParams]:
    """Standardize each feature within the given scope (population std)."""
    if scope not in ("per_participant", "global"):
        raise ValidationError("scope", f"unknown scope {scope!r}")
    if dataset.n_samples == 0:
        raise ValidationError("dataset", "must be non-empty")
    global_mean = dataset.rows.mean(axis=0)
    global_std = dataset.rows.std(axis=0)
    per: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    if scope == "per_participant":
        participants = [p for p, _ in dataset.provenance]
        for pid in dict.fromkeys(participants):
            block = dataset.rows[[i for i, p in enumerate(participants) if p == pid]]
            per[pid] = (block.mean(axis=0), block.std(axis=0))
    params = NormalizationParams(
        scope=scope,
        feature_names=dataset.feature_names,
        global_mean=global_mean,
        global_std=global_std,
        per_participant=per,
    )
    return params.transform(dataset), params


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; 0 when either side has zero variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValidationError("y", "length mismatch")
    if x.size < 2:
        raise ValidationError("x", "need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return 0.0
    return float(xc @ yc) / denom


def rank_features(dataset: LabeledDataset) -> list[tuple[str, float]]:
    """(name, r) pairs sorted by |r| descending, ties by name."""
    scores = dataset.k10_scores.astype(float)
    pairs = [
        (name, pearson_r(dataset.rows[:, j], scores))
        for j, name in enumerate(dataset.feature_names)
    ]
    pairs.sort(key=lambda p: (-abs(p[1]), p[0]))
    return pairs


def select_top_k(
    dataset: LabeledDataset, k: int = DEFAULT_TOP_K
) -> tuple[LabeledDataset, tuple[str, ...]]:
    """Keep the min(k, n) features most correlated with the raw questionnaire score."""
    if k < 1:
        raise ValidationError("k", "must be >= 1")
    if dataset.n_samples == 0:
        raise ValidationError("dataset", "must be non-empty")
    ranked = rank_features(dataset)
    selected = tuple(name for name, _ in ranked[: min(k, len(ranked))])
    return dataset.select_features(selected), selected


def class_weights(labels: Sequence[DistressLevel]) -> dict[DistressLevel, float]:
    """w_c = N / (K * n_c) over the K classes present; satisfies sum(n_c * w_c) = N."""
    if len(labels) == 0:
        raise ValidationError("labels", "must be non-empty")
    counts: dict[DistressLevel, int] = {}
    for lvl in labels:
        counts[lvl] = counts.get(lvl, 0) + 1
    n, k = len(labels), len(counts)
    return {lvl: n / (k * c) for lvl, c in sorted(counts.items())}


def undersample(
    dataset: LabeledDataset, keep: set[DistressLevel], seed: int
) -> LabeledDataset:
    """Drop excluded classes and randomly balance kept classes to the minority count.

    Surviving rows are re-sorted by provenance so output order is independent
    of the sampling order.
    """
    by_class: dict[DistressLevel, list[int]] = {lvl: [] for lvl in sorted(keep)}
    for i, lvl in enumerate(dataset.levels):
        if lvl in by_class:
            by_class[lvl].append(i)
    for lvl, idxs in by_class.items():
        if not idxs:
            raise ValidationError("keep", f"class {lvl.wire_name} absent from dataset")
    target = min(len(idxs) for idxs in by_class.values())
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for lvl in sorted(by_class):
        idxs = by_class[lvl]
        picked = rng.choice(len(idxs), size=target, replace=False)
        chosen.extend(idxs[j] for j in picked)
    chosen.sort(key=lambda i: dataset.provenance[i])
    return dataset.subset(chosen)


def stratified_kfold(
    labels: Sequence[int], k: int = DEFAULT_FOLDS, seed: int = 0
) -> list[np.ndarray]:
    """Partition indices into k folds with per-class counts differing by <= 1.

    Within each class the indices are shuffled (seeded), then dealt round-robin
    into folds starting at a pointer that advances by that class's count, so
    the remainders rotate and total fold sizes stay within 1 of each other.
    """
    n = len(labels)
    if n < k:
        raise ValidationError("labels", f"need at least {k} samples, got {n}")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, lvl in enumerate(labels):
        by_class.setdefault(int(lvl), []).append(i)
    folds: list[list[int]] = [[] for _ in range(k)]
    pointer = 0
    for lvl in sorted(by_class):
        idxs = np.asarray(by_class[lvl])
        idxs = idxs[rng.permutation(len(idxs))]
        for j, idx in enumerate(idxs):
            folds[(pointer + j) % k].append(int(idx))
        pointer = (pointer + len(idxs)) % k
    return [np.asarray(sorted(f), dtype=int) for f in folds]


def confusion_matrix(
    y_true: Sequence[int], y_pred: Sequence[int], n_classes: int
) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    if len(y_true) != len(y_pred):
        raise ValidationError("y_pred", "length mismatch")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        t, p = int(t), int(p)
        if not (0 <= t < n_classes and 0 <= p < n_classes):
            raise ValidationError("labels", f"label ({t}, {p}) outside [0, {n_classes})")
        cm[t, p] += 1
    return cm


def accuracy_of(cm: np.ndarray) -> float:
    total = int(cm.sum())
    return float(np.trace(cm)) / total if total else 0.0


def macro_recall_of(cm: np.ndarray) -> float:
    """Mean of per-class recalls over classes with support."""
    recalls = [
        cm[i, i] / row_sum
        for i in range(cm.shape[0])
        if (row_sum := int(cm[i].sum())) > 0
    ]
    return float(np.mean(recalls)) if recalls else 0.0


@dataclass(frozen=True)
class EvaluationReport:
    """Cross-validated results plus everything needed to attribute them."""

    family: str
    hyperparams: dict
    seed: int
    scope: str
    top_k: int
    n_folds: int
    paper_mode: bool
    classes: tuple[int, ...]  # global class indices present in the dataset
    fold_accuracies: tuple[float, ...]
    fold_selected: tuple[tuple[str, ...], ...]
    fold_class_weights: tuple[dict[int, float], ...]
    confusion: np.ndarray  # indexed by position in `classes`
    n_samples: int

    @property
    def accuracy(self) -> float:
        return accuracy_of(self.confusion)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def macro_recall(self) -> float:
        return macro_recall_of(self.confusion)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "family": self.family,
            "hyperparams": dict(self.hyperparams),
            "seed": self.seed,
            "config": {
                "scope": self.scope,
                "top_k": self.top_k,
                "n_folds": self.n_folds,
                "paper_mode": self.paper_mode,
            },
            "classes": [DistressLevel(c).wire_name for c in self.classes],
            "n_samples": self.n_samples,
            "fold_accuracies": list(self.fold_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "accuracy": self.accuracy,
            "macro_recall": self.macro_recall,
            "confusion": self.confusion.tolist(),
            "fold_selected": [list(names) for names in self.fold_selected],
            "fold_class_weights": [
                {DistressLevel(c).wire_name: w for c, w in sorted(weights.items())}
                for weights in self.fold_class_weights
            ],
        }

    def to_json(self) -> str:
        return dumps_canonical(self.to_dict())

    def confusion_table(self) -> str:
        """Plain-text confusion matrix, rows = true class."""
        names = [DistressLevel(c).wire_name for c in self.classes]
        width = max(len(n) for n in names + ["true\\pred"])
        cell = max(width, max(len(str(int(v))) for v in self.confusion.flat))
        header = " ".join(["true\\pred".rjust(width)] + [n.rjust(cell) for n in names])
        lines = [header]
        for i, name in enumerate(names):
            row = [name.rjust(width)] + [
                str(int(v)).rjust(cell) for v in self.confusion[i]
            ]
            lines.append(" ".join(row))
        return "\n".join(lines)


def _weight_array(weights: dict[DistressLevel, float], n_classes: int) -> np.ndarray:
    arr = np.ones(n_classes)
    for lvl, w in weights.items():
        arr[int(lvl)] = w
    return arr


def evaluate(
    dataset: LabeledDataset,
    spec: "_models.ModelSpec",
    *,
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    scope: str = "per_participant",
    top_k: int = DEFAULT_TOP_K,
    paper_mode: bool = False,
) -> EvaluationReport:
    """Stratified k-fold evaluation of one model family.

    Default mode fits normalization, selection, class weights, and the model on
    each training split only. paper_mode fits normalization and selection once
    on the full dataset first (test-fold leakage, kept for comparison).
    """
    classes = tuple(sorted({int(lvl) for lvl in dataset.levels}))
    labels = np.asarray([int(lvl) for lvl in dataset.levels])
    class_pos = {c: i for i, c in enumerate(classes)}

    fixed_selected: tuple[str, ...] | None = None
    if paper_mode:
        normalized, _ = zscore_normalize(dataset, scope)
        _, fixed_selected = select_top_k(normalized, top_k)

    folds = stratified_kfold(labels, k=k, seed=seed)
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    fold_accuracies: list[float] = []
    fold_selected: list[tuple[str, ...]] = []
    fold_class_weights: list[dict[int, float]] = []
    for fold_idx, test_idx in enumerate(folds):
        train_idx = np.asarray(sorted(set(range(len(labels))) - set(test_idx.tolist())))
        train, test = dataset.subset(train_idx), dataset.subset(test_idx)

        _, params = zscore_normalize(train, scope)
        train_z, test_z = params.transform(train), params.transform(test)
        if fixed_selected is None:
            train_sel, selected = select_top_k(train_z, top_k)
        else:
            selected = fixed_selected
            train_sel = train_z.select_features(selected)
        test_sel = test_z.select_features(selected)

        weights = class_weights(train.levels)
        weight_arr = _weight_array(weights, max(classes) + 1)
        model = _models.train(
            spec.family,
            spec,
            train_sel.rows,
            np.asarray([int(lvl) for lvl in train.levels]),
            weight_arr,
        )
        pred = _models.predict(model, test_sel.rows)

        true_pos = [class_pos[int(lvl)] for lvl in test.levels]
        pred_pos = [class_pos[int(p)] for p in pred]
        fold_cm = confusion_matrix(true_pos, pred_pos, len(classes))
        confusion += fold_cm
        fold_accuracies.append(accuracy_of(fold_cm))
        fold_selected.append(tuple(selected))
        fold_class_weights.append({int(lvl): w for lvl, w in weights.items()})

    return EvaluationReport(
        family=spec.family,
        hyperparams=spec.hyperparams(),
        seed=seed,
        scope=scope,
        top_k=top_k,
        n_folds=k,
        paper_mode=paper_mode,
        classes=classes,
        fold_accuracies=tuple(fold_accuracies),
        fold_selected=tuple(fold_selected),
        fold_class_weights=tuple(fold_class_weights),
        confusion=confusion,
        n_samples=dataset.n_samples,
    )
