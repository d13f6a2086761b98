"""Classification protocol: normalization, selection, weighting, CV, evaluation."""

from __future__ import annotations

import json
import math
import random
from datetime import date, timedelta

import numpy as np
import pytest

from moodsense.events import DistressLevel, ValidationError, categorize_k10
from moodsense.features import LabeledDataset
from moodsense.models import ModelSpec
from moodsense.pipeline import (
    accuracy_of,
    class_weights,
    confusion_matrix,
    evaluate,
    macro_recall_of,
    pearson_r,
    rank_features,
    select_top_k,
    stratified_kfold,
    undersample,
    zscore_normalize,
)

from oracles import oracle_confusion, oracle_pearson

# Class shares from the published cohort, used here and in the acceptance run:
# 91 low, 29 moderate, 21 high, 5 very high (n = 146).
COHORT_COUNTS = {
    DistressLevel.LOW: 91,
    DistressLevel.MODERATE: 29,
    DistressLevel.HIGH: 21,
    DistressLevel.VERY_HIGH: 5,
}

SCORE_FOR_LEVEL = {
    DistressLevel.LOW: 12,
    DistressLevel.MODERATE: 18,
    DistressLevel.HIGH: 25,
    DistressLevel.VERY_HIGH: 35,
}


def make_dataset(scores, rows, names=None, participants=None) -> LabeledDataset:
    n = len(scores)
    rows = np.asarray(rows, dtype=float)
    if names is None:
        names = tuple(f"f{i:03d}" for i in range(rows.shape[1]))
    if participants is None:
        participants = [f"participant-{i % 5}" for i in range(n)]
    prov = []
    seen: dict[str, int] = {}
    for pid in participants:
        day = date(2026, 1, 1) + timedelta(days=seen.get(pid, 0))
        seen[pid] = seen.get(pid, 0) + 1
        prov.append((pid, day))
    return LabeledDataset.build(
        feature_names=tuple(names),
        rows=rows,
        k10_scores=list(scores),
        levels=tuple(categorize_k10(s) for s in scores),
        provenance=tuple(prov),
    )


def cohort_labels() -> list[DistressLevel]:
    labels = []
    for lvl, count in COHORT_COUNTS.items():
        labels.extend([lvl] * count)
    return labels


def cohort_dataset(seed=0, d=4) -> LabeledDataset:
    labels = cohort_labels()
    rng = np.random.default_rng(seed)
    scores = [SCORE_FOR_LEVEL[lvl] for lvl in labels]
    return make_dataset(scores, rng.normal(size=(len(labels), d)))


# -- z-score normalization ----------------------------------------------------


def test_global_zscore_matches_hand_computation():
    ds = make_dataset([12, 18, 25], [[1.0], [2.0], [3.0]])
    normed, params = zscore_normalize(ds, scope="global")
    std = math.sqrt(2.0 / 3.0)  # population std of [1,2,3]
    want = [(v - 2.0) / std for v in (1.0, 2.0, 3.0)]
    assert np.allclose(normed.rows[:, 0], want, atol=1e-12)
    assert params.scope == "global"


def test_zscore_constant_feature_maps_to_zero():
    ds = make_dataset([12, 18, 25], [[7.0, 1.0], [7.0, 2.0], [7.0, 3.0]])
    normed, _ = zscore_normalize(ds, scope="global")
    assert np.all(normed.rows[:, 0] == 0.0)
    assert normed.rows[:, 1].std() > 0


def test_per_participant_zscore_removes_personal_baseline():
    # same shape, different offsets: after per-participant scaling they coincide
    rows = [[0.0], [1.0], [2.0], [100.0], [101.0], [102.0]]
    pids = ["participant-a"] * 3 + ["participant-b"] * 3
    ds = make_dataset([12, 18, 25, 12, 18, 25], rows, participants=pids)
    normed, params = zscore_normalize(ds, scope="per_participant")
    assert np.allclose(normed.rows[:3, 0], normed.rows[3:, 0], atol=1e-12)
    assert set(params.per_participant) == {"participant-a", "participant-b"}


def test_zscore_invert_round_trips():
    rng = np.random.default_rng(4)
    rows = rng.normal(size=(12, 5)) * 100.0
    rows[:, 2] = 42.0  # constant column survives the round trip too
    ds = make_dataset([15] * 12, rows)
    for scope in ("global", "per_participant"):
        normed, params = zscore_normalize(ds, scope=scope)
        back = params.invert(normed)
        assert np.allclose(back.rows, ds.rows, atol=1e-9)


def test_zscore_unseen_participant_uses_global_params():
    train = make_dataset(
        [12, 18], [[0.0], [10.0]], participants=["participant-a", "participant-a"]
    )
    _, params = zscore_normalize(train, scope="per_participant")
    other = make_dataset([25], [[5.0]], participants=["participant-z"])
    out = params.transform(other)
    assert out.rows[0, 0] == 0.0  # global mean is 5.0


def test_zscore_rejects_bad_scope_and_empty():
    ds = make_dataset([12], [[1.0]])
    with pytest.raises(ValidationError):
        zscore_normalize(ds, scope="per_cohort")
    empty = LabeledDataset.build(
        feature_names=("a",), rows=np.zeros((0, 1)), k10_scores=[], levels=(), provenance=()
    )
    with pytest.raises(ValidationError):
        zscore_normalize(empty)


# -- correlation and selection ------------------------------------------------


def test_pearson_pinned_and_oracle():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson_r([1, 2, 3], [5, 3, 1]) == pytest.approx(-1.0)
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    y = [2.0, 1.0, 4.0, 3.0, 6.0]
    assert pearson_r(x, y) == pytest.approx(oracle_pearson(x, y), rel=1e-12)
    rng = random.Random(9)
    for _ in range(100):
        n = rng.randint(2, 40)
        a = [rng.gauss(0, 3) for _ in range(n)]
        b = [rng.gauss(0, 3) for _ in range(n)]
        assert pearson_r(a, b) == pytest.approx(oracle_pearson(a, b), abs=1e-12)


def test_pearson_zero_variance_and_errors():
    assert pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0
    assert pearson_r([1.0, 2.0], [5.0, 5.0]) == 0.0
    with pytest.raises(ValidationError):
        pearson_r([1.0], [1.0])
    with pytest.raises(ValidationError):
        pearson_r([1.0, 2.0], [1.0, 2.0, 3.0])


def test_rank_features_orders_by_abs_r_then_name():
    scores = [10, 20, 30, 40, 50]
    x = [1.0, 2.0, 3.0, 4.0, 5.0]
    rows = np.column_stack([
        [-v for v in x],      # r = -1
        [0.0] * 5,            # r = 0
        [2.0, 1.0, 3.0, 5.0, 4.0],  # 0 < |r| < 1
    ])
    ds = make_dataset(scores, rows, names=("neg", "flat", "weak"))
    ranked = rank_features(ds)
    assert [name for name, _ in ranked] == ["neg", "weak", "flat"]
    assert ranked[0][1] == pytest.approx(-1.0)


def test_select_top_k_breaks_ties_lexicographically():
    scores = [10, 20, 30, 40]
    col = [1.0, 2.0, 3.0, 4.0]
    rows = np.column_stack([col, col, col])
    ds = make_dataset(scores, rows, names=("m", "a", "z"))
    _, selected = select_top_k(ds, k=2)
    assert selected == ("a", "m")


def test_select_top_k_recovers_planted_signal():
    rng = np.random.default_rng(12)
    n = 300
    scores = rng.integers(10, 51, size=n)
    noise = rng.normal(size=(n, 32))
    signal = np.column_stack(
        [scores + rng.normal(scale=3.0, size=n) for _ in range(5)]
    )
    rows = np.column_stack([noise, signal])
    names = tuple(f"noise{i:02d}" for i in range(32)) + tuple(f"signal{i}" for i in range(5))
    ds = make_dataset([int(s) for s in scores], rows, names=names)
    reduced, selected = select_top_k(ds, k=25)
    assert set(f"signal{i}" for i in range(5)) <= set(selected)
    assert reduced.n_features == 25
    assert reduced.feature_names == selected


def test_select_top_k_is_column_order_invariant():
    ds = cohort_dataset(seed=3, d=30)
    perm = np.random.default_rng(0).permutation(30)
    shuffled = LabeledDataset.build(
        feature_names=tuple(ds.feature_names[i] for i in perm),
        rows=ds.rows[:, perm],
        k10_scores=ds.k10_scores,
        levels=ds.levels,
        provenance=ds.provenance,
    )
    _, sel_a = select_top_k(ds, k=10)
    _, sel_b = select_top_k(shuffled, k=10)
    assert sel_a == sel_b


def test_select_top_k_caps_at_feature_count():
    ds = cohort_dataset(seed=1, d=6)
    reduced, selected = select_top_k(ds, k=25)
    assert len(selected) == 6
    assert set(selected) == set(ds.feature_names)
    with pytest.raises(ValidationError):
        select_top_k(ds, k=0)


# -- class weights ------------------------------------------------------------


def test_class_weights_match_cohort_counts():
    weights = class_weights(cohort_labels())
    assert weights[DistressLevel.LOW] == pytest.approx(0.4011, abs=1e-3)
    assert weights[DistressLevel.MODERATE] == pytest.approx(1.2586, abs=1e-3)
    assert weights[DistressLevel.HIGH] == pytest.approx(1.7381, abs=1e-3)
    assert weights[DistressLevel.VERY_HIGH] == pytest.approx(7.3000, abs=1e-3)
    total = sum(COHORT_COUNTS[lvl] * weights[lvl] for lvl in weights)
    assert total == pytest.approx(146.0, abs=1e-9)


def test_class_weights_balanced_and_single_class():
    balanced = class_weights([DistressLevel.LOW] * 7 + [DistressLevel.HIGH] * 7)
    assert all(w == pytest.approx(1.0) for w in balanced.values())
    single = class_weights([DistressLevel.MODERATE] * 9)
    assert single == {DistressLevel.MODERATE: 1.0}
    with pytest.raises(ValidationError):
        class_weights([])


# -- undersampling ------------------------------------------------------------


def test_undersample_balances_to_minority_and_drops_excluded():
    ds = cohort_dataset(seed=2)
    keep = {DistressLevel.LOW, DistressLevel.MODERATE, DistressLevel.HIGH}
    out = undersample(ds, keep, seed=7)
    assert out.n_samples == 63
    counts = {lvl: out.levels.count(lvl) for lvl in set(out.levels)}
    assert counts == {
        DistressLevel.LOW: 21,
        DistressLevel.MODERATE: 21,
        DistressLevel.HIGH: 21,
    }
    assert DistressLevel.VERY_HIGH not in counts
    assert list(out.provenance) == sorted(out.provenance)


def test_undersample_is_deterministic_per_seed():
    ds = cohort_dataset(seed=2)
    keep = {DistressLevel.LOW, DistressLevel.MODERATE, DistressLevel.HIGH}
    a = undersample(ds, keep, seed=7)
    b = undersample(ds, keep, seed=7)
    assert a.provenance == b.provenance
    assert np.array_equal(a.rows, b.rows)
    c = undersample(ds, keep, seed=8)
    assert c.provenance != a.provenance  # different draw, same counts
    assert c.n_samples == 63


def test_undersample_requires_kept_classes_present():
    ds = make_dataset([12, 18], np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        undersample(ds, {DistressLevel.LOW, DistressLevel.VERY_HIGH}, seed=0)


# -- stratified k-fold --------------------------------------------------------


def test_kfold_cohort_sizes_and_partition():
    labels = [int(lvl) for lvl in cohort_labels()]
    folds = stratified_kfold(labels, k=5, seed=0)
    sizes = sorted(len(f) for f in folds)
    assert sizes == [29, 29, 29, 29, 30]
    all_idx = np.concatenate(folds)
    assert len(all_idx) == 146
    assert len(set(all_idx.tolist())) == 146


def test_kfold_per_class_counts_within_one():
    labels = [int(lvl) for lvl in cohort_labels()]
    folds = stratified_kfold(labels, k=5, seed=3)
    for cls in sorted(set(labels)):
        per_fold = [sum(1 for i in f if labels[i] == cls) for f in folds]
        assert max(per_fold) - min(per_fold) <= 1, (cls, per_fold)


def test_kfold_balanced_three_class():
    labels = [0] * 21 + [1] * 21 + [2] * 21
    folds = stratified_kfold(labels, k=5, seed=1)
    assert sorted(len(f) for f in folds) == [12, 12, 13, 13, 13]
    for cls in (0, 1, 2):
        per_fold = [sum(1 for i in f if labels[i] == cls) for f in folds]
        assert sorted(per_fold) == [4, 4, 4, 4, 5]


def test_kfold_deterministic_and_seed_sensitive():
    labels = [int(lvl) for lvl in cohort_labels()]
    a = stratified_kfold(labels, k=5, seed=0)
    b = stratified_kfold(labels, k=5, seed=0)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = stratified_kfold(labels, k=5, seed=1)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_kfold_rejects_too_few_samples():
    with pytest.raises(ValidationError):
        stratified_kfold([0, 1, 0], k=5)


# -- confusion matrix and metrics ---------------------------------------------


def test_confusion_matrix_matches_double_loop_oracle():
    rng = random.Random(31)
    y_true = [rng.randrange(4) for _ in range(200)]
    y_pred = [rng.randrange(4) for _ in range(200)]
    got = confusion_matrix(y_true, y_pred, 4)
    assert got.tolist() == oracle_confusion(y_true, y_pred, 4)
    assert int(got.sum()) == 200


def test_confusion_matrix_errors():
    with pytest.raises(ValidationError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(ValidationError):
        confusion_matrix([0, 2], [0, 1], 2)


def test_accuracy_and_macro_recall():
    cm = np.array([[8, 2], [4, 6]])
    assert accuracy_of(cm) == pytest.approx(0.7)
    assert macro_recall_of(cm) == pytest.approx((0.8 + 0.6) / 2)
    # a class with no support is skipped, not counted as zero recall
    cm3 = np.array([[5, 0, 0], [0, 5, 0], [0, 0, 0]])
    assert macro_recall_of(cm3) == pytest.approx(1.0)
    assert accuracy_of(np.zeros((2, 2), dtype=int)) == 0.0


# -- end-to-end evaluation ----------------------------------------------------


def separable_dataset() -> LabeledDataset:
    rng = np.random.default_rng(6)
    n_per = 30
    rows = np.vstack(
        [
            rng.normal(loc=0.0, scale=0.1, size=(n_per, 3)),
            rng.normal(loc=10.0, scale=0.1, size=(n_per, 3)),
        ]
    )
    scores = [12] * n_per + [35] * n_per
    return make_dataset(scores, rows)


def test_evaluate_perfectly_separable_is_perfect():
    report = evaluate(separable_dataset(), ModelSpec("knn", seed=0), seed=0, scope="global", top_k=3)
    assert report.accuracy == 1.0
    assert report.fold_accuracies == (1.0,) * 5
    assert report.classes == (int(DistressLevel.LOW), int(DistressLevel.VERY_HIGH))


def test_evaluate_fits_everything_inside_training_folds():
    ds = cohort_dataset(seed=4, d=30)
    report = evaluate(ds, ModelSpec("knn", seed=0), seed=0, scope="global", top_k=10)
    assert len(report.fold_selected) == 5
    assert len(set(report.fold_selected)) > 1  # selection varies with the split
    for weights in report.fold_class_weights:
        assert set(weights) == {0, 1, 2, 3}
    assert int(report.confusion.sum()) == ds.n_samples


def test_deliberate_leak_changes_the_report():
    # pure-noise features: leaking selection into test folds inflates accuracy
    rng = np.random.default_rng(5)
    n, d = 50, 200
    rows = rng.normal(size=(n, d))
    scores = [12 if i < n // 2 else 35 for i in range(n)]
    ds = make_dataset(scores, rows)
    spec = ModelSpec("knn", seed=0)
    honest = evaluate(ds, spec, seed=0, scope="global", top_k=5)
    leaky = evaluate(ds, spec, seed=0, scope="global", top_k=5, paper_mode=True)
    assert honest.fold_selected != leaky.fold_selected
    assert len(set(leaky.fold_selected)) == 1  # one leaked selection reused everywhere
    assert leaky.accuracy >= honest.accuracy + 0.05
    assert honest.to_json() != leaky.to_json()


def test_evaluate_shuffled_labels_sit_at_chance():
    rng = np.random.default_rng(17)
    n, d = 120, 20
    rows = rng.normal(size=(n, d))
    base = [12, 18, 25, 35] * (n // 4)
    perm = rng.permutation(n)
    scores = [base[i] for i in perm]
    pids = [f"participant-{i % 6}" for i in range(n)]
    ds = make_dataset(scores, rows, participants=pids)
    for family in ("knn", "svm"):
        report = evaluate(ds, ModelSpec(family, seed=0), seed=0, scope="global", top_k=10)
        assert abs(report.accuracy - 0.25) <= 0.10, (family, report.accuracy)


def test_evaluate_report_is_byte_deterministic():
    ds = cohort_dataset(seed=8, d=12)
    spec = ModelSpec("extra_trees", seed=0, params={"n_trees": 10})
    a = evaluate(ds, spec, seed=1, scope="per_participant", top_k=6)
    b = evaluate(ds, spec, seed=1, scope="per_participant", top_k=6)
    assert a.to_json() == b.to_json()


def test_report_serialization_shape():
    report = evaluate(separable_dataset(), ModelSpec("knn", seed=0), seed=0, scope="global", top_k=3)
    obj = json.loads(report.to_json())
    assert obj["schema_version"] == 1
    assert obj["family"] == "knn"
    assert obj["classes"] == ["low", "very_high"]
    assert obj["config"] == {
        "scope": "global",
        "top_k": 3,
        "n_folds": 5,
        "paper_mode": False,
    }
    assert obj["accuracy"] == pytest.approx(np.trace(report.confusion) / report.n_samples)
    assert obj["mean_accuracy"] == pytest.approx(sum(obj["fold_accuracies"]) / 5)
    table = report.confusion_table()
    assert "true\\pred" in table
    assert "very_high" in table


def test_report_mean_accuracy_weighs_folds_equally():
    ds = cohort_dataset(seed=9, d=8)
    report = evaluate(ds, ModelSpec("knn", seed=0), seed=2, scope="global", top_k=8)
    assert report.mean_accuracy == pytest.approx(
        sum(report.fold_accuracies) / len(report.fold_accuracies)
    )
    # overall accuracy re-derives from the summed confusion matrix
    assert report.accuracy == pytest.approx(
        float(np.trace(report.confusion)) / float(report.confusion.sum())
    )
