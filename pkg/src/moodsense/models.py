"""Four classifier families implemented directly on numpy.

All training is deterministic given the ModelSpec seed: every independent unit of
randomized work (a tree, a one-vs-rest classifier) draws from its own stream
seeded by (master seed, unit index), so results do not depend on scheduling.
Class imbalance is handled by per-sample weights equal to the class weight of
the sample's true class. Prediction ties always resolve to the lower class
index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .events import ValidationError

FAMILIES = ("knn", "extra_trees", "svm", "mlp")

DEFAULT_HYPERPARAMS: dict[str, dict[str, float]] = {
    "knn": {"k": 5},
    "extra_trees": {"n_trees": 100},
    "svm": {"lambda": 1e-3, "epochs": 200},
    "mlp": {"hidden": 32, "learning_rate": 0.05, "epochs": 500},
}

_LEGAL_RANGES: dict[str, dict[str, tuple[float, float]]] = {
    "knn": {"k": (1, 1000)},
    "extra_trees": {"n_trees": (1, 10000)},
    "svm": {"lambda": (1e-12, 1e3), "epochs": (1, 100000)},
    "mlp": {"hidden": (1, 10000), "learning_rate": (1e-9, 10), "epochs": (1, 1000000)},
}


@dataclass(frozen=True)
class ModelSpec:
    """Family name, seed, and hyperparameter overrides (defaults applied per family)."""

    family: str
    seed: int = 0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValidationError("family", f"unknown family {self.family!r}")
        legal = _LEGAL_RANGES[self.family]
        for name, value in self.params.items():
            if name not in legal:
                raise ValidationError(
                    "params", f"unknown hyperparameter {name!r} for {self.family}"
                )
            lo, hi = legal[name]
            if not lo <= value <= hi:
                raise ValidationError(
                    "params", f"{name}={value} outside legal range [{lo}, {hi}]"
                )

    def hyperparams(self) -> dict[str, float]:
        merged = dict(DEFAULT_HYPERPARAMS[self.family])
        merged.update(self.params)
        return merged


def _check_training_inputs(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2:
        raise ValidationError("X", "must be a 2-D matrix")
    if X.shape[0] == 0:
        raise ValidationError("X", "training set is empty")
    if X.shape[0] != y.shape[0]:
        raise ValidationError("y", "row count does not match X")
    return X, y


# ---------------------------------------------------------------- KNN


@dataclass(frozen=True)
class KNNModel:
    X: np.ndarray
    y: np.ndarray
    class_weight: np.ndarray  # indexed by global class
    k: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        n_classes = len(self.class_weight)
        k = min(self.k, len(self.y))
        out = np.empty(X.shape[0], dtype=int)
        for i, x in enumerate(X):
            dist = np.sqrt(((self.X - x) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[:k]
            votes = np.zeros(n_classes)
            for j in nearest:
                votes[self.y[j]] += self.class_weight[self.y[j]]
            out[i] = int(np.argmax(votes))  # argmax takes the lower index on ties
        return out


def _train_knn(spec: ModelSpec, X, y, class_weight) -> KNNModel:
    hp = spec.hyperparams()
    return KNNModel(X=X.copy(), y=y.copy(), class_weight=np.asarray(class_weight, float), k=int(hp["k"]))


# ---------------------------------------------------------------- Extra-Trees


@dataclass(frozen=True)
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None
    vote: np.ndarray | None = None  # leaf: weighted class mass normalized to sum 1


def _gini(mass: np.ndarray) -> float:
    total = mass.sum()
    if total <= 0:
        return 0.0
    p = mass / total
    return 1.0 - float((p * p).sum())


def _class_mass(y: np.ndarray, sample_weight: np.ndarray, n_classes: int) -> np.ndarray:
    mass = np.zeros(n_classes)
    np.add.at(mass, y, sample_weight)
    return mass


def _leaf(y, sample_weight, n_classes) -> _TreeNode:
    mass = _class_mass(y, sample_weight, n_classes)
    total = mass.sum()
    return _TreeNode(vote=mass / total if total > 0 else np.full(n_classes, 1 / n_classes))


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    n_classes: int,
    max_features: int,
    rng: np.random.Generator,
) -> _TreeNode:
    if len(y) < 2 or len(np.unique(y)) == 1:
        return _leaf(y, sample_weight, n_classes)
    parent_mass = _class_mass(y, sample_weight, n_classes)
    parent_gini = _gini(parent_mass)
    total_w = parent_mass.sum()

    candidates = rng.choice(X.shape[1], size=max_features, replace=False)
    best: tuple[float, int, float] | None = None  # (decrease, feature, threshold)
    for feat in candidates:
        col = X[:, feat]
        lo, hi = col.min(), col.max()
        if lo == hi:
            continue
        threshold = rng.uniform(lo, hi)
        mask = col < threshold
        if not mask.any() or mask.all():
            continue
        left_mass = _class_mass(y[mask], sample_weight[mask], n_classes)
        right_mass = parent_mass - left_mass
        wl, wr = left_mass.sum(), right_mass.sum()
        decrease = parent_gini - (wl * _gini(left_mass) + wr * _gini(right_mass)) / total_w
        if best is None or decrease > best[0]:
            best = (decrease, int(feat), float(threshold))
    if best is None:  # every candidate feature constant in this node
        return _leaf(y, sample_weight, n_classes)

    _, feat, threshold = best
    mask = X[:, feat] < threshold
    return _TreeNode(
        feature=feat,
        threshold=threshold,
        left=_grow_tree(X[mask], y[mask], sample_weight[mask], n_classes, max_features, rng),
        right=_grow_tree(X[~mask], y[~mask], sample_weight[~mask], n_classes, max_features, rng),
    )


def _tree_vote(node: _TreeNode, x: np.ndarray) -> np.ndarray:
    while node.vote is None:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.vote


@dataclass(frozen=True)
class ExtraTreesModel:
    trees: tuple[_TreeNode, ...]
    n_classes: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=int)
        for i, x in enumerate(X):
            votes = np.zeros(self.n_classes)
            for tree in self.trees:
                votes += _tree_vote(tree, x)
            out[i] = int(np.argmax(votes))
        return out


def _train_extra_trees(spec: ModelSpec, X, y, class_weight) -> ExtraTreesModel:
    hp = spec.hyperparams()
    n_trees = int(hp["n_trees"])
    n_classes = len(class_weight)
    sample_weight = np.asarray(class_weight, float)[y]
    max_features = math.ceil(math.sqrt(X.shape[1]))
    trees = tuple(
        _grow_tree(
            X, y, sample_weight, n_classes, max_features,
            np.random.default_rng([spec.seed, t]),
        )
        for t in range(n_trees)
    )
    return ExtraTreesModel(trees=trees, n_classes=n_classes)


# ---------------------------------------------------------------- linear SVM


@dataclass(frozen=True)
class SVMModel:
    weights: np.ndarray  # (n_trained_classes, d + 1), bias folded in as last column
    classes: np.ndarray  # global class index per row of `weights`

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        aug = np.hstack([X, np.ones((X.shape[0], 1))])
        margins = aug @ self.weights.T
        return self.classes[np.argmax(margins, axis=1)]


def _train_svm(spec: ModelSpec, X, y, class_weight) -> SVMModel:
    """One-vs-rest Pegasos: subgradient descent on weighted hinge + L2."""
    hp = spec.hyperparams()
    lam, epochs = float(hp["lambda"]), int(hp["epochs"])
    classes = np.unique(y)
    aug = np.hstack([X, np.ones((X.shape[0], 1))])
    sample_weight = np.asarray(class_weight, float)[y]
    all_weights = np.zeros((len(classes), aug.shape[1]))
    for ci, cls in enumerate(classes):
        rng = np.random.default_rng([spec.seed, int(ci)])
        target = np.where(y == cls, 1.0, -1.0)
        w = np.zeros(aug.shape[1])
        t = 0
        for _ in range(epochs):
            for idx in rng.permutation(len(target)):
                t += 1
                eta = 1.0 / (lam * t)
                margin = target[idx] * (w @ aug[idx])
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    w += eta * sample_weight[idx] * target[idx] * aug[idx]
        all_weights[ci] = w
    return SVMModel(weights=all_weights, classes=classes)


# ---------------------------------------------------------------- MLP


@dataclass
class MLPModel:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    classes: np.ndarray  # global class index per output unit

    def logits(self, X: np.ndarray) -> np.ndarray:
        hidden = np.maximum(X @ self.W1 + self.b1, 0.0)
        return hidden @ self.W2 + self.b2

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.classes[np.argmax(self.logits(X), axis=1)]


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mlp_loss(model: MLPModel, X: np.ndarray, y_local: np.ndarray, sample_weight: np.ndarray) -> float:
    """Class-weighted cross-entropy, normalized by total sample weight."""
    probs = _softmax(model.logits(X))
    picked = probs[np.arange(len(y_local)), y_local]
    return float(-(sample_weight * np.log(picked)).sum() / sample_weight.sum())


def mlp_grad(
    model: MLPModel, X: np.ndarray, y_local: np.ndarray, sample_weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradient of mlp_loss in (W1, b1, W2, b2)."""
    z1 = X @ model.W1 + model.b1
    a1 = np.maximum(z1, 0.0)
    probs = _softmax(a1 @ model.W2 + model.b2)
    delta2 = probs.copy()
    delta2[np.arange(len(y_local)), y_local] -= 1.0
    delta2 *= (sample_weight / sample_weight.sum())[:, None]
    gW2 = a1.T @ delta2
    gb2 = delta2.sum(axis=0)
    delta1 = (delta2 @ model.W2.T) * (z1 > 0)
    gW1 = X.T @ delta1
    gb1 = delta1.sum(axis=0)
    return gW1, gb1, gW2, gb2


def init_mlp(
    n_features: int, n_outputs: int, hidden: int, seed: int, classes: np.ndarray
) -> MLPModel:
    """Uniform init scaled by each layer's fan-in; zero biases."""
    rng = np.random.default_rng([seed])
    lim1 = 1.0 / math.sqrt(n_features)
    lim2 = 1.0 / math.sqrt(hidden)
    return MLPModel(
        W1=rng.uniform(-lim1, lim1, size=(n_features, hidden)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-lim2, lim2, size=(hidden, n_outputs)),
        b2=np.zeros(n_outputs),
        classes=classes,
    )


def _train_mlp(spec: ModelSpec, X, y, class_weight) -> MLPModel:
    hp = spec.hyperparams()
    hidden, lr, epochs = int(hp["hidden"]), float(hp["learning_rate"]), int(hp["epochs"])
    classes = np.unique(y)
    local = {c: i for i, c in enumerate(classes)}
    y_local = np.asarray([local[c] for c in y])
    sample_weight = np.asarray(class_weight, float)[y]
    model = init_mlp(X.shape[1], len(classes), hidden, spec.seed, classes)
    for _ in range(epochs):
        gW1, gb1, gW2, gb2 = mlp_grad(model, X, y_local, sample_weight)
        model.W1 = model.W1 - lr * gW1
        model.b1 = model.b1 - lr * gb1
        model.W2 = model.W2 - lr * gW2
        model.b2 = model.b2 - lr * gb2
    return model


# ---------------------------------------------------------------- dispatch

_TRAINERS = {
    "knn": _train_knn,
    "extra_trees": _train_extra_trees,
    "svm": _train_svm,
    "mlp": _train_mlp,
}


def train(family: str, spec: ModelSpec, X, y, class_weight) -> object:
    """Fit one model family; `class_weight` is indexed by global class label."""
    if family not in _TRAINERS:
        raise ValidationError("family", f"unknown family {family!r}")
    if family != spec.family:
        raise ValidationError("family", "family does not match spec")
    X, y = _check_training_inputs(X, y)
    class_weight = np.asarray(class_weight, dtype=float)
    if y.min() < 0 or y.max() >= len(class_weight):
        raise ValidationError("y", "label outside class_weight range")
    return _TRAINERS[family](spec, X, y, class_weight)


def predict(model, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValidationError("X", "must be a non-empty 2-D matrix")
    return model.predict(X)
