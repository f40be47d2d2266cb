"""Lexical baseline classifiers and the per-URL prior table they export.

Logistic regression and Gaussian naive Bayes are fit directly with numpy on
z-scored features. The random forest grows its trees with scikit-learn's CART
learner on our own bootstrap samples; the fitted trees are exported to plain
arrays so that prediction (majority vote fraction) and serialization do not
depend on scikit-learn objects.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .seeding import derive_seed

LOGISTIC_REGRESSION = "logistic_regression"
NAIVE_BAYES = "naive_bayes"
RANDOM_FOREST = "random_forest"
KINDS = (LOGISTIC_REGRESSION, NAIVE_BAYES, RANDOM_FOREST)

MODEL_FORMAT_VERSION = 1


class ModelError(ValueError):
    pass


@dataclass
class Tree:
    """Array-encoded binary decision tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray

    @classmethod
    def leaf(cls, label: int) -> "Tree":
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([label]))

    @classmethod
    def from_sklearn(cls, est) -> "Tree":
        t = est.tree_
        classes = est.classes_
        leaf_class = classes[np.argmax(t.value[:, 0, :], axis=1)].astype(np.int64)
        feature = np.where(t.children_left == -1, -1, t.feature).astype(np.int64)
        return cls(
            feature, t.threshold.astype(np.float64),
            t.children_left.astype(np.int64), t.children_right.astype(np.int64), leaf_class,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        # compare in float32 like the learner that chose the thresholds
        X = np.asarray(X, dtype=np.float32).astype(np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.leaf_class[node]
            f = np.where(internal, feat, 0)
            go_left = X[rows, f] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
            "left": self.left.tolist(), "right": self.right.tolist(),
            "leaf_class": self.leaf_class.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["leaf_class"], dtype=np.int64),
        )


@dataclass
class TrainedModel:
    kind: str
    n_features: int
    manifest_hash: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if k == "trees":
                params[k] = [t.to_dict() for t in v]
            elif isinstance(v, np.ndarray):
                params[k] = v.tolist()
            else:
                params[k] = v
        return {
            "version": MODEL_FORMAT_VERSION, "kind": self.kind, "n_features": self.n_features,
            "manifest_hash": self.manifest_hash, "params": params,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainedModel":
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise ModelError(f"unsupported model format version {d.get('version')!r}")
        params = {}
        for k, v in d["params"].items():
            if k == "trees":
                params[k] = [Tree.from_dict(t) for t in v]
            elif isinstance(v, list):
                params[k] = np.asarray(v, dtype=np.float64)
            else:
                params[k] = v
        return cls(d["kind"], int(d["n_features"]), d["manifest_hash"], params)


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _zscore_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def train(
    kind: str,
    features: np.ndarray,
    labels: Sequence[int],
    *,
    manifest: str = "",
    seed: int = 0,
    n_trees: int = 100,
    max_depth: int = 12,
    lr_epochs: int = 500,
    lr_rate: float = 0.5,
    l2: float = 1e-4,
    var_floor: float = 1e-9,
) -> TrainedModel:
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ModelError("features must be an (n, d) matrix matching labels")
    if not np.all(np.isfinite(X)):
        raise ModelError("features must be finite")
    counts = np.bincount(y, minlength=2)
    if len(counts) > 2 or counts.min() < 2:
        raise ModelError(f"need at least 2 samples of each class, got {counts.tolist()}")
    d = X.shape[1]

    if kind == LOGISTIC_REGRESSION:
        mean, std = _zscore_params(X)
        Z = (X - mean) / std
        w = np.zeros(d)
        b = 0.0
        n = len(Z)
        for _ in range(lr_epochs):
            err = _sigmoid(Z @ w + b) - y
            w -= lr_rate * (Z.T @ err / n + l2 * w)
            b -= lr_rate * err.mean()
        params = {"mean": mean, "std": std, "weights": w, "bias": float(b)}
    elif kind == NAIVE_BAYES:
        mean, std = _zscore_params(X)
        Z = (X - mean) / std
        theta = np.stack([Z[y == c].mean(axis=0) for c in (0, 1)])
        var = np.stack([np.maximum(Z[y == c].var(axis=0), var_floor) for c in (0, 1)])
        params = {
            "mean": mean, "std": std, "theta": theta, "var": var,
            "log_prior": np.log(counts / counts.sum()),
        }
    elif kind == RANDOM_FOREST:
        from sklearn.tree import DecisionTreeClassifier

        max_features = int(math.ceil(math.sqrt(d)))
        trees = []
        for t in range(n_trees):
            tree_seed = derive_seed(seed, "rf-tree", t)
            rng = np.random.default_rng(tree_seed)
            idx = rng.integers(0, len(X), size=len(X))
            yb = y[idx]
            if np.all(yb == yb[0]):
                trees.append(Tree.leaf(int(yb[0])))
                continue
            est = DecisionTreeClassifier(
                criterion="gini", max_depth=max_depth, max_features=max_features,
                random_state=tree_seed % (2**32),
            ).fit(X[idx], yb)
            trees.append(Tree.from_sklearn(est))
        params = {"trees": trees}
    else:
        raise ModelError(f"unknown model kind {kind!r}")
    return TrainedModel(kind, d, manifest, params)


def predict_proba_matrix(model: TrainedModel, X: np.ndarray, manifest: str | None = None) -> np.ndarray:
    """Row-wise ``[p_benign, p_phish]`` for a feature matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if manifest is not None and model.manifest_hash and manifest != model.manifest_hash:
        raise ModelError(f"feature manifest mismatch: model {model.manifest_hash}, input {manifest}")
    if X.shape[1] != model.n_features:
        raise ModelError(f"expected {model.n_features} features, got {X.shape[1]}")
    p = model.params
    if model.kind == LOGISTIC_REGRESSION:
        phish = _sigmoid(((X - p["mean"]) / p["std"]) @ p["weights"] + p["bias"])
    elif model.kind == NAIVE_BAYES:
        Z = (X - p["mean"]) / p["std"]
        ll = np.stack(
            [
                p["log_prior"][c]
                - 0.5 * np.sum(np.log(2 * np.pi * p["var"][c]) + (Z - p["theta"][c]) ** 2 / p["var"][c], axis=1)
                for c in (0, 1)
            ],
            axis=1,
        )
        ll -= ll.max(axis=1, keepdims=True)
        e = np.exp(ll)
        phish = e[:, 1] / e.sum(axis=1)
    elif model.kind == RANDOM_FOREST:
        trees = p["trees"]
        votes = np.zeros(len(X))
        for tree in trees:
            votes += tree.predict(X) == 1
        phish = votes / len(trees)
    else:
        raise ModelError(f"unknown model kind {model.kind!r}")
    return np.column_stack([1.0 - phish, phish])


def predict_proba(model: TrainedModel, features, manifest: str | None = None) -> np.ndarray:
    values = getattr(features, "values", features)
    if manifest is None and hasattr(features, "manifest_hash"):
        manifest = features.manifest_hash
    return predict_proba_matrix(model, np.asarray(values, dtype=np.float64).reshape(1, -1), manifest)[0]


PriorTable = dict  # url -> (p_benign, p_phish)


def export_priors(model: TrainedModel, test_urls: Sequence[str], features: np.ndarray) -> PriorTable:
    if len(test_urls) == 0:
        return {}
    probs = predict_proba_matrix(model, features)
    return {u: (float(pb), float(pp)) for u, (pb, pp) in zip(test_urls, probs)}


def save_priors(priors: PriorTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["url", "p_benign", "p_phish"])
        for url in sorted(priors):
            pb, pp = priors[url]
            w.writerow([url, repr(float(pb)), repr(float(pp))])


def load_priors(path: str | Path) -> PriorTable:
    out: PriorTable = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pb, pp = float(row["p_benign"]), float(row["p_phish"])
            if abs(pb + pp - 1.0) > 1e-9 or min(pb, pp) < 0:
                raise ModelError(f"prior row for {row['url']!r} is not a probability pair")
            out[row["url"]] = (pb, pp)
    return out
