"""Random forest of CART regression trees.

Trees split on raw inputs and store raw target means: CART is invariant to
monotone rescaling of the inputs, and leaf means commute with affine target
maps, so scaling would only add rounding.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .base import TrainedModel, as_arrays
from .errors import EmptyDataset, InvalidConfig
from .scaling import fit_scaler


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    feature_subsample: float = 1.0
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidConfig("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidConfig("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise InvalidConfig("min_samples_leaf must be >= 1")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise InvalidConfig("feature_subsample must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _leaf_value(y):
    # exact for constant targets
    return float(y[0]) if np.all(y == y[0]) else float(np.mean(y))


def build_tree(X, y, max_depth=None, min_leaf=1, n_features=None, rng=None):
    """Grow one CART tree depth first.  Returns a dict of node arrays:
    feature (-1 at leaves), threshold, left, right, value."""
    d = X.shape[1]
    n_features = d if n_features is None else n_features
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        ys = y[idx]
        value.append(_leaf_value(ys))
        if idx.size < 2 * min_leaf or np.all(ys == ys[0]):
            return node
        if max_depth is not None and depth >= max_depth:
            return node
        if n_features < d:
            feats = np.sort(rng.choice(d, size=n_features, replace=False))
        else:
            feats = np.arange(d)
        f, t, gain = kernels.best_split(X[idx], ys, feats, min_leaf)
        if f < 0 or not gain > 0.0:
            return node
        go_left = X[idx, f] <= t
        feature[node] = f
        threshold[node] = t
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=float),
    }


def tree_predict(tree, X):
    X = np.asarray(X, dtype=float)
    node = np.zeros(X.shape[0], dtype=np.int64)
    feat = tree["feature"]
    rows = np.arange(X.shape[0])
    while True:
        f = feat[node]
        inner = f >= 0
        if not inner.any():
            break
        r, nd = rows[inner], node[inner]
        go_left = X[r, f[inner]] <= tree["threshold"][nd]
        node[inner] = np.where(go_left, tree["left"][nd], tree["right"][nd])
    return tree["value"][node]


def aggregate(preds):
    """Mean over trees (axis 0); exact where all trees agree."""
    preds = np.asarray(preds, dtype=float)
    out = np.mean(preds, axis=0)
    same = np.all(preds == preds[:1], axis=0)
    return np.where(same, preds[0], out)


def fit_forest(X, y, config: RFConfig, rng):
    n, d = X.shape
    k = max(1, int(round(config.feature_subsample * d)))
    trees = []
    for _ in range(config.n_trees):
        idx = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
        trees.append(build_tree(X[idx], y[idx], config.max_depth, config.min_samples_leaf, k, rng))
    return trees


def train_rf(ds, config: RFConfig | None = None) -> TrainedModel:
    """One forest per target column, all drawn from one seeded stream."""
    config = config or RFConfig()
    if len(ds) == 0:
        raise EmptyDataset("dataset has no rows")
    X, Y = as_arrays(ds)
    rng = np.random.default_rng(config.seed)
    forests = [fit_forest(X, Y[:, j], config, rng) for j in range(Y.shape[1])]
    return TrainedModel(
        "rf", {"forests": forests}, fit_scaler(ds), config.to_dict(), ds.input_names, ds.target_names,
        {"n_nodes": int(sum(t["feature"].size for f in forests for t in f))},
    )


def predict_raw(model: TrainedModel, X):
    cols = [aggregate([tree_predict(t, X) for t in forest]) for forest in model.params["forests"]]
    return np.column_stack(cols)
