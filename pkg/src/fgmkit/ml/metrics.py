"""Accuracy and error measures in min-max scaled space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.ndim == 1:
        pred, truth = pred[:, None], truth[:, None]
    if pred.shape[0] == 0:
        raise ShapeMismatch("no rows to score")
    return pred, truth


def column_rmse(pred, truth):
    pred, truth = _pair(pred, truth)
    return np.sqrt(np.mean((pred - truth) ** 2, axis=0))


def accuracy(pred, truth):
    """100 * (1 - RMSE) on scaled columns, RMSE averaged over columns,
    clamped to [0, 100]."""
    r = float(np.mean(column_rmse(pred, truth)))
    return float(np.clip(100.0 * (1.0 - r), 0.0, 100.0))


def per_target_accuracy(pred, truth):
    return np.clip(100.0 * (1.0 - column_rmse(pred, truth)), 0.0, 100.0)


def mse(pred, truth):
    pred, truth = _pair(pred, truth)
    return float(np.mean((pred - truth) ** 2))


@dataclass(frozen=True)
class TrainReport:
    accuracy: float
    mse: float
    train_time: float
    predict_time: float
    per_target: dict = field(default_factory=dict)
    negative_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 100.0 or not self.mse >= 0.0:
            raise ValueError("accuracy must lie in [0, 100] and mse be nonnegative")

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "mse": self.mse,
            "train_time": self.train_time,
            "predict_time": self.predict_time,
            "per_target": dict(self.per_target),
            "negative_counts": dict(self.negative_counts),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["accuracy"]),
            float(d["mse"]),
            float(d.get("train_time", 0.0)),
            float(d.get("predict_time", 0.0)),
            dict(d.get("per_target", {})),
            dict(d.get("negative_counts", {})),
        )


def negative_counts(pred, names, skip=("T",)):
    """Number of negative predictions per mass-fraction column."""
    pred = np.asarray(pred, dtype=float)
    return {n: int(np.count_nonzero(pred[:, j] < 0.0)) for j, n in enumerate(names) if n not in skip}
