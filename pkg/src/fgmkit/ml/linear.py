"""Multi-output linear regression fitted by mini-batch SGD."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .base import TrainedModel, as_arrays
from .errors import Diverged, EmptyDataset, InvalidConfig
from .scaling import fit_scaler


@dataclass(frozen=True)
class LRConfig:
    lr: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0 or self.epochs < 0 or self.batch_size < 1:
            raise InvalidConfig("need lr > 0, epochs >= 0, batch_size >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


# overflow surfaces as Diverged below, not as warnings
@np.errstate(over="ignore", invalid="ignore")
def fit_scaled(Xs, Ys, config: LRConfig):
    rng = np.random.default_rng(config.seed)
    n, d = Xs.shape
    W = np.zeros((d, Ys.shape[1]))
    b = np.zeros(Ys.shape[1])
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            r = Xs[idx] @ W + b - Ys[idx]
            g = 2.0 * r / r.size
            W -= config.lr * (Xs[idx].T @ g)
            b -= config.lr * g.sum(axis=0)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise Diverged(f"weights became non-finite at epoch {epoch + 1}")
    final = float(np.mean((Xs @ W + b - Ys) ** 2))
    if not np.isfinite(final):
        raise Diverged("loss became non-finite")
    return W, b, final


def train_lr_sgd(ds, config: LRConfig | None = None) -> TrainedModel:
    config = config or LRConfig()
    if len(ds) == 0:
        raise EmptyDataset("dataset has no rows")
    X, Y = as_arrays(ds)
    scaler = fit_scaler(ds)
    W, b, final = fit_scaled(scaler.inputs.apply(X), scaler.targets.apply(Y), config)
    return TrainedModel(
        "lr", {"W": W, "b": b}, scaler, config.to_dict(), ds.input_names, ds.target_names,
        {"epochs": config.epochs, "final_loss": final},
    )


def predict_scaled(model: TrainedModel, Xs):
    return Xs @ model.params["W"] + model.params["b"]
