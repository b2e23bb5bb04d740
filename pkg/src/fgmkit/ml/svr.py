"""epsilon-insensitive support vector regression, one model per target."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .base import TrainedModel, as_arrays
from .errors import EmptyDataset, InvalidConfig, NotConverged
from .scaling import fit_scaler


@dataclass(frozen=True)
class SVRConfig:
    kernel: str = "rbf"
    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | None = None  # None: 1 / (n_features * var(X_scaled))
    tol: float = 1e-3
    max_passes: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise InvalidConfig("kernel must be 'linear' or 'rbf'")
        if not self.C > 0 or not self.epsilon >= 0 or not self.tol > 0 or self.max_passes < 1:
            raise InvalidConfig("need C > 0, epsilon >= 0, tol > 0, max_passes >= 1")
        if self.gamma is not None and not self.gamma > 0:
            raise InvalidConfig("gamma must be > 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def gram(kind, gamma, A, B):
    if kind == "linear":
        return A @ B.T
    d2 = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(d2, 0.0))


def bias(a, G, C):
    """Offset from the final dual state: average over free variables, else
    the midpoint of the feasible interval."""
    n = a.size // 2
    s = np.concatenate([np.ones(n), -np.ones(n)])
    yg = s * G
    free = (a > 0.0) & (a < C)
    if free.any():
        rho = np.sum(yg[free]) / np.count_nonzero(free)
    else:
        at_up = a >= C
        ub_mask = (at_up & (s < 0)) | (~at_up & (s > 0))
        ub = np.min(yg[ub_mask]) if ub_mask.any() else np.inf
        lb = np.max(yg[~ub_mask]) if (~ub_mask).any() else -np.inf
        rho = 0.5 * (ub + lb)
    return -float(rho)


def fit_column(Xs, y, config: SVRConfig, gamma):
    K = gram(config.kernel, gamma, Xs, Xs)
    a, G, iters, ok = kernels.smo_solve(K, y, config.C, config.epsilon, config.tol, config.max_passes * y.size)
    if not ok:
        raise NotConverged(config.max_passes)
    n = y.size
    beta = a[:n] - a[n:]
    sv = np.flatnonzero(beta != 0.0)
    return {"coef": beta[sv], "support": Xs[sv], "bias": bias(a, G, config.C), "iterations": iters}


def train_svr(ds, config: SVRConfig | None = None) -> TrainedModel:
    config = config or SVRConfig()
    if len(ds) == 0:
        raise EmptyDataset("dataset has no rows")
    X, Y = as_arrays(ds)
    scaler = fit_scaler(ds)
    Xs, Ys = scaler.inputs.apply(X), scaler.targets.apply(Y)
    if config.gamma is not None:
        gamma = float(config.gamma)
    else:
        var = float(Xs.var())
        gamma = 1.0 / (Xs.shape[1] * var) if var > 0 else 1.0
    cols = [fit_column(Xs, Ys[:, j], config, gamma) for j in range(Ys.shape[1])]
    models = [{"coef": c["coef"], "support": c["support"], "bias": c["bias"]} for c in cols]
    return TrainedModel(
        "svr", {"models": models, "gamma": gamma}, scaler, config.to_dict(), ds.input_names, ds.target_names,
        {"iterations": [c["iterations"] for c in cols], "n_support": [int(c["coef"].size) for c in cols]},
    )


def predict_scaled(model: TrainedModel, Xs):
    kind, gamma = model.config["kernel"], model.params["gamma"]
    cols = []
    for m in model.params["models"]:
        if m["coef"].size:
            cols.append(gram(kind, gamma, Xs, m["support"]) @ m["coef"] + m["bias"])
        else:
            cols.append(np.full(Xs.shape[0], m["bias"]))
    return np.column_stack(cols)
