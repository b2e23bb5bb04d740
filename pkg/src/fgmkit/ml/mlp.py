"""Fully connected feed-forward regressor trained by backpropagation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .base import TrainedModel, as_arrays
from .errors import Diverged, EmptyDataset, InvalidConfig
from .scaling import fit_scaler

ACTIVATIONS = ("relu", "tanh", "sigmoid")
SOLVERS = ("sgd", "adam", "adadelta")
DEFAULT_RATE = {"sgd": 1e-3, "adam": 1e-3, "adadelta": 1.0}
PATIENCE = 10


@dataclass(frozen=True)
class MLPConfig:
    hidden_layers: tuple = (100,)
    activation: str = "relu"
    solver: str = "adam"
    alpha: float = 1e-4
    tol: float = 1e-4
    max_iter: int = 2000
    batch_size: int = 32
    seed: int = 0
    learning_rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if not self.hidden_layers or any(h < 1 for h in self.hidden_layers):
            raise InvalidConfig("every hidden layer needs at least one neuron")
        if self.activation not in ACTIVATIONS:
            raise InvalidConfig(f"activation must be one of {ACTIVATIONS}")
        if self.solver not in SOLVERS:
            raise InvalidConfig(f"solver must be one of {SOLVERS}")
        if not self.alpha >= 0:
            raise InvalidConfig("alpha must be >= 0")
        if not self.tol > 0:
            raise InvalidConfig("tol must be > 0")
        if self.max_iter < 0 or self.batch_size < 1:
            raise InvalidConfig("max_iter must be >= 0 and batch_size >= 1")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be > 0")

    @property
    def rate(self):
        return self.learning_rate if self.learning_rate is not None else DEFAULT_RATE[self.solver]

    def to_dict(self):
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return expit(z)


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


def init_params(sizes, activation, rng):
    """Glorot-uniform weights (times sqrt 2 for relu layers), zero biases."""
    Ws, bs = [], []
    for k, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        lim = np.sqrt(6.0 / (fi + fo))
        if activation == "relu" and k < len(sizes) - 2:
            lim *= np.sqrt(2.0)
        Ws.append(rng.uniform(-lim, lim, size=(fi, fo)))
        bs.append(np.zeros(fo))
    return Ws, bs


def forward(Ws, bs, X, activation):
    a = X
    zs, acts = [], [X]
    for k, (W, b) in enumerate(zip(Ws, bs)):
        z = a @ W + b
        a = z if k == len(Ws) - 1 else _act(activation, z)
        zs.append(z)
        acts.append(a)
    return a, zs, acts


def loss(Ws, bs, X, Y, alpha, activation):
    """Mean squared error over all entries plus alpha * ||W||^2 / n."""
    out = forward(Ws, bs, X, activation)[0]
    n = X.shape[0]
    return float(np.mean((out - Y) ** 2) + alpha * sum(np.sum(W * W) for W in Ws) / n)


def gradients(Ws, bs, X, Y, alpha, activation):
    """Returns (dW list, db list, loss)."""
    out, zs, acts = forward(Ws, bs, X, activation)
    n = X.shape[0]
    r = out - Y
    value = float(np.mean(r * r) + alpha * sum(np.sum(W * W) for W in Ws) / n)
    delta = 2.0 * r / out.size
    gW, gb = [None] * len(Ws), [None] * len(Ws)
    for k in range(len(Ws) - 1, -1, -1):
        gW[k] = acts[k].T @ delta + 2.0 * alpha * Ws[k] / n
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ Ws[k].T) * _act_grad(activation, zs[k - 1], acts[k])
    return gW, gb, value


def pack(Ws, bs):
    return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in zip(Ws, bs)])


def unpack(theta, sizes):
    Ws, bs, at = [], [], 0
    for fi, fo in zip(sizes[:-1], sizes[1:]):
        Ws.append(theta[at : at + fi * fo].reshape(fi, fo))
        at += fi * fo
        bs.append(theta[at : at + fo])
        at += fo
    return Ws, bs


def layer_sizes(model: TrainedModel):
    return [W.shape[0] for W in model.params["weights"]] + [model.params["weights"][-1].shape[1]]


def backprop_gradient(model: TrainedModel, X, Y, alpha=None):
    """Analytic gradient of the regularized loss, flattened layer by layer
    as (W_1, b_1, W_2, b_2, ...).  X and Y are in scaled space."""
    alpha = model.config["alpha"] if alpha is None else alpha
    gW, gb, _ = gradients(
        list(model.params["weights"]), list(model.params["biases"]),
        np.asarray(X, dtype=float), np.asarray(Y, dtype=float), alpha, model.config["activation"],
    )
    return pack(gW, gb)


class _Optimizer:
    def __init__(self, solver, rate, shapes):
        self.solver, self.rate, self.t = solver, rate, 0
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]

    def step(self, params, grads):
        self.t += 1
        if self.solver == "sgd":
            for p, g in zip(params, grads):
                p -= self.rate * g
        elif self.solver == "adam":
            b1, b2, eps = 0.9, 0.999, 1e-8
            c1 = 1.0 - b1**self.t
            c2 = 1.0 - b2**self.t
            for p, g, m, v in zip(params, grads, self.m, self.v):
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= self.rate * (m / c1) / (np.sqrt(v / c2) + eps)
        else:
            # AdaDelta: running averages of squared gradients and squared steps
            rho, eps = 0.95, 1e-6
            for p, g, eg, ed in zip(params, grads, self.m, self.v):
                eg *= rho
                eg += (1.0 - rho) * g * g
                dx = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
                ed *= rho
                ed += (1.0 - rho) * dx * dx
                p += self.rate * dx


# overflow surfaces as Diverged below, not as warnings
@np.errstate(over="ignore", invalid="ignore")
def fit_scaled(Xs, Ys, config: MLPConfig):
    """Train on already-scaled arrays; returns (weights, biases, epochs, loss)."""
    rng = np.random.default_rng(config.seed)
    sizes = [Xs.shape[1], *config.hidden_layers, Ys.shape[1]]
    Ws, bs = init_params(sizes, config.activation, rng)
    params = [p for pair in zip(Ws, bs) for p in pair]
    opt = _Optimizer(config.solver, config.rate, [p.shape for p in params])
    n = Xs.shape[0]
    best, stall, epoch = np.inf, 0, 0
    last = loss(Ws, bs, Xs, Ys, config.alpha, config.activation)
    for epoch in range(1, config.max_iter + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = Xs[idx], Ys[idx]
            gW, gb, value = gradients(Ws, bs, xb, yb, config.alpha, config.activation)
            total += value * idx.size
            opt.step(params, [g for pair in zip(gW, gb) for g in pair])
        last = total / n
        if not np.isfinite(last) or not all(np.all(np.isfinite(p)) for p in params):
            raise Diverged(f"loss became non-finite at epoch {epoch}")
        if last > best - config.tol:
            stall += 1
        else:
            stall = 0
        best = min(best, last)
        if stall >= PATIENCE:
            break
    return Ws, bs, epoch, float(last)


def train_mlp(ds, config: MLPConfig | None = None) -> TrainedModel:
    config = config or MLPConfig()
    if len(ds) == 0:
        raise EmptyDataset("dataset has no rows")
    X, Y = as_arrays(ds)
    scaler = fit_scaler(ds)
    Ws, bs, epochs, final = fit_scaled(scaler.inputs.apply(X), scaler.targets.apply(Y), config)
    return TrainedModel(
        "mlp",
        {"weights": Ws, "biases": bs},
        scaler,
        config.to_dict(),
        ds.input_names,
        ds.target_names,
        {"epochs": epochs, "final_loss": final},
    )


def predict_scaled(model: TrainedModel, Xs):
    return forward(model.params["weights"], model.params["biases"], Xs, model.config["activation"])[0]


def n_parameters(hidden_layers, n_in=2, n_out=1):
    sizes = [n_in, *hidden_layers, n_out]
    return sum(fi * fo + fo for fi, fo in zip(sizes[:-1], sizes[1:]))
