"""Family dispatch, prediction, evaluation and the model file format."""

from __future__ import annotations

import hashlib
import json
import time

import numpy as np

from . import forest, linear, mlp, svr
from .base import TrainedModel
from .errors import DimensionMismatch, InvalidConfig
from .metrics import TrainReport, accuracy, mse, negative_counts, per_target_accuracy
from .scaling import ScalerParams

MODEL_MAGIC = "FGMMODEL 1"

CONFIGS = {
    "lr": linear.LRConfig,
    "mlp": mlp.MLPConfig,
    "rf": forest.RFConfig,
    "svr": svr.SVRConfig,
}
TRAINERS = {
    "lr": linear.train_lr_sgd,
    "mlp": mlp.train_mlp,
    "rf": forest.train_rf,
    "svr": svr.train_svr,
}


def make_config(family, options=None):
    if family not in CONFIGS:
        raise InvalidConfig(f"unknown model family {family!r}")
    if isinstance(options, CONFIGS[family]):
        return options
    options = dict(options or {})
    unknown = set(options) - set(CONFIGS[family].__dataclass_fields__)
    if unknown:
        raise InvalidConfig(f"unknown {family} options: {sorted(unknown)}")
    return CONFIGS[family](**options)


def train(family, ds, config=None) -> TrainedModel:
    return TRAINERS[family](ds, make_config(family, config))


def predict_scaled(model: TrainedModel, inputs):
    """Predictions in the model's scaled target space."""
    X = _check_inputs(model, inputs)
    if model.family == "rf":
        return model.scaler.targets.apply(forest.predict_raw(model, X))
    Xs = model.scaler.inputs.apply(X)
    if model.family == "lr":
        return linear.predict_scaled(model, Xs)
    if model.family == "mlp":
        return mlp.predict_scaled(model, Xs)
    return svr.predict_scaled(model, Xs)


def predict(model: TrainedModel, inputs, clamp=False):
    """Targets in physical units.  Negative mass fractions are kept unless
    ``clamp`` is set."""
    X = _check_inputs(model, inputs)
    if model.family == "rf":
        out = forest.predict_raw(model, X)
    else:
        out = model.scaler.targets.invert(predict_scaled(model, X))
    if clamp:
        species = [j for j, n in enumerate(model.target_names) if n != "T"]
        out[:, species] = np.maximum(out[:, species], 0.0)
    return out


def _check_inputs(model, inputs):
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1 and X.size == model.n_inputs:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"model expects {model.n_inputs} inputs, got shape {X.shape}")
    return X


def evaluate(model: TrainedModel, ds, train_time=0.0) -> TrainReport:
    if tuple(ds.target_names) != model.target_names:
        raise DimensionMismatch("dataset targets differ from the model's")
    t0 = time.perf_counter()
    raw = predict(model, ds.inputs)
    predict_time = time.perf_counter() - t0
    scale = model.scaler.targets.apply
    pred, truth = scale(raw), scale(ds.targets)
    per = per_target_accuracy(pred, truth)
    return TrainReport(
        accuracy(pred, truth),
        mse(pred, truth),
        train_time,
        predict_time,
        {n: float(a) for n, a in zip(model.target_names, per)},
        negative_counts(raw, model.target_names),
    )


def train_and_evaluate(family, train_ds, test_ds, config=None):
    cfg = make_config(family, config)
    t0 = time.perf_counter()
    model = TRAINERS[family](train_ds, cfg)
    elapsed = time.perf_counter() - t0
    return model, evaluate(model, test_ds, elapsed)


def split_dataset(ds, test_fraction=0.2, seed=0):
    """Seeded random split; returns (train, test)."""
    n = len(ds)
    n_test = int(round(test_fraction * n))
    if not 0 < n_test < n:
        raise ValueError("split leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    test, tr = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return _rows(ds, tr), _rows(ds, test)


def _rows(ds, idx):
    return type(ds)(ds.inputs[idx], ds.targets[idx], ds.input_names, ds.target_names)


# -- file format --------------------------------------------------------------


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.dtype.str, "shape": list(obj.shape), "data": obj.ravel().tolist()}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["data"], dtype=np.dtype(obj["__array__"])).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_text(model: TrainedModel) -> str:
    body = json.dumps(
        {
            "family": model.family,
            "config": _encode(model.config),
            "input_names": list(model.input_names),
            "target_names": list(model.target_names),
            "scaler": model.scaler.to_dict(),
            "metadata": _encode(model.metadata),
            "params": _encode(model.params),
        },
        sort_keys=True,
        allow_nan=False,
    )
    digest = hashlib.sha256(body.encode()).hexdigest()
    return f"{MODEL_MAGIC}\nsha256 {digest}\n{body}\n"


class ModelFormatError(ValueError):
    pass


def model_from_text(text: str) -> TrainedModel:
    lines = text.split("\n", 2)
    if len(lines) < 3 or lines[0] != MODEL_MAGIC or not lines[1].startswith("sha256 "):
        raise ModelFormatError("not a model file")
    body = lines[2].rstrip("\n")
    if hashlib.sha256(body.encode()).hexdigest() != lines[1][7:]:
        raise ModelFormatError("content hash mismatch")
    d = json.loads(body)
    config = _decode(d["config"])
    if "hidden_layers" in config:
        config["hidden_layers"] = list(config["hidden_layers"])
    return TrainedModel(
        d["family"],
        _decode(d["params"]),
        ScalerParams.from_dict(d["scaler"]),
        config,
        d["input_names"],
        d["target_names"],
        _decode(d["metadata"]),
    )


def save_model(model: TrainedModel, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
