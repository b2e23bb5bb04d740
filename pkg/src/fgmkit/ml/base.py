from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scaling import ScalerParams

FAMILIES = ("lr", "mlp", "rf", "svr")


def _freeze(obj):
    if isinstance(obj, np.ndarray):
        obj = obj.copy()
        obj.setflags(write=False)
        return obj
    if isinstance(obj, dict):
        return {k: _freeze(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    return obj


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """A fitted regressor.  Parameters are read-only arrays, so a model can
    be shared between threads for prediction."""

    family: str
    params: dict
    scaler: ScalerParams
    config: dict
    input_names: tuple
    target_names: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        object.__setattr__(self, "params", _freeze(dict(self.params)))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))

    @property
    def n_inputs(self):
        return len(self.input_names)

    @property
    def n_targets(self):
        return len(self.target_names)


def as_arrays(ds):
    X = np.asarray(ds.inputs, dtype=float)
    Y = np.asarray(ds.targets, dtype=float)
    return X, Y
