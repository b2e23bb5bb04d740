"""Per-column min-max scaling onto [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyDataset


@dataclass(frozen=True, eq=False)
class ColumnScaler:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError("scaler needs hi >= lo per column")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self):
        return self.lo.size

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.width:
            raise DimensionMismatch(f"expected {self.width} columns, got shape {x.shape}")
        return x

    def apply(self, x):
        x = self._check(x)
        span = self.hi - self.lo
        flat = span == 0
        out = (x - self.lo) / np.where(flat, 1.0, span)
        out[:, flat] = 0.5
        return out

    def invert(self, s):
        s = self._check(s)
        span = self.hi - self.lo
        out = s * span + self.lo
        # constant columns come back as their single value, exactly
        out[:, span == 0] = self.lo[span == 0]
        return out

    def __eq__(self, other):
        return (
            isinstance(other, ColumnScaler)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )


def fit_columns(x) -> ColumnScaler:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyDataset("cannot fit a scaler on an empty array")
    return ColumnScaler(x.min(axis=0), x.max(axis=0))


@dataclass(frozen=True, eq=True)
class ScalerParams:
    inputs: ColumnScaler
    targets: ColumnScaler

    def to_dict(self):
        return {
            "input_min": self.inputs.lo.tolist(),
            "input_max": self.inputs.hi.tolist(),
            "target_min": self.targets.lo.tolist(),
            "target_max": self.targets.hi.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            ColumnScaler(d["input_min"], d["input_max"]),
            ColumnScaler(d["target_min"], d["target_max"]),
        )


def fit_scaler(ds) -> ScalerParams:
    """Fit input and target scalers on a Dataset."""
    if len(ds) == 0:
        raise EmptyDataset("dataset has no rows")
    return ScalerParams(fit_columns(ds.inputs), fit_columns(ds.targets))
