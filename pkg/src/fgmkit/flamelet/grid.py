from __future__ import annotations

import numpy as np
from scipy.optimize import brentq


class Grid:
    """Structured mixture-fraction grid on [0, 1].

    ``refinement`` records how the points were built so that a library file
    can reproduce them; it is ``None`` for uniform or user-supplied points.
    """

    def __init__(self, z_points, refinement=None):
        z = np.array(z_points, dtype=float)
        if z.ndim != 1 or z.size < 5:
            raise ValueError("grid needs at least 5 points")
        if z[0] != 0.0 or z[-1] != 1.0:
            raise ValueError("grid must start at Z=0 and end at Z=1")
        if np.any(np.diff(z) <= 0):
            raise ValueError("grid points must be strictly increasing")
        z.setflags(write=False)
        self.z_points = z
        self.refinement = refinement

    @property
    def n(self):
        return self.z_points.size

    def __len__(self):
        return self.z_points.size

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.z_points, other.z_points)

    def __repr__(self):
        return f"Grid(n={self.n}, refinement={self.refinement!r})"

    @property
    def descriptor(self):
        if self.refinement is None:
            return {"kind": "points", "n": self.n}
        return dict(self.refinement)

    @classmethod
    def uniform(cls, n=30):
        z = np.linspace(0.0, 1.0, n)
        return cls(z, {"kind": "uniform", "n": n})

    @classmethod
    def clustered(cls, n=30, z_center=0.055, stretch=5.0):
        """sinh interior clustering; the node nearest the ideal split sits
        exactly at ``z_center``."""
        return cls(
            _clustered_points(n, z_center, stretch),
            {"kind": "sinh", "n": n, "z_center": z_center, "stretch": stretch},
        )

    @classmethod
    def from_descriptor(cls, desc, z_points=None):
        kind = desc.get("kind")
        if kind == "uniform":
            return cls.uniform(desc["n"])
        if kind == "sinh":
            return cls.clustered(desc["n"], desc["z_center"], desc["stretch"])
        if z_points is None:
            raise ValueError(f"cannot rebuild grid of kind {kind!r} without points")
        return cls(z_points)


def _clustered_points(n, zc, beta):
    if not 0.0 < zc < 1.0:
        raise ValueError("cluster centre must lie inside (0, 1)")
    # split point of the classic one-parameter transform
    a = 0.5 / beta * np.log((1 + (np.exp(beta) - 1) * zc) / (1 + (np.exp(-beta) - 1) * zc))
    k = min(max(int(round(a * (n - 1))), 1), n - 2)
    sk = k / (n - 1)
    # right-side stretching chosen so dz/ds is continuous at the split
    left_slope = zc * beta / np.sinh(beta * sk)
    s = np.linspace(0.0, 1.0, n)

    def slope_gap(b):
        return (1 - zc) * b / np.sinh(b * (1 - sk)) - left_slope

    if slope_gap(1e-9) > 0 > slope_gap(200.0):
        b2 = brentq(slope_gap, 1e-9, 200.0)
        right = zc + (1 - zc) * np.sinh(b2 * (s - sk)) / np.sinh(b2 * (1 - sk))
    else:
        # no sinh matches the slope (weak stretch, centre near 0): linear right side
        right = zc + (1 - zc) * (s - sk) / (1 - sk)
    z = np.where(s <= sk, zc * (1 + np.sinh(beta * (s - sk)) / np.sinh(beta * sk)), right)
    z[0], z[k], z[-1] = 0.0, zc, 1.0
    return z
