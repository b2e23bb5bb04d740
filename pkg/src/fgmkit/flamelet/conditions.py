"""Scalar dissipation rate profiles and boundary streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfcinv

from ..mech.model import ONE_ATM, Mechanism


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ChiProfile:
    chi_st: float
    z_st: float
    shape: str = "analytic-erfc"

    def __post_init__(self):
        if not self.chi_st > 0:
            raise ValueError("chi_st must be positive")
        if not 0.0 < self.z_st < 1.0:
            raise ValueError("z_st must lie in (0, 1)")
        if self.shape not in ("analytic-erfc", "constant"):
            raise ValueError(f"unknown chi shape {self.shape!r}")


def chi_of_z(profile: ChiProfile, z):
    """Scalar dissipation rate in 1/s at mixture fraction ``z``."""
    z = np.asarray(z, dtype=float)
    if np.any((z < 0.0) | (z > 1.0)) or not np.all(np.isfinite(z)):
        raise DomainError("mixture fraction outside [0, 1]")
    if profile.shape == "constant":
        return np.full(z.shape, profile.chi_st)[()]
    with np.errstate(over="ignore", invalid="ignore"):
        x = erfcinv(2.0 * z)
        x_st = erfcinv(2.0 * profile.z_st)
        out = profile.chi_st * np.exp(2.0 * (x_st * x_st - x * x))
    out = np.where(np.isinf(x), 0.0, out)
    return out[()]


@dataclass(frozen=True, eq=False)
class BoundaryConditions:
    """Fuel stream at Z=1, oxidizer stream at Z=0."""

    t_fuel: float
    t_ox: float
    y_fuel: np.ndarray
    y_ox: np.ndarray
    pressure: float = ONE_ATM

    def __post_init__(self):
        for name in ("y_fuel", "y_ox"):
            y = np.array(getattr(self, name), dtype=float)
            if np.any(y < 0) or abs(y.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} must be nonnegative and sum to 1")
            y.setflags(write=False)
            object.__setattr__(self, name, y)
        if not (self.t_fuel > 0 and self.t_ox > 0 and self.pressure > 0):
            raise ValueError("temperatures and pressure must be positive")

    def __eq__(self, other):
        return (
            isinstance(other, BoundaryConditions)
            and self.t_fuel == other.t_fuel
            and self.t_ox == other.t_ox
            and self.pressure == other.pressure
            and np.array_equal(self.y_fuel, other.y_fuel)
            and np.array_equal(self.y_ox, other.y_ox)
        )

    def to_dict(self, names):
        return {
            "t_fuel": self.t_fuel,
            "t_ox": self.t_ox,
            "pressure": self.pressure,
            "y_fuel": {n: float(v) for n, v in zip(names, self.y_fuel) if v},
            "y_ox": {n: float(v) for n, v in zip(names, self.y_ox) if v},
        }

    @classmethod
    def from_dict(cls, mech: Mechanism, d):
        return cls(
            t_fuel=float(d["t_fuel"]),
            t_ox=float(d["t_ox"]),
            y_fuel=composition_vector(mech, d["y_fuel"]),
            y_ox=composition_vector(mech, d["y_ox"]),
            pressure=float(d.get("pressure", ONE_ATM)),
        )


def composition_vector(mech: Mechanism, comp: dict, molar=False):
    y = np.zeros(mech.n_species)
    for name, v in comp.items():
        y[mech.species_index(name)] = v
    if molar:
        y = y * mech.molar_masses
    return y / y.sum()


def default_bc(mech: Mechanism) -> BoundaryConditions:
    """Methane at 300.15 K against air (21/79 O2/N2 by volume) at 300 K, 1 atm."""
    air = composition_vector(mech, {"O2": 0.21, "N2": 0.79}, molar=True)
    fuel = composition_vector(mech, {"CH4": 1.0})
    return BoundaryConditions(t_fuel=300.15, t_ox=300.0, y_fuel=fuel, y_ox=air, pressure=ONE_ATM)


def _oxygen_demand(mech: Mechanism, y):
    """kmol O2 needed minus kmol O2 available per kg of mixture (C->CO2, H->H2O)."""
    moles = mech.element_matrix @ (np.asarray(y) / mech.molar_masses)
    get = dict(zip(mech.elements, moles)).get
    return get("C", 0.0) + 0.25 * get("H", 0.0) - 0.5 * get("O", 0.0)


def stoichiometric_z(mech: Mechanism, bc: BoundaryConditions) -> float:
    b_f = _oxygen_demand(mech, bc.y_fuel)
    b_o = _oxygen_demand(mech, bc.y_ox)
    if not (b_f > 0 > b_o):
        raise ValueError("streams do not bracket a stoichiometric mixture")
    return float(-b_o / (b_f - b_o))
