"""NASA-7 thermodynamic properties, vectorized over temperature."""

from __future__ import annotations

import numpy as np

from .errors import TemperatureOutOfRange
from .model import GAS_CONSTANT, Mechanism


def check_temperature(mech: Mechanism, T):
    t_min, t_max = mech.t_range
    T = np.asarray(T, dtype=float)
    if T.size and (np.min(T) < t_min or np.max(T) > t_max or not np.all(np.isfinite(T))):
        bad = T[(T < t_min) | (T > t_max) | ~np.isfinite(T)].flat[0]
        raise TemperatureOutOfRange(float(bad), t_min, t_max)
    return T


def _coeffs(mech, T):
    """NASA coefficients per (species, point): shape (S, 7, *T.shape)."""
    T = np.asarray(T, dtype=float)
    high = T[None, ...] >= mech.t_mid.reshape((-1,) + (1,) * T.ndim)
    lo = mech.nasa_low.reshape(mech.nasa_low.shape + (1,) * T.ndim)
    hi = mech.nasa_high.reshape(mech.nasa_high.shape + (1,) * T.ndim)
    return np.where(high[:, None, ...], hi, lo)


def cp_R(mech: Mechanism, T):
    """Dimensionless species heat capacities cp/R, shape (S, *T.shape)."""
    a = _coeffs(mech, T)
    return a[:, 0] + T * (a[:, 1] + T * (a[:, 2] + T * (a[:, 3] + T * a[:, 4])))


def h_RT(mech: Mechanism, T):
    a = _coeffs(mech, T)
    return (
        a[:, 0]
        + T * (a[:, 1] / 2 + T * (a[:, 2] / 3 + T * (a[:, 3] / 4 + T * a[:, 4] / 5)))
        + a[:, 5] / T
    )


def s_R(mech: Mechanism, T):
    a = _coeffs(mech, T)
    return (
        a[:, 0] * np.log(T)
        + T * (a[:, 1] + T * (a[:, 2] / 2 + T * (a[:, 3] / 3 + T * a[:, 4] / 4)))
        + a[:, 6]
    )


def g_RT(mech: Mechanism, T):
    return h_RT(mech, T) - s_R(mech, T)


def species_cp_mass(mech: Mechanism, T):
    """J/(kg K) per species, shape (S, *T.shape)."""
    T = np.asarray(T, dtype=float)
    W = mech.molar_masses.reshape((-1,) + (1,) * T.ndim)
    return cp_R(mech, T) * GAS_CONSTANT / W


def species_enthalpy_mass(mech: Mechanism, T):
    """J/kg per species including formation enthalpy, shape (S, *T.shape)."""
    T = np.asarray(T, dtype=float)
    W = mech.molar_masses.reshape((-1,) + (1,) * T.ndim)
    return h_RT(mech, T) * GAS_CONSTANT * T / W


def enthalpy_species(mech: Mechanism, k: int, T):
    T = check_temperature(mech, T)
    return species_enthalpy_mass(mech, T)[k]


def cp_species(mech: Mechanism, k: int, T):
    T = check_temperature(mech, T)
    return species_cp_mass(mech, T)[k]


def _check_Y(Y):
    Y = np.asarray(Y, dtype=float)
    if np.any(Y < -1e-12):
        raise ValueError("mass fractions must be nonnegative")
    if np.any(np.abs(Y.sum(axis=0) - 1.0) > 1e-6):
        raise ValueError("mass fractions must sum to 1")
    return Y


def cp_mixture(mech: Mechanism, T, Y):
    """Mass-weighted mixture cp in J/(kg K); Y has shape (S,) or (S, n)."""
    T = check_temperature(mech, T)
    Y = _check_Y(Y)
    return np.sum(Y * species_cp_mass(mech, T), axis=0)


def enthalpy_mixture(mech: Mechanism, T, Y):
    T = check_temperature(mech, T)
    Y = _check_Y(Y)
    return np.sum(Y * species_enthalpy_mass(mech, T), axis=0)


def mean_molar_mass(mech: Mechanism, Y):
    Y = np.asarray(Y, dtype=float)
    W = mech.molar_masses.reshape((-1,) + (1,) * (Y.ndim - 1))
    return 1.0 / np.sum(Y / W, axis=0)


def density(mech: Mechanism, p, T, Y):
    """Ideal-gas density in kg/m^3."""
    return p * mean_molar_mass(mech, Y) / (GAS_CONSTANT * np.asarray(T, dtype=float))
