"""Law-of-mass-action kinetics with Arrhenius forward rates and reverse
rates from NASA-7 equilibrium constants."""

from __future__ import annotations

import numpy as np

from .model import GAS_CONSTANT, ONE_ATM, Mechanism
from .thermo import check_temperature, g_RT


def concentrations(mech: Mechanism, rho, Y):
    """Molar concentrations in kmol/m^3, shape like Y."""
    Y = np.asarray(Y, dtype=float)
    W = mech.molar_masses.reshape((-1,) + (1,) * (Y.ndim - 1))
    return rho * Y / W


def _log_kf(mech, T):
    A, b, Ea = mech.arrhenius
    shape = (-1,) + (1,) * T.ndim
    return (
        np.log(A).reshape(shape)
        + b.reshape(shape) * np.log(T)
        - Ea.reshape(shape) / (GAS_CONSTANT * T)
    )


# Concentration offset (kmol/m^3) regularizing fractional and negative
# orders.  Rates change only where a concentration is comparable to it.
CONC_EPS = 1e-10


def _power(c, o):
    """c**o made smooth at c = 0.

    Negative concentrations count as zero.  Fractional positive orders use
    (c + eps)**o - eps**o so the slope at zero stays finite; negative orders
    use (c + eps)**o.
    """
    c = np.maximum(c, 0.0)
    if o < 0.0:
        return (c + CONC_EPS) ** o
    if o == int(o):
        return c**o
    return (c + CONC_EPS) ** o - CONC_EPS**o


def _mass_action(orders, c):
    """prod_s c_s**orders[r, s] for every reaction."""
    out = np.ones((orders.shape[0],) + c.shape[1:])
    for r, s in zip(*np.nonzero(orders)):
        out[r] *= _power(c[s], orders[r, s])
    return out


def rates_of_progress(mech: Mechanism, T, rho, Y, check=True):
    """Net rate of progress per reaction in kmol/(m^3 s), shape (R, *T.shape)."""
    T = check_temperature(mech, T) if check else np.asarray(T, dtype=float)
    if mech.n_reactions == 0:
        return np.zeros((0,) + T.shape)
    c = concentrations(mech, rho, Y)
    log_kf = _log_kf(mech, T)
    q = np.exp(log_kf) * _mass_action(mech.forward_orders, c)
    rev = mech.reversible_mask
    if rev.any():
        nu = mech.nu_net[rev]
        dg = np.tensordot(nu, g_RT(mech, T), axes=(1, 0))
        dnu = nu.sum(axis=1).reshape((-1,) + (1,) * T.ndim)
        # log Kc = -dG/RT + dnu*log(P0/RT)
        log_kc = -dg + dnu * np.log(ONE_ATM / (GAS_CONSTANT * T))
        log_kr = log_kf[rev] - log_kc
        q[rev] -= np.exp(log_kr) * _mass_action(mech.reverse_orders[rev], c)
    return q


def production_rates(mech: Mechanism, T, rho, Y, check=True):
    """Net mass production rate per species in kg/(m^3 s), shape like Y."""
    T = np.asarray(T, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if check and (np.any(np.asarray(rho) <= 0) or np.any(T <= 0)):
        raise ValueError("temperature and density must be positive")
    q = rates_of_progress(mech, T, rho, Y, check=check)
    W = mech.molar_masses.reshape((-1,) + (1,) * T.ndim)
    return W * np.tensordot(mech.nu_net.T, q, axes=(1, 0))
