"""Steady flamelet equations in mixture-fraction space.

Unity Lewis numbers, adiabatic, constant pressure::

    rho dY_k/dtau = rho chi / 2 * d2Y_k/dZ2 + w_k
    rho dT/dtau   = rho chi / 2 * d2T/dZ2 - (1/cp) sum_k h_k w_k

Second derivatives use the three-point central formula on the (possibly
nonuniform) grid.  The steady state is reached by pseudo-transient
continuation: implicit Euler in tau, a Newton solve per step with a
finite-difference banded Jacobian, and an adaptive step size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from scipy.optimize import brentq

from ..mech import thermo
from ..mech.errors import TemperatureOutOfRange
from ..mech.kinetics import production_rates
from ..mech.model import GAS_CONSTANT, Mechanism
from .conditions import BoundaryConditions, ChiProfile, chi_of_z, stoichiometric_z
from .grid import Grid

log = logging.getLogger(__name__)


class NotConverged(RuntimeError):
    def __init__(self, residual_norm, steps, chi=None):
        self.residual_norm = residual_norm
        self.steps = steps
        self.chi = chi
        where = f" at chi={chi}" if chi is not None else ""
        super().__init__(
            f"flamelet solve did not converge{where}: residual {residual_norm:.3e} after {steps} steps"
        )


class SingularJacobian(RuntimeError):
    pass


@dataclass
class SolverOptions:
    max_pseudo_steps: int = 600
    dt0: float = 1e-6
    residual_tol: float = 1e-8
    max_newton_per_step: int = 8
    dt_growth: float = 1.5
    dt_max: float = 1e6
    dt_min: float = 1e-14


@dataclass(eq=False)
class FlameletSolution:
    grid: Grid
    chi_st: float
    species_names: tuple
    temperature: np.ndarray
    mass_fractions: np.ndarray
    density: np.ndarray
    converged: bool
    residual_norm: float
    steps: int = 0
    z_st: float = float("nan")
    chi_shape: str = "analytic-erfc"
    info: dict = field(default_factory=dict)

    @property
    def z(self):
        return self.grid.z_points

    def species(self, name):
        return self.mass_fractions[self.species_names.index(name)]

    @property
    def max_temperature(self):
        return float(self.temperature.max())


def inert_index(mech: Mechanism) -> int:
    """Species closed by the mass-fraction sum: N2 when present, else the last."""
    names = mech.species_names
    return names.index("N2") if "N2" in names else len(names) - 1


class FlameletProblem:
    """Discrete residual for one (mechanism, chi profile, boundary, grid)."""

    def __init__(self, mech: Mechanism, profile: ChiProfile, bc: BoundaryConditions, grid: Grid):
        self.mech = mech
        self.profile = profile
        self.bc = bc
        self.grid = grid
        z = grid.z_points
        self.n = z.size
        self.m = z.size - 2
        hm = z[1:-1] - z[:-2]
        hp = z[2:] - z[1:-1]
        self.d2 = (
            2.0 / (hm * (hm + hp)),
            -2.0 / (hm * hp),
            2.0 / (hp * (hm + hp)),
        )
        self.chi = np.asarray(chi_of_z(profile, z[1:-1]), dtype=float)
        self.inert = inert_index(mech)
        self.active = np.array([k for k in range(mech.n_species) if k != self.inert])
        self.nv = 1 + self.active.size
        self.t_range = mech.t_range

    # --- state packing ---------------------------------------------------

    def pack(self, T, Y):
        """Full profiles -> interior unknowns, shape (nv, m)."""
        x = np.empty((self.nv, self.m))
        x[0] = T[1:-1]
        x[1:] = Y[self.active, 1:-1]
        return x

    def expand(self, x):
        T = np.empty(self.n)
        T[0], T[-1] = self.bc.t_ox, self.bc.t_fuel
        T[1:-1] = x[0]
        Y = np.empty((self.mech.n_species, self.n))
        Y[:, 0] = self.bc.y_ox
        Y[:, -1] = self.bc.y_fuel
        Y[self.active, 1:-1] = x[1:]
        Y[self.inert, 1:-1] = 1.0 - x[1:].sum(axis=0)
        return T, Y

    def second_derivative(self, U):
        a, b, c = self.d2
        return a * U[..., :-2] + b * U[..., 1:-1] + c * U[..., 2:]

    # --- residual --------------------------------------------------------

    def density(self, T, Y):
        W = thermo.mean_molar_mass(self.mech, Y)
        return self.bc.pressure * W / (GAS_CONSTANT * T)

    def terms(self, T, Y, magnitude=False):
        """Residual for every species and temperature at interior nodes.

        Returns (F, rho) with F shaped (1 + S, m): row 0 temperature.  With
        ``magnitude`` the sum |transport| + |source| is returned as a third
        item.
        """
        Ti = T[..., 1:-1]
        if np.min(Ti) < self.t_range[0] or np.max(Ti) > self.t_range[1] or not np.all(np.isfinite(Ti)):
            bad = Ti[~((Ti >= self.t_range[0]) & (Ti <= self.t_range[1]))]
            raise TemperatureOutOfRange(float(bad.flat[0]) if bad.size else float("nan"), *self.t_range)
        Yi = Y[..., 1:-1]
        rho = self.density(Ti, Yi)
        wdot = production_rates(self.mech, Ti, rho, Yi, check=False)
        cp = np.sum(Yi * thermo.species_cp_mass(self.mech, Ti), axis=0)
        heat = np.sum(thermo.species_enthalpy_mass(self.mech, Ti) * wdot, axis=0)
        diff = 0.5 * rho * self.chi
        D = np.empty((1 + self.mech.n_species,) + Ti.shape)
        D[0] = diff * self.second_derivative(T)
        D[1:] = diff * self.second_derivative(Y)
        S = np.empty_like(D)
        S[0] = -heat / cp
        S[1:] = wdot
        if magnitude:
            return D + S, rho, np.abs(D) + np.abs(S)
        return D + S, rho

    def steady(self, x):
        T, Y = self.expand(x)
        F, rho = self.terms(T, Y)
        out = np.empty_like(x)
        out[0] = F[0]
        out[1:] = F[1 + self.active]
        return out, rho

    def steady_batch(self, X):
        """steady() for a stack of states X shaped (B, nv, m); returns (B, nv, m)."""
        B = X.shape[0]
        T = np.empty((B, self.n))
        T[:, 0], T[:, -1] = self.bc.t_ox, self.bc.t_fuel
        T[:, 1:-1] = X[:, 0]
        Y = np.empty((self.mech.n_species, B, self.n))
        Y[:, :, 0] = self.bc.y_ox[:, None]
        Y[:, :, -1] = self.bc.y_fuel[:, None]
        Y[self.active, :, 1:-1] = X[:, 1:].transpose(1, 0, 2)
        Y[self.inert, :, 1:-1] = 1.0 - X[:, 1:].sum(axis=1)
        F, _ = self.terms(T, Y)
        out = np.empty_like(X)
        out[:, 0] = F[0]
        out[:, 1:] = F[1 + self.active].transpose(1, 0, 2)
        return out

    def relative_norm(self, x):
        """Steady residual relative to the size of the terms it balances.

        Per unknown: max|F| / (max(|transport| + |source|) + rho chi_st U),
        U being the unknown's magnitude, so a frozen linear profile does not
        divide rounding noise by rounding noise.  Independent of the guess.
        """
        T, Y = self.expand(x)
        F, rho, M = self.terms(T, Y, magnitude=True)
        rows = np.concatenate(([0], 1 + self.active))
        F, M = F[rows], M[rows]
        U = np.maximum(np.max(np.abs(x), axis=1), 1e-3)
        floor = rho.min() * self.profile.chi_st * U
        return float(np.max(np.max(np.abs(F), axis=1) / (np.max(M, axis=1) + floor)))

    # --- Newton machinery --------------------------------------------------

    def steady_jacobian(self, x, F0=None):
        """Finite-difference dF/dx in LAPACK banded storage.

        Unknowns are ordered node-major, so the three-point stencil gives a
        bandwidth of 2 nv - 1 on each side; three colours of nodes are
        perturbed at once.
        """
        nv, m = self.nv, self.m
        bw = 2 * nv - 1
        if F0 is None:
            F0, _ = self.steady(x)
        ab = np.zeros((2 * bw + 1, nv * m))
        floor = np.full(nv, 1e-6)
        floor[0] = 1.0
        delta = 1.0e-7 * np.maximum(np.abs(x), floor[:, None])
        wvar = np.arange(nv)
        combos = [(color, v) for color in range(3) for v in range(nv)]
        X = np.repeat(x[None], len(combos), axis=0)
        for b, (color, v) in enumerate(combos):
            X[b, v, color::3] += delta[v, color::3]
        dFs = self.steady_batch(X) - F0
        for b, (color, v) in enumerate(combos):
            J = np.arange(color, m, 3)
            dF = dFs[b]
            cols = J * nv + v
            for di in (-1, 0, 1):
                I = J + di
                ok = (I >= 0) & (I < m)
                Iv, cv = I[ok], cols[ok]
                rows = Iv[:, None] * nv + wvar[None, :]
                vals = dF[:, Iv].T / delta[v, J[ok]][:, None]
                ab[bw + rows - cv[:, None], np.broadcast_to(cv[:, None], rows.shape)] = vals
        return ab

    def newton_step(self, x_old, dt, max_iter, jac):
        """One implicit Euler step, solving rho_old (x - x_old)/dt = F(x).

        Density in the pseudo-time term is frozen at the start of the step,
        which leaves the steady state unchanged and makes the Newton matrix
        diag(rho_old/dt) - dF/dx exact.
        ``jac`` is a steady Jacobian from an earlier state; it is refreshed
        at the current iterate when the updates stop contracting quickly.
        Returns (x, iterations, jac) with x None on failure.
        """
        nv = self.nv
        bw = 2 * nv - 1
        inv_dt = 1.0 / dt
        _, rho_old = self.steady(x_old)
        diag = np.repeat(rho_old * inv_dt, nv)

        def system(j):
            A = -j
            A[bw] += diag
            return A

        A = system(jac)
        x = x_old.copy()
        atol = np.full((nv, 1), 1e-9)
        atol[0] = 1e-3
        prev = None
        for it in range(1, max_iter + 1):
            F, _ = self.steady(x)
            G = rho_old * (x - x_old) * inv_dt - F
            try:
                dx = solve_banded((bw, bw), A, -G.T.ravel(), check_finite=False)
            except LinAlgError as exc:
                raise SingularJacobian(str(exc)) from exc
            dx = dx.reshape(self.m, nv).T
            if not np.all(np.isfinite(dx)):
                return None, it, jac
            x = x + dx
            err = np.max(np.abs(dx) / (1e-5 * np.abs(x) + atol))
            if err <= 1.0:
                return x, it, jac
            if prev is not None and err > 0.3 * prev:
                jac = self.steady_jacobian(x)
                A = system(jac)
            prev = err
        return None, max_iter, jac


def _burke_schumann_state(mech, bc, z_st):
    """Complete-combustion composition at z_st (C->CO2, H->H2O, inerts carried)."""
    y_mix = z_st * bc.y_fuel + (1.0 - z_st) * bc.y_ox
    names = mech.species_names
    moles = mech.element_matrix @ (y_mix / mech.molar_masses)
    el = dict(zip(mech.elements, moles))
    y = np.zeros(mech.n_species)
    reactive = {"C", "H", "O"}
    for k, name in enumerate(names):
        if not set(mech.composition[name]) & reactive:
            y[k] = y_mix[k]
    if el.get("C", 0.0):
        y[names.index("CO2")] = el["C"] * mech.molar_masses[names.index("CO2")]
    if el.get("H", 0.0):
        y[names.index("H2O")] = 0.5 * el["H"] * mech.molar_masses[names.index("H2O")]
    inert = inert_index(mech)
    y[inert] = 0.0
    y[inert] = 1.0 - y.sum()
    return y


def adiabatic_temperature(mech, bc, z, y_products):
    """Temperature of ``y_products`` carrying the mixed enthalpy of the two streams at ``z``."""
    h_f = thermo.enthalpy_mixture(mech, bc.t_fuel, bc.y_fuel)
    h_o = thermo.enthalpy_mixture(mech, bc.t_ox, bc.y_ox)
    h = z * h_f + (1.0 - z) * h_o
    lo, hi = mech.t_range
    return brentq(lambda T: thermo.enthalpy_mixture(mech, T, y_products) - h, lo, hi, xtol=1e-10)


def initial_guess(mech: Mechanism, bc: BoundaryConditions, grid: Grid, mode="burke-schumann"):
    """Full (T, Y) profiles used to start the pseudo-time march."""
    z = grid.z_points
    if mode == "linear":
        T = bc.t_ox + (bc.t_fuel - bc.t_ox) * z
        Y = bc.y_ox[:, None] + (bc.y_fuel - bc.y_ox)[:, None] * z[None, :]
        return T, Y
    if mode != "burke-schumann":
        raise ValueError(f"unknown initial guess mode {mode!r}")
    names = mech.species_names
    if mech.n_reactions == 0 or "CO2" not in names or "H2O" not in names:
        return initial_guess(mech, bc, grid, "linear")
    try:
        z_st = stoichiometric_z(mech, bc)
    except ValueError:
        return initial_guess(mech, bc, grid, "linear")
    y_st = _burke_schumann_state(mech, bc, z_st)
    t_st = adiabatic_temperature(mech, bc, z_st, y_st)
    lean = z <= z_st
    w_lean = z / z_st
    w_rich = (z - z_st) / (1.0 - z_st)
    T = np.where(lean, bc.t_ox + (t_st - bc.t_ox) * w_lean, t_st + (bc.t_fuel - t_st) * w_rich)
    Y = np.where(
        lean[None, :],
        bc.y_ox[:, None] + (y_st - bc.y_ox)[:, None] * w_lean[None, :],
        y_st[:, None] + (bc.y_fuel - y_st)[:, None] * w_rich[None, :],
    )
    T[0], T[-1] = bc.t_ox, bc.t_fuel
    Y[:, 0], Y[:, -1] = bc.y_ox, bc.y_fuel
    return T, Y


def residual(mech: Mechanism, profile: ChiProfile, bc: BoundaryConditions, grid: Grid, T, Y):
    """Steady residual at interior nodes, shape (1 + S, n - 2); row 0 is temperature.

    ``T`` and ``Y`` are full profiles; their boundary entries are replaced
    by the pinned boundary values.
    """
    prob = FlameletProblem(mech, profile, bc, grid)
    T = np.array(T, dtype=float)
    Y = np.array(Y, dtype=float)
    T[0], T[-1] = bc.t_ox, bc.t_fuel
    Y[:, 0], Y[:, -1] = bc.y_ox, bc.y_fuel
    F, _ = prob.terms(T, Y)
    return F


def _finalize(prob, x, converged, rnorm, steps, info):
    T, Y = prob.expand(x)
    info["min_mass_fraction"] = float(Y.min())
    Yi = Y[:, 1:-1]
    Yi[Yi < 0.0] = 0.0
    Yi[prob.inert] = 0.0
    Yi[prob.inert] = 1.0 - Yi.sum(axis=0)
    rho = prob.density(T, Y)
    return FlameletSolution(
        grid=prob.grid,
        chi_st=prob.profile.chi_st,
        species_names=prob.mech.species_names,
        temperature=T,
        mass_fractions=Y,
        density=rho,
        converged=converged,
        residual_norm=rnorm,
        steps=steps,
        z_st=prob.profile.z_st,
        chi_shape=prob.profile.shape,
        info=info,
    )


def solve_steady(
    mech: Mechanism,
    profile: ChiProfile,
    bc: BoundaryConditions,
    grid: Grid,
    opts: SolverOptions | None = None,
    guess=None,
) -> FlameletSolution:
    """March the flamelet equations in pseudo-time to steady state.

    Never raises on non-convergence: the best iterate comes back with
    ``converged=False``.  ``guess`` is an optional full (T, Y) pair; the
    Burke-Schumann profile is used otherwise.
    """
    opts = opts or SolverOptions()
    if not opts.residual_tol > 0:
        raise ValueError("residual_tol must be positive")
    prob = FlameletProblem(mech, profile, bc, grid)
    x = prob.pack(*(guess if guess is not None else initial_guess(mech, bc, grid)))
    rnorm = prob.relative_norm(x)
    best = (rnorm, x)
    dt = opts.dt0
    steps = 0
    failures = 0
    jac, jac_age = None, 0
    while steps < opts.max_pseudo_steps and rnorm > opts.residual_tol:
        if jac is None:
            try:
                jac, jac_age = prob.steady_jacobian(x), 0
            except TemperatureOutOfRange:
                break
        singular = None
        try:
            x_new, iters, jac = prob.newton_step(x, dt, opts.max_newton_per_step, jac)
        except TemperatureOutOfRange:
            x_new, iters = None, opts.max_newton_per_step
        except SingularJacobian as exc:
            x_new, singular = None, exc
        steps += 1
        if x_new is None:
            failures += 1
            if jac_age > 0:
                # retry with a fresh Jacobian before cutting the step
                jac = None
                continue
            dt *= 0.5
            if dt < opts.dt_min:
                if singular is not None:
                    raise singular
                break
            continue
        x = x_new
        jac_age += 1
        if iters > 3 or jac_age >= 20:
            jac = None
        rnorm = prob.relative_norm(x)
        if rnorm < best[0]:
            best = (rnorm, x)
        dt = min(dt * opts.dt_growth, opts.dt_max)
    converged = rnorm <= opts.residual_tol
    if not converged:
        rnorm, x = best
    log.debug("chi=%g steps=%d residual=%.3e converged=%s", profile.chi_st, steps, rnorm, converged)
    return _finalize(prob, x, converged, rnorm, steps, {"failures": failures, "final_dt": dt})
