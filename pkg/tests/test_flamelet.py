import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import erfc

from fgmkit.flamelet import (
    BoundaryConditions,
    ChiProfile,
    DomainError,
    Grid,
    SolverOptions,
    chi_of_z,
    initial_guess,
    residual,
    solve_steady,
)
from fgmkit.flamelet.solver import FlameletProblem, adiabatic_temperature, inert_index


def test_stoichiometric_mixture_fraction(mech, bc, z_st):
    y_o2 = 0.21 * 31.998 / (0.21 * 31.998 + 0.79 * 28.014)
    s = 2 * 31.998 / 16.043
    assert z_st == pytest.approx(1.0 / (1.0 + s / y_o2), rel=1e-3)
    assert bc.t_fuel == 300.15 and bc.t_ox == 300.0


def test_chi_profile_shape(z_st):
    prof = ChiProfile(2.0, z_st)
    assert chi_of_z(prof, z_st) == pytest.approx(2.0, rel=1e-12)
    assert chi_of_z(prof, 0.0) == 0.0
    assert chi_of_z(prof, 1.0) == 0.0
    for z in (0.01, 0.2, 0.7):
        x = brentq(lambda v: erfc(v) - 2 * z, -10, 10, xtol=1e-15)
        xs = brentq(lambda v: erfc(v) - 2 * z_st, -10, 10, xtol=1e-15)
        assert chi_of_z(prof, z) == pytest.approx(2.0 * math.exp(2 * (xs * xs - x * x)), rel=1e-9)
    const = ChiProfile(2.0, z_st, "constant")
    assert np.all(chi_of_z(const, np.linspace(0, 1, 5)) == 2.0)


def test_chi_profile_validation(z_st):
    with pytest.raises(ValueError):
        ChiProfile(0.0, z_st)
    with pytest.raises(ValueError):
        ChiProfile(1.0, 1.5)
    with pytest.raises(ValueError):
        ChiProfile(1.0, z_st, "gaussian")
    with pytest.raises(DomainError):
        chi_of_z(ChiProfile(1.0, z_st), 1.2)


def test_boundary_validation(mech, bc):
    with pytest.raises(ValueError):
        BoundaryConditions(300.0, 300.0, bc.y_fuel * 2, bc.y_ox)
    with pytest.raises(ValueError):
        BoundaryConditions(-1.0, 300.0, bc.y_fuel, bc.y_ox)
    d = bc.to_dict(mech.species_names)
    assert BoundaryConditions.from_dict(mech, d) == bc


def test_grid_construction(z_st):
    g = Grid.uniform(11)
    assert g.n == 11 and g.z_points[5] == 0.5
    c = Grid.clustered(30, z_st)
    assert c.n == 30 and z_st in c.z_points
    assert Grid.from_descriptor(c.descriptor) == c
    with pytest.raises(ValueError):
        Grid([0.0, 0.5, 0.4, 0.8, 1.0])
    with pytest.raises(ValueError):
        Grid([0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        Grid([0.1, 0.2, 0.3, 0.4, 1.0])


@settings(max_examples=100, deadline=None)
@given(n=st.integers(5, 200), zc=st.floats(0.01, 0.9), stretch=st.floats(0.5, 10.0))
def test_clustered_grid_property(n, zc, stretch):
    g = Grid.clustered(n, zc, stretch)
    z = g.z_points
    assert z[0] == 0.0 and z[-1] == 1.0
    assert np.all(np.diff(z) > 0)
    assert zc in z


def test_burke_schumann_guess(mech, bc, z_st):
    g = Grid.clustered(30, z_st)
    T, Y = initial_guess(mech, bc, g)
    assert T[0] == bc.t_ox and T[-1] == bc.t_fuel
    assert np.array_equal(Y[:, 0], bc.y_ox) and np.array_equal(Y[:, -1], bc.y_fuel)
    k = int(np.argmax(T))
    assert g.z_points[k] == z_st
    assert 2100.0 < T[k] < 2400.0
    np.testing.assert_allclose(Y.sum(axis=0), 1.0, atol=1e-12)
    assert Y[mech.species_index("CH4"), k] == 0.0 and Y[mech.species_index("O2"), k] == 0.0


def test_adiabatic_temperature_enthalpy_balance(mech, bc, z_st):
    from fgmkit.flamelet.solver import _burke_schumann_state
    from fgmkit.mech import enthalpy_mixture

    y = _burke_schumann_state(mech, bc, z_st)
    T = adiabatic_temperature(mech, bc, z_st, y)
    h_mix = z_st * enthalpy_mixture(mech, bc.t_fuel, bc.y_fuel) + (1 - z_st) * enthalpy_mixture(mech, bc.t_ox, bc.y_ox)
    assert enthalpy_mixture(mech, T, y) == pytest.approx(h_mix, rel=1e-9, abs=1e-3)


def test_inert_index(mech):
    assert mech.species_names[inert_index(mech)] == "N2"


def test_banded_jacobian_matches_dense(mech, bc, z_st):
    g = Grid.clustered(9, z_st)
    prob = FlameletProblem(mech, ChiProfile(0.05, z_st), bc, g)
    x = prob.pack(*initial_guess(mech, bc, g))
    ab = prob.steady_jacobian(x)
    F0, _ = prob.steady(x)
    n = x.size
    dense = np.zeros((n, n))
    flat = x.T.ravel()
    for j in range(n):
        d = 1e-7 * max(abs(flat[j]), 1.0 if j % prob.nv == 0 else 1e-6)
        xp = flat.copy()
        xp[j] += d
        Fp, _ = prob.steady(xp.reshape(prob.m, prob.nv).T)
        dense[:, j] = ((Fp - F0) / d).T.ravel()
    # multiply a vector both ways
    v = np.random.default_rng(0).standard_normal(n)
    bw = 2 * prob.nv - 1
    full = np.zeros((n, n))
    for j in range(n):
        for i in range(max(0, j - bw), min(n, j + bw + 1)):
            full[i, j] = ab[bw + i - j, j]
    np.testing.assert_allclose(full @ v, dense @ v, rtol=1e-5, atol=1e-6 * np.abs(dense).max())
    # and the banded solver accepts it
    A = -ab.copy()
    A[bw] += 1e3
    assert np.all(np.isfinite(solve_banded((bw, bw), A, v)))


def test_converged_solution_has_small_residual(mech, bc, z_st):
    g = Grid.clustered(20, z_st)
    prof = ChiProfile(0.05, z_st)
    s = solve_steady(mech, prof, bc, g)
    assert s.converged
    assert s.residual_norm <= 1e-8
    F = residual(mech, prof, bc, g, s.temperature, s.mass_fractions)
    prob = FlameletProblem(mech, prof, bc, g)
    assert prob.relative_norm(prob.pack(s.temperature, s.mass_fractions)) < 1e-6
    assert np.all(np.isfinite(F))
    assert s.max_temperature > 1500
    assert s.species("CO2").max() > 0.05


def test_unconverged_returns_best_iterate(mech, bc, z_st):
    g = Grid.clustered(20, z_st)
    s = solve_steady(mech, ChiProfile(0.05, z_st), bc, g, SolverOptions(max_pseudo_steps=3))
    assert not s.converged
    assert s.steps <= 3
    assert np.isfinite(s.residual_norm)
    assert s.temperature[0] == 300.0 and s.temperature[-1] == 300.15


def test_restart_from_converged_solution(mech, bc, z_st):
    g = Grid.clustered(20, z_st)
    prof = ChiProfile(0.03, z_st)
    s = solve_steady(mech, prof, bc, g)
    again = solve_steady(mech, prof, bc, g, guess=(s.temperature, s.mass_fractions))
    assert again.converged and again.steps <= 2
    np.testing.assert_allclose(again.temperature, s.temperature, rtol=1e-6)


def test_high_strain_extinguishes(mech, bc, z_st):
    g = Grid.clustered(30, z_st)
    s = solve_steady(mech, ChiProfile(1.0, z_st), bc, g)
    assert s.converged
    assert s.max_temperature < 310.0


def test_invalid_options(mech, bc, z_st):
    with pytest.raises(ValueError):
        solve_steady(mech, ChiProfile(0.05, z_st), bc, Grid.uniform(10), SolverOptions(residual_tol=0.0))


def test_frozen_chemistry_gives_linear_profiles(bc, z_st):
    import re

    from fgmkit.mech import bundled_path, parse_mechanism

    text = bundled_path("ch4_4step").read_text(encoding="utf-8")
    inert = parse_mechanism(re.sub(r"REACTIONS.*?\nEND\n", "REACTIONS\nEND\n", text, flags=re.S))
    g = Grid.clustered(25, z_st)
    s = solve_steady(inert, ChiProfile(0.1, z_st), bc, g)
    assert s.converged
    z = g.z_points
    np.testing.assert_allclose(s.temperature, bc.t_ox + (bc.t_fuel - bc.t_ox) * z, atol=1e-6)
    lin = bc.y_ox[:, None] + (bc.y_fuel - bc.y_ox)[:, None] * z[None, :]
    np.testing.assert_allclose(s.mass_fractions, lin, atol=1e-8)
