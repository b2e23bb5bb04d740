"""Steady laminar flamelets in mixture-fraction space."""

from .conditions import (
    BoundaryConditions,
    ChiProfile,
    DomainError,
    chi_of_z,
    default_bc,
    stoichiometric_z,
)
from .grid import Grid
from .solver import (
    FlameletSolution,
    NotConverged,
    SingularJacobian,
    SolverOptions,
    initial_guess,
    residual,
    solve_steady,
)
