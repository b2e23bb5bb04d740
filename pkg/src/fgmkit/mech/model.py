"""Immutable mechanism data: species thermo records, reactions, and the
dense arrays used by the vectorized thermo and kinetics routines."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

# J/(kmol K)
GAS_CONSTANT = 8314.46261815324
ONE_ATM = 101325.0

ATOMIC_WEIGHTS = {
    "H": 1.008,
    "D": 2.014,
    "HE": 4.002602,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "F": 18.998,
    "NE": 20.1797,
    "S": 32.06,
    "CL": 35.45,
    "AR": 39.95,
    "KR": 83.798,
    "E": 5.48579909e-4,
}


@dataclass(frozen=True)
class SpeciesThermo:
    name: str
    molar_mass: float  # kg/kmol
    t_low: float
    t_mid: float
    t_high: float
    coeffs_low: tuple
    coeffs_high: tuple

    def __post_init__(self):
        if not (self.t_low < self.t_mid < self.t_high):
            raise ValueError(
                f"{self.name}: need t_low < t_mid < t_high, got "
                f"{self.t_low}, {self.t_mid}, {self.t_high}"
            )
        if not self.molar_mass > 0:
            raise ValueError(f"{self.name}: molar mass must be positive")
        if len(self.coeffs_low) != 7 or len(self.coeffs_high) != 7:
            raise ValueError(f"{self.name}: NASA-7 records need 7 coefficients per range")


@dataclass(frozen=True)
class Reaction:
    """One elementary or global step.

    ``arrhenius_A`` is stored in SI units (kmol, m^3, s) consistent with the
    total forward order; ``activation_energy`` in J/kmol.  ``orders`` holds
    explicit forward orders and defaults to the reactant coefficients.
    """

    reactant_stoich: dict
    product_stoich: dict
    arrhenius_A: float
    arrhenius_b: float
    activation_energy: float
    reversible: bool
    orders: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.arrhenius_A > 0:
            raise ValueError("Arrhenius pre-exponential factor must be positive")
        if not self.orders:
            object.__setattr__(self, "orders", dict(self.reactant_stoich))

    @property
    def equation(self):
        arrow = " <=> " if self.reversible else " => "
        return _side(self.reactant_stoich) + arrow + _side(self.product_stoich)

    @property
    def total_order(self):
        return float(sum(self.orders.values()))


def _coeff_str(nu):
    if nu == 1:
        return ""
    if float(nu).is_integer():
        return str(int(nu))
    return repr(float(nu))


def _side(stoich):
    return " + ".join(_coeff_str(nu) + name for name, nu in stoich.items())


@dataclass(frozen=True)
class Mechanism:
    elements: tuple
    species: tuple
    reactions: tuple
    composition: dict
    element_weights: dict = field(default_factory=dict)

    def __post_init__(self):
        names = [sp.name for sp in self.species]
        if len(set(names)) != len(names):
            from .errors import DuplicateSpecies

            dup = next(n for n in names if names.count(n) > 1)
            raise DuplicateSpecies(dup)
        if not self.species:
            raise ValueError("mechanism needs at least one species")

    # --- lookups -----------------------------------------------------------

    @cached_property
    def species_names(self):
        return tuple(sp.name for sp in self.species)

    @cached_property
    def _index(self):
        return {name: i for i, name in enumerate(self.species_names)}

    def species_index(self, name):
        return self._index[name]

    @property
    def n_species(self):
        return len(self.species)

    @property
    def n_reactions(self):
        return len(self.reactions)

    @cached_property
    def t_range(self):
        return (
            min(sp.t_low for sp in self.species),
            max(sp.t_high for sp in self.species),
        )

    # --- dense arrays for the vectorized kernels ----------------------------

    @cached_property
    def molar_masses(self):
        return np.array([sp.molar_mass for sp in self.species])

    @cached_property
    def nasa_low(self):
        return np.array([sp.coeffs_low for sp in self.species], dtype=float)

    @cached_property
    def nasa_high(self):
        return np.array([sp.coeffs_high for sp in self.species], dtype=float)

    @cached_property
    def t_mid(self):
        return np.array([sp.t_mid for sp in self.species])

    @cached_property
    def element_matrix(self):
        """Atoms of element e in species k, shape (n_elements, n_species)."""
        m = np.zeros((len(self.elements), self.n_species))
        for k, sp in enumerate(self.species):
            for e, count in self.composition[sp.name].items():
                m[self.elements.index(e), k] = count
        return m

    @cached_property
    def element_mass_fractions(self):
        """Mass fraction of element e in species k, shape (n_elements, n_species)."""
        w = np.array([self.element_weights[e] for e in self.elements])
        return self.element_matrix * w[:, None] / self.molar_masses[None, :]

    def _stoich(self, attr):
        m = np.zeros((self.n_reactions, self.n_species))
        for r, rxn in enumerate(self.reactions):
            for name, nu in getattr(rxn, attr).items():
                m[r, self._index[name]] = nu
        return m

    @cached_property
    def nu_reactants(self):
        return self._stoich("reactant_stoich")

    @cached_property
    def nu_products(self):
        return self._stoich("product_stoich")

    @cached_property
    def nu_net(self):
        return self.nu_products - self.nu_reactants

    @cached_property
    def forward_orders(self):
        return self._stoich("orders")

    @cached_property
    def reverse_orders(self):
        """Concentration exponents of the reverse rate: forward orders shifted
        by the net stoichiometry, so the net rate vanishes at equilibrium.
        Equal to the product coefficients when no FORD override is present."""
        return self.forward_orders + self.nu_net

    @cached_property
    def arrhenius(self):
        """(A, b, Ea) arrays over reactions."""
        return (
            np.array([r.arrhenius_A for r in self.reactions], dtype=float),
            np.array([r.arrhenius_b for r in self.reactions], dtype=float),
            np.array([r.activation_energy for r in self.reactions], dtype=float),
        )

    @cached_property
    def reversible_mask(self):
        return np.array([r.reversible for r in self.reactions], dtype=bool)

    @cached_property
    def fingerprint(self):
        from .writer import serialize

        return hashlib.sha256(serialize(self).encode()).hexdigest()
