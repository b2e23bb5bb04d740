"""Chemkin-style mechanism parsing, NASA-7 thermodynamics and kinetics."""

from importlib import resources

from .errors import (
    DuplicateSpecies,
    ElementImbalance,
    MechanismError,
    MechanismSyntaxError,
    MissingThermo,
    TemperatureOutOfRange,
    UnknownElement,
    UnknownSpecies,
)
from .kinetics import production_rates, rates_of_progress
from .model import GAS_CONSTANT, ONE_ATM, Mechanism, Reaction, SpeciesThermo
from .parser import load_mechanism, parse_mechanism
from .thermo import cp_mixture, cp_species, density, enthalpy_mixture, enthalpy_species
from .writer import serialize

DEFAULT_MECHANISM = "ch4_4step"


def bundled_path(name=DEFAULT_MECHANISM):
    """Path of a mechanism file shipped with the package."""
    return resources.files(__package__).joinpath("data", f"{name}.mech")


def load_bundled(name=DEFAULT_MECHANISM) -> Mechanism:
    return parse_mechanism(bundled_path(name).read_text(encoding="utf-8"))


def bundled_names():
    return sorted(
        p.name[:-5] for p in resources.files(__package__).joinpath("data").iterdir() if p.name.endswith(".mech")
    )
