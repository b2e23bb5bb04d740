"""Parser for the Chemkin-II-like mechanism subset described in
docs/mechanism-format.md."""

from __future__ import annotations

import re

from .errors import (
    DuplicateSpecies,
    ElementImbalance,
    MechanismSyntaxError,
    MissingThermo,
    UnknownElement,
    UnknownSpecies,
)
from .model import ATOMIC_WEIGHTS, GAS_CONSTANT, Mechanism, Reaction, SpeciesThermo

# activation energy unit -> factor to J/kmol
ENERGY_UNITS = {
    "CAL/MOLE": 4184.0,
    "KCAL/MOLE": 4184.0e3,
    "JOULES/MOLE": 1.0e3,
    "KJOULES/MOLE": 1.0e6,
    "KELVINS": GAS_CONSTANT,
    "JOULES/KMOLE": 1.0,
}
QUANTITY_UNITS = ("MOLES", "KMOLE/M3")

_SECTIONS = {
    "ELEMENTS": "ELEMENTS",
    "ELEM": "ELEMENTS",
    "SPECIES": "SPECIES",
    "SPEC": "SPECIES",
    "THERMO": "THERMO",
    "REACTIONS": "REACTIONS",
    "REAC": "REACTIONS",
}
_UNSUPPORTED_AUX = {"LOW", "HIGH", "TROE", "SRI", "PLOG", "CHEB", "REV", "LT", "RLT", "XSMI"}
_ARROWS = ("<=>", "=>", "=")
_COEFF_RE = re.compile(r"^(\d+(?:\.\d*)?|\.\d+)(.+)$")


def parse_mechanism(text: str) -> Mechanism:
    lines = text.splitlines()
    state = _ParseState()
    section = None
    i = 0
    while i < len(lines):
        lineno = i + 1
        raw = lines[i]
        body = raw.split("!", 1)[0].rstrip()
        i += 1
        if not body.strip():
            continue
        head = body.split()[0].upper()
        if head == "END":
            section = None
            continue
        if section is None or (head in _SECTIONS and section != "THERMO"):
            if head not in _SECTIONS:
                col = raw.index(body.split()[0]) + 1
                raise MechanismSyntaxError(lineno, col, "section keyword", body.split()[0])
            section = _SECTIONS[head]
            rest = body.split()[1:]
            if section == "THERMO":
                i = state.read_thermo(lines, i, rest, lineno)
                section = None
            elif section == "REACTIONS":
                state.set_units(rest, lineno, raw)
            elif rest:
                # tokens may follow the keyword on the same line
                state.feed(section, " ".join(rest), lineno, raw)
            continue
        state.feed(section, body, lineno, raw)
    return state.finish()


class _ParseState:
    def __init__(self):
        self.elements = []
        self.element_weights = {}
        self.species = []
        self.species_lines = {}
        self.thermo = {}
        self.reactions = []
        self.reaction_lines = []
        self.energy_factor = ENERGY_UNITS["CAL/MOLE"]
        self.si_quantities = False
        self.thermo_defaults = None

    # -- sections ---------------------------------------------------------

    def feed(self, section, body, lineno, raw):
        if section == "ELEMENTS":
            self._elements(body, lineno, raw)
        elif section == "SPECIES":
            for tok in body.split():
                if tok in self.species_lines:
                    raise DuplicateSpecies(tok)
                self.species.append(tok)
                self.species_lines[tok] = lineno
        elif section == "REACTIONS":
            self._reaction_line(body, lineno, raw)

    def _elements(self, body, lineno, raw):
        # "C H O N" with optional "/weight/" after a symbol
        for m in re.finditer(r"([A-Za-z]+)\s*(/\s*([^/]*)/)?", body):
            sym = m.group(1).upper()
            if m.group(2):
                try:
                    self.element_weights[sym] = float(m.group(3))
                except ValueError:
                    raise MechanismSyntaxError(
                        lineno, raw.find(m.group(2)) + 1, "atomic weight", m.group(3)
                    ) from None
            elif sym not in ATOMIC_WEIGHTS:
                raise MechanismSyntaxError(
                    lineno, raw.upper().find(sym) + 1, "known element or /weight/", sym
                )
            else:
                self.element_weights[sym] = ATOMIC_WEIGHTS[sym]
            if sym not in self.elements:
                self.elements.append(sym)

    def set_units(self, tokens, lineno, raw):
        for tok in tokens:
            up = tok.upper()
            if up in ENERGY_UNITS:
                self.energy_factor = ENERGY_UNITS[up]
            elif up in QUANTITY_UNITS:
                self.si_quantities = up == "KMOLE/M3"
            else:
                raise MechanismSyntaxError(
                    lineno, raw.find(tok) + 1, "energy or quantity unit", tok
                )

    def read_thermo(self, lines, i, rest, header_line):
        """Consume NASA-7 records; returns index of the line after END."""
        if rest and rest[0].upper() == "ALL":
            while i < len(lines) and not lines[i].split("!", 1)[0].strip():
                i += 1
            if i >= len(lines):
                raise MechanismSyntaxError(header_line, 1, "default temperature line")
            try:
                self.thermo_defaults = [float(x) for x in lines[i].split()[:3]]
            except ValueError:
                raise MechanismSyntaxError(
                    i + 1, 1, "three default temperatures", lines[i].strip()
                ) from None
            i += 1
        while i < len(lines):
            line = lines[i]
            stripped = line.split("!", 1)[0].strip()
            if not stripped:
                i += 1
                continue
            if stripped.upper().startswith("END"):
                return i + 1
            if i + 3 >= len(lines):
                raise MechanismSyntaxError(i + 1, 1, "4-line NASA-7 thermo record")
            self._thermo_record(lines[i : i + 4], i + 1)
            i += 4
        raise MechanismSyntaxError(len(lines), 1, "END closing THERMO section")

    def _thermo_record(self, rec, lineno):
        l1 = rec[0]
        name = l1[:18].split()
        if not name:
            raise MechanismSyntaxError(lineno, 1, "species name")
        name = name[0]
        comp = {}
        for k in range(4):
            chunk = l1[24 + 5 * k : 29 + 5 * k]
            sym = chunk[:2].strip().upper()
            cnt = chunk[2:].strip()
            if not sym or sym == "0":
                continue
            try:
                n = float(cnt) if cnt else 0.0
            except ValueError:
                raise MechanismSyntaxError(lineno, 27 + 5 * k, "element count", cnt) from None
            if n:
                comp[sym] = comp.get(sym, 0.0) + n

        def temp(a, b, col, default_idx):
            s = l1[a:b].strip()
            if not s:
                if self.thermo_defaults is None:
                    raise MechanismSyntaxError(lineno, col, "temperature")
                return self.thermo_defaults[default_idx]
            try:
                return float(s)
            except ValueError:
                raise MechanismSyntaxError(lineno, col, "temperature", s) from None

        t_low = temp(45, 55, 46, 0)
        t_high = temp(55, 65, 56, 2)
        t_mid = temp(65, 73, 66, 1)
        coeffs = []
        for j in (1, 2, 3):
            line = rec[j]
            for k in range(5):
                field = line[15 * k : 15 * (k + 1)].strip()
                if len(coeffs) == 14:
                    break
                try:
                    coeffs.append(float(field.replace("D", "E").replace("d", "e")))
                except ValueError:
                    raise MechanismSyntaxError(
                        lineno + j, 15 * k + 1, "NASA-7 coefficient (E15.8)", field
                    ) from None
        self.thermo[name] = (comp, t_low, t_mid, t_high, tuple(coeffs[7:14]), tuple(coeffs[:7]), lineno)

    def _reaction_line(self, body, lineno, raw):
        if "=" not in body:
            self._aux_line(body, lineno, raw)
            return
        toks = body.split()
        if len(toks) < 4:
            raise MechanismSyntaxError(lineno, len(raw.rstrip()) + 1, "equation followed by A, b, Ea")
        nums = []
        for tok in toks[-3:]:
            try:
                nums.append(float(tok))
            except ValueError:
                raise MechanismSyntaxError(lineno, raw.find(tok) + 1, "number", tok) from None
        eq_end = body.rfind(toks[-3])
        equation = body[:eq_end].strip()
        arrow = next(a for a in _ARROWS if a in equation)
        left, right = equation.split(arrow, 1)
        if "=" in right:
            raise MechanismSyntaxError(lineno, raw.find(right) + 1, "single reaction arrow", right.strip())
        reac = self._side(left, lineno, raw)
        prod = self._side(right, lineno, raw)
        self.reactions.append(
            {
                "reactants": reac,
                "products": prod,
                "A": nums[0],
                "b": nums[1],
                "Ea": nums[2],
                "reversible": arrow != "=>",
                "orders": {},
                "line": lineno,
            }
        )

    def _side(self, text, lineno, raw):
        out = {}
        col0 = raw.find(text)
        if "(+" in text.replace(" ", "") or re.search(r"(^|\+)\s*M\s*($|\+)", text):
            raise MechanismSyntaxError(
                lineno, col0 + 1, "reaction without third body or falloff (+M)", text.strip()
            )
        for part in text.split("+"):
            tok = part.strip()
            if not tok:
                raise MechanismSyntaxError(lineno, col0 + 1, "species", "")
            nu = 1.0
            name = tok
            if tok not in self.species_lines:
                m = _COEFF_RE.match(tok)
                if m:
                    nu = float(m.group(1))
                    name = m.group(2).strip()
            if name not in self.species_lines:
                raise UnknownSpecies(name, lineno)
            out[name] = out.get(name, 0.0) + nu
        return out

    def _aux_line(self, body, lineno, raw):
        if not self.reactions:
            raise MechanismSyntaxError(lineno, 1, "reaction equation", body.strip())
        rxn = self.reactions[-1]
        pos = 0
        for m in re.finditer(r"([A-Za-z][A-Za-z0-9]*)\s*(?:/([^/]*)/)?", body):
            if body[pos : m.start()].strip():
                raise MechanismSyntaxError(lineno, pos + 1, "auxiliary keyword", body[pos : m.start()].strip())
            pos = m.end()
            key = m.group(1).upper()
            if key == "FORD":
                vals = (m.group(2) or "").split()
                if len(vals) != 2:
                    raise MechanismSyntaxError(lineno, m.start() + 1, "FORD /species order/", m.group(0))
                sp, order = vals
                if sp not in self.species_lines:
                    raise UnknownSpecies(sp, lineno)
                try:
                    rxn["orders"][sp] = float(order)
                except ValueError:
                    raise MechanismSyntaxError(lineno, m.start() + 1, "reaction order", order) from None
            elif key in ("DUPLICATE", "DUP"):
                pass
            elif key in _UNSUPPORTED_AUX:
                raise MechanismSyntaxError(
                    lineno, m.start() + 1, "supported auxiliary keyword (FORD, DUPLICATE)", key
                )
            else:
                raise MechanismSyntaxError(lineno, m.start() + 1, "auxiliary keyword", key)
        if body[pos:].strip():
            raise MechanismSyntaxError(lineno, pos + 1, "auxiliary keyword", body[pos:].strip())

    # -- assembly ---------------------------------------------------------

    def finish(self):
        species = []
        composition = {}
        for name in self.species:
            if name not in self.thermo:
                raise MissingThermo(name)
            comp, t_low, t_mid, t_high, low, high, lineno = self.thermo[name]
            for e in comp:
                if e not in self.element_weights:
                    raise UnknownElement(e, lineno)
            mw = sum(n * self.element_weights[e] for e, n in comp.items())
            try:
                species.append(SpeciesThermo(name, mw, t_low, t_mid, t_high, low, high))
            except ValueError as exc:
                raise MechanismSyntaxError(lineno, 46, str(exc)) from None
            composition[name] = comp

        reactions = []
        for idx, r in enumerate(self.reactions):
            orders = dict(r["reactants"])
            orders.update(r["orders"])
            n = sum(orders.values())
            A = r["A"] if self.si_quantities else r["A"] * 10.0 ** (3.0 - 3.0 * n)
            _check_balance(idx, r, composition, self.elements)
            try:
                reactions.append(
                    Reaction(
                        reactant_stoich=r["reactants"],
                        product_stoich=r["products"],
                        arrhenius_A=A,
                        arrhenius_b=r["b"],
                        activation_energy=r["Ea"] * self.energy_factor,
                        reversible=r["reversible"],
                        orders=orders,
                    )
                )
            except ValueError as exc:
                raise MechanismSyntaxError(r["line"], 1, str(exc)) from None
        return Mechanism(
            elements=tuple(self.elements),
            species=tuple(species),
            reactions=tuple(reactions),
            composition=composition,
            element_weights=dict(self.element_weights),
        )


def _check_balance(idx, r, composition, elements):
    for e in elements:
        lhs = sum(nu * composition[s].get(e, 0.0) for s, nu in r["reactants"].items())
        rhs = sum(nu * composition[s].get(e, 0.0) for s, nu in r["products"].items())
        if abs(lhs - rhs) > 1e-9 * max(1.0, abs(lhs) + abs(rhs)):
            raise ElementImbalance(idx, e, r["line"])


def load_mechanism(path) -> Mechanism:
    with open(path, encoding="utf-8") as fh:
        return parse_mechanism(fh.read())
