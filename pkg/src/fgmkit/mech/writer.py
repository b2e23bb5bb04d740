"""Serialize a Mechanism back into the text grammar.

Reactions are written in SI units (``JOULES/KMOLE KMOLE/M3``) with
shortest round-trip float representations, so that parse(serialize(m))
reproduces ``m`` exactly."""

from __future__ import annotations

from .model import ATOMIC_WEIGHTS, Mechanism


def _fixed(value, fmt):
    s = fmt % value
    if float(s) != value:
        raise ValueError(f"{value!r} does not survive the fixed-width field {fmt!r}")
    return s


def thermo_record(name, composition, sp) -> str:
    elems = "".join(
        f"{e:<2s}{int(n):>3d}" for e, n in list(composition.items())[:4]
    )
    for n in composition.values():
        if not float(n).is_integer():
            raise ValueError(f"{name}: fractional element counts are not representable")
    l1 = (
        f"{name:<18s}{'':6s}{elems:<20s}G"
        f"{_fixed(sp.t_low, '%10.3f')}{_fixed(sp.t_high, '%10.3f')}{_fixed(sp.t_mid, '%8.2f')}"
    )
    l1 = f"{l1:<79s}1"
    hi, lo = sp.coeffs_high, sp.coeffs_low
    c = [_fixed(v, "%15.8E") for v in (*hi, *lo)]
    l2 = f"{''.join(c[0:5]):<79s}2"
    l3 = f"{''.join(c[5:10]):<79s}3"
    l4 = f"{''.join(c[10:14]):<79s}4"
    return "\n".join((l1, l2, l3, l4))


def serialize(mech: Mechanism) -> str:
    out = ["ELEMENTS"]
    for e in mech.elements:
        w = mech.element_weights.get(e)
        if w is not None and ATOMIC_WEIGHTS.get(e) != w:
            out.append(f"{e} /{w!r}/")
        else:
            out.append(e)
    out.append("END")
    out.append("SPECIES")
    out.extend(mech.species_names)
    out.append("END")
    out.append("THERMO")
    for sp in mech.species:
        out.append(thermo_record(sp.name, mech.composition[sp.name], sp))
    out.append("END")
    out.append("REACTIONS JOULES/KMOLE KMOLE/M3")
    for r in mech.reactions:
        out.append(
            f"{r.equation}  {r.arrhenius_A!r} {r.arrhenius_b!r} {r.activation_energy!r}"
        )
        for sp, order in r.orders.items():
            if r.reactant_stoich.get(sp) != order:
                out.append(f"    FORD /{sp} {order!r}/")
    out.append("END")
    return "\n".join(out) + "\n"
