"""Flamelet libraries over scalar dissipation rate, flat datasets for
training, the bilinear lookup baseline and the library-count study."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .flamelet import (
    BoundaryConditions,
    ChiProfile,
    FlameletSolution,
    Grid,
    NotConverged,
    SolverOptions,
    solve_steady,
    stoichiometric_z,
)
from .mech import Mechanism, parse_mechanism, serialize

log = logging.getLogger(__name__)

REFERENCE_CHIS = (0.01, 5.5, 10.0, 14.5, 20.5, 25.0, 29.5)
# The bundled mechanisms quench near chi_st = 0.105 1/s, so the reference set
# above is extinguished past its first entry.  The same seven points mapped
# linearly onto [0.01, 0.1] keep every library on the burning branch.
BURNING_CHI_MAX = 0.1
BURNING_CHIS = tuple(
    round(0.01 + (c - 0.01) * (BURNING_CHI_MAX - 0.01) / (29.5 - 0.01), 4) for c in REFERENCE_CHIS
)
PERCENT_FLOOR = 1e-10


class LibraryError(Exception):
    pass


class MechanismMismatch(LibraryError):
    pass


class OutOfRange(LibraryError, ValueError):
    def __init__(self, chi, lo, hi):
        self.chi = chi
        super().__init__(f"chi={chi} outside library range [{lo}, {hi}]")


class InsufficientPool(LibraryError, ValueError):
    pass


class SchemaError(LibraryError, ValueError):
    pass


class ParseError(LibraryError, ValueError):
    def __init__(self, row, col, msg=""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {msg}".rstrip(": "))


# --- library -----------------------------------------------------------------


@dataclass(eq=False)
class FlameletLibrary:
    """Flamelet solutions on one grid, one mechanism, ordered by chi_st."""

    chis: np.ndarray
    solutions: list
    mechanism_fingerprint: str
    species_names: tuple
    bc: BoundaryConditions
    grid: Grid
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        chis = np.array(self.chis, dtype=float)
        if chis.ndim != 1 or chis.size != len(self.solutions) or chis.size == 0:
            raise LibraryError("one chi value per solution required")
        if np.any(np.diff(chis) <= 0):
            raise LibraryError("chi values must be strictly increasing")
        for s in self.solutions:
            if s.grid != self.grid:
                raise LibraryError("all entries must share one grid")
            if tuple(s.species_names) != tuple(self.species_names):
                raise MechanismMismatch("entries disagree on species")
        chis.setflags(write=False)
        self.chis = chis
        self.species_names = tuple(self.species_names)

    def __len__(self):
        return len(self.solutions)

    @property
    def z(self):
        return self.grid.z_points

    def temperature(self):
        """(n_entries, n_points) array."""
        return np.array([s.temperature for s in self.solutions])

    def mass_fractions(self):
        """(n_entries, n_species, n_points) array."""
        return np.array([s.mass_fractions for s in self.solutions])

    def subset(self, idx):
        idx = list(idx)
        return FlameletLibrary(
            self.chis[idx],
            [self.solutions[i] for i in idx],
            self.mechanism_fingerprint,
            self.species_names,
            self.bc,
            self.grid,
            dict(self.metadata),
        )

    def check_mechanism(self, mech: Mechanism):
        if mech.fingerprint != self.mechanism_fingerprint:
            raise MechanismMismatch("library was built with a different mechanism")


def _solve_one(args):
    mech_text, chi, z_st, shape, bc, grid, opts = args
    mech = parse_mechanism(mech_text)
    return solve_steady(mech, ChiProfile(chi, z_st, shape), bc, grid, opts)


def tabulate(
    mech: Mechanism,
    bc: BoundaryConditions,
    grid: Grid,
    chis,
    opts: SolverOptions | None = None,
    shape="analytic-erfc",
    workers=None,
    skip_unconverged=False,
) -> FlameletLibrary:
    """One steady solve per chi value, run across a process pool.

    Raises NotConverged for the first (lowest) chi that fails unless
    ``skip_unconverged`` is set, in which case that entry is dropped.
    """
    chis = [float(c) for c in chis]
    if not chis:
        raise ValueError("chis must be nonempty")
    if any(c <= 0 for c in chis) or any(b <= a for a, b in zip(chis, chis[1:])):
        raise ValueError("chis must be positive and strictly increasing")
    opts = opts or SolverOptions()
    z_st = stoichiometric_z(mech, bc)
    jobs = [(serialize(mech), c, z_st, shape, bc, grid, opts) for c in chis]
    workers = _worker_count(workers, len(jobs))
    if workers == 1:
        sols = [solve_steady(mech, ChiProfile(c, z_st, shape), bc, grid, opts) for c in chis]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(_solve_one, jobs))
    kept_chis, kept = [], []
    for c, s in zip(chis, sols):
        log.info("chi=%g converged=%s steps=%d residual=%.3e", c, s.converged, s.steps, s.residual_norm)
        if not s.converged:
            if not skip_unconverged:
                raise NotConverged(s.residual_norm, s.steps, chi=c)
            continue
        kept_chis.append(c)
        kept.append(s)
    if not kept:
        raise NotConverged(sols[0].residual_norm, sols[0].steps, chi=chis[0])
    meta = {
        "chi_shape": shape,
        "z_st": z_st,
        "solver": {k: getattr(opts, k) for k in vars(opts)},
    }
    return FlameletLibrary(np.array(kept_chis), kept, mech.fingerprint, mech.species_names, bc, grid, meta)


def _worker_count(workers, n_jobs):
    if workers is None:
        workers = int(os.environ.get("FGMKIT_WORKERS", "0")) or (os.cpu_count() or 1)
    return max(1, min(int(workers), n_jobs))


# --- lookup ------------------------------------------------------------------


def lookup(lib: FlameletLibrary, z, chi):
    """Bilinear table lookup: linear in Z on the shared grid, linear in chi
    between the bracketing entries.  Returns (T, Y) with Y shaped (S,)."""
    z = float(z)
    chi = float(chi)
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    chis = lib.chis
    if not chis[0] <= chi <= chis[-1]:
        raise OutOfRange(chi, chis[0], chis[-1])
    zp = lib.z
    j = int(np.clip(np.searchsorted(zp, z, side="right") - 1, 0, zp.size - 2))
    wz = (z - zp[j]) / (zp[j + 1] - zp[j])
    i = int(np.clip(np.searchsorted(chis, chi, side="right") - 1, 0, max(chis.size - 2, 0)))

    def at_entry(k):
        s = lib.solutions[k]
        state = np.concatenate(([s.temperature[j]], s.mass_fractions[:, j]))
        nxt = np.concatenate(([s.temperature[j + 1]], s.mass_fractions[:, j + 1]))
        if wz == 0.0:
            return state
        if wz == 1.0:
            return nxt
        return state + wz * (nxt - state)

    lo = at_entry(i)
    if chis.size == 1 or chi == chis[i]:
        out = lo
    else:
        wc = (chi - chis[i]) / (chis[i + 1] - chis[i])
        hi = at_entry(i + 1)
        out = hi if wc == 1.0 else lo + wc * (hi - lo)
    return float(out[0]), out[1:]


def lookup_profile(lib: FlameletLibrary, chi):
    """Whole (T, Y) profile on the library grid at one chi."""
    chis = lib.chis
    chi = float(chi)
    if not chis[0] <= chi <= chis[-1]:
        raise OutOfRange(chi, chis[0], chis[-1])
    T = lib.temperature()
    Y = lib.mass_fractions()
    i = int(np.clip(np.searchsorted(chis, chi, side="right") - 1, 0, max(chis.size - 2, 0)))
    if chis.size == 1 or chi == chis[i]:
        return T[i].copy(), Y[i].copy()
    w = (chi - chis[i]) / (chis[i + 1] - chis[i])
    return T[i] + w * (T[i + 1] - T[i]), Y[i] + w * (Y[i + 1] - Y[i])


# --- datasets ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Flat table: inputs (Z, chi) and targets (T, Y_1..Y_N)."""

    inputs: np.ndarray
    targets: np.ndarray
    input_names: tuple = ("Z", "chi")
    target_names: tuple = ()

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float).reshape(-1, len(self.input_names))
        Y = np.array(self.targets, dtype=float)
        if Y.size != X.shape[0] * len(self.target_names):
            raise SchemaError("target width does not match target names")
        Y = Y.reshape(X.shape[0], len(self.target_names))
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("dataset contains NaN or inf")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", Y)
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "target_names", tuple(self.target_names))

    @property
    def columns(self):
        return self.input_names + self.target_names

    @property
    def n_rows(self):
        return self.inputs.shape[0]

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.columns == other.columns
            and self.inputs.shape == other.inputs.shape
            and self.targets.shape == other.targets.shape
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.targets, other.targets)
        )

    def column(self, name):
        if name in self.input_names:
            return self.inputs[:, self.input_names.index(name)]
        return self.targets[:, self.target_names.index(name)]

    def select_targets(self, names):
        idx = [self.target_names.index(n) for n in names]
        return Dataset(self.inputs, self.targets[:, idx], self.input_names, tuple(names))


def flatten(lib: FlameletLibrary) -> Dataset:
    """Rows ordered by ascending chi, then ascending Z."""
    if len(lib) == 0:
        raise ValueError("empty library")
    n = lib.grid.n
    z = np.tile(lib.z, len(lib))
    chi = np.repeat(lib.chis, n)
    T = lib.temperature().reshape(-1)
    Y = np.concatenate([s.mass_fractions.T for s in lib.solutions], axis=0)
    targets = np.column_stack([T, Y])
    return Dataset(np.column_stack([z, chi]), targets, ("Z", "chi"), ("T",) + lib.species_names)


def _fmt(x):
    return repr(float(x))


def dataset_to_text(ds: Dataset) -> str:
    lines = [",".join(ds.columns)]
    data = np.hstack([ds.inputs, ds.targets])
    lines.extend(",".join(map(_fmt, row)) for row in data)
    return "\n".join(lines) + "\n"


def dataset_from_text(text: str, expected_columns=None, n_inputs=2) -> Dataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError("missing header row")
    header = tuple(lines[0].split(","))
    if expected_columns is not None and header != tuple(expected_columns):
        missing = [c for c in expected_columns if c not in header]
        extra = [c for c in header if c not in expected_columns]
        raise SchemaError(f"column mismatch: missing {missing}, extra {extra}")
    if header[:2] != ("Z", "chi"):
        raise SchemaError("first columns must be Z, chi")
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names")
    width = len(header)
    data = np.empty((len(lines) - 1, width))
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != width:
            raise ParseError(r, min(len(cells), width), f"expected {width} cells, found {len(cells)}")
        for c, cell in enumerate(cells):
            try:
                data[r - 1, c] = float(cell)
            except ValueError:
                raise ParseError(r, c, f"not a number: {cell!r}") from None
    return Dataset(data[:, :n_inputs], data[:, n_inputs:], header[:n_inputs], header[n_inputs:])


def write_csv(ds: Dataset, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_text(ds))


def read_csv(path, expected_columns=None) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return dataset_from_text(fh.read(), expected_columns)


# --- library container -------------------------------------------------------

LIBRARY_MAGIC = "FGMLIB 1"


def library_to_text(lib: FlameletLibrary) -> str:
    head = {
        "mechanism": lib.mechanism_fingerprint,
        "species": list(lib.species_names),
        "bc": {
            "t_fuel": lib.bc.t_fuel,
            "t_ox": lib.bc.t_ox,
            "pressure": lib.bc.pressure,
            "y_fuel": [float(v) for v in lib.bc.y_fuel],
            "y_ox": [float(v) for v in lib.bc.y_ox],
        },
        "grid": lib.grid.descriptor,
        "metadata": lib.metadata,
        "entries": len(lib),
    }
    body = [
        "header " + json.dumps(head, sort_keys=True, separators=(",", ":")),
        "z " + ",".join(map(_fmt, lib.z)),
    ]
    cols = ",".join(("T", "rho") + lib.species_names)
    for chi, s in zip(lib.chis, lib.solutions):
        info = {
            "chi": float(chi),
            "converged": bool(s.converged),
            "residual_norm": float(s.residual_norm),
            "steps": int(s.steps),
            "z_st": float(s.z_st),
            "chi_shape": s.chi_shape,
        }
        body.append("entry " + json.dumps(info, sort_keys=True, separators=(",", ":")))
        body.append(cols)
        block = np.vstack([s.temperature, s.density, s.mass_fractions]).T
        body.extend(",".join(map(_fmt, row)) for row in block)
    body_text = "\n".join(body) + "\n"
    digest = hashlib.sha256(body_text.encode("utf-8")).hexdigest()
    return f"{LIBRARY_MAGIC}\nsha256 {digest}\n{body_text}"


def library_from_text(text: str) -> FlameletLibrary:
    lines = text.split("\n")
    if len(lines) < 4 or lines[0] != LIBRARY_MAGIC:
        raise SchemaError("not a flamelet library file")
    if not lines[1].startswith("sha256 "):
        raise SchemaError("missing content hash")
    body_text = "\n".join(lines[2:])
    if hashlib.sha256(body_text.encode("utf-8")).hexdigest() != lines[1][7:]:
        raise SchemaError("content hash mismatch")
    body = lines[2:]
    if body and body[-1] == "":
        body.pop()
    if not body[0].startswith("header ") or not body[1].startswith("z "):
        raise SchemaError("malformed library header")
    head = json.loads(body[0][7:])
    z = np.array([float(v) for v in body[1][2:].split(",")])
    grid = Grid.from_descriptor(head["grid"], z)
    if not np.array_equal(grid.z_points, z):
        grid = Grid(z, None if head["grid"].get("kind") == "points" else head["grid"])
    names = tuple(head["species"])
    b = head["bc"]
    bc = BoundaryConditions(b["t_fuel"], b["t_ox"], np.array(b["y_fuel"]), np.array(b["y_ox"]), b["pressure"])
    chis, sols = [], []
    pos = 2
    width = 2 + len(names)
    for _ in range(head["entries"]):
        if pos >= len(body) or not body[pos].startswith("entry "):
            raise SchemaError(f"expected entry record at line {pos + 3}")
        info = json.loads(body[pos][6:])
        if body[pos + 1] != ",".join(("T", "rho") + names):
            raise SchemaError(f"bad column header at line {pos + 4}")
        rows = body[pos + 2 : pos + 2 + grid.n]
        block = np.empty((grid.n, width))
        for r, line in enumerate(rows):
            cells = line.split(",")
            if len(cells) != width:
                raise ParseError(pos + 3 + r, len(cells), "wrong number of cells")
            try:
                block[r] = [float(c) for c in cells]
            except ValueError:
                raise ParseError(pos + 3 + r, 0, "not a number") from None
        pos += 2 + grid.n
        chis.append(info["chi"])
        sols.append(
            FlameletSolution(
                grid=grid,
                chi_st=info["chi"],
                species_names=names,
                temperature=block[:, 0].copy(),
                mass_fractions=block[:, 2:].T.copy(),
                density=block[:, 1].copy(),
                converged=info["converged"],
                residual_norm=info["residual_norm"],
                steps=info["steps"],
                z_st=info["z_st"],
                chi_shape=info["chi_shape"],
            )
        )
    if pos != len(body):
        raise SchemaError("trailing data after last entry")
    return FlameletLibrary(np.array(chis), sols, head["mechanism"], names, bc, grid, head["metadata"])


def save_library(lib: FlameletLibrary, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(library_to_text(lib))


def load_library(path) -> FlameletLibrary:
    with open(path, encoding="utf-8", newline="") as fh:
        return library_from_text(fh.read())


# --- minimum library study -----------------------------------------------------


def even_indices(n_pool, k):
    """k indices spread evenly over range(n_pool), always including both ends."""
    if k < 2 or k > n_pool:
        raise InsufficientPool(f"cannot pick {k} entries from a pool of {n_pool}")
    return np.round(np.linspace(0, n_pool - 1, k)).astype(int)


def midpoints(chis):
    chis = np.asarray(chis, dtype=float)
    return 0.5 * (chis[:-1] + chis[1:])


def percent_error(pred, ref, floor=PERCENT_FLOOR):
    return 100.0 * np.abs(pred - ref) / np.maximum(np.abs(ref), floor)


@dataclass
class SubsetResult:
    count: int
    chis: np.ndarray
    eval_chis: np.ndarray
    errors: dict  # column -> {"max", "min", "mean"}


def subset_study(
    pool: FlameletLibrary,
    counts,
    mech: Mechanism | None = None,
    eval_chis=None,
    references=None,
    opts: SolverOptions | None = None,
    workers=None,
    columns=("T", "CO2"),
):
    """Lookup error against full solves as a function of library count.

    For each k, ``even_indices`` picks the table entries; held-out chi values
    default to the midpoints between picked values.  Reference profiles come
    from ``references`` (chi -> FlameletSolution) or are solved with ``mech``.
    """
    counts = [int(k) for k in counts]
    picks = {k: pool.chis[even_indices(len(pool), k)] for k in counts}
    evals = {k: (np.asarray(eval_chis, dtype=float) if eval_chis is not None else midpoints(picks[k])) for k in counts}
    refs = dict(references or {})
    need = sorted({float(c) for e in evals.values() for c in e} - set(refs))
    if need:
        if mech is None:
            raise ValueError("a mechanism is needed to solve reference flamelets")
        pool.check_mechanism(mech)
        shape = pool.metadata.get("chi_shape", "analytic-erfc")
        z_st = stoichiometric_z(mech, pool.bc)
        jobs = [(serialize(mech), c, z_st, shape, pool.bc, pool.grid, opts or SolverOptions()) for c in need]
        n = _worker_count(workers, len(jobs))
        if n == 1:
            solved = [_solve_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=n) as ex:
                solved = list(ex.map(_solve_one, jobs))
        for c, s in zip(need, solved):
            if not s.converged:
                raise NotConverged(s.residual_norm, s.steps, chi=c)
            refs[c] = s
    cols = [c for c in columns if c == "T" or c in pool.species_names]
    out = []
    for k in counts:
        sub = pool.subset(even_indices(len(pool), k))
        errs = {c: [] for c in cols}
        for chi in evals[k]:
            T, Y = lookup_profile(sub, chi)
            ref = refs[float(chi)]
            for c in cols:
                if c == "T":
                    errs[c].append(percent_error(T, ref.temperature))
                else:
                    i = pool.species_names.index(c)
                    errs[c].append(percent_error(Y[i], ref.mass_fractions[i]))
        summary = {}
        for c, e in errs.items():
            e = np.concatenate(e)
            summary[c] = {"max": float(e.max()), "min": float(e.min()), "mean": float(e.mean())}
        out.append(SubsetResult(k, picks[k], evals[k], summary))
    return out


def log_spaced_pool(lo=0.01, hi=29.5, n=27):
    return np.geomspace(lo, hi, n)


def map_reference_chi(chi, lo, hi):
    """Carry a chi value from the reference range [0.01, 29.5] onto [lo, hi]
    linearly; the identity for a library spanning the reference range."""
    return lo + (chi - REFERENCE_CHIS[0]) * (hi - lo) / (REFERENCE_CHIS[-1] - REFERENCE_CHIS[0])


BUNDLED_LIBRARY = "burning7.fgmlib"


def bundled_library() -> FlameletLibrary:
    """Seven burning flamelets of the OH mechanism on 30 points, as built by
    ``fgmkit tabulate`` with the default configuration."""
    from importlib import resources

    text = resources.files("fgmkit").joinpath("data", BUNDLED_LIBRARY).read_text(encoding="utf-8")
    return library_from_text(text)


def bundled_dataset() -> Dataset:
    return flatten(bundled_library())


def burning_pool(n=27, lo=0.01, hi=BURNING_CHI_MAX):
    """Evenly spaced chi values on the burning branch."""
    return np.linspace(lo, hi, n)
