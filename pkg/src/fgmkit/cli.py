"""Command-line entry point: fgmkit <command> [options].

Exit codes: 0 success, 1 input or validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

import numpy as np
import yaml

from . import library as L
from . import ml
from . import tuner as T
from .flamelet import (
    BoundaryConditions,
    ChiProfile,
    Grid,
    NotConverged,
    SolverOptions,
    default_bc,
    solve_steady,
    stoichiometric_z,
)
from .flamelet.conditions import composition_vector
from .mech import MechanismError, bundled_names, bundled_path, load_mechanism

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

DEFAULTS = {
    "mechanism": "ch4_6step_oh",
    "output_dir": "fgm-out",
    "workers": 1,
    "boundary": None,
    "grid": {"n": 30, "kind": "sinh", "stretch": 5.0},
    "chi": "burning",
    "chi_shape": "analytic-erfc",
    "solver": {},
    "dataset": None,
    "library": None,
    "split": {"test_fraction": 0.2, "seed": 0},
    "model": {"family": "mlp", "options": {}},
    "compare": {
        "chi": None,
        "families": ["mlp", "rf", "lr", "svr"],
        "options": {
            "mlp": {"hidden_layers": [10, 15, 20, 15], "activation": "tanh", "solver": "adam",
                    "alpha": 0.001, "tol": 0.00001, "seed": 0},
        },
    },
    "tune": {"budget": 200, "seed": 0, "top_k": 5, "full": False, "journal": None},
    "subset": {"pool": 27, "counts": [3, 7, 12, 17, 22], "columns": ["T", "CO2"]},
}


class InputError(Exception):
    pass


class _Out:
    """All console output goes through one writer."""

    def __init__(self, stream=None):
        self.stream = stream or sys.stdout

    def __call__(self, *parts):
        print(*parts, file=self.stream, flush=True)


out = _Out()


# -- configuration ------------------------------------------------------------


def _merge(base, extra):
    merged = dict(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(merged.get(k), dict):
            merged[k] = _merge(merged[k], v)
        else:
            merged[k] = v
    return merged


def load_config(path=None, overrides=None):
    cfg = dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise InputError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                user = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise InputError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise InputError("config file must hold a mapping")
        unknown = set(user) - set(DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg = _merge(cfg, user)
    cfg = _merge(cfg, overrides)
    if os.environ.get("FGMKIT_OUTPUT_DIR"):
        cfg["output_dir"] = os.environ["FGMKIT_OUTPUT_DIR"]
    if os.environ.get("FGMKIT_WORKERS"):
        cfg["workers"] = int(os.environ["FGMKIT_WORKERS"])
    return cfg


def _set_override(overrides, item):
    """--set a.b=value with value parsed as YAML."""
    if "=" not in item:
        raise InputError(f"--set needs key=value, got {item!r}")
    key, raw = item.split("=", 1)
    node = overrides
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = yaml.safe_load(raw)


def resolve_mechanism(spec):
    if spec in bundled_names():
        path = str(bundled_path(spec))
    else:
        path = spec
    if not os.path.exists(path):
        raise InputError(f"IoError: mechanism file not found: {spec}")
    try:
        return load_mechanism(path)
    except MechanismError as exc:
        raise InputError(f"{path}: {exc}") from exc


def build_bc(mech, spec):
    if not spec:
        return default_bc(mech)
    try:
        ox = spec.get("y_ox")
        if ox is None and "x_ox" in spec:
            y_ox = composition_vector(mech, spec["x_ox"], molar=True)
        else:
            y_ox = composition_vector(mech, ox)
        fu = spec.get("y_fuel")
        if fu is None and "x_fuel" in spec:
            y_fuel = composition_vector(mech, spec["x_fuel"], molar=True)
        else:
            y_fuel = composition_vector(mech, fu)
        return BoundaryConditions(
            float(spec.get("t_fuel", 300.15)),
            float(spec.get("t_ox", 300.0)),
            y_fuel,
            y_ox,
            float(spec.get("pressure", 101325.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad boundary specification: {exc}") from exc


def build_grid(spec, z_st):
    n = int(spec.get("n", 30))
    kind = spec.get("kind", "sinh")
    if kind == "uniform":
        return Grid.uniform(n)
    if kind == "sinh":
        zc = spec.get("z_center", "auto")
        return Grid.clustered(n, z_st if zc in (None, "auto") else float(zc), float(spec.get("stretch", 5.0)))
    raise InputError(f"unknown grid kind {kind!r}")


def chi_list(spec):
    if spec == "reference":
        return list(L.REFERENCE_CHIS)
    if spec == "burning":
        return list(L.BURNING_CHIS)
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, list) and spec:
        return [float(c) for c in spec]
    raise InputError("chi must be 'reference', 'burning' or a nonempty list")


def solver_options(spec):
    try:
        return SolverOptions(**(spec or {}))
    except TypeError as exc:
        raise InputError(f"bad solver options: {exc}") from exc


def _outdir(cfg):
    d = cfg["output_dir"]
    os.makedirs(d, exist_ok=True)
    return d


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x):
    return repr(float(x))


def load_dataset(cfg):
    path = cfg.get("dataset")
    if path is None:
        default = os.path.join(cfg["output_dir"], "dataset.csv")
        if os.path.exists(default):
            path = default
    if path is None or path == "bundled":
        return L.bundled_dataset()
    if not os.path.exists(path):
        raise InputError(f"IoError: dataset not found: {path}")
    try:
        return L.read_csv(path)
    except L.LibraryError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_lib(cfg):
    path = cfg.get("library")
    if path is None:
        default = os.path.join(cfg["output_dir"], "library.fgmlib")
        if os.path.exists(default):
            path = default
    if path is None or path == "bundled":
        return L.bundled_library()
    if not os.path.exists(path):
        raise InputError(f"IoError: library not found: {path}")
    try:
        return L.load_library(path)
    except L.LibraryError as exc:
        raise InputError(f"{path}: {exc}") from exc


# -- commands -----------------------------------------------------------------


def cmd_mech_check(args, cfg):
    mech = resolve_mechanism(args.path or cfg["mechanism"])
    out(f"{mech.n_species} species, {mech.n_reactions} reactions, OK")
    return EXIT_OK


def cmd_tabulate(args, cfg):
    mech = resolve_mechanism(cfg["mechanism"])
    bc = build_bc(mech, cfg["boundary"])
    z_st = stoichiometric_z(mech, bc)
    grid = build_grid(cfg["grid"], z_st)
    chis = chi_list(cfg["chi"])
    opts = solver_options(cfg["solver"])
    try:
        lib = L.tabulate(mech, bc, grid, chis, opts, cfg["chi_shape"], workers=cfg["workers"])
    except NotConverged as exc:
        out(f"not converged at chi={exc.chi}: residual {exc.residual_norm:.3e} after {exc.steps} steps")
        return EXIT_NUMERIC
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    for c, s in zip(lib.chis, lib.solutions):
        out(f"chi={c:g} converged steps={s.steps} residual={s.residual_norm:.3e} Tmax={s.max_temperature:.2f}")
    d = _outdir(cfg)
    L.save_library(lib, os.path.join(d, "library.fgmlib"))
    ds = L.flatten(lib)
    L.write_csv(ds, os.path.join(d, "dataset.csv"))
    out(f"wrote {len(lib)}-entry library and {len(ds)}-row dataset to {d}")
    return EXIT_OK


def _report_rows(family, report, names):
    data = [family, _fmt(report.accuracy), _fmt(report.mse)]
    data += [_fmt(report.per_target[n]) for n in names]
    data += [str(report.negative_counts.get(n, 0)) for n in names if n != "T"]
    header = ["family", "accuracy", "mse"] + [f"acc_{n}" for n in names] + [f"neg_{n}" for n in names if n != "T"]
    return header, data


def cmd_train(args, cfg):
    ds = load_dataset(cfg)
    family = cfg["model"]["family"]
    try:
        config = ml.make_config(family, cfg["model"].get("options"))
    except (ml.InvalidConfig, TypeError) as exc:
        raise InputError(str(exc)) from exc
    train, test = ml.split_dataset(ds, cfg["split"]["test_fraction"], cfg["split"]["seed"])
    try:
        model, report = ml.train_and_evaluate(family, train, test, config)
    except (ml.Diverged, ml.NotConverged) as exc:
        out(f"training failed: {exc}")
        return EXIT_NUMERIC
    d = _outdir(cfg)
    ml.save_model(model, os.path.join(d, f"model-{family}.fgmmodel"))
    header, row = _report_rows(family, report, ds.target_names)
    _write(os.path.join(d, f"report-{family}.csv"), _csv_text(header, [row]))
    _write(
        os.path.join(d, f"timing-{family}.csv"),
        _csv_text(["family", "train_time", "predict_time"], [[family, f"{report.train_time:.6f}", f"{report.predict_time:.6f}"]]),
    )
    lines = [
        f"family      {family}",
        f"accuracy    {report.accuracy:.2f} %",
        f"mse         {report.mse:.6f}",
        f"train time  {report.train_time:.3f} s",
        f"predict     {report.predict_time:.4f} s",
    ]
    lines += [f"  {n:<8} {report.per_target[n]:6.2f} %" for n in ds.target_names]
    text = "\n".join(lines) + "\n"
    _write(os.path.join(d, f"report-{family}.txt"), text)
    out(text.rstrip())
    return EXIT_OK


def reference_curve(lib, chi, mech=None, opts=None):
    """(T, Y) at chi: a library entry if present, else a fresh solve."""
    hit = np.flatnonzero(lib.chis == chi)
    if hit.size:
        s = lib.solutions[hit[0]]
        return s.temperature, s.mass_fractions, True
    if mech is None:
        raise InputError("a mechanism is needed to solve the reference flamelet")
    lib.check_mechanism(mech)
    z_st = stoichiometric_z(mech, lib.bc)
    s = solve_steady(mech, ChiProfile(chi, z_st, lib.metadata.get("chi_shape", "analytic-erfc")), lib.bc, lib.grid, opts)
    if not s.converged:
        raise NotConverged(s.residual_norm, s.steps, chi=chi)
    return s.temperature, s.mass_fractions, False


def compare_families(lib, cfg, mech=None):
    """Train every family on the split; score the split and the curve at the
    comparison chi.  Returns (rows, curves, chi)."""
    ds = L.flatten(lib)
    train, test = ml.split_dataset(ds, cfg["split"]["test_fraction"], cfg["split"]["seed"])
    chi = cfg["compare"]["chi"]
    if chi is None:
        chi = round(L.map_reference_chi(5.0, lib.chis[0], lib.chis[-1]), 4)
    T_ref, Y_ref, _ = reference_curve(lib, float(chi), mech, solver_options(cfg["solver"]))
    truth = np.column_stack([T_ref, Y_ref.T])
    X = np.column_stack([lib.z, np.full(lib.grid.n, float(chi))])
    names = ds.target_names
    rows, curves = [], []
    for fam in cfg["compare"]["families"]:
        opts = cfg["compare"].get("options", {}).get(fam)
        row = {"family": fam, "status": "ok"}
        try:
            model, rep = ml.train_and_evaluate(fam, train, test, opts)
        except Exception as exc:  # recorded per family
            row["status"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        pred = ml.predict(model, X)
        scale = model.scaler.targets.apply
        curve_acc = ml.per_target_accuracy(scale(pred), scale(truth))
        row.update(
            accuracy=rep.accuracy,
            mse=rep.mse,
            curve_accuracy=ml.accuracy(scale(pred), scale(truth)),
            per_target=rep.per_target,
            curve_per_target={n: float(a) for n, a in zip(names, curve_acc)},
            negatives=sum(rep.negative_counts.values()) + int(np.count_nonzero(pred[:, 1:] < 0)),
            train_time=rep.train_time,
        )
        rows.append(row)
        for j, n in enumerate(names):
            for i, z in enumerate(lib.z):
                curves.append([fam, n, _fmt(z), _fmt(chi), _fmt(pred[i, j]), _fmt(truth[i, j])])
    return rows, curves, float(chi)


def cmd_compare(args, cfg):
    lib = load_lib(cfg)
    mech = None
    try:
        mech = resolve_mechanism(cfg["mechanism"])
    except InputError:
        pass
    try:
        rows, curves, chi = compare_families(lib, cfg, mech)
    except NotConverged as exc:
        out(f"reference flamelet not converged at chi={exc.chi}")
        return EXIT_NUMERIC
    target = "OH" if "OH" in lib.species_names else "T"
    header = ["family", "status", "accuracy", "mse", f"split_{target}", "curve_accuracy", f"curve_{target}", "negatives", "negative_flag"]
    table = []
    for r in rows:
        if r["status"] != "ok":
            table.append([r["family"], r["status"]] + [""] * 7)
            continue
        table.append([
            r["family"], "ok", _fmt(r["accuracy"]), _fmt(r["mse"]), _fmt(r["per_target"][target]),
            _fmt(r["curve_accuracy"]), _fmt(r["curve_per_target"][target]), str(r["negatives"]),
            "yes" if r["negatives"] else "no",
        ])
    d = _outdir(cfg)
    _write(os.path.join(d, "compare.csv"), _csv_text(header, table))
    _write(os.path.join(d, "curves.csv"), _csv_text(["family", "target", "Z", "chi", "predicted", "reference"], curves))
    out(f"comparison at chi={chi:g} (curve), test split for the rest")
    for r in rows:
        if r["status"] != "ok":
            out(f"  {r['family']:<4} failed: {r['status']}")
        else:
            flag = "  NEGATIVE VALUES" if r["negatives"] else ""
            out(
                f"  {r['family']:<4} acc {r['accuracy']:6.2f}  mse {r['mse']:.5f}  "
                f"{target} split {r['per_target'][target]:6.2f}  {target} curve {r['curve_per_target'][target]:6.2f}{flag}"
            )
    return EXIT_OK


def cmd_tune(args, cfg):
    tcfg = cfg["tune"]
    space = T.SearchSpace(seed=int(tcfg.get("seed", 0)))
    if tcfg.get("full"):
        n, secs = T.cost_estimate(space, workers=cfg["workers"])
        out(f"full space: {n} configurations, roughly {secs / 3600:.0f} h on {cfg['workers']} worker(s)")
        if not args.yes:
            out("refusing to run the full space without --yes")
            return EXIT_INPUT
        budget = "full"
    else:
        budget = ("random", int(tcfg["budget"]), int(tcfg.get("seed", 0)))
    ds = load_dataset(cfg)
    train, test = ml.split_dataset(ds, cfg["split"]["test_fraction"], cfg["split"]["seed"])
    d = _outdir(cfg)
    journal = tcfg.get("journal") or os.path.join(d, "tune.jsonl")
    results = T.grid_search(space, train, test, budget, workers=cfg["workers"], journal=journal, limit=args.limit)
    rows = T.report_top_k(results, int(tcfg.get("top_k", 5)))
    _write(os.path.join(d, "tune_top.csv"), T.render_csv(rows))
    text = T.render_text(rows)
    _write(os.path.join(d, "tune_top.txt"), text)
    failed = sum(not r.ok for r in results)
    out(text.rstrip())
    out(f"{len(results)} configurations scored, {failed} failed; journal {journal}")
    return EXIT_OK


def cmd_subset_study(args, cfg):
    mech = resolve_mechanism(cfg["mechanism"])
    scfg = cfg["subset"]
    bc = build_bc(mech, cfg["boundary"])
    grid = build_grid(cfg["grid"], stoichiometric_z(mech, bc))
    pool_spec = scfg.get("pool", 27)
    chis = L.burning_pool(int(pool_spec)) if isinstance(pool_spec, int) else chi_list(pool_spec)
    counts = [int(k) for k in scfg["counts"]]
    opts = solver_options(cfg["solver"])
    for k in counts:
        try:
            L.even_indices(len(chis), k)
        except L.InsufficientPool as exc:
            out(str(exc))
            return EXIT_INPUT
    try:
        pool = L.tabulate(mech, bc, grid, chis, opts, cfg["chi_shape"], workers=cfg["workers"])
        results = L.subset_study(pool, counts, mech, opts=opts, workers=cfg["workers"], columns=tuple(scfg["columns"]))
    except NotConverged as exc:
        out(f"not converged at chi={exc.chi}")
        return EXIT_NUMERIC
    cols = [c for c in scfg["columns"] if c == "T" or c in pool.species_names]
    header = ["count"] + [f"{c}_{s}" for c in cols for s in ("max", "min", "mean")]
    rows = [[str(r.count)] + [_fmt(r.errors[c][s]) for c in cols for s in ("max", "min", "mean")] for r in results]
    d = _outdir(cfg)
    _write(os.path.join(d, "subset_study.csv"), _csv_text(header, rows))
    for r in results:
        out(f"k={r.count:<3} " + "  ".join(f"{c} mean {r.errors[c]['mean']:.3f}%" for c in cols))
    return EXIT_OK


COMMANDS = {
    "mech-check": cmd_mech_check,
    "tabulate": cmd_tabulate,
    "train": cmd_train,
    "compare": cmd_compare,
    "tune": cmd_tune,
    "subset-study": cmd_subset_study,
}


def build_parser():
    p = argparse.ArgumentParser(prog="fgmkit", description="Flamelet tables and ML surrogates")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        if name == "mech-check":
            sp.add_argument("path", nargs="?", help="mechanism file or bundled name")
        if name in ("tabulate", "subset-study"):
            sp.add_argument("--mechanism")
            sp.add_argument("--chi", type=float, nargs="+")
            sp.add_argument("--points", type=int)
        if name in ("train", "tune"):
            sp.add_argument("--dataset")
        if name == "train":
            sp.add_argument("--family", choices=ml.FAMILIES)
        if name == "compare":
            sp.add_argument("--library")
        if name == "tune":
            sp.add_argument("--budget", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--top-k", type=int)
            sp.add_argument("--full", action="store_true", help="search the whole space")
            sp.add_argument("--yes", action="store_true", help="confirm a full-space run")
            sp.add_argument("--limit", type=int, help="stop after this many new trainings")
        if name == "subset-study":
            sp.add_argument("--counts", type=int, nargs="+")
    return p


def _overrides(args):
    o = {}
    for item in args.set:
        _set_override(o, item)
    if args.out:
        o["output_dir"] = args.out
    if getattr(args, "mechanism", None):
        o["mechanism"] = args.mechanism
    if getattr(args, "chi", None):
        o["chi"] = args.chi
    if getattr(args, "points", None):
        o.setdefault("grid", {})["n"] = args.points
    if getattr(args, "dataset", None):
        o["dataset"] = args.dataset
    if getattr(args, "library", None):
        o["library"] = args.library
    if getattr(args, "family", None):
        o.setdefault("model", {})["family"] = args.family
    for flag, key in (("budget", "budget"), ("seed", "seed"), ("top_k", "top_k")):
        if getattr(args, flag, None) is not None:
            o.setdefault("tune", {})[key] = getattr(args, flag)
    if getattr(args, "full", False):
        o.setdefault("tune", {})["full"] = True
    if getattr(args, "counts", None):
        o.setdefault("subset", {})["counts"] = args.counts
    return o


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not hasattr(args, "limit"):
        args.limit = None
    if not hasattr(args, "yes"):
        args.yes = False
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](args, cfg)
    except InputError as exc:
        out(f"error: {exc}")
        return EXIT_INPUT
    except (OSError, L.LibraryError, ml.InvalidConfig) as exc:
        out(f"error: {exc}")
        return EXIT_INPUT
    except (NotConverged, ml.Diverged, ml.NotConverged, ArithmeticError) as exc:
        out(f"numerical failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
