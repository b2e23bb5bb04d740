"""Hyperparameter search over MLP configurations.

Configurations are addressed by an integer index in mixed radix:
architecture (most significant), activation, solver, alpha, tolerance
(least significant).  Architectures are ordered by layer count, then
lexicographically by the per-layer neuron choices.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ml import MLPConfig, TrainReport, train_and_evaluate
from .ml.mlp import n_parameters

log = logging.getLogger(__name__)

ACCURACY_EDGES = (90.0, 80.0, 60.0, 50.0)
MSE_EDGES = (0.0005, 0.001, 0.005, 0.01)
BAND_LABELS = ("excellent", "good", "fair", "poor", "bad")
SECONDS_PER_CONFIG = 1.5  # rough single-core average on the bundled dataset


@dataclass(frozen=True)
class SearchSpace:
    layer_counts: tuple = (1, 2, 3, 4, 5)
    neuron_choices: tuple = (5, 10, 15, 20, 25)
    activations: tuple = ("sigmoid", "relu", "tanh")
    solvers: tuple = ("sgd", "adam", "adadelta")
    alphas: tuple = (0.01, 0.05, 0.001, 0.0001)
    tolerances: tuple = (0.01, 0.001, 0.0001, 0.00001, 0.000001)
    max_iter: int = 2000
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        for name in ("layer_counts", "neuron_choices", "activations", "solvers", "alphas", "tolerances"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must not be empty")
            if len(set(vals)) != len(vals):
                raise ValueError(f"{name} has duplicates")
            object.__setattr__(self, name, vals)
        if any(d < 1 for d in self.layer_counts):
            raise ValueError("layer counts must be >= 1")

    @property
    def n_architectures(self):
        k = len(self.neuron_choices)
        return sum(k**d for d in self.layer_counts)

    @property
    def radices(self):
        return (
            self.n_architectures,
            len(self.activations),
            len(self.solvers),
            len(self.alphas),
            len(self.tolerances),
        )

    def size(self):
        return int(np.prod(self.radices, dtype=object))

    def architecture(self, a):
        k = len(self.neuron_choices)
        for d in self.layer_counts:
            if a < k**d:
                digits = []
                for _ in range(d):
                    a, r = divmod(a, k)
                    digits.append(self.neuron_choices[r])
                return tuple(reversed(digits))
            a -= k**d
        raise IndexError("architecture index out of range")

    def decode(self, index) -> MLPConfig:
        if not 0 <= index < self.size():
            raise IndexError("configuration index out of range")
        digits = []
        for r in reversed(self.radices):
            index, d = divmod(index, r)
            digits.append(d)
        arch, act, sol, alp, tol = reversed(digits)
        return MLPConfig(
            hidden_layers=self.architecture(arch),
            activation=self.activations[act],
            solver=self.solvers[sol],
            alpha=self.alphas[alp],
            tol=self.tolerances[tol],
            max_iter=self.max_iter,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}


FULL_SPACE = SearchSpace()


def enumerate_space(space: SearchSpace = FULL_SPACE):
    """(count, lazy iterator over every configuration in index order)."""
    n = space.size()
    return n, (space.decode(i) for i in range(n))


def uniform_configs(space: SearchSpace = FULL_SPACE, base: MLPConfig | None = None):
    """Equal neurons in every layer, other settings from ``base``."""
    base = base or MLPConfig(seed=space.seed)
    out = []
    for d in space.layer_counts:
        for k in space.neuron_choices:
            out.append(MLPConfig(**{**base.__dict__, "hidden_layers": (k,) * d}))
    return out


def sample_indices(space: SearchSpace, n, seed):
    """n distinct configuration indices, sorted."""
    total = space.size()
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(total, size=min(int(n), total), replace=False))


def config_key(cfg: MLPConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TuneResult:
    config: MLPConfig
    report: TrainReport | None = None
    error: str | None = None
    rank: int = 0

    @property
    def ok(self):
        return self.report is not None

    @property
    def n_params(self):
        return n_parameters(self.config.hidden_layers)

    def sort_key(self):
        # failures last; accuracy high, mse low, fewer parameters, then the
        # config hash so that distinct configurations never compare equal
        if not self.ok:
            return (1, 0.0, 0.0, self.n_params, config_key(self.config))
        return (0, -self.report.accuracy, self.report.mse, self.n_params, config_key(self.config))

    def to_record(self):
        rec = {"key": config_key(self.config), "config": self.config.to_dict()}
        if self.ok:
            rec["report"] = self.report.to_dict()
        else:
            rec["error"] = self.error
        return rec

    @classmethod
    def from_record(cls, rec):
        cfg = MLPConfig.from_dict(rec["config"])
        if "report" in rec:
            return cls(cfg, TrainReport.from_dict(rec["report"]))
        return cls(cfg, None, rec.get("error", "unknown"))


def rank_results(results):
    ordered = sorted(results, key=TuneResult.sort_key)
    return [TuneResult(r.config, r.report, r.error, i + 1) for i, r in enumerate(ordered)]


def _run_one(args):
    cfg, train, test = args
    try:
        _, report = train_and_evaluate("mlp", train, test, cfg)
        return TuneResult(cfg, report)
    except Exception as exc:  # recorded, not fatal
        return TuneResult(cfg, None, f"{type(exc).__name__}: {exc}")


def read_journal(path):
    done = {}
    if path and os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    # a torn last line from an interrupted run
                    log.warning("skipping unreadable journal line")
                    continue
                done[rec["key"]] = TuneResult.from_record(rec)
    return done


def select_configs(space: SearchSpace, budget):
    """budget: "full", ("random", n, seed) or an explicit list of configs."""
    if budget == "full":
        return enumerate_space(space)[1]
    if isinstance(budget, tuple) and budget and budget[0] == "random":
        _, n, seed = budget
        return [space.decode(int(i)) for i in sample_indices(space, n, seed)]
    return list(budget)


def grid_search(space: SearchSpace, train, test, budget=("random", 200, 0), workers=1, journal=None, limit=None):
    """Train and score every selected configuration; returns ranked results.

    Completed configurations found in ``journal`` are reused, new ones are
    appended as they finish.  ``limit`` stops after that many new trainings
    (for interrupting on purpose).
    """
    done = read_journal(journal)
    todo, seen = [], set()
    for cfg in select_configs(space, budget):
        key = config_key(cfg)
        if key in seen:
            continue
        seen.add(key)
        if key not in done:
            todo.append(cfg)
    if limit is not None:
        todo = todo[:limit]
    fh = None
    if journal:
        torn = os.path.exists(journal) and os.path.getsize(journal) > 0 and not _ends_with_newline(journal)
        fh = open(journal, "a", encoding="utf-8")
        if torn:
            fh.write("\n")  # keep the next record off the broken line
    try:
        jobs = [(c, train, test) for c in todo]
        if workers and workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = ex.map(_run_one, jobs, chunksize=1)
                for r in results:
                    _record(fh, done, r)
        else:
            for job in jobs:
                _record(fh, done, _run_one(job))
    finally:
        if fh:
            fh.close()
    return rank_results([done[k] for k in seen if k in done])


def _ends_with_newline(path):
    with open(path, "rb") as fh:
        fh.seek(-1, os.SEEK_END)
        return fh.read(1) == b"\n"


def _record(fh, done, result):
    done[config_key(result.config)] = result
    if fh:
        fh.write(json.dumps(result.to_record(), sort_keys=True) + "\n")
        fh.flush()


def cost_estimate(space: SearchSpace, seconds_per_config=SECONDS_PER_CONFIG, workers=1):
    n = space.size()
    return n, n * seconds_per_config / max(1, workers)


def _band(value, edges, higher_is_better):
    for i, e in enumerate(edges):
        if (value >= e) if higher_is_better else (value <= e):
            return i
    return len(edges)


def classify_bands(report):
    """(accuracy band, mse band), 0 the best and 4 the worst.  A value on a
    boundary goes to the better band."""
    acc, err = (report.accuracy, report.mse) if hasattr(report, "accuracy") else report
    return _band(acc, ACCURACY_EDGES, True), _band(err, MSE_EDGES, False)


def config_string(hidden_layers):
    return "-".join(str(int(h)) for h in hidden_layers)


TOP_COLUMNS = ("rank", "layers", "configuration", "activation", "solver", "alpha", "tol", "accuracy")


def report_top_k(results, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = []
    for r in [r for r in results if r.ok][:k]:
        c = r.config
        rows.append({
            "rank": r.rank,
            "layers": len(c.hidden_layers),
            "configuration": config_string(c.hidden_layers),
            "activation": c.activation,
            "solver": c.solver,
            "alpha": c.alpha,
            "tol": c.tol,
            "accuracy": round(r.report.accuracy, 2),
        })
    return rows


def render_csv(rows, columns=TOP_COLUMNS):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: row[c] for c in columns})
    return buf.getvalue()


def render_text(rows, columns=TOP_COLUMNS):
    cells = [list(columns)] + [[str(row[c]) for c in columns] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells) + "\n"
