import csv
import os
import subprocess
import sys

import pytest

from fgmkit import cli
from fgmkit import library as L
from fgmkit import ml
from fgmkit.mech import bundled_path


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch, tmp_path):
    monkeypatch.delenv("FGMKIT_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("FGMKIT_WORKERS", raising=False)
    monkeypatch.chdir(tmp_path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_mech_check(tmp_path):
    assert cli.main(["mech-check", "ch4_4step"]) == 0
    assert cli.main(["mech-check", str(bundled_path("ch4_6step_oh"))]) == 0
    bad = tmp_path / "bad.mech"
    bad.write_text(bundled_path("ch4_4step").read_text().replace("CO + H2O", "CO + XX"))
    assert cli.main(["mech-check", str(bad)]) == 1
    assert cli.main(["mech-check", str(tmp_path / "missing.mech")]) == 1


def test_mech_check_prints_summary():
    run = subprocess.run([sys.executable, "-m", "fgmkit.cli", "mech-check", "ch4_4step"],
                         capture_output=True, text=True)
    assert run.returncode == 0
    assert "7 species, 4 reactions" in run.stdout


def test_tabulate_and_train(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["tabulate", "--mechanism", "ch4_4step", "--chi", "0.02", "0.05", "--points", "15", "--out", str(out)])
    assert code == 0
    lib = L.load_library(out / "library.fgmlib")
    assert len(lib) == 2 and lib.grid.n == 15
    ds = L.read_csv(out / "dataset.csv")
    assert len(ds) == 30
    assert cli.main(["train", "--family", "lr", "--out", str(out)]) == 0
    rep = _rows(out / "report-lr.csv")[0]
    assert rep["family"] == "lr" and 0.0 < float(rep["accuracy"]) <= 100.0
    model = ml.load_model(out / "model-lr.fgmmodel")
    assert model.family == "lr"
    assert (out / "timing-lr.csv").exists() and (out / "report-lr.txt").exists()


def test_tabulate_rejects_unsorted_chi(tmp_path):
    assert cli.main(["tabulate", "--mechanism", "ch4_4step", "--chi", "0.05", "0.02", "--points", "10"]) == 1


def test_tabulate_unconverged_exit_2(tmp_path):
    code = cli.main(["tabulate", "--mechanism", "ch4_4step", "--chi", "0.02", "--points", "12",
                     "--set", "solver.max_pseudo_steps=2"])
    assert code == 2


def test_train_bad_options():
    assert cli.main(["train", "--dataset", "bundled", "--set", "model.options={hidden_layers: [0]}"]) == 1
    assert cli.main(["train", "--dataset", "bundled", "--set", "model.options={bogus: 1}"]) == 1
    assert cli.main(["train", "--dataset", "nowhere.csv"]) == 1


def test_train_divergence_exit_2():
    code = cli.main(["train", "--dataset", "bundled", "--family", "mlp",
                     "--set", "model.options={solver: sgd, learning_rate: 1.0e+9, hidden_layers: [20, 20]}"])
    assert code == 2


def test_compare_small(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(
        "compare:\n"
        "  chi: 0.0268\n"
        "  families: [lr, rf]\n"
        "  options: {rf: {n_trees: 5, seed: 0}}\n"
    )
    assert cli.main(["compare", "--config", str(cfg), "--library", "bundled", "--out", "cmp"]) == 0
    rows = _rows(tmp_path / "cmp" / "compare.csv")
    assert [r["family"] for r in rows] == ["lr", "rf"]
    assert all(r["status"] == "ok" for r in rows)
    # 0.0268 is a library node, so the reference curve is the stored flamelet
    assert float(rows[1]["curve_accuracy"]) > 90.0
    curves = _rows(tmp_path / "cmp" / "curves.csv")
    assert len(curves) == 2 * 30 * (1 + len(L.bundled_library().species_names))


def test_tune_small_budget_and_limit(tmp_path):
    ds = L.bundled_dataset().select_targets(["T", "OH"])
    L.write_csv(ds, tmp_path / "d.csv")
    args = ["tune", "--dataset", "d.csv", "--budget", "3", "--top-k", "2", "--out", "t"]
    assert cli.main(args + ["--limit", "1"]) == 0
    journal = tmp_path / "t" / "tune.jsonl"
    assert len(journal.read_text().splitlines()) == 1
    assert cli.main(args) == 0
    assert len(journal.read_text().splitlines()) == 3
    top = _rows(tmp_path / "t" / "tune_top.csv")
    assert 1 <= len(top) <= 2
    assert list(top[0]) == list(cli.T.TOP_COLUMNS)


def test_tune_full_needs_confirmation():
    assert cli.main(["tune", "--dataset", "bundled", "--full"]) == 1


def test_subset_study_small(tmp_path):
    cfg = tmp_path / "s.yaml"
    cfg.write_text(
        "mechanism: ch4_4step\n"
        "grid: {n: 12}\n"
        "subset: {pool: [0.01, 0.02, 0.03, 0.04, 0.05], counts: [2, 3], columns: [T, CO2]}\n"
    )
    assert cli.main(["subset-study", "--config", str(cfg), "--out", "s"]) == 0
    rows = _rows(tmp_path / "s" / "subset_study.csv")
    assert [r["count"] for r in rows] == ["2", "3"]
    assert float(rows[0]["T_mean"]) >= 0.0
    assert cli.main(["subset-study", "--config", str(cfg), "--counts", "9"]) == 1


def test_bad_config_and_set(tmp_path):
    assert cli.main(["mech-check", "--config", "missing.yaml"]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("mechanism: [unclosed\n")
    assert cli.main(["mech-check", "--config", str(bad)]) == 1
    bad.write_text("not_a_key: 1\n")
    assert cli.main(["mech-check", "--config", str(bad)]) == 1
    bad.write_text("- a list\n")
    assert cli.main(["mech-check", "--config", str(bad)]) == 1
    assert cli.main(["mech-check", "--set", "no-equals-sign"]) == 1
    assert cli.main(["tabulate", "--set", "grid.kind=hexagonal", "--chi", "0.02"]) == 1
    assert cli.main(["tabulate", "--set", "chi=[]"]) == 1


def test_load_config_merging(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("grid: {n: 50}\nsplit: {seed: 3}\n")
    cfg = cli.load_config(str(p), {"grid": {"stretch": 2.0}})
    assert cfg["grid"] == {"n": 50, "kind": "sinh", "stretch": 2.0}
    assert cfg["split"] == {"test_fraction": 0.2, "seed": 3}
    assert cfg["mechanism"] == cli.DEFAULTS["mechanism"]


def test_env_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("FGMKIT_OUTPUT_DIR", str(tmp_path / "envout"))
    monkeypatch.setenv("FGMKIT_WORKERS", "3")
    cfg = cli.load_config(None, {"output_dir": "ignored", "workers": 1})
    assert cfg["output_dir"] == str(tmp_path / "envout")
    assert cfg["workers"] == 3
    assert cli.main(["train", "--dataset", "bundled", "--family", "lr"]) == 0
    assert os.path.exists(tmp_path / "envout" / "report-lr.csv")
