import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.optimize import minimize

from fgmkit import library as L
from fgmkit import ml
from fgmkit.ml import _pykernels, forest, kernels, mlp, svr
from fgmkit.ml.metrics import column_rmse
from fgmkit.ml.scaling import ColumnScaler, fit_columns


def _toy(n=120, seed=0, targets=("T", "A", "B")):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.random(n), rng.uniform(0.01, 0.1, n)])
    cols = [1500 * np.exp(-((X[:, 0] - 0.3) ** 2) / 0.05) / (1 + 5 * X[:, 1]) + 300]
    cols += [np.sin(3 * X[:, 0]) * X[:, 1] * k for k in range(1, len(targets))]
    return L.Dataset(X, np.column_stack(cols), ("Z", "chi"), targets)


# -- scaling and metrics -----------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_scaler_roundtrip_property(x):
    sc = fit_columns(x)
    s = sc.apply(x)
    assert np.all((s >= 0.0) & (s <= 1.0))
    np.testing.assert_allclose(sc.invert(s), x, rtol=1e-12, atol=1e-9 * (1 + np.abs(x).max()))


def test_constant_column_scaling():
    x = np.array([[1.0, 0.3], [2.0, 0.3], [3.0, 0.3]])
    sc = fit_columns(x)
    s = sc.apply(x)
    assert np.all(s[:, 1] == 0.5)
    assert np.array_equal(sc.invert(s)[:, 1], x[:, 1])
    assert np.array_equal(s[:, 0], [0.0, 0.5, 1.0])
    with pytest.raises(ml.DimensionMismatch):
        sc.apply(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ColumnScaler([1.0], [0.0])


def test_scaler_params_dict():
    p = ml.fit_scaler(_toy(10))
    assert ml.ScalerParams.from_dict(p.to_dict()) == p


def test_accuracy_definition():
    truth = np.array([[0.0, 1.0], [1.0, 0.0]])
    pred = np.array([[0.1, 1.0], [0.9, 0.2]])
    rmse = np.array([0.1, np.sqrt(0.02)])
    np.testing.assert_allclose(column_rmse(pred, truth), rmse)
    assert ml.accuracy(pred, truth) == pytest.approx(100 * (1 - rmse.mean()))
    assert ml.mse(pred, truth) == pytest.approx((0.01 + 0.01 + 0.04) / 4)
    assert ml.accuracy(truth, truth) == 100.0
    assert ml.accuracy(truth + 5.0, truth) == 0.0
    with pytest.raises(ml.ShapeMismatch):
        ml.accuracy(pred, truth[:, :1])


def test_report_validation_and_dict():
    r = ml.TrainReport(90.0, 0.01, 1.0, 0.1, {"T": 90.0}, {"A": 0})
    assert ml.TrainReport.from_dict(r.to_dict()) == r
    with pytest.raises(ValueError):
        ml.TrainReport(101.0, 0.0, 0.0, 0.0)


def test_negative_counts():
    pred = np.array([[300.0, -0.1, 0.2], [-1.0, 0.1, -0.3]])
    assert ml.negative_counts(pred, ("T", "A", "B")) == {"A": 1, "B": 1}


def test_split_dataset():
    ds = _toy(100)
    tr, te = ml.split_dataset(ds, 0.2, 0)
    assert len(tr) == 80 and len(te) == 20
    rows = {tuple(r) for r in np.vstack([tr.inputs, te.inputs])}
    assert len(rows) == 100
    tr2, te2 = ml.split_dataset(ds, 0.2, 0)
    assert tr2 == tr and te2 == te
    assert ml.split_dataset(ds, 0.2, 1)[1] != te
    with pytest.raises(ValueError):
        ml.split_dataset(_toy(2), 0.1)


# -- MLP ---------------------------------------------------------------------


def test_mlp_config_validation():
    for bad in ({"hidden_layers": ()}, {"activation": "gelu"}, {"solver": "lbfgs"},
                {"alpha": -1.0}, {"tol": 0.0}, {"batch_size": 0}, {"learning_rate": 0.0}):
        with pytest.raises(ml.InvalidConfig):
            ml.MLPConfig(**bad)
    with pytest.raises(ml.InvalidConfig):
        ml.make_config("mlp", {"neurons": 3})
    with pytest.raises(ml.InvalidConfig):
        ml.make_config("xgb")
    assert ml.MLPConfig(solver="adadelta").rate == 1.0


def test_n_parameters():
    assert mlp.n_parameters((10,)) == 2 * 10 + 10 + 10 + 1
    assert mlp.n_parameters((5, 5), n_in=2, n_out=3) == 15 + 30 + 18


def test_init_params_glorot():
    rng = np.random.default_rng(0)
    Ws, bs = mlp.init_params([2, 50, 40, 1], "tanh", rng)
    assert np.abs(Ws[1]).max() <= np.sqrt(6 / 90)
    Wr, _ = mlp.init_params([2, 50, 40, 1], "relu", np.random.default_rng(0))
    assert np.abs(Wr[1]).max() <= np.sqrt(2) * np.sqrt(6 / 90)
    assert np.abs(Wr[1]).max() > np.sqrt(6 / 90)
    assert all(np.all(b == 0) for b in bs)


@pytest.mark.parametrize("solver", ["sgd", "adam", "adadelta"])
@pytest.mark.parametrize("activation", ["sigmoid", "relu", "tanh"])
def test_mlp_learns(solver, activation):
    tr, te = ml.split_dataset(_toy(200), 0.2, 0)
    cfg = ml.MLPConfig(hidden_layers=(16, 16), activation=activation, solver=solver, max_iter=60, tol=1e-9,
                       learning_rate=0.05 if solver == "sgd" else None)
    model, rep = ml.train_and_evaluate("mlp", tr, te, cfg)
    assert model.metadata["epochs"] <= 60
    Xs = model.scaler.inputs.apply(tr.inputs)
    Ys = model.scaler.targets.apply(tr.targets)
    w0, b0 = mlp.init_params([2, 16, 16, 3], activation, np.random.default_rng(0))
    start = mlp.loss(w0, b0, Xs, Ys, cfg.alpha, activation)
    assert model.metadata["final_loss"] < start
    assert rep.accuracy > 70.0


def test_mlp_deterministic():
    ds = _toy(80)
    cfg = ml.MLPConfig(hidden_layers=(8,), max_iter=20)
    a = ml.model_to_text(ml.train_mlp(ds, cfg))
    assert ml.model_to_text(ml.train_mlp(ds, cfg)) == a
    assert ml.model_to_text(ml.train_mlp(ds, ml.MLPConfig(hidden_layers=(8,), max_iter=20, seed=1))) != a


def test_mlp_early_stop():
    model = ml.train_mlp(_toy(80), ml.MLPConfig(hidden_layers=(4,), tol=1.0, max_iter=500))
    assert model.metadata["epochs"] == mlp.PATIENCE + 1  # first epoch sets the baseline


def test_mlp_diverges():
    with pytest.raises(ml.Diverged):
        ml.train_mlp(_toy(80), ml.MLPConfig(hidden_layers=(20, 20), solver="sgd", activation="relu",
                                            learning_rate=1e6, max_iter=50))


def test_power_of_two_target_scaling_is_exact():
    ds = _toy(60)
    scaled = L.Dataset(ds.inputs, ds.targets * 4.0, ds.input_names, ds.target_names)
    cfg = ml.MLPConfig(hidden_layers=(6,), max_iter=15)
    a = ml.predict(ml.train_mlp(ds, cfg), ds.inputs)
    b = ml.predict(ml.train_mlp(scaled, cfg), ds.inputs)
    assert np.array_equal(b, a * 4.0)


def test_empty_dataset_rejected():
    empty = L.Dataset(np.empty((0, 2)), np.empty((0, 1)), ("Z", "chi"), ("T",))
    for fam in ml.FAMILIES:
        with pytest.raises(ml.EmptyDataset):
            ml.train(fam, empty)


# -- linear ------------------------------------------------------------------


def test_linear_recovers_plane():
    rng = np.random.default_rng(1)
    X = rng.random((300, 2))
    Y = np.column_stack([1.0 + 2.0 * X[:, 0] - 3.0 * X[:, 1], 0.5 * X[:, 0]])
    ds = L.Dataset(X, Y, ("Z", "chi"), ("T", "A"))
    model = ml.train("lr", ds, {"epochs": 400, "lr": 0.1})
    np.testing.assert_allclose(ml.predict(model, X), Y, atol=1e-3)


def test_linear_diverges():
    with pytest.raises(ml.Diverged):
        ml.train("lr", _toy(100), {"lr": 1e6, "epochs": 50})


# -- random forest -------------------------------------------------------------


def test_forest_constant_target_exact():
    X = np.random.default_rng(0).random((30, 2))
    ds = L.Dataset(X, np.full((30, 1), 0.1), ("Z", "chi"), ("T",))
    model = ml.train("rf", ds, {"n_trees": 5})
    assert np.all(ml.predict(model, X) == 0.1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 40))
def test_forest_predictions_within_target_range(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = rng.standard_normal((n, 1))
    model = ml.train("rf", L.Dataset(X, y, ("Z", "chi"), ("T",)), {"n_trees": 3, "seed": seed})
    p = ml.predict(model, rng.random((20, 2)))
    assert np.all((p >= y.min()) & (p <= y.max()))


def test_forest_min_leaf_and_depth():
    rng = np.random.default_rng(2)
    X = rng.random((64, 2))
    y = rng.random(64)
    t = forest.build_tree(X, y, max_depth=2)
    assert np.count_nonzero(t["feature"] < 0) <= 4
    t = forest.build_tree(X, y, min_leaf=10)
    leaves = forest.tree_predict(t, X)
    for v in np.unique(leaves):
        assert np.count_nonzero(leaves == v) >= 10


def test_forest_deterministic_and_seeded():
    ds = _toy(80)
    a = ml.model_to_text(ml.train("rf", ds, {"n_trees": 4, "seed": 3}))
    assert ml.model_to_text(ml.train("rf", ds, {"n_trees": 4, "seed": 3})) == a
    assert ml.model_to_text(ml.train("rf", ds, {"n_trees": 4, "seed": 4})) != a


def test_forest_config_validation():
    for bad in ({"n_trees": 0}, {"min_samples_leaf": 0}, {"feature_subsample": 0.0}, {"max_depth": -1}):
        with pytest.raises(ml.InvalidConfig):
            ml.RFConfig(**bad)


# -- SVR -----------------------------------------------------------------------


def _dual_oracle(K, y, C, eps):
    """epsilon-SVR dual solved with a general constrained optimiser."""
    n = y.size

    def f(v):
        b = v[:n] - v[n:]
        return 0.5 * b @ K @ b + eps * v.sum() - y @ b

    def g(v):
        b = v[:n] - v[n:]
        kb = K @ b
        return np.concatenate([kb + eps - y, -kb + eps + y])

    res = minimize(f, np.zeros(2 * n), jac=g, method="SLSQP", bounds=[(0, C)] * (2 * n),
                   constraints=[{"type": "eq", "fun": lambda v: v[:n].sum() - v[n:].sum(),
                                 "jac": lambda v: np.concatenate([np.ones(n), -np.ones(n)])}],
                   options={"ftol": 1e-14, "maxiter": 1000})
    return res.x, res.fun


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_svr_matches_dual_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((25, 2))
    y = np.sin(4 * X[:, 0]) * 0.5 + X[:, 1] * 0.3
    cfg = ml.SVRConfig(C=1.0, epsilon=0.05, tol=1e-6)
    K = svr.gram("rbf", 1.5, X, X)
    a, G, _, ok = kernels.smo_solve(K, y, cfg.C, cfg.epsilon, cfg.tol, 100000)
    assert ok
    v, fun = _dual_oracle(K, y, cfg.C, cfg.epsilon)
    b_smo = a[:25] - a[25:]
    obj = 0.5 * b_smo @ K @ b_smo + cfg.epsilon * a.sum() - y @ b_smo
    assert obj <= fun + 1e-6
    assert abs(obj - fun) < 1e-5
    np.testing.assert_allclose(K @ b_smo, K @ (v[:25] - v[25:]), atol=1e-3)


def test_svr_model_fits_smooth_function():
    rng = np.random.default_rng(5)
    X = rng.random((80, 2))
    ds = L.Dataset(X, np.column_stack([np.sin(3 * X[:, 0]), X[:, 1]]), ("Z", "chi"), ("T", "A"))
    model = ml.train("svr", ds, {"epsilon": 0.01, "C": 10.0})
    rep = ml.evaluate(model, ds)
    assert rep.accuracy > 95
    assert all(n >= 1 for n in model.metadata["n_support"])


def test_svr_not_converged():
    with pytest.raises(ml.NotConverged):
        ml.train("svr", _toy(60), {"max_passes": 1, "tol": 1e-12, "epsilon": 0.0, "C": 100.0})


def test_svr_bias_free_vs_bounded():
    G = np.array([0.1, -0.2, 0.3, 0.4])
    a = np.array([0.5, 0.0, 0.0, 0.0])  # one free variable
    assert svr.bias(a, G, 1.0) == pytest.approx(-0.1)


# -- kernels -------------------------------------------------------------------


compiled = pytest.importorskip("fgmkit.ml._kernels") if kernels.BACKEND == "cython" else None


@pytest.mark.skipif(compiled is None, reason="extension not built")
@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 60), d=st.integers(1, 4),
       min_leaf=st.integers(1, 5), coarse=st.booleans())
def test_best_split_backends_agree(seed, n, d, min_leaf, coarse):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, (n, d)).astype(float) if coarse else rng.random((n, d))
    y = rng.standard_normal(n)
    feats = np.arange(d)
    assert _pykernels.best_split(X, y, feats, min_leaf) == compiled.best_split(X, y, feats, min_leaf)


@pytest.mark.skipif(compiled is None, reason="extension not built")
@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 30))
def test_smo_backends_agree(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = rng.standard_normal(n)
    K = svr.gram("rbf", 2.0, X, X)
    a1, g1, i1, c1 = _pykernels.smo_solve(K, y, 1.0, 0.1, 1e-3, 10000)
    a2, g2, i2, c2 = compiled.smo_solve(K, y, 1.0, 0.1, 1e-3, 10000)
    assert (i1, c1) == (i2, c2)
    assert np.array_equal(a1, a2) and np.array_equal(g1, g2)


def test_pure_python_switch():
    env = dict(os.environ, FGMKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from fgmkit.ml import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_best_split_reference():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    f, t, gain = _pykernels.best_split(X, y, np.array([0]), 1)
    assert (f, t) == (0, 1.5)
    assert gain == pytest.approx(1.0)  # SSE drops from 1.0 to 0
    assert _pykernels.best_split(X[:1], y[:1], np.array([0]), 1)[0] == -1


# -- model files -----------------------------------------------------------------


@pytest.mark.parametrize("family,opts", [
    ("lr", {"epochs": 5}), ("mlp", {"hidden_layers": [5], "max_iter": 5}),
    ("rf", {"n_trees": 3}), ("svr", {}),
])
def test_model_roundtrip(family, opts, tmp_path):
    ds = _toy(60)
    model = ml.train(family, ds, opts)
    path = tmp_path / f"m.{family}"
    ml.save_model(model, path)
    back = ml.load_model(path)
    assert back.family == family and back.target_names == ds.target_names
    assert np.array_equal(ml.predict(back, ds.inputs), ml.predict(model, ds.inputs))
    assert ml.model_to_text(back) == ml.model_to_text(model)


def test_model_tamper_and_garbage():
    text = ml.model_to_text(ml.train("lr", _toy(20), {"epochs": 2}))
    with pytest.raises(ml.model.ModelFormatError):
        ml.model_from_text(text.replace('"lr"', '"rf"', 1))
    with pytest.raises(ml.model.ModelFormatError):
        ml.model_from_text("junk")


def test_predict_checks_and_clamp():
    ds = _toy(60)
    model = ml.train("svr", ds)
    with pytest.raises(ml.DimensionMismatch):
        ml.predict(model, np.ones((3, 3)))
    one = ml.predict(model, ds.inputs[0])
    assert one.shape == (1, 3)
    raw = ml.predict(model, ds.inputs)
    clamped = ml.predict(model, ds.inputs, clamp=True)
    assert np.all(clamped[:, 1:] >= 0)
    assert np.array_equal(clamped[:, 0], raw[:, 0])


def test_model_is_read_only():
    model = ml.train("lr", _toy(20), {"epochs": 1})
    with pytest.raises(ValueError):
        model.params["W"][0, 0] = 1.0


def test_evaluate_target_mismatch():
    model = ml.train("lr", _toy(20), {"epochs": 1})
    other = _toy(20, targets=("T", "A", "C"))
    with pytest.raises(ml.DimensionMismatch):
        ml.evaluate(model, other)
