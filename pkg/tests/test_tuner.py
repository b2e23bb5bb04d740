import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgmkit import library as L
from fgmkit import ml
from fgmkit import tuner as T


def _brute(space):
    archs = [a for d in space.layer_counts for a in itertools.product(space.neuron_choices, repeat=d)]
    return list(itertools.product(archs, space.activations, space.solvers, space.alphas, space.tolerances))


small_spaces = st.builds(
    T.SearchSpace,
    layer_counts=st.lists(st.integers(1, 3), min_size=1, max_size=3, unique=True).map(tuple),
    neuron_choices=st.lists(st.integers(1, 30), min_size=1, max_size=3, unique=True).map(tuple),
    activations=st.lists(st.sampled_from(["sigmoid", "relu", "tanh"]), min_size=1, max_size=3, unique=True).map(tuple),
    solvers=st.lists(st.sampled_from(["sgd", "adam", "adadelta"]), min_size=1, max_size=3, unique=True).map(tuple),
    alphas=st.lists(st.sampled_from([0.01, 0.05, 0.001]), min_size=1, max_size=2, unique=True).map(tuple),
    tolerances=st.lists(st.sampled_from([1e-2, 1e-4]), min_size=1, max_size=2, unique=True).map(tuple),
)


@settings(max_examples=60, deadline=None)
@given(small_spaces)
def test_enumeration_matches_brute_force(space):
    count, it = T.enumerate_space(space)
    want = _brute(space)
    assert count == len(want)
    got = [(c.hidden_layers, c.activation, c.solver, c.alpha, c.tol) for c in it]
    assert got == want


def test_full_space():
    assert T.FULL_SPACE.size() == 702_900
    assert T.FULL_SPACE.n_architectures == 5 + 25 + 125 + 625 + 3125
    first = T.FULL_SPACE.decode(0)
    assert (first.hidden_layers, first.activation, first.solver, first.alpha, first.tol) == ((5,), "sigmoid", "sgd", 0.01, 0.01)
    last = T.FULL_SPACE.decode(702_899)
    assert (last.hidden_layers, last.activation, last.solver, last.alpha, last.tol) == ((25,) * 5, "tanh", "adadelta", 0.0001, 1e-6)
    with pytest.raises(IndexError):
        T.FULL_SPACE.decode(702_900)


def test_space_validation():
    with pytest.raises(ValueError):
        T.SearchSpace(layer_counts=())
    with pytest.raises(ValueError):
        T.SearchSpace(activations=("relu", "relu"))
    with pytest.raises(ValueError):
        T.SearchSpace(layer_counts=(0,))


def test_uniform_configs():
    cfgs = T.uniform_configs()
    assert len(cfgs) == 25
    assert all(len(set(c.hidden_layers)) == 1 for c in cfgs)
    assert cfgs[0].hidden_layers == (5,) and cfgs[-1].hidden_layers == (25,) * 5


def test_sample_indices():
    a = T.sample_indices(T.FULL_SPACE, 200, 0)
    assert len(np.unique(a)) == 200 and np.all(np.diff(a) > 0)
    assert np.array_equal(a, T.sample_indices(T.FULL_SPACE, 200, 0))
    assert not np.array_equal(a, T.sample_indices(T.FULL_SPACE, 200, 1))
    tiny = T.SearchSpace(layer_counts=(1,), neuron_choices=(5,), activations=("relu",), solvers=("adam",),
                         alphas=(0.01,), tolerances=(0.01,))
    assert list(T.sample_indices(tiny, 10, 0)) == [0]


def _result(acc, err, layers=(5,), seed=0):
    cfg = ml.MLPConfig(hidden_layers=layers, seed=seed)
    if acc is None:
        return T.TuneResult(cfg, None, "Diverged: boom")
    return T.TuneResult(cfg, ml.TrainReport(acc, err, 0.0, 0.0))


results = st.lists(
    st.tuples(st.one_of(st.none(), st.sampled_from([50.0, 80.0, 90.0, 95.5])),
              st.sampled_from([0.001, 0.01]),
              st.sampled_from([(5,), (10,), (5, 5)]),
              st.integers(0, 3)),
    min_size=1, max_size=20,
)


@settings(max_examples=100, deadline=None)
@given(results)
def test_ranking_is_a_total_order(items):
    rs = [_result(*it) for it in items]
    keys = [r.sort_key() for r in rs]
    for a, b in itertools.product(keys, repeat=2):
        assert (a < b) + (b < a) + (a == b) == 1
    ranked = T.rank_results(rs)
    assert [r.rank for r in ranked] == list(range(1, len(rs) + 1))
    assert [r.sort_key() for r in ranked] == sorted(keys)
    # same input in another order gives the same ranking
    again = T.rank_results(list(reversed(rs)))
    assert [r.sort_key() for r in again] == [r.sort_key() for r in ranked]
    ok = [r.ok for r in ranked]
    assert ok == sorted(ok, reverse=True)


def test_ranking_tie_breaks():
    big = _result(95.0, 0.01, (25, 25))
    small = _result(95.0, 0.01, (5,))
    better_mse = _result(95.0, 0.001, (25, 25))
    ranked = T.rank_results([big, small, better_mse, _result(None, 0.0)])
    assert [r.config.hidden_layers for r in ranked[:3]] == [(25, 25), (5,), (25, 25)]
    assert ranked[0].report.mse == 0.001
    assert not ranked[-1].ok


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 100.0), st.floats(0.0, 100.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_bands_monotone(a1, a2, m1, m2):
    lo, hi = sorted((a1, a2))
    assert T.classify_bands((hi, 0.0))[0] <= T.classify_bands((lo, 0.0))[0]
    lo, hi = sorted((m1, m2))
    assert T.classify_bands((100.0, lo))[1] <= T.classify_bands((100.0, hi))[1]


def test_band_edges():
    assert T.classify_bands((90.0, 0.0005)) == (0, 0)
    assert T.classify_bands((89.999, 0.00051)) == (1, 1)
    assert T.classify_bands((80.0, 0.001)) == (1, 1)
    assert T.classify_bands((60.0, 0.005)) == (2, 2)
    assert T.classify_bands((50.0, 0.01)) == (3, 3)
    assert T.classify_bands((49.9, 0.02)) == (4, 4)
    assert T.classify_bands(ml.TrainReport(92.0, 0.0001, 0, 0)) == (0, 0)


def test_record_roundtrip():
    for r in (_result(91.0, 0.002, (5, 10)), _result(None, 0.0)):
        rec = json.loads(json.dumps(r.to_record()))
        back = T.TuneResult.from_record(rec)
        assert back.config == r.config and back.report == r.report and back.ok == r.ok
    assert T.config_key(ml.MLPConfig()) == T.config_key(ml.MLPConfig())
    assert T.config_key(ml.MLPConfig()) != T.config_key(ml.MLPConfig(seed=1))


@pytest.fixture(scope="module")
def tiny_split():
    ds = L.bundled_dataset().select_targets(["T", "OH"])
    return ml.split_dataset(ds, 0.2, 0)


def _configs():
    base = dict(max_iter=10)
    return [ml.MLPConfig(hidden_layers=(k,), **base) for k in (3, 4, 5, 6)] + [
        ml.MLPConfig(hidden_layers=(20, 20), solver="sgd", learning_rate=1e9, max_iter=5)
    ]


def test_grid_search_resume(tiny_split, tmp_path):
    train, test = tiny_split
    journal = tmp_path / "j.jsonl"
    part = T.grid_search(T.FULL_SPACE, train, test, _configs(), journal=str(journal), limit=2)
    assert len(part) == 2
    assert len(journal.read_text().splitlines()) == 2
    with open(journal, "a") as fh:
        fh.write('{"key": "torn')  # interrupted write
    full = T.grid_search(T.FULL_SPACE, train, test, _configs(), journal=str(journal))
    assert len(full) == 5
    lines = journal.read_text().splitlines()
    assert len(lines) == 6 and lines[2] == '{"key": "torn'
    assert len(T.read_journal(str(journal))) == 5
    # a second resume has nothing left to train
    assert T.grid_search(T.FULL_SPACE, train, test, _configs(), journal=str(journal), limit=0) == full
    assert not full[-1].ok and "Diverged" in full[-1].error
    fresh = T.grid_search(T.FULL_SPACE, train, test, _configs())
    assert [r.sort_key() for r in fresh] == [r.sort_key() for r in full]


def test_grid_search_parallel_matches_serial(tiny_split):
    train, test = tiny_split
    cfgs = _configs()[:3]
    a = T.grid_search(T.FULL_SPACE, train, test, cfgs, workers=1)
    b = T.grid_search(T.FULL_SPACE, train, test, cfgs, workers=2)
    assert [r.sort_key() for r in a] == [r.sort_key() for r in b]


def test_top_k_report(tiny_split):
    ranked = T.rank_results([_result(97.123, 0.001, (5, 10, 15)), _result(90.0, 0.004), _result(None, 0.0)])
    rows = T.report_top_k(ranked, 5)
    assert len(rows) == 2
    assert rows[0] == {"rank": 1, "layers": 3, "configuration": "5-10-15", "activation": "relu", "solver": "adam",
                       "alpha": 0.0001, "tol": 0.0001, "accuracy": 97.12}
    csv_text = T.render_csv(rows)
    assert csv_text.splitlines()[0] == ",".join(T.TOP_COLUMNS)
    assert csv_text.splitlines()[1].startswith("1,3,5-10-15,relu,adam")
    assert "5-10-15" in T.render_text(rows)
    with pytest.raises(ValueError):
        T.report_top_k(ranked, 0)


def test_cost_estimate():
    n, secs = T.cost_estimate(T.FULL_SPACE, 1.0, workers=4)
    assert n == 702_900 and secs == pytest.approx(702_900 / 4)
