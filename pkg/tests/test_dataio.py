import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qdefect.dataio import (DataError, LabeledDataset, SplitSpec, apply_scaler, fit_scaler,
                            gen_synthetic, load_csv, save_csv, split, split_indices)
from qdefect.datasets import PUBLISHED_SPLITS, match_dataset, published_split_spec


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_rows(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,c,label\n1,2,3,1\n4,5,6.5,0\n"))
    assert ds.features.shape == (2, 3)
    assert ds.labels.tolist() == [1, 0]
    assert ds.feature_names == ["a", "b", "c"]


def test_bad_label_names_row(tmp_path):
    with pytest.raises(DataError, match="row 1 "):
        load_csv(write(tmp_path, "a,label\n1,0\n2,2\n"))


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "a,label\n1,x\n", "a,label\n", "a,label\nz,1\n"])
def test_load_errors(tmp_path, text):
    with pytest.raises(DataError):
        load_csv(write(tmp_path, text))


def test_csv_roundtrip(tmp_path):
    ds = gen_synthetic(30, 3, 2.0, seed=1)
    save_csv(ds, tmp_path / "x.csv")
    back = load_csv(tmp_path / "x.csv")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_largest_dataset_split():
    assert SplitSpec(0.2, 0.10).sizes(8604) == (6883, 688, 1721)


@pytest.mark.parametrize("name", list(PUBLISHED_SPLITS))
def test_published_sizes(name):
    train, tune, test, total = PUBLISHED_SPLITS[name]
    assert train + test == total
    idx = split_indices(total, published_split_spec(name))
    assert (len(idx.train), len(idx.tune), len(idx.test)) == (train, tune, test)


@pytest.mark.parametrize("name", ["AnySoftK", "Kiwis", "Facebook", "Jm1"])
def test_large_rows_follow_from_fraction(name):
    train, tune, test, total = PUBLISHED_SPLITS[name]
    assert SplitSpec(0.2, 0.10).sizes(total) == (train, tune, test)


def test_match_dataset():
    assert match_dataset("data/anysoftk_jit.csv") == "AnySoftK"
    assert match_dataset("x/unknown.csv") is None


def test_half_split_is_disjoint_partition():
    idx = split_indices(10, SplitSpec(test_fraction=0.5))
    assert len(idx.train) == 5 and len(idx.test) == 5
    assert sorted(np.concatenate([idx.train, idx.test]).tolist()) == list(range(10))


def test_split_deterministic():
    a, b = split_indices(500, SplitSpec(seed=11)), split_indices(500, SplitSpec(seed=11))
    for part in ("train", "tune", "test"):
        assert np.array_equal(getattr(a, part), getattr(b, part))


@settings(max_examples=60, deadline=None)
@given(st.integers(20, 3000), st.floats(0.05, 0.6), st.integers(0, 2**31))
def test_split_partition_property(n, frac, seed):
    idx = split_indices(n, SplitSpec(test_fraction=frac, seed=seed))
    assert len(np.intersect1d(idx.train, idx.test)) == 0
    assert len(idx.train) + len(idx.test) == n
    assert set(idx.tune.tolist()) <= set(idx.train.tolist())
    assert len(np.unique(idx.tune)) == len(idx.tune)


def test_split_errors():
    with pytest.raises(DataError):
        SplitSpec(0.2).sizes(3)
    ds = LabeledDataset(np.zeros((10, 1)), np.zeros(10, dtype=int))
    with pytest.raises(DataError):
        split(ds, SplitSpec())


def test_scaler_examples():
    p = fit_scaler(np.array([[0.0], [5.0], [10.0]]))
    assert np.allclose(apply_scaler(p, [[0.0], [5.0], [10.0]]).ravel(), [0, math.pi / 2, math.pi])
    c = fit_scaler(np.full((4, 1), 7.0))
    assert np.allclose(apply_scaler(c, [[7.0], [100.0]]), math.pi / 2)
    assert apply_scaler(p, [[-3.0]])[0, 0] == 0.0
    assert apply_scaler(p, [[30.0]])[0, 0] == math.pi


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 10_000))
def test_scaler_in_range_property(n, d, seed):
    X = np.random.default_rng(seed).normal(0, 10, (n, d))
    p = fit_scaler(X)
    Z = apply_scaler(p, X)
    assert Z.min() >= 0 and Z.max() <= math.pi
    live = X.max(axis=0) > X.min(axis=0)
    assert np.allclose(Z.min(axis=0)[live], 0) and np.allclose(Z.max(axis=0)[live], math.pi)


def test_synthetic_balance():
    ds = gen_synthetic(100, 4, 3.0, seed=0)
    assert ds.labels.sum() == 50
    assert gen_synthetic(101, 2, 1.0).labels.sum() == 50


def test_synthetic_separation_zero_is_unlearnable():
    ds = gen_synthetic(2000, 2, 0.0, seed=2)
    # the best random hyperplane should not do much better than chance
    assert oracles.best_random_hyperplane(ds.features, ds.labels, 500) < 0.56


def test_synthetic_separation_six_is_separable():
    ds = gen_synthetic(600, 2, 6.0, seed=0)
    assert oracles.best_random_hyperplane(ds.features, ds.labels) >= 0.99


def test_synthetic_errors():
    with pytest.raises(DataError):
        gen_synthetic(2, 2, 1.0)
