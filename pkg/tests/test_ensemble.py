import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qdefect.config import ExperimentConfig
from qdefect.dataio import LabeledDataset, fit_scaler, apply_scaler, gen_synthetic
from qdefect.ensemble import (ChunkEnsemble, ChunkMember, EnsembleError, aggregate,
                              global_predict, load_manifest, make_chunks, rank_members,
                              save_manifest, select_threshold, staf_train, threshold_labels,
                              train_chunks, tune_threshold)
from qdefect.qkernel import FeatureMapSpec
from qdefect.svm import KernelBinding, TrainedSvm


def constant_model(value):
    """SVC with no supports whose decision value is ``value`` everywhere."""
    return TrainedSvm(np.zeros((0, 1)), np.zeros(0), float(value), 1.0, KernelBinding.rbf(1.0))


def voting_ensemble(votes, threshold=None):
    members = [ChunkMember(i, constant_model(1.0 if v else -1.0)) for i, v in enumerate(votes)]
    return ChunkEnsemble(members, threshold=threshold)


def scaled_blobs(n=300, d=3, seed=0):
    ds = gen_synthetic(n, d, 4.0, seed)
    return ds.with_features(apply_scaler(fit_scaler(ds.features, 0, math.pi / 2), ds.features))


def test_chunks_largest_dataset():
    plan = make_chunks(6883, 500)
    assert len(plan.chunks) == 14
    assert plan.sizes == [500] * 13 + [383]


def test_chunk_boundaries():
    assert make_chunks(500).sizes == [500]
    assert make_chunks(1040, 500, min_tail=50).sizes == [500, 540]
    assert make_chunks(1050, 500, min_tail=50).sizes == [500, 500, 50]
    with pytest.raises(ValueError):
        make_chunks(10, chunk_size=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5000), st.integers(2, 700), st.integers(0, 200), st.integers(0, 99))
def test_chunks_partition(n, size, tail, seed):
    plan = make_chunks(n, size, tail, seed)
    assert sorted(np.concatenate(plan.chunks).tolist()) == list(range(n))
    assert all(s == size for s in plan.sizes[:-1]) or len(plan.sizes) == 1 \
        or plan.sizes[-1] >= tail


def test_train_chunks_writes_models(tmp_path):
    train = scaled_blobs(120)
    k = KernelBinding.quantum(FeatureMapSpec("Z", 3))
    ens = train_chunks(train, make_chunks(120, 60, seed=1), k, model_dir=tmp_path)
    assert ens.n == 2
    assert sorted(p.name for p in tmp_path.iterdir()) == ["chunk_000.qsvm", "chunk_001.qsvm"]


def test_single_class_chunk_is_skipped(tmp_path):
    train = scaled_blobs(40)
    y = train.labels.copy()
    order = np.argsort(y, kind="stable")
    # last chunk of three rows gets only class 1
    ones = order[y[order] == 1][:3]
    rest = np.setdiff1d(np.arange(40), ones)
    plan = make_chunks(40, 37, min_tail=0)
    plan.chunks = [rest, ones]
    ens = train_chunks(train, plan, KernelBinding.quantum(FeatureMapSpec("Z", 3)))
    assert ens.n == 1 and ens.skipped == [1]
    assert "single class" in ens.warnings[0]


def test_all_single_class_chunks_fail():
    ds = LabeledDataset(np.zeros((6, 1)), np.array([0, 0, 0, 1, 1, 1]))
    plan = make_chunks(6, 3, 0)
    plan.chunks = [np.array([0, 1, 2]), np.array([3, 4, 5])]
    with pytest.raises(EnsembleError):
        train_chunks(ds, plan, KernelBinding.rbf(1.0))


def test_rerun_is_byte_identical(tmp_path):
    train = scaled_blobs(150)
    k = KernelBinding.quantum(FeatureMapSpec("Z", 3))
    for name in ("a", "b"):
        train_chunks(train, make_chunks(150, 50, seed=5), k, model_dir=tmp_path / name)
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_vote_fraction_examples():
    x = np.zeros((1, 1))
    f = aggregate(voting_ensemble([1] * 8 + [0] * 6), x)[0]
    assert f == 8 / 14 and round(f, 2) == 0.57 and abs(f - 0.5714) < 5e-5
    assert aggregate(voting_ensemble([1, 1, 1]), x)[0] == 1.0
    assert aggregate(voting_ensemble([1, 0]), x)[0] == 0.5


def test_threshold_examples():
    tau, curve = select_threshold([0.9, 0.6, 0.55, 0.1], [1, 1, 0, 0])
    assert tau == 0.6
    assert max(c[3] for c in curve) == 1.0
    assert select_threshold([1.0, 1.0], [1, 1])[0] in (0.0, 1.0)
    assert select_threshold([1.0, 1.0], [1, 1], prefer="largest")[0] == 1.0
    with pytest.raises(ValueError):
        select_threshold([0.5, 0.2], [0, 0])


def test_threshold_matches_exhaustive_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(1, 15))
        m = int(rng.integers(2, 40))
        fractions = rng.integers(0, n + 1, m) / n
        labels = rng.integers(0, 2, m)
        labels[0] = 1
        tau, curve = select_threshold(fractions, labels)
        got = dict((c[0], c[3]) for c in curve)[tau]
        best = oracles.best_threshold_f1(fractions, labels, n)
        assert got == float(best)


def test_global_predict_rules():
    ens = voting_ensemble([1] * 8 + [0] * 6, threshold=0.5)
    assert global_predict(ens, np.zeros((2, 1))).tolist() == [1, 1]
    assert threshold_labels([0.5714], 0.5).tolist() == [1]
    assert threshold_labels([0.4, 0.6], 0.6).tolist() == [0, 1]
    assert threshold_labels([0.0, 0.3], 0.0).tolist() == [1, 1]
    with pytest.raises(EnsembleError):
        global_predict(voting_ensemble([1]), np.zeros((1, 1)))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 14), st.integers(0, 10_000))
def test_higher_threshold_predicts_subset(n, seed):
    fractions = np.random.default_rng(seed).integers(0, n + 1, 50) / n
    taus = sorted(set(fractions.tolist()) | {0.0})
    prev = threshold_labels(fractions, taus[0])
    for tau in taus[1:]:
        cur = threshold_labels(fractions, tau)
        assert np.all(cur <= prev)
        prev = cur


def test_single_model_collapses_to_its_vote():
    train = scaled_blobs(80)
    k = KernelBinding.quantum(FeatureMapSpec("Z", 3))
    ens = train_chunks(train, make_chunks(80, 500), k)
    tau = tune_threshold(ens, train.features, train.labels)
    from qdefect.svm import predict
    assert tau in (0.0, 1.0)
    if tau == 1.0:
        assert np.array_equal(global_predict(ens, train.features),
                              predict(ens.members[0].model, train.features))


def test_rank_members_orders_by_f1():
    ens = voting_ensemble([0, 1])
    ranked = rank_members(ens, np.zeros((2, 1)), np.array([1, 1]))
    assert ranked[0][0] == 1 and ranked[0][1] == 1.0


def test_manifest_roundtrip(tmp_path):
    train = scaled_blobs(120)
    scaler = fit_scaler(train.features)
    k = KernelBinding.quantum(FeatureMapSpec("Z", 3))
    ens = train_chunks(train, make_chunks(120, 60, seed=1), k, model_dir=tmp_path / "m",
                       scaling=scaler)
    tune_threshold(ens, train.features, train.labels)
    save_manifest(ens, tmp_path / "ens.json")
    back = load_manifest(tmp_path / "ens.json")
    assert back.threshold == ens.threshold and back.n == ens.n
    assert back.tuning_curve == ens.tuning_curve
    assert np.array_equal(global_predict(back, train.features),
                          global_predict(ens, train.features))
    doc = json.loads((tmp_path / "ens.json").read_text())
    assert doc["models"][0]["path"] == "m/chunk_000.qsvm"


def test_manifest_load_failure_names_chunk(tmp_path):
    train = scaled_blobs(120)
    k = KernelBinding.quantum(FeatureMapSpec("Z", 3))
    ens = train_chunks(train, make_chunks(120, 60, seed=1), k, model_dir=tmp_path)
    save_manifest(ens, tmp_path / "ens.json")
    (tmp_path / "chunk_001.qsvm").write_bytes(b"QSVM\x01\x00junk")
    with pytest.raises(EnsembleError, match="chunk 1"):
        load_manifest(tmp_path / "ens.json")


def test_staf_report_shape(tmp_path):
    ds = scaled_blobs(300)
    train, test = ds.subset(np.arange(200)), ds.subset(np.arange(200, 300))
    cfg = ExperimentConfig(pegasos_steps=200)
    reports, models = staf_train(train, test, ["SVC", "PQSVC", "QSVC"], cfg, tmp_path)
    assert set(reports) == {"SVC", "PQSVC", "QSVC"}
    for rep in reports.values():
        assert len(rep.row(["precision", "recall", "f1", "roc_auc", "mcc"])) == 6
        assert rep.n_test == 100
    assert len(list(tmp_path.glob("*.qsvm"))) == 3


def test_staf_cap():
    ds = scaled_blobs(520)
    cfg = ExperimentConfig()
    with pytest.raises(ValueError, match="500"):
        staf_train(ds.subset(np.arange(501)), ds.subset(np.arange(501, 520)), ["QSVC"], cfg)
