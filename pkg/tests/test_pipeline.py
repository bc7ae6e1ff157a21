import logging
from dataclasses import replace

import numpy as np
import pytest

from vibdiag.bundle import dumps_bundle
from vibdiag.errors import ClassTooSmall, FeatureSpecMismatch, InvalidParameter, MissingClass
from vibdiag.pipeline import (
    ConfusionMatrix,
    FeatureSetSpec,
    FeatureTable,
    SweepResult,
    TrainConfig,
    evaluate,
    extract_features,
    predict,
    split,
    split_indices,
    sweep,
    train_all,
)
from vibdiag.signal_io import FaultClass, Segment

FAST = TrainConfig(classifiers=("svm", "gmm", "enn"))


@pytest.fixture(scope="module")
def mfd_split(small_segments):
    return split(extract_features(small_segments, FeatureSetSpec("mfd")), 0.7, 0)


def test_split_is_stratified_and_seeded():
    labels = np.repeat(np.arange(4), 10)
    tr, te = split_indices(labels, 0.7, 3)
    assert len(tr) == 28 and len(te) == 12
    assert set(tr).isdisjoint(te) and len(set(tr) | set(te)) == 40
    assert all(np.sum(labels[tr] == c) == 7 for c in range(4))
    tr2, te2 = split_indices(labels, 0.7, 3)
    np.testing.assert_array_equal(tr, tr2)
    assert not np.array_equal(tr, split_indices(labels, 0.7, 4)[0])


def test_split_errors():
    with pytest.raises(ClassTooSmall):
        split_indices([0, 0, 1, 2, 2, 3, 3], 0.7, 0)
    for frac in (0.0, 1.0):
        with pytest.raises(InvalidParameter):
            split_indices([0, 0, 1, 1], frac, 0)


def test_table_shapes(small_segments):
    segs = small_segments[:10]
    assert extract_features(segs, FeatureSetSpec("mfd")).X.shape == (10, 13)
    assert extract_features(segs, FeatureSetSpec("mfcc")).X.shape == (10, 14 * 13)
    t = extract_features(segs, FeatureSetSpec("mfcc+kurtosis"))
    assert t.X.shape == (10, 183)
    assert t.sequences().shape == (10, 14, 14)
    np.testing.assert_array_equal(t.sequences()[:, :, -1], np.repeat(t.X[:, -1:], 14, axis=1))
    assert extract_features(segs, FeatureSetSpec("mfd")).sequences().shape == (10, 13, 1)


def test_bad_segment_is_logged_and_skipped(small_segments, caplog):
    good = small_segments[0]
    flat = Segment(np.full_like(good.samples, 2.0), "flat", 0, FaultClass.NORMAL)
    with caplog.at_level(logging.WARNING, logger="vibdiag.pipeline"):
        t = extract_features([good, flat], FeatureSetSpec("kurtosis"))
    assert len(t) == 1
    assert "ZeroVariance" in caplog.text and "flat#0" in caplog.text


def test_derive_matches_direct_extraction(small_segments):
    segs = small_segments[::10]
    big = extract_features(segs, FeatureSetSpec("mfd", mfd_k=20))
    np.testing.assert_array_equal(big.derive(FeatureSetSpec("mfd", mfd_k=7)).X,
                                  extract_features(segs, FeatureSetSpec("mfd", mfd_k=7)).X)
    big = extract_features(segs, FeatureSetSpec("mfcc+kurtosis", mfcc_l=16))
    small = FeatureSetSpec("mfcc+kurtosis", mfcc_l=9)
    # the DCT product is shape-dependent in BLAS, so only rounding differs
    np.testing.assert_allclose(big.derive(small).X, extract_features(segs, small).X, rtol=1e-12, atol=1e-12)
    with pytest.raises(FeatureSpecMismatch):
        big.derive(FeatureSetSpec("mfcc+kurtosis", mfcc_l=20))


def test_csv_round_trip(small_segments):
    t = extract_features(small_segments[::15], FeatureSetSpec("mfd", mfd_k=5))
    text = t.to_csv()
    assert text.splitlines()[1] == "label,f0,f1,f2,f3,f4"
    assert text.splitlines()[2].startswith("normal,")
    back = FeatureTable.from_csv(text)
    np.testing.assert_array_equal(back.X, t.X)
    np.testing.assert_array_equal(back.labels, t.labels)
    with pytest.raises(FeatureSpecMismatch):
        FeatureTable.from_csv(text, FeatureSetSpec("mfd", mfd_k=6))


def test_bundle_contents(mfd_split):
    train, _ = mfd_split
    bundle = train_all(train)
    assert set(bundle.classifiers) == {"svm", "gmm", "hmm", "enn"}
    assert len(bundle.classifiers["svm"].pairwise) == 6
    assert len(bundle.classifiers["gmm"].per_class) == 4
    assert len(bundle.classifiers["hmm"]) == 4
    assert bundle.classifiers["enn"].n_classes == 4
    only = train_all(train, TrainConfig(classifiers=("gmm",)))
    assert list(only.classifiers) == ["gmm"]


def test_training_needs_every_class(mfd_split):
    train, _ = mfd_split
    with pytest.raises(MissingClass):
        train_all(train.subset(np.flatnonzero(train.labels != 3)), FAST)


def test_prediction_rejects_other_features(mfd_split, small_segments):
    bundle = train_all(mfd_split[0], FAST)
    other = extract_features(small_segments[:4], FeatureSetSpec("mfd", mfd_k=12))
    with pytest.raises(FeatureSpecMismatch):
        predict(bundle, other)


def test_test_split_does_not_leak_into_training(small_segments):
    table = extract_features(small_segments, FeatureSetSpec("mfd"))
    train, test = split(table, 0.7, 0)
    _, te_idx = split_indices(table.labels, 0.7, 0)
    X = table.X.copy()
    X[te_idx] = X[te_idx] * 100 + 7
    train2, test2 = split(replace(table, X=X), 0.7, 0)
    assert not np.array_equal(test.X, test2.X)
    assert dumps_bundle(train_all(train2, FAST)) == dumps_bundle(train_all(train, FAST))


def test_confusion_matrix():
    truth = [0] * 5 + [1] * 5 + [2] * 5 + [3] * 5
    perfect = ConfusionMatrix.from_labels(truth, truth)
    np.testing.assert_array_equal(perfect.percentages, 100 * np.eye(4))
    assert perfect.accuracy == 100.0
    majority = ConfusionMatrix.from_labels(truth, [0] * 20)
    assert majority.accuracy == 25.0
    np.testing.assert_array_equal(majority.percentages[:, 0], 100.0)
    np.testing.assert_array_equal(majority.percentages[:, 1:], 0.0)
    np.testing.assert_allclose(majority.percentages.sum(axis=1), 100.0)
    csv = perfect.to_csv().splitlines()
    assert csv[0] == ",Normal,Inner,Outer,Ball"
    assert csv[1] == "Normal,100.0000,0.0000,0.0000,0.0000"
    assert "Ball" in perfect.render("t")


def test_macro_recall_ignores_class_sizes():
    truth = [0] * 90 + [1] * 10
    pred = [0] * 90 + [0] * 10
    assert ConfusionMatrix.from_labels(truth, pred).accuracy == 50.0


def test_evaluation_on_small_benchmark(mfd_split):
    train, test = mfd_split
    cms = evaluate(train_all(train), test)
    assert all(cm.counts.sum() == len(test) for cm in cms.values())
    assert all(cm.accuracy >= 90.0 for cm in cms.values())


def test_sweep_shape_and_determinism(small_segments):
    cfg = TrainConfig(classifiers=("enn",))
    a = sweep("mfd_k", small_segments, cfg)
    b = sweep("mfd_k", small_segments, cfg)
    assert a.values == tuple(range(2, 21)) and len(a.accuracy["enn"]) == 19
    assert a.to_csv() == b.to_csv()
    assert a.to_csv().splitlines()[0] == "param_value,enn"
    with pytest.raises(InvalidParameter):
        sweep("mfcc_l", small_segments, cfg, base_spec=FeatureSetSpec("mfd"))
    with pytest.raises(InvalidParameter):
        sweep("eta", small_segments, cfg)


def test_sweep_result_helpers():
    r = SweepResult("mfd_k", (2, 3, 4), {"svm": (90.0, 95.0, 93.0)})
    assert r.spread("svm") == 5.0
    assert r.best_value("svm") == 3
