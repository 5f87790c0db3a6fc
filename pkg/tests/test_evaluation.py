import numpy as np
import pytest
from projhead_lab.data import SynthConfig, generate_synthetic, train_test_split
from projhead_lab.errors import ConfigError, ShapeError
from projhead_lab.evaluation import (
    EvalConfig,
    ProbeConfig,
    component_eval,
    default_k,
    feature_components,
    knn_eval,
    linear_probe,
)
from projhead_lab.models import init_encoder, init_head, parameter_checksum


def test_default_k():
    assert default_k(5) == 1
    assert default_k(100) == 10
    assert default_k(50000) == 200


def test_knn_on_its_own_train_set_is_exact():
    feats = np.random.default_rng(0).standard_normal((30, 5))
    labels = np.arange(30) % 3
    report = knn_eval(feats, labels, feats, labels, k=1)
    assert report.accuracy == 1.0
    assert report.method == "knn" and report.params["k"] == 1


def test_knn_separates_clusters():
    rng = np.random.default_rng(1)
    directions = np.eye(4)[:3] * 5.0
    labels = np.repeat(np.arange(3), 20)
    train = directions[labels] + rng.standard_normal((60, 4)) * 0.3
    test = directions[labels] + rng.standard_normal((60, 4)) * 0.3
    assert knn_eval(train, labels, test, labels, k=5).accuracy == 1.0


def test_knn_is_invariant_to_row_scaling():
    rng = np.random.default_rng(2)
    train, test = rng.standard_normal((40, 3)), rng.standard_normal((10, 3))
    labels, test_labels = rng.integers(0, 2, 40), rng.integers(0, 2, 10)
    a = knn_eval(train, labels, test, test_labels, k=3)
    b = knn_eval(train * rng.uniform(0.1, 10, (40, 1)), labels, test * 7.0, test_labels, k=3)
    assert a.correct == b.correct


def test_knn_k_larger_than_train_set():
    feats = np.eye(3)
    with pytest.raises(ConfigError):
        knn_eval(feats, [0, 1, 2], feats, [0, 1, 2], k=4)
    with pytest.raises(ConfigError):
        knn_eval(feats, [0, 1, 2], feats, [0, 1, 2], k=0)


def test_knn_shape_errors():
    with pytest.raises(ShapeError):
        knn_eval(np.eye(3), [0, 1, 2], np.ones((2, 4)), [0, 1], k=1)
    with pytest.raises(ShapeError):
        knn_eval(np.eye(3), [0, 1], np.eye(3), [0, 1, 2], k=1)


def test_knn_ranking_ties_go_to_the_lower_index():
    train = np.array([[1.0, 0.0], [2.0, 0.0]])
    report = knn_eval(train, [1, 0], np.array([[1.0, 0.0]]), [1], k=1)
    assert report.accuracy == 1.0


def test_knn_vote_prefers_count_then_similarity_then_class():
    test = np.array([[1.0, 0.0]])
    by_count = np.array([[1.0, 0.0], [0.8, 0.6], [0.6, 0.8]])
    assert knn_eval(by_count, [1, 0, 0], test, [0], k=3).accuracy == 1.0

    by_similarity = np.array([[1.0, 0.0], [0.6, 0.8]])
    assert knn_eval(by_similarity, [1, 0], test, [1], k=2).accuracy == 1.0

    by_class = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert knn_eval(by_class, [1, 0], test, [0], k=2).accuracy == 1.0


def test_knn_zero_rows():
    train = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    labels = [2, 0, 1]
    # zero train rows are never neighbours
    assert knn_eval(train, labels, np.array([[0.1, 0.0]]), [0], k=1, num_classes=3).accuracy == 1.0
    # a zero test row ties with every usable row
    assert knn_eval(train, labels, np.zeros((1, 2)), [0], k=1, num_classes=3).accuracy == 1.0
    with pytest.raises(ConfigError):
        knn_eval(train, labels, np.zeros((1, 2)), [0], k=3, num_classes=3)


def _symmetric_two_class(n, seed):
    rng = np.random.default_rng(seed)
    half = np.column_stack([rng.uniform(2.0, 3.0, n), rng.uniform(-0.5, 0.5, n)])
    feats = np.concatenate([half, -half])
    labels = np.repeat([0, 1], n)
    return feats, labels


def test_probe_separates_linearly_separable_data():
    train, train_labels = _symmetric_two_class(50, 0)
    test, test_labels = _symmetric_two_class(50, 1)
    report = linear_probe(train, train_labels, test, test_labels, config=ProbeConfig(epochs=100, lr=1e-2))
    assert report.accuracy == 1.0
    assert report.method == "linear"
    assert report.params["final_loss"] < np.log(2)


def test_probe_on_zero_features_predicts_the_majority():
    labels = np.array([1] * 14 + [0] * 6)
    report = linear_probe(np.zeros((20, 3)), labels, np.zeros((5, 3)), [1, 1, 1, 0, 0], config=ProbeConfig(epochs=10))
    assert report.correct == 3


def test_probe_needs_two_classes():
    with pytest.raises(ConfigError):
        linear_probe(np.ones((4, 2)), [0, 0, 0, 0], np.ones((2, 2)), [0, 1])


def test_probe_on_random_labels_stays_near_chance():
    rng = np.random.default_rng(3)
    train, test = rng.standard_normal((2000, 8)), rng.standard_normal((2000, 8))
    report = linear_probe(
        train, rng.integers(0, 2, 2000), test, rng.integers(0, 2, 2000), config=ProbeConfig(epochs=20)
    )
    assert report.accuracy == pytest.approx(0.5, abs=0.05)


def test_minibatch_probe_is_deterministic():
    train, labels = _symmetric_two_class(40, 4)
    config = ProbeConfig(epochs=5, batch_size=16, seed=7)
    a = linear_probe(train, labels, train, labels, config=config)
    b = linear_probe(train, labels, train, labels, config=config)
    assert a.params["final_loss"] == b.params["final_loss"]
    assert a.correct == b.correct


def test_zero_epoch_probe_predicts_class_zero():
    train, labels = _symmetric_two_class(10, 5)
    report = linear_probe(train, labels, train, labels, config=ProbeConfig(epochs=0))
    assert report.correct == 10
    assert report.params["final_loss"] is None


def _split():
    ds = generate_synthetic(SynthConfig(content_dim=3, style_dim=3, num_classes=3, samples_per_class=20))
    return train_test_split(ds, 0.25, seed=0)


CONFIG = EvalConfig(knn_k=5, probe=ProbeConfig(epochs=10))


def test_identity_head_only_reports_h_and_z():
    train, test = _split()
    encoder = init_encoder([6, 8], 0)
    reports = component_eval(encoder, init_head("none", 8), train, test, CONFIG)
    assert {(r.feature, r.method) for r in reports} == {
        ("h", "knn"), ("h", "linear"), ("z", "knn"), ("z", "linear")
    }
    acc = {(r.feature, r.method): r.accuracy for r in reports}
    assert acc["h", "knn"] == acc["z", "knn"]
    assert acc["h", "linear"] == acc["z", "linear"]


def test_linear_head_reports_every_component():
    train, test = _split()
    encoder, head = init_encoder([6, 16, 8], 0), init_head("linear", 8, d=4)
    enc_before, head_before = parameter_checksum(encoder.params), parameter_checksum(head.params)
    reports = component_eval(encoder, head, train, test, CONFIG)
    assert len(reports) == 8
    assert {r.feature for r in reports} == {"h", "z", "h_r", "h_n"}
    assert all(r.train_size == len(train) and r.test_size == len(test) for r in reports)
    assert parameter_checksum(encoder.params) == enc_before
    assert parameter_checksum(head.params) == head_before


def test_feature_components_add_up():
    train, _ = _split()
    encoder, head = init_encoder([6, 16, 8], 1), init_head("linear", 8, d=4, seed=1)
    parts = feature_components(encoder, head, train.examples)
    np.testing.assert_allclose(parts["h_r"] + parts["h_n"], parts["h"], atol=1e-12)
    only = feature_components(encoder, head, train.examples, ["z"])
    assert set(only) == {"z"}


def test_wide_nonlinear_head_skips_the_split():
    train, test = _split()
    encoder, head = init_encoder([6, 4], 0), init_head("nonlinear", 4, d=2, hidden=8)
    parts = feature_components(encoder, head, train.examples, ["h", "h_r", "h_n"])
    assert set(parts) == {"h"}
    reports = component_eval(encoder, head, train, test, CONFIG)
    assert {r.feature for r in reports} == {"h", "z"}
