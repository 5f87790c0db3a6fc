import numpy as np
import pytest
from pydantic import ValidationError
from projhead_lab.core.records import EvalRecord
from projhead_lab.data import AugConfig, SynthConfig, generate_synthetic
from projhead_lab.errors import ConfigError
from projhead_lab.models import freeze_head, init_encoder, init_head, parameter_checksum
from projhead_lab.models.heads import HeadKind
from projhead_lab.training import REGIMES, Regime, TrainSchedule, run_schedule

AUG = AugConfig(noise_sigma=0.1)


def _dataset():
    return generate_synthetic(SynthConfig(content_dim=3, style_dim=3, num_classes=3, samples_per_class=8))


def _schedule(regime, **kwargs):
    return TrainSchedule(regime=regime, epochs=2, batch_size=8, **kwargs)


def _models(kind, seed=0):
    return init_encoder([6, 16, 8], seed), init_head(kind, 8, d=4, hidden=5, seed=seed)


def test_every_regime_is_registered():
    assert set(REGIMES.list_regimes()) == set(Regime)
    assert REGIMES.has_regime("bilevel")


def test_batch_size_needs_a_negative():
    with pytest.raises(ValidationError, match="InfoNCE"):
        TrainSchedule(batch_size=1)


def test_bilevel_head_optimizer_has_no_weight_decay():
    schedule = TrainSchedule(regime="bilevel", weight_decay=0.1, inner_optimizer="sgd")
    opt = schedule.head_optimizer()
    assert opt.kind == "sgd" and opt.weight_decay == 0.0
    assert TrainSchedule(regime="joint", weight_decay=0.1).head_optimizer().weight_decay == 0.1


def test_joint_records_one_entry_per_epoch():
    encoder, head = _models("nonlinear")
    seen = []
    metrics, _, _ = run_schedule(_schedule("joint"), _dataset(), encoder, head, AUG, sinks=[seen.append])
    assert [r.epoch for r in metrics.records] == [0, 1]
    assert seen == metrics.records
    assert all(r.regime == "joint" and r.loss > 0 and r.inner_losses == [] for r in metrics.records)


def test_no_head_installs_identity_head():
    encoder, head = _models("linear")
    _, _, trained = run_schedule(_schedule("no_head"), _dataset(), encoder, head, AUG)
    assert trained.kind == HeadKind.NONE


def test_fixed_pretrained_head_never_changes():
    encoder, head = _models("linear")
    frozen = freeze_head(head)
    before = parameter_checksum(frozen.params)
    metrics, _, trained = run_schedule(_schedule("fixed_head"), _dataset(), encoder, frozen, AUG)
    assert parameter_checksum(trained.params) == before
    assert all(r.g_delta_norm == 0.0 for r in metrics.records)


@pytest.mark.parametrize("kind", ["fixed_random", "diagonal_low_rank"])
def test_frozen_heads_end_with_their_starting_checksum(kind):
    encoder, head = _models(kind)
    before = parameter_checksum(head.params)
    metrics, _, trained = run_schedule(_schedule("fixed_head"), _dataset(), encoder, head, AUG)
    assert trained.kind == kind
    assert parameter_checksum(trained.params) == before
    assert all(r.g_delta_norm == 0.0 for r in metrics.records)


def test_frozen_nonlinear_head_keeps_batchnorm_statistics():
    encoder, head = _models("nonlinear")
    frozen = freeze_head(head)
    running = frozen.buffers["running_mean"].copy()
    run_schedule(_schedule("fixed_head"), _dataset(), encoder, frozen, AUG)
    np.testing.assert_array_equal(frozen.buffers["running_mean"], running)


def test_bilevel_without_inner_steps_matches_fixed_head():
    ds = _dataset()
    enc_a, linear = _models("linear", seed=3)
    enc_b, fixed = _models("fixed_random", seed=3)
    np.testing.assert_array_equal(linear.params["W"], fixed.params["W"])
    run_schedule(_schedule("bilevel", inner_steps=0), ds, enc_a, linear, AUG)
    run_schedule(_schedule("fixed_head"), ds, enc_b, fixed, AUG)
    for k in enc_a.params:
        np.testing.assert_array_equal(enc_a.params[k], enc_b.params[k])

    enc_c, joint_head = _models("linear", seed=3)
    run_schedule(_schedule("joint"), ds, enc_c, joint_head, AUG)
    assert parameter_checksum(enc_c.params) != parameter_checksum(enc_a.params)


def test_bilevel_records_inner_trajectory():
    encoder, head = _models("linear")
    metrics, _, _ = run_schedule(_schedule("bilevel", inner_steps=3), _dataset(), encoder, head, AUG)
    assert all(len(r.inner_losses) == 4 for r in metrics.records)
    assert all(r.g_delta_norm > 0.0 for r in metrics.records)


def test_training_is_deterministic():
    ds = _dataset()

    def run():
        encoder, head = _models("nonlinear", seed=1)
        metrics, encoder, head = run_schedule(_schedule("bilevel", seed=1), ds, encoder, head, AUG)
        return [r.loss for r in metrics.records], parameter_checksum(encoder.params), parameter_checksum(head.params)

    assert run() == run()


def test_pca_refresh_keeps_orthonormal_rows():
    encoder, head = _models("pca_linear")
    metrics, _, trained = run_schedule(_schedule("pca_refresh", pca_subset=20), _dataset(), encoder, head, AUG)
    a = trained.linear_map()[0]
    np.testing.assert_allclose(a @ a.T, np.eye(4), atol=1e-10)
    assert trained.kind == HeadKind.PCA_LINEAR
    assert len(metrics.records) == 2


def test_slow_regimes_run():
    ds = _dataset()
    encoder, head = _models("linear")
    metrics, _, _ = run_schedule(_schedule("slow_single"), ds, encoder, head, AUG)
    assert all(r.inner_losses == [] for r in metrics.records)

    encoder, head = _models("linear")
    metrics, _, _ = run_schedule(
        _schedule("slow_optimal", slow_subset=12, slow_max_iters=5), ds, encoder, head, AUG
    )
    for r in metrics.records:
        assert 1 <= len(r.inner_losses) <= 6
        assert all(b <= a for a, b in zip(r.inner_losses, r.inner_losses[1:]))


def test_regime_rejects_incompatible_head():
    encoder, head = _models("fixed_random")
    with pytest.raises(ConfigError):
        run_schedule(_schedule("joint"), _dataset(), encoder, head, AUG)
    encoder, head = _models("linear")
    with pytest.raises(ConfigError):
        run_schedule(_schedule("fixed_head"), _dataset(), encoder, head, AUG)


def test_batch_larger_than_dataset():
    encoder, head = _models("linear")
    schedule = TrainSchedule(regime="joint", epochs=1, batch_size=64)
    with pytest.raises(ConfigError):
        run_schedule(schedule, _dataset(), encoder, head, AUG)


def test_snapshot_records_reach_the_sinks():
    encoder, head = _models("linear")
    seen = []

    def snapshot(epoch, encoder, head):
        return [EvalRecord(epoch, "joint", {"epoch": epoch})]

    metrics, _, _ = run_schedule(_schedule("joint"), _dataset(), encoder, head, AUG, sinks=[seen.append], snapshot=snapshot)
    assert len(metrics.evals) == 2
    assert sum(isinstance(r, EvalRecord) for r in seen) == 2


def test_zero_epochs_returns_untouched_models():
    encoder, head = _models("linear")
    before = parameter_checksum(encoder.params)
    schedule = TrainSchedule(regime="joint", epochs=0, batch_size=8)
    metrics, encoder, _ = run_schedule(schedule, _dataset(), encoder, head, AUG)
    assert metrics.records == [] and metrics.final_loss is None
    assert parameter_checksum(encoder.params) == before
