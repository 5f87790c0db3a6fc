import numpy as np
import pytest
from projhead_lab.data import AugConfig, SynthConfig, generate_synthetic, make_views
from projhead_lab.errors import ConfigError
from projhead_lab.models import encode, init_encoder, init_head, parameter_checksum
from projhead_lab.objectives import LossConfig
from projhead_lab.training import OptimizerState, bilevel_step, joint_step
from projhead_lab.training import steps
from projhead_lab.training.steps import head_objective, proximal_map

LOSS = LossConfig()


def _setup(head_kind="linear", seed=0):
    ds = generate_synthetic(SynthConfig(content_dim=3, style_dim=3, num_classes=3, samples_per_class=4))
    batch = make_views(ds, np.arange(8), AugConfig(noise_sigma=0.1), seed=seed, epoch=0)
    encoder = init_encoder([6, 16, 8], seed)
    head = init_head(head_kind, 8, d=4, hidden=5, seed=seed)
    return encoder, head, batch


def test_frozen_head_only_moves_encoder():
    encoder, head, batch = _setup("fixed_random")
    enc_before = parameter_checksum(encoder.params)
    head_before = parameter_checksum(head.params)
    r = joint_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState())
    assert parameter_checksum(head.params) == head_before
    assert parameter_checksum(encoder.params) != enc_before
    assert r.g_delta_norm == 0.0


def test_zero_learning_rate_changes_nothing():
    encoder, head, batch = _setup("linear")
    enc_before = parameter_checksum(encoder.params)
    head_before = parameter_checksum(head.params)
    opt = OptimizerState(lr=0.0)
    r = joint_step(encoder, head, batch, LOSS, opt, opt.fresh())
    assert parameter_checksum(encoder.params) == enc_before
    assert parameter_checksum(head.params) == head_before
    assert r.loss > 0.0


def test_joint_steps_reduce_the_loss():
    encoder, head, batch = _setup("nonlinear")
    opt_f, opt_g = OptimizerState(lr=1e-2), OptimizerState(lr=1e-2)
    first = None
    for _ in range(50):
        r = joint_step(encoder, head, batch, LOSS, opt_f, opt_g)
        opt_f, opt_g = r.opt_f, r.opt_g
        first = r.loss if first is None else first
    final, _, _ = steps.batch_gradients(encoder, head, batch, LOSS, update_stats=False)
    assert final < first


def test_bilevel_without_inner_steps_keeps_head():
    encoder, head, batch = _setup("linear")
    before = {k: v.copy() for k, v in head.params.items()}
    r = bilevel_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=0, proximal=1.0)
    for k in before:
        np.testing.assert_array_equal(head.params[k], before[k])
    assert len(r.inner_losses) == 1
    assert r.g_delta_norm == 0.0


def test_bilevel_inner_loop_leaves_encoder_alone():
    encoder, head, batch = _setup("linear")
    before = parameter_checksum(encoder.params)
    bilevel_step(encoder, head, batch, LOSS, OptimizerState(lr=0.0), OptimizerState(), inner_steps=3, proximal=0.0)
    assert parameter_checksum(encoder.params) == before


def test_huge_proximal_strength_pins_the_head():
    encoder, head, batch = _setup("linear")
    r = bilevel_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=5, proximal=1e12)
    assert r.g_delta_norm < 1e-6
    assert len(r.inner_losses) == 6


def test_head_displacement_shrinks_with_proximal_strength():
    deltas = []
    for strength in (0.0, 1.0, 1e6, 1e12):
        encoder, head, batch = _setup("linear")
        r = bilevel_step(
            encoder, head, batch, LOSS,
            OptimizerState(lr=0.0), OptimizerState(kind="sgd", lr=1e-2, momentum=0.0),
            inner_steps=5, proximal=strength,
        )
        deltas.append(r.g_delta_norm)
    assert deltas[0] > 0.0
    assert all(b <= a for a, b in zip(deltas, deltas[1:]))


def test_inner_objective_never_increases_for_small_sgd_steps():
    encoder, head, batch = _setup("linear")
    r = bilevel_step(
        encoder, head, batch, LOSS,
        OptimizerState(), OptimizerState(kind="sgd", lr=1e-4, momentum=0.0),
        inner_steps=10, proximal=1.0,
    )
    assert len(r.inner_losses) == 11
    assert all(b <= a + 1e-12 for a, b in zip(r.inner_losses, r.inner_losses[1:]))


def test_outer_step_sees_the_updated_head(monkeypatch):
    encoder, head, batch = _setup("linear")
    initial = parameter_checksum(head.params)
    seen = []
    original = steps.batch_gradients

    def spy(encoder, head, *args, **kwargs):
        seen.append(parameter_checksum(head.params))
        return original(encoder, head, *args, **kwargs)

    monkeypatch.setattr(steps, "batch_gradients", spy)
    bilevel_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=2, proximal=0.0)
    assert seen == [parameter_checksum(head.params)]
    assert seen[0] != initial


def test_bilevel_argument_errors():
    encoder, head, batch = _setup("linear")
    with pytest.raises(ConfigError):
        bilevel_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=-1, proximal=1.0)
    with pytest.raises(ConfigError):
        bilevel_step(encoder, head, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=1, proximal=-1.0)
    encoder, frozen, batch = _setup("fixed_random")
    with pytest.raises(ConfigError):
        bilevel_step(encoder, frozen, batch, LOSS, OptimizerState(), OptimizerState(), inner_steps=1, proximal=1.0)


def test_proximal_map_limits():
    stepped = {"W": np.array([[1.0]])}
    anchor = {"W": np.array([[0.0]])}
    assert proximal_map(stepped, anchor, 0.0, 0.1)["W"][0, 0] == 1.0
    assert proximal_map(stepped, anchor, 1e12, 0.1)["W"][0, 0] < 1e-10
    assert proximal_map(stepped, anchor, 5.0, 0.1)["W"][0, 0] == pytest.approx(0.5)


def test_head_objective_matches_joint_loss_for_frozen_encoder():
    encoder, head, batch = _setup("linear")
    value, grads = head_objective(head, encode(encoder, batch.view1), encode(encoder, batch.view2), LOSS)
    loss, _, g_grads = steps.batch_gradients(encoder, head, batch, LOSS, wrt_encoder=False)
    assert value == pytest.approx(loss, abs=1e-12)
    np.testing.assert_allclose(grads["W"], g_grads["W"], atol=1e-12)
