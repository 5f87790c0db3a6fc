import numpy as np
import pytest
from projhead_lab.data import AugConfig, SynthConfig, generate_synthetic, make_views
from projhead_lab.errors import ConfigError
from projhead_lab.models import Encoder, encode, init_encoder, init_head, parameter_checksum
from projhead_lab.models.heads import HeadKind
from projhead_lab.objectives import LossConfig
from projhead_lab.training import OptimizerState, pca_refresh, slow_optimal_epoch, slow_single_epoch
from projhead_lab.training import moving

LOSS = LossConfig()


def _identity_encoder(m: int) -> Encoder:
    return Encoder([m, m], {"W0": np.eye(m), "b0": np.zeros((1, m))})


def _setup(seed=0):
    ds = generate_synthetic(SynthConfig(content_dim=3, style_dim=3, num_classes=3, samples_per_class=4))
    batch = make_views(ds, np.arange(8), AugConfig(noise_sigma=0.1), seed=seed, epoch=0)
    return init_encoder([6, 16, 8], seed), init_head("linear", 8, d=4, seed=seed), batch


def test_pca_of_planar_data_reconstructs_it():
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.standard_normal((4, 2)))[0].T
    data = rng.standard_normal((50, 2)) @ basis + 3.0
    head = pca_refresh(_identity_encoder(4), data, k=2)
    a = head.linear_map()[0]
    centered = data - data.mean(axis=0)
    np.testing.assert_allclose(centered - centered @ a.T @ a, 0.0, atol=1e-10)
    np.testing.assert_allclose(a @ a.T, np.eye(2), atol=1e-10)
    assert head.kind == HeadKind.PCA_LINEAR and not head.trainable


def test_top_and_bottom_components_on_isotropic_data():
    rng = np.random.default_rng(1)
    data = rng.standard_normal((20000, 8))
    centered = data - data.mean(axis=0)
    total = np.sum(centered**2)
    captured = {}
    for which in ("top", "bottom"):
        a = pca_refresh(_identity_encoder(8), data, k=2, which=which).linear_map()[0]
        captured[which] = np.sum((centered @ a.T) ** 2) / total
    assert captured["top"] >= captured["bottom"]
    assert captured["top"] == pytest.approx(0.25, abs=0.05)
    assert captured["bottom"] == pytest.approx(0.25, abs=0.05)


def test_top_components_follow_the_largest_variance():
    rng = np.random.default_rng(2)
    data = rng.standard_normal((500, 3)) * np.array([10.0, 1.0, 0.1])
    top = pca_refresh(_identity_encoder(3), data, k=1, which="top").linear_map()[0]
    bottom = pca_refresh(_identity_encoder(3), data, k=1, which="bottom").linear_map()[0]
    assert abs(top[0, 0]) > 0.99
    assert abs(bottom[0, 2]) > 0.99


def test_pca_refresh_errors():
    encoder = _identity_encoder(4)
    data = np.random.default_rng(0).standard_normal((10, 4))
    with pytest.raises(ConfigError):
        pca_refresh(encoder, data[:4], k=2)
    with pytest.raises(ConfigError):
        pca_refresh(encoder, data, k=5)
    with pytest.raises(ConfigError):
        pca_refresh(encoder, data, k=2, which="middle")


def test_slow_single_holds_the_head_until_epoch_end(monkeypatch):
    encoder, head, batch = _setup()
    initial = parameter_checksum(head.params)
    seen = []
    original = moving.batch_gradients

    def spy(encoder, head, *args, **kwargs):
        seen.append(parameter_checksum(head.params))
        return original(encoder, head, *args, **kwargs)

    monkeypatch.setattr(moving, "batch_gradients", spy)
    r = slow_single_epoch(encoder, head, [batch, batch, batch], LOSS, OptimizerState(), OptimizerState())
    assert seen == [initial] * 3
    assert parameter_checksum(head.params) != initial
    assert len(r.losses) == 3
    assert r.g_delta_norm > 0.0


def test_slow_single_steps_with_the_mean_gradient():
    encoder, head, batch = _setup()
    opt_g = OptimizerState(kind="sgd", lr=0.1, momentum=0.0)
    once = head.copy()
    slow_single_epoch(encoder.copy(), once, [batch], LOSS, OptimizerState(lr=0.0), opt_g.fresh())
    thrice = head.copy()
    slow_single_epoch(encoder.copy(), thrice, [batch] * 3, LOSS, OptimizerState(lr=0.0), opt_g.fresh())
    for k in head.params:
        np.testing.assert_allclose(thrice.params[k], once.params[k], atol=1e-12)


def test_slow_optimal_zero_iterations_keeps_head():
    encoder, head, batch = _setup()
    before = parameter_checksum(head.params)
    trace = slow_optimal_epoch(encoder, head, batch, tol=1e-4, max_iters=0, opt_g=OptimizerState(), loss_config=LOSS)
    assert parameter_checksum(head.params) == before
    assert trace.iterations == 0 and len(trace.losses) == 1


def test_slow_optimal_losses_never_increase():
    encoder, head, batch = _setup()
    enc_before = parameter_checksum(encoder.params)
    trace = slow_optimal_epoch(
        encoder, head, batch, tol=1e-6, max_iters=40, opt_g=OptimizerState(lr=1e-2), loss_config=LOSS
    )
    assert all(b <= a for a, b in zip(trace.losses, trace.losses[1:]))
    assert trace.losses[-1] < trace.losses[0]
    assert parameter_checksum(encoder.params) == enc_before
    h1, h2 = encode(encoder, batch.view1), encode(encoder, batch.view2)
    final, _ = moving.head_objective(head, h1, h2, LOSS, with_grads=False)
    assert final == pytest.approx(trace.losses[-1], abs=1e-12)


def test_slow_optimal_stops_when_converged():
    encoder, head, batch = _setup()
    trace = slow_optimal_epoch(
        encoder, head, batch, tol=1e-4, max_iters=50,
        opt_g=OptimizerState(kind="sgd", lr=1e-12, momentum=0.0), loss_config=LOSS,
    )
    assert trace.iterations == 1


def test_slow_optimal_needs_positive_tolerance():
    encoder, head, batch = _setup()
    with pytest.raises(ConfigError):
        slow_optimal_epoch(encoder, head, batch, tol=0.0, max_iters=5, opt_g=OptimizerState(), loss_config=LOSS)
