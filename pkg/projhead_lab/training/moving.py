"""Heads that move at epoch granularity: PCA refresh, Slow-Single, Slow-Optimal."""

from typing import Iterable, Literal, NamedTuple
import numpy as np
import scipy.linalg
from .optim import OptimizerState, optimizer_step
from .steps import batch_gradients, head_objective
from ..data.batches import ViewBatch
from ..errors import ConfigError
from ..models.encoder import Encoder
from ..models.forward import encode
from ..models.heads import Head, head_parameters, pca_head
from ..objectives import LossConfig


class EpochUpdate(NamedTuple):
    losses: list[float]
    opt_f: OptimizerState | None
    opt_g: OptimizerState
    g_delta_norm: float


class ConvergenceTrace(NamedTuple):
    losses: list[float]
    iterations: int
    opt_g: OptimizerState
    g_delta_norm: float


def pca_refresh(
    encoder: Encoder,
    subset: np.ndarray,
    k: int,
    which: Literal["top", "bottom"] = "top",
) -> Head:
    """PCALinear head whose rows are the top or bottom k covariance eigenvectors of f(subset)."""
    if which not in ("top", "bottom"):
        raise ConfigError(f"which must be top or bottom, got {which!r}")
    m = encoder.output_dim
    if not 1 <= k <= m:
        raise ConfigError(f"PCA head needs 1 <= k <= m={m}, got k={k}")
    subset = np.asarray(subset, dtype=np.float64)
    if subset.shape[0] <= m:
        raise ConfigError(
            f"PCA subset of {subset.shape[0]} examples is too small for m={m} features"
        )
    features = encode(encoder, subset)
    centered = features - features.mean(axis=0, keepdims=True)
    covariance = centered.T @ centered / (features.shape[0] - 1)
    # eigh returns ascending eigenvalues
    _, vectors = scipy.linalg.eigh(covariance)
    if which == "top":
        chosen = vectors[:, ::-1][:, :k]
    else:
        chosen = vectors[:, :k]
    return pca_head(chosen.T)


def slow_single_epoch(
    encoder: Encoder,
    head: Head,
    batches: Iterable[ViewBatch],
    loss_config: LossConfig,
    opt_f: OptimizerState,
    opt_g: OptimizerState,
) -> EpochUpdate:
    """Step f every batch; step g once at epoch end with the mean of its batch gradients.

    Head gradients are taken at the same point as the encoder gradients of
    each batch, before that batch's encoder step.
    """
    before = head_parameters(head)
    losses, accumulated, count = [], {}, 0
    for batch in batches:
        loss, f_grads, g_grads = batch_gradients(encoder, head, batch, loss_config)
        encoder.params, opt_f = optimizer_step(encoder.params, f_grads, opt_f)
        for name, g in g_grads.items():
            accumulated[name] = accumulated[name] + g if name in accumulated else g.copy()
        losses.append(loss)
        count += 1
    if count and accumulated:
        mean = {name: g / count for name, g in accumulated.items()}
        head.params, opt_g = optimizer_step(head.params, mean, opt_g)
    delta = float(np.linalg.norm(head_parameters(head) - before))
    return EpochUpdate(losses, opt_f, opt_g, delta)


def slow_optimal_epoch(
    encoder: Encoder,
    head: Head,
    views: ViewBatch,
    tol: float,
    max_iters: int,
    opt_g: OptimizerState,
    loss_config: LossConfig,
) -> ConvergenceTrace:
    """Optimize g alone on a fixed view subset until the relative improvement drops below tol.

    A step that increases the loss is rejected and ends the phase, so the
    recorded losses never increase. The encoder is only read.
    """
    if tol <= 0:
        raise ConfigError(f"convergence tolerance must be positive, got {tol}")
    if max_iters < 0:
        raise ConfigError(f"max_iters must be >= 0, got {max_iters}")
    before = head_parameters(head)
    h1, h2 = encode(encoder, views.view1), encode(encoder, views.view2)
    current, _ = head_objective(head, h1, h2, loss_config, with_grads=False)
    losses, iterations = [current], 0

    for _ in range(max_iters):
        _, grads = head_objective(head, h1, h2, loss_config)
        iterations += 1
        previous_params = head.params
        stepped, stepped_opt = optimizer_step(head.params, grads, opt_g)
        head.params = stepped
        candidate, _ = head_objective(head, h1, h2, loss_config, with_grads=False)
        if candidate > current:
            head.params = previous_params
            break
        opt_g = stepped_opt
        losses.append(candidate)
        improvement = (current - candidate) / max(abs(current), 1e-12)
        current = candidate
        if improvement < tol:
            break
    delta = float(np.linalg.norm(head_parameters(head) - before))
    return ConvergenceTrace(losses, iterations, opt_g, delta)
