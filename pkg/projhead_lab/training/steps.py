"""Per-batch updates: the joint baseline and the bilevel proximal scheme."""

from typing import NamedTuple
import numpy as np
from .optim import OptimizerState, optimizer_step
from ..autodiff.graph import ExprGraph, evaluate, gradient_by_name
from ..data.batches import ViewBatch
from ..errors import ConfigError
from ..models.encoder import Encoder
from ..models.forward import encode, forward, head_forward
from ..models.heads import Head, head_parameters
from ..objectives import LossConfig, batch_loss


class StepResult(NamedTuple):
    loss: float
    opt_f: OptimizerState
    opt_g: OptimizerState
    inner_losses: tuple[float, ...] = ()
    g_delta_norm: float = 0.0


def head_mode(head: Head) -> str:
    # frozen heads never touch their batchnorm statistics
    return "train" if head.trainable else "eval"


def batch_gradients(
    encoder: Encoder,
    head: Head,
    batch: ViewBatch,
    loss_config: LossConfig,
    wrt_encoder: bool = True,
    wrt_head: bool = True,
    update_stats: bool = True,
) -> tuple[float, dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Batch loss of z = g(f(view)) and its gradients, keyed by bare parameter name."""
    graph = ExprGraph()
    mode = head_mode(head)
    fp1 = forward(encoder, head, batch.view1, mode, graph, update_stats)
    fp2 = forward(encoder, head, batch.view2, mode, graph, update_stats)
    loss = batch_loss(graph, fp1.z_node, fp2.z_node, loss_config, batch_size=len(batch))
    evaluate(graph)

    names = []
    if wrt_encoder:
        names += [f"f.{k}" for k in encoder.param_names()]
    if wrt_head and head.trainable:
        names += [f"g.{k}" for k in head.param_names()]
    grads = gradient_by_name(graph, loss, names) if names else {}
    f_grads = {k[2:]: v for k, v in grads.items() if k.startswith("f.")}
    g_grads = {k[2:]: v for k, v in grads.items() if k.startswith("g.")}
    return float(graph.nodes[loss].value[0, 0]), f_grads, g_grads


def head_objective(
    head: Head,
    h1: np.ndarray,
    h2: np.ndarray,
    loss_config: LossConfig,
    with_grads: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss as a function of the head alone, on fixed backbone features."""
    graph = ExprGraph()
    z1 = head_forward(head, graph, graph.constant(h1), head_mode(head))
    z2 = head_forward(head, graph, graph.constant(h2), head_mode(head))
    loss = batch_loss(graph, z1, z2, loss_config, batch_size=h1.shape[0])
    evaluate(graph, head.bindings())
    value = float(graph.nodes[loss].value[0, 0])
    if not with_grads or not head.param_names():
        return value, {}
    grads = gradient_by_name(graph, loss, [f"g.{k}" for k in head.param_names()])
    return value, {k[2:]: v for k, v in grads.items()}


def encoder_step(
    encoder: Encoder,
    head: Head,
    batch: ViewBatch,
    loss_config: LossConfig,
    opt_f: OptimizerState,
) -> tuple[float, OptimizerState]:
    """One step on f with g held fixed."""
    loss, f_grads, _ = batch_gradients(encoder, head, batch, loss_config, wrt_head=False)
    encoder.params, opt_f = optimizer_step(encoder.params, f_grads, opt_f)
    return loss, opt_f


def joint_step(
    encoder: Encoder,
    head: Head,
    batch: ViewBatch,
    loss_config: LossConfig,
    opt_f: OptimizerState,
    opt_g: OptimizerState,
) -> StepResult:
    """One simultaneous step on f and g from a single backward pass.

    A frozen head contributes no gradient and keeps its parameters.
    """
    before = head_parameters(head)
    loss, f_grads, g_grads = batch_gradients(encoder, head, batch, loss_config)
    encoder.params, opt_f = optimizer_step(encoder.params, f_grads, opt_f)
    if g_grads:
        head.params, opt_g = optimizer_step(head.params, g_grads, opt_g)
    delta = float(np.linalg.norm(head_parameters(head) - before))
    return StepResult(loss, opt_f, opt_g, (), delta)


def proximal_map(
    stepped: dict[str, np.ndarray],
    anchor: dict[str, np.ndarray],
    strength: float,
    lr: float,
) -> dict[str, np.ndarray]:
    """argmin_g λ‖g − anchor‖² + ‖g − stepped‖²/(2η), entrywise."""
    shrink = 2.0 * strength * lr
    return {k: (stepped[k] + shrink * anchor[k]) / (1.0 + shrink) for k in stepped}


def bilevel_step(
    encoder: Encoder,
    head: Head,
    batch: ViewBatch,
    loss_config: LossConfig,
    opt_f: OptimizerState,
    opt_g: OptimizerState,
    inner_steps: int,
    proximal: float,
) -> StepResult:
    """l proximal steps on g with f frozen, then one step on f under the updated g.

    Each inner step is an optimizer step on the batch loss followed by the
    exact proximal map of λ‖g − g^k‖². `inner_losses` holds the regularized
    objective before every inner step and after the last one (l + 1 values).
    `opt_g` is returned updated so the caller can keep it across outer steps.
    """
    if inner_steps < 0:
        raise ConfigError(f"inner_steps must be >= 0, got {inner_steps}")
    if proximal < 0:
        raise ConfigError(f"proximal strength must be >= 0, got {proximal}")
    if not head.trainable:
        raise ConfigError(f"bilevel training needs a trainable head, got {head.kind}")

    anchor = {k: head.params[k].copy() for k in head.param_names()}
    anchor_flat = head_parameters(head)
    h1, h2 = encode(encoder, batch.view1), encode(encoder, batch.view2)

    inner_losses = []
    for t in range(inner_steps + 1):
        last = t == inner_steps
        value, grads = head_objective(head, h1, h2, loss_config, with_grads=not last)
        distance = head_parameters(head) - anchor_flat
        inner_losses.append(value + proximal * float(distance @ distance))
        if last:
            break
        stepped, opt_g = optimizer_step(head.params, grads, opt_g)
        head.params = proximal_map(stepped, anchor, proximal, opt_g.lr)

    loss, opt_f = encoder_step(encoder, head, batch, loss_config, opt_f)
    delta = float(np.linalg.norm(head_parameters(head) - anchor_flat))
    return StepResult(loss, opt_f, opt_g, tuple(inner_losses), delta)
