"""Linear probe: a softmax classifier trained on frozen features with Adam."""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from .report import EvalReport
from ..autodiff.graph import ExprGraph, evaluate, gradient_by_name
from ..constants import DEFAULT_LR, DEFAULT_WEIGHT_DECAY
from ..errors import ConfigError, ShapeError
from ..training.optim import OptimizerState, optimizer_step
from ..utils.seeds import Stream, stream_rng


class ProbeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(200, ge=0)
    lr: float = Field(DEFAULT_LR, gt=0.0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    batch_size: int | None = Field(None, ge=1)  # None: full batch
    seed: int = 0


def _cross_entropy_graph(features: np.ndarray, labels: np.ndarray, num_classes: int) -> tuple[ExprGraph, int]:
    n = features.shape[0]
    onehot = np.zeros((n, num_classes))
    onehot[np.arange(n), labels] = 1.0
    graph = ExprGraph()
    logits = graph.add(graph.matmul(graph.constant(features), graph.input("W")), graph.input("b"))
    picked = graph.sum(graph.mul(logits, graph.constant(onehot)), axis=1)
    per_example = graph.sub(graph.logsumexp(logits), picked)
    loss = graph.scale(graph.sum(per_example), 1.0 / n)
    return graph, loss


def train_probe(
    features: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    config: ProbeConfig,
) -> tuple[dict[str, np.ndarray], list[float]]:
    """Fit W, b by Adam on mean cross-entropy; returns the parameters and per-epoch losses."""
    n, q = features.shape
    params = {"W": np.zeros((q, num_classes)), "b": np.zeros((1, num_classes))}
    state = OptimizerState(kind="adam", lr=config.lr, weight_decay=config.weight_decay)
    rng = stream_rng(config.seed, Stream.PROBE)

    batch = n if config.batch_size is None else min(config.batch_size, n)
    full = _cross_entropy_graph(features, labels, num_classes) if batch == n else None
    losses = []
    for _ in range(config.epochs):
        if full is not None:
            batches = [full]
        else:
            order = rng.permutation(n)
            batches = [
                _cross_entropy_graph(features[idx], labels[idx], num_classes)
                for idx in np.split(order, list(range(batch, n, batch)))
            ]
        epoch_loss = 0.0
        for graph, loss in batches:
            evaluate(graph, params)
            grads = gradient_by_name(graph, loss, ["W", "b"])
            epoch_loss += float(graph.nodes[loss].value[0, 0])
            params, state = optimizer_step(params, grads, state)
        losses.append(epoch_loss / len(batches))
    return params, losses


def linear_probe(
    train_feats,
    train_labels,
    test_feats,
    test_labels,
    config: ProbeConfig | None = None,
    feature: str = "h",
    num_classes: int | None = None,
) -> EvalReport:
    config = config or ProbeConfig()
    train_feats = np.asarray(train_feats, dtype=np.float64)
    test_feats = np.asarray(test_feats, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    if train_feats.ndim != 2 or test_feats.ndim != 2 or train_feats.shape[1] != test_feats.shape[1]:
        raise ShapeError(f"feature shapes {train_feats.shape} and {test_feats.shape} are incompatible")
    if train_feats.shape[0] != train_labels.shape[0] or test_feats.shape[0] != test_labels.shape[0]:
        raise ShapeError("feature and label counts differ")
    if test_labels.shape[0] == 0:
        raise ShapeError("empty test set")
    if np.unique(train_labels).shape[0] < 2:
        raise ConfigError("linear probe needs at least 2 classes in the training set")
    if num_classes is None:
        num_classes = int(max(train_labels.max(), test_labels.max())) + 1

    params, losses = train_probe(train_feats, train_labels, num_classes, config)
    logits = test_feats @ params["W"] + params["b"]
    predicted = np.argmax(logits, axis=1)
    return EvalReport(
        feature=feature,
        method="linear",
        correct=int(np.sum(predicted == test_labels)),
        test_size=int(test_labels.shape[0]),
        train_size=int(train_feats.shape[0]),
        params={
            "epochs": config.epochs,
            "lr": config.lr,
            "weight_decay": config.weight_decay,
            "batch_size": config.batch_size,
            "final_loss": losses[-1] if losses else None,
        },
    )
