"""InfoNCE and the batch-level contrastive loss.

The default configuration follows common SimCLR practice: the positive pair
sits in the softmax denominator and the negatives are both views of every
other example in the batch. `include_positive=False` evaluates the literal
form whose denominator holds negatives only; that loss can be negative.
"""

from typing import Literal
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp
from .autodiff.graph import ExprGraph, evaluate
from .constants import DEFAULT_TEMPERATURE
from .errors import NumericalError, ShapeError


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    temperature: float = Field(DEFAULT_TEMPERATURE, gt=0.0)
    include_positive: bool = True
    negatives: Literal["batch_both_views", "batch_view2_only"] = "batch_both_views"


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise NumericalError("cosine similarity of a zero-norm vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def info_nce(z1, z2, negatives, config: LossConfig) -> float:
    """−log(exp(cos(z1,z2)/τ) / Σ_{z ∈ Den} exp(cos(z1,z)/τ))."""
    denominator = list(negatives)
    if config.include_positive:
        denominator.append(z2)
    if not denominator:
        raise ShapeError("InfoNCE denominator set is empty")
    tau = config.temperature
    positive = cosine_similarity(z1, z2) / tau
    logits = np.array([cosine_similarity(z1, z) / tau for z in denominator])
    # scipy's logsumexp subtracts the maximum before exponentiating
    return float(logsumexp(logits) - positive)


def contrastive_masks(batch_size: int, config: LossConfig) -> tuple[np.ndarray, np.ndarray]:
    """(positive mask, denominator mask) over the 2B×2B similarity matrix of [view1; view2]."""
    b = batch_size
    n = 2 * b
    rows = np.arange(n)
    partner = (rows + b) % n
    positive = np.zeros((n, n), dtype=bool)
    positive[rows, partner] = True

    same_example = (rows[:, None] % b) == (rows[None, :] % b)
    if config.negatives == "batch_both_views":
        denominator = ~same_example
    else:
        other_view = (rows[:, None] < b) != (rows[None, :] < b)
        denominator = other_view & ~same_example
    if config.include_positive:
        denominator = denominator | positive
    return positive, denominator


def contrastive_terms(
    graph: ExprGraph,
    z1: int,
    z2: int,
    config: LossConfig,
    batch_size: int | None = None,
) -> tuple[int, int]:
    """Append the symmetric batch loss to `graph`; returns (mean loss node, per-anchor node).

    Row i < B of the per-anchor column anchors view1 of example i, row B + i
    anchors its view2.
    """
    if batch_size is None:
        value = graph.nodes[z1].value
        if value is None:
            raise ShapeError("batch size unknown: evaluate the embeddings or pass batch_size")
        batch_size = value.shape[0]
    if batch_size < 2:
        raise ShapeError(f"batch loss needs B >= 2, got {batch_size}")
    positive, denominator = contrastive_masks(batch_size, config)

    embeddings = graph.concat(z1, z2)
    logits = graph.scale(graph.cosine(embeddings, embeddings), 1.0 / config.temperature)
    log_denominator = graph.logsumexp(logits, denominator)
    positive_logit = graph.sum(graph.mul(logits, graph.constant(positive.astype(np.float64))), axis=1)
    per_anchor = graph.sub(log_denominator, positive_logit)
    loss = graph.scale(graph.sum(per_anchor), 1.0 / (2 * batch_size))
    return loss, per_anchor


def batch_loss(
    graph: ExprGraph,
    z1: int,
    z2: int,
    config: LossConfig,
    batch_size: int | None = None,
) -> int:
    return contrastive_terms(graph, z1, z2, config, batch_size)[0]


def batch_loss_value(z1: np.ndarray, z2: np.ndarray, config: LossConfig) -> tuple[float, np.ndarray]:
    """Loss and per-anchor losses for fixed embeddings."""
    graph = ExprGraph()
    a, b = graph.constant(z1), graph.constant(z2)
    loss, per_anchor = contrastive_terms(graph, a, b, config, batch_size=np.shape(z1)[0])
    evaluate(graph, {})
    return float(graph.nodes[loss].value[0, 0]), graph.nodes[per_anchor].value.ravel()
