import numpy as np
from .graph import ExprGraph, evaluate, gradient
from ..errors import GraphError


def finite_difference_check(
    graph: ExprGraph,
    loss: int,
    wrt,
    step: float,
    bindings: dict[str, np.ndarray] | None = None,
    floor: float = 1e-12,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `wrt` holds ids of bound input nodes. The relative error of an entry is
    |analytic - numeric| / max(|analytic|, |numeric|, floor). Raising `floor`
    judges entries with near-zero gradients by absolute error instead.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if bindings is None:
        bindings = graph.bindings if graph.bindings is not None else {}
    base = dict(bindings)
    wrt = list(wrt)
    for w in wrt:
        node = graph.nodes[w]
        if node.name is None or node.name not in base:
            raise GraphError(f"node {w} is not a bound input; cannot perturb it")

    evaluate(graph, base)
    analytic = gradient(graph, loss, wrt)

    def loss_at(overrides: dict) -> float:
        evaluate(graph, {**base, **overrides})
        return float(graph.nodes[loss].value[0, 0])

    worst = 0.0
    for w in wrt:
        name = graph.nodes[w].name
        point = np.asarray(base[name], dtype=np.float64)
        for idx in np.ndindex(point.shape):
            plus = point.copy()
            plus[idx] += step
            minus = point.copy()
            minus[idx] -= step
            numeric = (loss_at({name: plus}) - loss_at({name: minus})) / (2.0 * step)
            a = float(analytic[w][idx])
            denom = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / denom)

    evaluate(graph, base)
    return worst
