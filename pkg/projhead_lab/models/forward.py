from typing import NamedTuple
import numpy as np
from .encoder import Encoder
from .heads import Head, HeadStructure
from ..autodiff.graph import ExprGraph, evaluate
from ..autodiff.ops import OpKind
from ..constants import BATCHNORM_MOMENTUM
from ..errors import ShapeError


class ForwardPass(NamedTuple):
    h: np.ndarray
    z: np.ndarray
    graph: ExprGraph
    h_node: int
    z_node: int


def bind(encoder: Encoder | None, head: Head | None) -> dict[str, np.ndarray]:
    bindings = {}
    if encoder is not None:
        bindings.update(encoder.bindings())
    if head is not None:
        bindings.update(head.bindings())
    return bindings


def encoder_forward(encoder: Encoder, graph: ExprGraph, x_node: int) -> int:
    out = x_node
    for i in range(encoder.num_layers):
        out = graph.add(graph.matmul(out, graph.input(f"f.W{i}")), graph.input(f"f.b{i}"))
        if i < encoder.num_layers - 1:
            out = graph.relu(out)
    return out


def head_forward(head: Head, graph: ExprGraph, h_node: int, mode: str = "train") -> int:
    s = head.structure
    if s == HeadStructure.IDENTITY:
        return h_node
    if s == HeadStructure.PROJECTION:
        return graph.matmul(h_node, graph.input("g.W"))
    if s == HeadStructure.AFFINE:
        return graph.add(graph.matmul(h_node, graph.input("g.W")), graph.input("g.b"))
    hidden = graph.add(graph.matmul(h_node, graph.input("g.W1")), graph.input("g.b1"))
    hidden = graph.batchnorm(
        hidden,
        graph.input("g.gamma"),
        graph.input("g.beta"),
        mode=mode,
        running_mean=head.buffers.get("running_mean"),
        running_var=head.buffers.get("running_var"),
    )
    hidden = graph.relu(hidden)
    return graph.add(graph.matmul(hidden, graph.input("g.W2")), graph.input("g.b2"))


def commit_running_stats(head: Head, graph: ExprGraph, start: int = 0) -> None:
    """Fold the batch statistics of train-mode batchnorm nodes (id ≥ start) into the head."""
    for node in graph.nodes[start:]:
        if node.kind != OpKind.BATCHNORM or node.attrs.get("mode") != "train":
            continue
        n = node.value.shape[0]
        mean, var = node.aux["batch_mean"], node.aux["batch_var"]
        m = BATCHNORM_MOMENTUM
        head.buffers["running_mean"] = m * head.buffers["running_mean"] + (1 - m) * mean
        head.buffers["running_var"] = (
            m * head.buffers["running_var"] + (1 - m) * var * n / (n - 1)
        )


def forward(
    encoder: Encoder,
    head: Head,
    x: np.ndarray,
    mode: str = "train",
    graph: ExprGraph | None = None,
    update_stats: bool = True,
) -> ForwardPass:
    """z = g(f(x)) built into `graph` (a fresh one when omitted) and evaluated.

    Calling it twice with the same graph shares the parameter nodes, so
    gradients from both calls accumulate on the same parameters.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != encoder.input_dim:
        raise ShapeError(f"encoder expects batches with {encoder.input_dim} columns, got {x.shape}")
    if head.structure != HeadStructure.IDENTITY and head.m != encoder.output_dim:
        raise ShapeError(f"head expects m={head.m}, encoder produces {encoder.output_dim}")
    graph = graph if graph is not None else ExprGraph()
    start = len(graph)
    h_node = encoder_forward(encoder, graph, graph.constant(x))
    z_node = head_forward(head, graph, h_node, mode)
    evaluate(graph, bind(encoder, head))
    if mode == "train" and update_stats:
        commit_running_stats(head, graph, start)
    return ForwardPass(graph.nodes[h_node].value, graph.nodes[z_node].value, graph, h_node, z_node)


def extract_features(
    encoder: Encoder, head: Head, x: np.ndarray, chunk: int = 1024
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode features (H, Z); rows are independent of how the input is chunked."""
    hs, zs = [], []
    for start in range(0, x.shape[0], chunk):
        fp = forward(encoder, head, x[start : start + chunk], mode="eval")
        hs.append(fp.h)
        zs.append(fp.z)
    return np.concatenate(hs), np.concatenate(zs)


def encode(encoder: Encoder, x: np.ndarray) -> np.ndarray:
    """Backbone features h = f(x) without a head."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != encoder.input_dim:
        raise ShapeError(f"encoder expects batches with {encoder.input_dim} columns, got {x.shape}")
    graph = ExprGraph()
    h_node = encoder_forward(encoder, graph, graph.constant(x))
    evaluate(graph, encoder.bindings())
    return graph.nodes[h_node].value
