"""Expression graphs with reverse-mode differentiation.

A graph is append-only: node ids are assigned in construction order, so every
parent id is smaller than its child's and id order is a topological order.
`evaluate` caches forward values per node against a copy of the bindings;
appending nodes (for example a loss on top of a model forward) and evaluating
again with equal bindings only computes the new nodes.
"""

from dataclasses import dataclass, field
import numpy as np
from .ops import OPS, OpKind
from .tensor import Tensor, as_tensor
from ..errors import GraphError, NumericalError, ShapeError


@dataclass
class ExprNode:
    id: int
    kind: OpKind
    parents: tuple[int, ...] = ()
    attrs: dict = field(default_factory=dict)
    name: str | None = None
    value: Tensor | None = None
    adjoint: Tensor | None = None
    aux: dict = field(default_factory=dict, repr=False)

    @property
    def is_constant(self) -> bool:
        return self.kind == OpKind.INPUT and "constant" in self.attrs


class ExprGraph:
    def __init__(self):
        self.nodes: list[ExprNode] = []
        self.__names: dict[str, int] = {}
        self.__bindings: dict[str, np.ndarray] | None = None

    def __len__(self):
        return len(self.nodes)

    def _add(self, kind: OpKind, parents: tuple[int, ...], **attrs) -> int:
        for p in parents:
            if not 0 <= p < len(self.nodes):
                raise GraphError(f"unknown parent node {p}")
        node = ExprNode(id=len(self.nodes), kind=kind, parents=parents, attrs=attrs)
        self.nodes.append(node)
        return node.id

    # --- construction -------------------------------------------------

    def input(self, name: str) -> int:
        """Declare a bound input; declaring the same name twice returns the same node."""
        if name in self.__names:
            existing = self.nodes[self.__names[name]]
            if existing.kind != OpKind.INPUT or existing.is_constant:
                raise GraphError(f"name {name!r} already used by node {existing.id}")
            return existing.id
        node_id = self._add(OpKind.INPUT, ())
        return self.name(node_id, name)

    def constant(self, value, name: str | None = None) -> int:
        node_id = self._add(OpKind.INPUT, (), constant=as_tensor(value, name or "constant"))
        if name is not None:
            self.name(node_id, name)
        return node_id

    def name(self, node_id: int, name: str) -> int:
        if name in self.__names and self.__names[name] != node_id:
            raise GraphError(f"name {name!r} already used by node {self.__names[name]}")
        self.nodes[node_id].name = name
        self.__names[name] = node_id
        return node_id

    def node_id(self, name: str) -> int:
        if name not in self.__names:
            raise GraphError(f"no node named {name!r}")
        return self.__names[name]

    def has_name(self, name: str) -> bool:
        return name in self.__names

    @property
    def names(self) -> dict[str, int]:
        return dict(self.__names)

    def free_inputs(self) -> list[str]:
        return [
            n.name
            for n in self.nodes
            if n.kind == OpKind.INPUT and not n.is_constant
        ]

    def matmul(self, a: int, b: int) -> int:
        return self._add(OpKind.MATMUL, (a, b))

    def add(self, a: int, b: int) -> int:
        return self._add(OpKind.ADD, (a, b))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.scale(b, -1.0))

    def mul(self, a: int, b: int) -> int:
        return self._add(OpKind.MUL, (a, b))

    def relu(self, a: int) -> int:
        return self._add(OpKind.RELU, (a,))

    def batchnorm(
        self,
        x: int,
        gamma: int,
        beta: int,
        mode: str = "train",
        running_mean: np.ndarray | None = None,
        running_var: np.ndarray | None = None,
    ) -> int:
        if mode not in ("train", "eval"):
            raise GraphError(f"batchnorm mode must be train or eval, got {mode!r}")
        if mode == "eval" and (running_mean is None or running_var is None):
            raise GraphError("batchnorm in eval mode needs running statistics")
        attrs = {"mode": mode}
        if mode == "eval":
            attrs["running_mean"] = np.array(running_mean, dtype=np.float64)
            attrs["running_var"] = np.array(running_var, dtype=np.float64)
        return self._add(OpKind.BATCHNORM, (x, gamma, beta), **attrs)

    def l2norm(self, a: int) -> int:
        return self._add(OpKind.L2NORM, (a,))

    def scale(self, a: int, factor: float) -> int:
        return self._add(OpKind.SCALE, (a,), factor=float(factor))

    def exp(self, a: int) -> int:
        return self._add(OpKind.EXP, (a,))

    def log(self, a: int) -> int:
        return self._add(OpKind.LOG, (a,))

    def sum(self, a: int, axis: int | None = None) -> int:
        if axis not in (None, 0, 1):
            raise GraphError(f"sum axis must be None, 0 or 1, got {axis}")
        return self._add(OpKind.SUM, (a,), axis=axis)

    def concat(self, *parts: int) -> int:
        if not parts:
            raise GraphError("concat needs at least one parent")
        return self._add(OpKind.CONCAT, tuple(parts))

    def cosine(self, a: int, b: int) -> int:
        return self._add(OpKind.COSINE, (a, b))

    def logsumexp(self, a: int, mask: np.ndarray | None = None) -> int:
        attrs = {} if mask is None else {"mask": np.asarray(mask, dtype=bool)}
        return self._add(OpKind.LOGSUMEXP, (a,), **attrs)

    # --- evaluation state ---------------------------------------------

    @property
    def bindings(self) -> dict[str, np.ndarray] | None:
        return self.__bindings

    def _same_bindings(self, bindings: dict) -> bool:
        """True when `bindings` holds the values of the cached snapshot.

        Values are compared, not identities, so an array changed in place
        after the last evaluation invalidates the cache.
        """
        if bindings is self.__bindings:
            return True
        if self.__bindings is None or bindings.keys() != self.__bindings.keys():
            return False
        return all(
            np.array_equal(as_tensor(bindings[k], k), self.__bindings[k]) for k in bindings
        )

    def _reset(self, bindings: dict):
        for node in self.nodes:
            node.value = None
            node.adjoint = None
            node.aux = {}
        self.__bindings = {k: as_tensor(v, k).copy() for k, v in bindings.items()}


def evaluate(
    graph: ExprGraph,
    bindings: dict[str, np.ndarray] | None = None,
    outputs: list[str] | None = None,
) -> dict[str, Tensor]:
    """Compute forward values; returns the values of named nodes.

    With `bindings=None` the bindings of the previous call are reused, which
    lets nodes appended since then be computed without redoing the rest.
    """
    if bindings is None:
        bindings = graph.bindings if graph.bindings is not None else {}
    if not graph._same_bindings(bindings):
        graph._reset(bindings)
    bindings = graph.bindings

    for node in graph.nodes:
        if node.value is not None:
            continue
        if node.kind == OpKind.INPUT:
            if node.is_constant:
                node.value = node.attrs["constant"]
                continue
            if node.name not in bindings:
                raise GraphError(f"input {node.name!r} (node {node.id}) is unbound")
            node.value = as_tensor(bindings[node.name], node.name)
            continue
        op = OPS.get(node.kind)
        inputs = [graph.nodes[p].value for p in node.parents]
        try:
            op.check([x.shape for x in inputs], node.attrs)
            value, aux = op.forward(inputs, node.attrs)
        except (ShapeError, NumericalError) as e:
            raise type(e)(f"node {node.id} ({node.kind}): {e}") from e
        if not np.all(np.isfinite(value)):
            raise NumericalError(f"node {node.id} ({node.kind}) produced non-finite values")
        node.value = value
        node.aux = aux

    names = graph.names
    wanted = names.keys() if outputs is None else outputs
    result = {}
    for name in wanted:
        if name not in names:
            raise GraphError(f"no node named {name!r}")
        result[name] = graph.nodes[names[name]].value
    return result


def _ancestors(graph: ExprGraph, node_id: int) -> set[int]:
    seen = set()
    stack = [node_id]
    while stack:
        current = stack.pop()
        if current in seen:
            continue
        seen.add(current)
        stack.extend(graph.nodes[current].parents)
    return seen


def gradient(graph: ExprGraph, loss: int, wrt) -> dict[int, Tensor]:
    """Reverse-mode derivatives of a scalar node with respect to `wrt` node ids."""
    loss_node = graph.nodes[loss]
    if loss_node.value is None:
        raise GraphError(f"node {loss} has no forward value; evaluate the graph first")
    if loss_node.value.shape != (1, 1):
        raise ShapeError(f"loss node {loss} is not scalar: shape {loss_node.value.shape}")
    wrt = list(wrt)
    reachable = _ancestors(graph, loss)
    for w in wrt:
        if w not in reachable:
            raise GraphError(f"node {w} is not reachable from loss node {loss}")

    needs = [False] * (loss + 1)
    targets = set(wrt)
    for i in range(loss + 1):
        node = graph.nodes[i]
        needs[i] = i in targets or any(needs[p] for p in node.parents)

    for node in graph.nodes:
        node.adjoint = None
    adjoints: dict[int, np.ndarray] = {loss: np.ones((1, 1))}
    for i in range(loss, -1, -1):
        node = graph.nodes[i]
        if i not in adjoints or not needs[i] or node.kind == OpKind.INPUT:
            continue
        op = OPS.get(node.kind)
        inputs = [graph.nodes[p].value for p in node.parents]
        grads = op.backward(adjoints[i], inputs, node.value, node.aux, node.attrs)
        for parent, g in zip(node.parents, grads):
            if g is None or not needs[parent]:
                continue
            if parent in adjoints:
                adjoints[parent] = adjoints[parent] + g
            else:
                adjoints[parent] = g

    for i, adj in adjoints.items():
        graph.nodes[i].adjoint = adj
    return {
        w: adjoints.get(w, np.zeros_like(graph.nodes[w].value)) for w in wrt
    }


def gradient_by_name(graph: ExprGraph, loss: int, names) -> dict[str, Tensor]:
    ids = {name: graph.node_id(name) for name in names}
    grads = gradient(graph, loss, ids.values())
    return {name: grads[i] for name, i in ids.items()}
