"""Op-kinds of the expression graph.

Each op-kind is an `OpDefine` registered in `OPS`; the graph engine looks the
kind up to run forward and backward. Backward returns one adjoint per parent,
or None where the parent receives no gradient.
"""

from abc import ABC, abstractmethod
from projhead_lab.utils.compat import StrEnum
import numpy as np
from scipy.special import logsumexp
from ..errors import ShapeError, NumericalError
from ..constants import BATCHNORM_EPS


class OpKind(StrEnum):
    INPUT = "input"
    MATMUL = "matmul"
    ADD = "add"
    MUL = "mul"
    RELU = "relu"
    BATCHNORM = "batchnorm"
    L2NORM = "l2norm"
    SCALE = "scale"
    EXP = "exp"
    LOG = "log"
    SUM = "sum"
    CONCAT = "concat"
    COSINE = "cosine"
    LOGSUMEXP = "logsumexp"


class OpDefine(ABC):
    kind: OpKind

    def check(self, shapes: list[tuple[int, int]], attrs: dict) -> None:
        return None

    @abstractmethod
    def forward(self, inputs: list[np.ndarray], attrs: dict) -> tuple[np.ndarray, dict]:
        raise NotImplementedError("Op must implement forward")

    @abstractmethod
    def backward(
        self,
        grad: np.ndarray,
        inputs: list[np.ndarray],
        value: np.ndarray,
        aux: dict,
        attrs: dict,
    ) -> list[np.ndarray | None]:
        raise NotImplementedError("Op must implement backward")


def _same_shape(kind: OpKind, shapes):
    if shapes[0] != shapes[1]:
        raise ShapeError(f"{kind}: shapes {shapes[0]} and {shapes[1]} differ")


def _row_norms(x: np.ndarray, kind: OpKind) -> np.ndarray:
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    if np.any(norms == 0.0):
        raise NumericalError(f"{kind}: zero-norm row")
    return norms


class MatmulOp(OpDefine):
    kind = OpKind.MATMUL

    def check(self, shapes, attrs):
        if shapes[0][1] != shapes[1][0]:
            raise ShapeError(f"matmul: cannot multiply {shapes[0]} by {shapes[1]}")

    def forward(self, inputs, attrs):
        return inputs[0] @ inputs[1], {}

    def backward(self, grad, inputs, value, aux, attrs):
        a, b = inputs
        return [grad @ b.T, a.T @ grad]


class AddOp(OpDefine):
    """Elementwise add; the second operand may be a 1×cols row bias."""

    kind = OpKind.ADD

    def check(self, shapes, attrs):
        a, b = shapes
        if a == b:
            return
        if b[0] == 1 and b[1] == a[1]:
            return
        raise ShapeError(f"add: shapes {a} and {b} are incompatible")

    def forward(self, inputs, attrs):
        return inputs[0] + inputs[1], {}

    def backward(self, grad, inputs, value, aux, attrs):
        b = inputs[1]
        grad_b = grad if b.shape == grad.shape else grad.sum(axis=0, keepdims=True)
        return [grad, grad_b]


class MulOp(OpDefine):
    kind = OpKind.MUL

    def check(self, shapes, attrs):
        _same_shape(self.kind, shapes)

    def forward(self, inputs, attrs):
        return inputs[0] * inputs[1], {}

    def backward(self, grad, inputs, value, aux, attrs):
        a, b = inputs
        return [grad * b, grad * a]


class ReluOp(OpDefine):
    kind = OpKind.RELU

    def forward(self, inputs, attrs):
        return np.maximum(inputs[0], 0.0), {}

    def backward(self, grad, inputs, value, aux, attrs):
        # derivative at exactly 0 is 0
        return [grad * (inputs[0] > 0.0)]


class BatchNormOp(OpDefine):
    """Per-column batch normalization of x with affine gamma/beta (1×cols).

    attrs: mode ("train" | "eval"), running_mean, running_var, eps.
    """

    kind = OpKind.BATCHNORM

    def check(self, shapes, attrs):
        x, gamma, beta = shapes
        if gamma != (1, x[1]) or beta != (1, x[1]):
            raise ShapeError(
                f"batchnorm: gamma {gamma} / beta {beta} must be (1, {x[1]})"
            )
        if attrs.get("mode", "train") == "train" and x[0] < 2:
            raise ShapeError("batchnorm: training mode needs a batch of at least 2")

    def forward(self, inputs, attrs):
        x, gamma, beta = inputs
        eps = attrs.get("eps", BATCHNORM_EPS)
        if attrs.get("mode", "train") == "train":
            mean = x.mean(axis=0, keepdims=True)
            var = x.var(axis=0, keepdims=True)
        else:
            mean = np.asarray(attrs["running_mean"]).reshape(1, -1)
            var = np.asarray(attrs["running_var"]).reshape(1, -1)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean) * inv_std
        return gamma * xhat + beta, {
            "xhat": xhat,
            "inv_std": inv_std,
            "batch_mean": mean,
            "batch_var": var,
        }

    def backward(self, grad, inputs, value, aux, attrs):
        x, gamma, _ = inputs
        xhat, inv_std = aux["xhat"], aux["inv_std"]
        grad_gamma = np.sum(grad * xhat, axis=0, keepdims=True)
        grad_beta = np.sum(grad, axis=0, keepdims=True)
        dxhat = grad * gamma
        if attrs.get("mode", "train") == "train":
            n = x.shape[0]
            grad_x = (inv_std / n) * (
                n * dxhat
                - dxhat.sum(axis=0, keepdims=True)
                - xhat * np.sum(dxhat * xhat, axis=0, keepdims=True)
            )
        else:
            grad_x = dxhat * inv_std
        return [grad_x, grad_gamma, grad_beta]


class L2NormOp(OpDefine):
    """Row-wise normalization to unit Euclidean length."""

    kind = OpKind.L2NORM

    def forward(self, inputs, attrs):
        norms = _row_norms(inputs[0], self.kind)
        return inputs[0] / norms, {"norms": norms}

    def backward(self, grad, inputs, value, aux, attrs):
        radial = np.sum(grad * value, axis=1, keepdims=True)
        return [(grad - value * radial) / aux["norms"]]


class ScaleOp(OpDefine):
    kind = OpKind.SCALE

    def forward(self, inputs, attrs):
        return attrs["factor"] * inputs[0], {}

    def backward(self, grad, inputs, value, aux, attrs):
        return [attrs["factor"] * grad]


class ExpOp(OpDefine):
    kind = OpKind.EXP

    def forward(self, inputs, attrs):
        with np.errstate(over="ignore"):
            return np.exp(inputs[0]), {}

    def backward(self, grad, inputs, value, aux, attrs):
        return [grad * value]


class LogOp(OpDefine):
    kind = OpKind.LOG

    def forward(self, inputs, attrs):
        if np.any(inputs[0] <= 0.0):
            raise NumericalError("log: non-positive argument")
        return np.log(inputs[0]), {}

    def backward(self, grad, inputs, value, aux, attrs):
        return [grad / inputs[0]]


class SumOp(OpDefine):
    """Sum over all entries (axis None → 1×1), rows (axis 1) or columns (axis 0)."""

    kind = OpKind.SUM

    def forward(self, inputs, attrs):
        axis = attrs.get("axis")
        if axis is None:
            return np.array([[inputs[0].sum()]]), {}
        return inputs[0].sum(axis=axis, keepdims=True), {}

    def backward(self, grad, inputs, value, aux, attrs):
        return [np.broadcast_to(grad, inputs[0].shape).copy()]


class ConcatOp(OpDefine):
    """Stack parents along rows."""

    kind = OpKind.CONCAT

    def check(self, shapes, attrs):
        cols = {s[1] for s in shapes}
        if len(cols) != 1:
            raise ShapeError(f"concat: column counts differ {sorted(cols)}")

    def forward(self, inputs, attrs):
        return np.concatenate(inputs, axis=0), {}

    def backward(self, grad, inputs, value, aux, attrs):
        bounds = np.cumsum([x.shape[0] for x in inputs])[:-1]
        return list(np.split(grad, bounds, axis=0))


class CosineOp(OpDefine):
    """Pairwise cosine similarities between the rows of a and the rows of b."""

    kind = OpKind.COSINE

    def check(self, shapes, attrs):
        if shapes[0][1] != shapes[1][1]:
            raise ShapeError(f"cosine: column counts {shapes[0]} and {shapes[1]} differ")

    def forward(self, inputs, attrs):
        a, b = inputs
        na, nb = _row_norms(a, self.kind), _row_norms(b, self.kind)
        an, bn = a / na, b / nb
        return an @ bn.T, {"an": an, "bn": bn, "na": na, "nb": nb}

    def backward(self, grad, inputs, value, aux, attrs):
        an, bn = aux["an"], aux["bn"]
        dan = grad @ bn
        dbn = grad.T @ an
        da = (dan - an * np.sum(dan * an, axis=1, keepdims=True)) / aux["na"]
        db = (dbn - bn * np.sum(dbn * bn, axis=1, keepdims=True)) / aux["nb"]
        return [da, db]


class LogSumExpOp(OpDefine):
    """Row-wise log-sum-exp over the entries selected by a boolean mask; rows×1."""

    kind = OpKind.LOGSUMEXP

    def check(self, shapes, attrs):
        mask = attrs.get("mask")
        if mask is not None:
            if mask.shape != shapes[0]:
                raise ShapeError(f"logsumexp: mask {mask.shape} vs input {shapes[0]}")
            if np.any(~mask.any(axis=1)):
                raise ShapeError("logsumexp: empty denominator set in a row")

    def forward(self, inputs, attrs):
        x = inputs[0]
        mask = attrs.get("mask")
        if mask is None:
            mask = np.ones_like(x, dtype=bool)
        value = logsumexp(x, axis=1, keepdims=True, b=mask.astype(np.float64))
        with np.errstate(over="ignore"):
            softmax = np.where(mask, np.exp(x - value), 0.0)
        return value, {"softmax": softmax}

    def backward(self, grad, inputs, value, aux, attrs):
        return [grad * aux["softmax"]]


class OpRegistry:
    def __init__(self):
        self.__ops: dict[OpKind, OpDefine] = {}

    def register(self, op: OpDefine):
        self.__ops[op.kind] = op

    def add_ops(self, ops: list[OpDefine]):
        for op in ops:
            self.register(op)

    def has_op(self, kind: OpKind):
        return kind in self.__ops

    def list_ops(self):
        return list(self.__ops.keys())

    def get(self, kind: OpKind) -> OpDefine:
        return self.__ops[kind]


OPS = OpRegistry()
OPS.add_ops(
    [
        MatmulOp(),
        AddOp(),
        MulOp(),
        ReluOp(),
        BatchNormOp(),
        L2NormOp(),
        ScaleOp(),
        ExpOp(),
        LogOp(),
        SumOp(),
        ConcatOp(),
        CosineOp(),
        LogSumExpOp(),
    ]
)
