from .tensor import Tensor, as_tensor
from .ops import OpKind, OPS
from .graph import ExprGraph, ExprNode, evaluate, gradient, gradient_by_name
from .check import finite_difference_check
from .io import read_tensor, write_tensor, tensor_from_bytes, tensor_to_bytes
