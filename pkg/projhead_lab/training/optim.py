from dataclasses import dataclass, field, replace
from typing import Literal
import numpy as np
from ..constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from ..errors import NumericalError, ShapeError


@dataclass
class OptimizerState:
    """Optimizer hyperparameters plus per-parameter moment buffers.

    Adam keeps first and second moments in `m` and `v`; SGD-momentum keeps its
    velocity in `m`. Buffers are created lazily on the first step.
    """

    kind: Literal["adam", "sgd"] = "adam"
    lr: float = 1e-3
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"optimizer kind must be adam or sgd, got {self.kind!r}")

    def fresh(self) -> "OptimizerState":
        """Same hyperparameters, empty buffers."""
        return replace(self, m={}, v={}, step=0)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "momentum": self.momentum,
            "step": self.step,
        }


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    """One update of every parameter that has a gradient; others pass through unchanged.

    Weight decay is classic L2: grad += wd·param before the moment update.
    """
    for name, g in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {params[name].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"{name}: non-finite gradient")

    t = state.step + 1
    new_m, new_v = dict(state.m), dict(state.v)
    new_params = dict(params)
    for name, g in grads.items():
        p = params[name]
        if state.weight_decay:
            g = g + state.weight_decay * p
        if state.kind == "adam":
            m = state.beta1 * state.m.get(name, np.zeros_like(p)) + (1 - state.beta1) * g
            v = state.beta2 * state.v.get(name, np.zeros_like(p)) + (1 - state.beta2) * g * g
            m_hat = m / (1 - state.beta1**t)
            v_hat = v / (1 - state.beta2**t)
            new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
            new_m[name], new_v[name] = m, v
        else:
            velocity = state.momentum * state.m.get(name, np.zeros_like(p)) + g
            new_params[name] = p - state.lr * velocity
            new_m[name] = velocity
    return new_params, replace(state, m=new_m, v=new_v, step=t)
