from dataclasses import dataclass, field
import numpy as np
from ..errors import ConfigError
from ..utils.seeds import Stream, stream_rng


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class Encoder:
    """MLP f: R^p → R^m with ReLU on hidden layers and a linear output layer.

    Layer i maps rows through `W{i}` (in×out) and the row bias `b{i}` (1×out).
    """

    sizes: list[int]
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    @property
    def num_layers(self) -> int:
        return len(self.sizes) - 1

    def param_names(self) -> list[str]:
        names = []
        for i in range(self.num_layers):
            names += [f"W{i}", f"b{i}"]
        return names

    def bindings(self, prefix: str = "f.") -> dict[str, np.ndarray]:
        return {prefix + k: self.params[k] for k in self.param_names()}

    def copy(self) -> "Encoder":
        return Encoder(list(self.sizes), {k: v.copy() for k, v in self.params.items()})


def init_encoder(sizes: list[int], seed: int) -> Encoder:
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ConfigError(f"encoder sizes must list at least 2 positive widths, got {sizes}")
    rng = stream_rng(seed, Stream.ENCODER_INIT)
    params = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        params[f"W{i}"] = glorot_uniform(rng, fan_in, fan_out)
        params[f"b{i}"] = np.zeros((1, fan_out))
    return Encoder(sizes, params)
