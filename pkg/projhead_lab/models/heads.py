from dataclasses import dataclass, field
from projhead_lab.utils.compat import StrEnum
from hashlib import sha256
import numpy as np
from .encoder import glorot_uniform
from ..constants import HEAD_OUTPUT_BIAS
from ..errors import ConfigError, ShapeError
from ..utils.seeds import Stream, stream_rng


class HeadKind(StrEnum):
    NONE = "none"
    LINEAR = "linear"
    NONLINEAR = "nonlinear"
    FIXED_RANDOM = "fixed_random"
    FIXED_PRETRAINED = "fixed_pretrained"
    DIAGONAL_LOW_RANK = "diagonal_low_rank"
    PCA_LINEAR = "pca_linear"


class HeadStructure(StrEnum):
    IDENTITY = "identity"  # z = h
    PROJECTION = "projection"  # z = h W
    AFFINE = "affine"  # z = h W + b
    MLP = "mlp"  # z = relu(bn(h W1 + b1)) W2 + b2


STRUCTURE_PARAMS = {
    HeadStructure.IDENTITY: [],
    HeadStructure.PROJECTION: ["W"],
    HeadStructure.AFFINE: ["W", "b"],
    HeadStructure.MLP: ["W1", "b1", "gamma", "beta", "W2", "b2"],
}

FROZEN_KINDS = {
    HeadKind.NONE,
    HeadKind.FIXED_RANDOM,
    HeadKind.FIXED_PRETRAINED,
    HeadKind.DIAGONAL_LOW_RANK,
    HeadKind.PCA_LINEAR,
}


@dataclass
class Head:
    """Projection head g: R^m → R^d.

    Weights are stored in row form (in×out), so the linear map A ∈ R^{d×m}
    acting on a column feature h is `W.T`.
    """

    kind: HeadKind
    m: int
    d: int
    structure: HeadStructure
    hidden: int | None = None
    params: dict[str, np.ndarray] = field(default_factory=dict)
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    trainable: bool = True

    def param_names(self) -> list[str]:
        return list(STRUCTURE_PARAMS[self.structure])

    def bindings(self, prefix: str = "g.") -> dict[str, np.ndarray]:
        return {prefix + k: self.params[k] for k in self.param_names()}

    @property
    def num_parameters(self) -> int:
        return int(sum(self.params[k].size for k in self.param_names()))

    def linear_map(self) -> tuple[np.ndarray, bool] | None:
        """The d×m (or hidden×m) matrix the head applies to h, and whether it is approximate.

        Bias terms are ignored. For MLP heads the first layer is the only map
        acting on h; its null space is ignored by the whole head.
        """
        if self.structure in (HeadStructure.PROJECTION, HeadStructure.AFFINE):
            return self.params["W"].T.copy(), False
        if self.structure == HeadStructure.MLP:
            return self.params["W1"].T.copy(), True
        return None

    def copy(self) -> "Head":
        return Head(
            kind=self.kind,
            m=self.m,
            d=self.d,
            structure=self.structure,
            hidden=self.hidden,
            params={k: v.copy() for k, v in self.params.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
            trainable=self.trainable,
        )


def selection_matrix(m: int, d: int) -> np.ndarray:
    """m×d matrix picking the first d coordinates."""
    return np.eye(m, d)


def init_head(
    kind: HeadKind | str,
    m: int,
    d: int | None = None,
    hidden: int | None = None,
    seed: int = 0,
    pretrained: Head | None = None,
) -> Head:
    kind = HeadKind(kind)
    if kind == HeadKind.NONE:
        return Head(kind, m, m, HeadStructure.IDENTITY, trainable=False)
    if d is None:
        raise ConfigError(f"head kind {kind} needs an output dimension d")
    if d > m:
        raise ConfigError(f"head output dimension d={d} exceeds feature dimension m={m}")
    if d < 1:
        raise ConfigError(f"head output dimension must be positive, got {d}")

    rng = stream_rng(seed, Stream.HEAD_INIT)
    if kind in (HeadKind.LINEAR, HeadKind.FIXED_RANDOM):
        params = {"W": glorot_uniform(rng, m, d), "b": np.zeros((1, d))}
        return Head(kind, m, d, HeadStructure.AFFINE, params=params,
                    trainable=kind == HeadKind.LINEAR)
    if kind == HeadKind.NONLINEAR:
        if hidden is None:
            raise ConfigError("nonlinear head needs a hidden width")
        params = {
            "W1": glorot_uniform(rng, m, hidden),
            "b1": np.zeros((1, hidden)),
            "gamma": np.ones((1, hidden)),
            "beta": np.zeros((1, hidden)),
            "W2": glorot_uniform(rng, hidden, d),
            "b2": np.full((1, d), HEAD_OUTPUT_BIAS),
        }
        buffers = {"running_mean": np.zeros((1, hidden)), "running_var": np.ones((1, hidden))}
        return Head(kind, m, d, HeadStructure.MLP, hidden=hidden, params=params,
                    buffers=buffers, trainable=True)
    if kind in (HeadKind.DIAGONAL_LOW_RANK, HeadKind.PCA_LINEAR):
        # PCA heads start as a coordinate selection until the first refresh
        return Head(kind, m, d, HeadStructure.PROJECTION,
                    params={"W": selection_matrix(m, d)}, trainable=False)
    if kind == HeadKind.FIXED_PRETRAINED:
        if pretrained is None:
            raise ConfigError("fixed_pretrained head needs a pretrained head to freeze")
        if pretrained.m != m or pretrained.d != d:
            raise ConfigError(
                f"pretrained head maps {pretrained.m}→{pretrained.d}, expected {m}→{d}"
            )
        return freeze_head(pretrained)
    raise ConfigError(f"unknown head kind {kind}")


def freeze_head(head: Head) -> Head:
    frozen = head.copy()
    frozen.kind = HeadKind.FIXED_PRETRAINED
    frozen.trainable = False
    return frozen


def pca_head(components: np.ndarray) -> Head:
    """PCALinear head whose rows (of A) are the given k×m orthonormal components."""
    components = np.asarray(components, dtype=np.float64)
    k, m = components.shape
    return Head(HeadKind.PCA_LINEAR, m, k, HeadStructure.PROJECTION,
                params={"W": components.T.copy()}, trainable=False)


def head_parameters(head: Head) -> np.ndarray:
    names = head.param_names()
    if not names:
        return np.zeros(0)
    return np.concatenate([head.params[k].ravel() for k in names])


def unflatten(head: Head, flat: np.ndarray) -> dict[str, np.ndarray]:
    flat = np.asarray(flat, dtype=np.float64).ravel()
    if flat.shape[0] != head.num_parameters:
        raise ShapeError(
            f"head {head.kind} has {head.num_parameters} parameters, got {flat.shape[0]}"
        )
    out, offset = {}, 0
    for k in head.param_names():
        shape = head.params[k].shape
        size = int(np.prod(shape))
        out[k] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    return out


def head_load(head: Head, flat: np.ndarray) -> None:
    head.params.update(unflatten(head, flat))


def parameter_checksum(params: dict[str, np.ndarray]) -> str:
    digest = sha256()
    for k in sorted(params):
        digest.update(k.encode())
        digest.update(np.ascontiguousarray(params[k], dtype="<f8").tobytes())
    return digest.hexdigest()
