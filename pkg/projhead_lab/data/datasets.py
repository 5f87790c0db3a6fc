import os
from dataclasses import dataclass, field
from typing import Literal
import numpy as np
from ..autodiff.io import read_tensor, write_tensor
from ..constants import (
    CIFAR10_CLASSES,
    CIFAR10_RECORD_BYTES,
    CIFAR100_RECORD_BYTES,
    CIFAR_PIXELS,
)
from ..errors import FormatError, ShapeError
from ..utils.seeds import Stream, stream_rng


@dataclass
class SynthMixing:
    """Orthogonal map from (content, style) coordinates to observed inputs."""

    matrix: np.ndarray
    content_dim: int
    style_scale: float

    def unmix(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.matrix

    def mix(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u) @ self.matrix.T


@dataclass
class LabeledDataset:
    examples: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: Literal["cifar10", "cifar100", "synthetic", "exported"]
    mixing: SynthMixing | None = field(default=None, repr=False)

    def __post_init__(self):
        self.examples = np.asarray(self.examples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.examples.ndim != 2 or self.examples.shape[0] == 0:
            raise ShapeError("dataset needs a non-empty N×p example matrix")
        if self.labels.shape != (self.examples.shape[0],):
            raise ShapeError(
                f"{self.labels.shape[0]} labels for {self.examples.shape[0]} examples"
            )
        if np.any(self.labels < 0) or np.any(self.labels >= self.num_classes):
            raise FormatError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(self.examples)):
            raise FormatError("dataset contains non-finite features")

    def __len__(self):
        return self.examples.shape[0]

    @property
    def dim(self) -> int:
        return self.examples.shape[1]

    @property
    def kind(self) -> str:
        return "synthetic" if self.mixing is not None else "image"

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            examples=self.examples[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            provenance=self.provenance,
            mixing=self.mixing,
        )


def _read_records(paths: list[str], record_bytes: int) -> np.ndarray:
    if not paths:
        raise FormatError("no dataset files given")
    chunks = []
    for path in paths:
        raw = np.fromfile(path, dtype=np.uint8)
        if raw.size % record_bytes != 0:
            raise FormatError(
                f"{path}: malformed record stream, {raw.size} bytes is not a multiple of {record_bytes}"
            )
        chunks.append(raw.reshape(-1, record_bytes))
    return np.concatenate(chunks, axis=0)


def load_cifar10_binary(paths: list[str]) -> LabeledDataset:
    records = _read_records(paths, CIFAR10_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if np.any(labels >= CIFAR10_CLASSES):
        bad = int(labels[labels >= CIFAR10_CLASSES][0])
        raise FormatError(f"label byte {bad} is not a CIFAR-10 class")
    pixels = records[:, 1:].astype(np.float64) / 255.0
    return LabeledDataset(pixels, labels, CIFAR10_CLASSES, "cifar10")


def load_cifar100_binary(
    paths: list[str], label: Literal["fine", "coarse"] = "fine"
) -> LabeledDataset:
    """CIFAR-100 records: coarse label byte, fine label byte, 3072 pixel bytes."""
    records = _read_records(paths, CIFAR100_RECORD_BYTES)
    num_classes = 100 if label == "fine" else 20
    labels = records[:, 1 if label == "fine" else 0].astype(np.int64)
    if np.any(labels >= num_classes):
        raise FormatError(f"label byte out of range for {num_classes} {label} classes")
    pixels = records[:, 2:].astype(np.float64) / 255.0
    assert pixels.shape[1] == CIFAR_PIXELS
    return LabeledDataset(pixels, labels, num_classes, "cifar100")


def train_test_split(
    dataset: LabeledDataset, test_fraction: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = max(1, int(round(n * test_fraction)))
    if n_test >= n:
        raise ShapeError(f"cannot split {n} examples with test fraction {test_fraction}")
    order = stream_rng(seed, Stream.SPLIT).permutation(n)
    return dataset.subset(np.sort(order[n_test:])), dataset.subset(np.sort(order[:n_test]))


def export_dataset(dataset: LabeledDataset, path: str):
    """Write examples as a PHT1 tensor and labels to `<path>.labels`."""
    write_tensor(path, dataset.examples)
    with open(path + ".labels", "w") as f:
        f.write("\n".join(str(int(v)) for v in dataset.labels) + "\n")


def load_exported(path: str, num_classes: int | None = None) -> LabeledDataset:
    examples = read_tensor(path)
    labels_path = path + ".labels"
    if not os.path.exists(labels_path):
        raise FormatError(f"missing labels sidecar {labels_path}")
    with open(labels_path) as f:
        labels = np.array([int(line) for line in f if line.strip()], dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return LabeledDataset(examples, labels, num_classes, "exported")
