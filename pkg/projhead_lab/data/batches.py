from dataclasses import dataclass
from typing import Iterator
import numpy as np
from .augment import AugConfig, make_view_pair
from .datasets import LabeledDataset
from ..errors import ConfigError
from ..utils.seeds import Stream, stream_rng


@dataclass
class ViewBatch:
    view1: np.ndarray
    view2: np.ndarray
    indices: np.ndarray
    rng_state: tuple[int, int]

    def __len__(self):
        return self.indices.shape[0]


def example_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Per-example generator, so augmentation order or parallelism never changes draws."""
    return stream_rng(seed, Stream.VIEWS, epoch, index)


def make_views(
    dataset: LabeledDataset,
    indices: np.ndarray,
    aug: AugConfig,
    seed: int,
    epoch: int,
) -> ViewBatch:
    indices = np.asarray(indices, dtype=np.int64)
    pairs = [
        make_view_pair(dataset.examples[i], aug, example_rng(seed, epoch, i), dataset.mixing)
        for i in indices
    ]
    view1 = np.stack([p[0] for p in pairs])
    view2 = np.stack([p[1] for p in pairs])
    return ViewBatch(view1=view1, view2=view2, indices=indices, rng_state=(seed, epoch))


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return stream_rng(seed, Stream.EPOCH_ORDER, epoch).permutation(n)


def minibatches(
    dataset: LabeledDataset,
    batch_size: int,
    seed: int,
    aug: AugConfig,
    epoch: int = 0,
) -> Iterator[ViewBatch]:
    """One epoch of augmented view batches; a final batch smaller than 2 is dropped."""
    if batch_size < 2:
        raise ConfigError(
            f"batch size {batch_size} < 2: InfoNCE needs at least one negative per anchor"
        )
    if batch_size > len(dataset):
        raise ConfigError(f"batch size {batch_size} exceeds dataset size {len(dataset)}")

    def _stream():
        order = epoch_order(len(dataset), seed, epoch)
        for start in range(0, len(order), batch_size):
            chunk = order[start : start + batch_size]
            if chunk.shape[0] < 2:
                break
            yield make_views(dataset, chunk, aug, seed, epoch)

    return _stream()
