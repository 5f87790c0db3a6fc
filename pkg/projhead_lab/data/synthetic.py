"""Style/content toy data.

Each example is a class-dependent content vector plus a class-independent
style vector, mixed into the observed coordinates by a seeded orthogonal
matrix. Augmentations that redraw the style block change style but not
content, so a representation that generalizes must keep the content
coordinates.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import pdist
from .datasets import LabeledDataset, SynthMixing
from ..errors import ConfigError
from ..utils.seeds import Stream, stream_rng


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    content_dim: int = Field(8, ge=1)
    style_dim: int = Field(24, ge=0)
    num_classes: int = 10
    samples_per_class: int = 200
    content_separation: float = Field(4.0, gt=0.0)
    content_noise: float = Field(0.5, ge=0.0)
    style_scale: float = Field(1.0, ge=0.0)
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.content_dim + self.style_dim


def class_centers(config: SynthConfig) -> np.ndarray:
    """Seeded class centers rescaled so the closest pair is exactly content_separation apart."""
    rng = stream_rng(config.seed, Stream.SYNTH_CENTERS)
    centers = rng.standard_normal((config.num_classes, config.content_dim))
    closest = pdist(centers).min()
    if closest == 0.0:
        raise ConfigError("degenerate class centers; choose another seed")
    return centers * (config.content_separation / closest)


def mixing_matrix(config: SynthConfig) -> np.ndarray:
    rng = stream_rng(config.seed, Stream.SYNTH_MIXING)
    q, r = np.linalg.qr(rng.standard_normal((config.dim, config.dim)))
    # fix column signs so the factorization is unique
    return q * np.sign(np.diag(r))


def generate_synthetic(config: SynthConfig) -> LabeledDataset:
    if config.num_classes < 2:
        raise ConfigError(f"synthetic data needs at least 2 classes, got {config.num_classes}")
    if config.samples_per_class < 1:
        raise ConfigError(
            f"samples_per_class must be at least 1, got {config.samples_per_class}"
        )
    centers = class_centers(config)
    q = mixing_matrix(config)
    rng = stream_rng(config.seed, Stream.SYNTH_SAMPLES)

    labels = np.repeat(np.arange(config.num_classes), config.samples_per_class)
    n = labels.shape[0]
    content = centers[labels] + config.content_noise * rng.standard_normal(
        (n, config.content_dim)
    )
    style = config.style_scale * rng.standard_normal((n, config.style_dim))
    mixing = SynthMixing(matrix=q, content_dim=config.content_dim, style_scale=config.style_scale)
    examples = mixing.mix(np.concatenate([content, style], axis=1))
    return LabeledDataset(examples, labels, config.num_classes, "synthetic", mixing=mixing)
