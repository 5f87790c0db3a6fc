"""Two-view augmentation chains.

Image chain (fixed order): crop → horizontal flip → color jitter → grayscale,
clamping to [0, 1] after every transform. Images are 3×32×32 flattened
channel-major (all red, then green, then blue).

Synthetic chain: redraw the style block through the known mixing matrix
and/or add isotropic Gaussian noise.
"""

import math
from typing import Literal
import numpy as np
from matplotlib.colors import hsv_to_rgb, rgb_to_hsv
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import map_coordinates
from .datasets import SynthMixing
from ..constants import CIFAR_IMAGE_SIDE, CIFAR_PIXELS
from ..errors import ShapeError

LUMA = np.array([0.299, 0.587, 0.114])


class AugConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["image", "synthetic"] = "synthetic"

    crop: bool = True
    crop_mode: Literal["resized", "pad"] = "resized"
    crop_scale: tuple[float, float] = (0.2, 1.0)
    crop_ratio: tuple[float, float] = (0.75, 4.0 / 3.0)
    crop_padding: int = Field(4, ge=0)
    flip_prob: float = Field(0.5, ge=0.0, le=1.0)
    jitter_prob: float = Field(0.8, ge=0.0, le=1.0)
    brightness: float = Field(0.4, ge=0.0)
    contrast: float = Field(0.4, ge=0.0)
    saturation: float = Field(0.4, ge=0.0)
    hue: float = Field(0.1, ge=0.0, le=0.5)
    grayscale_prob: float = Field(0.2, ge=0.0, le=1.0)

    style_resample: bool = True
    noise_sigma: float = Field(0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_ranges(self):
        lo, hi = self.crop_scale
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"crop_scale must satisfy 0 < lo <= hi <= 1, got {self.crop_scale}")
        if not (0.0 < self.crop_ratio[0] <= self.crop_ratio[1]):
            raise ValueError(f"crop_ratio must be positive and ordered, got {self.crop_ratio}")
        return self

    @classmethod
    def disabled(cls, kind: Literal["image", "synthetic"] = "synthetic") -> "AugConfig":
        return cls(
            kind=kind,
            crop=False,
            flip_prob=0.0,
            jitter_prob=0.0,
            grayscale_prob=0.0,
            style_resample=False,
            noise_sigma=0.0,
        )


def _resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    _, h, w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return np.stack(
        [map_coordinates(ch, [grid_y, grid_x], order=1, mode="nearest") for ch in img]
    )


def random_resized_crop(img: np.ndarray, config: AugConfig, rng: np.random.Generator) -> np.ndarray:
    _, h, w = img.shape
    area = h * w
    log_lo, log_hi = math.log(config.crop_ratio[0]), math.log(config.crop_ratio[1])
    for _ in range(10):
        target = area * rng.uniform(*config.crop_scale)
        aspect = math.exp(rng.uniform(log_lo, log_hi))
        cw = int(round(math.sqrt(target * aspect)))
        ch = int(round(math.sqrt(target / aspect)))
        if 0 < cw <= w and 0 < ch <= h:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            crop = img[:, top : top + ch, left : left + cw]
            return _resize_bilinear(crop, h, w)
    return img.copy()


def padded_crop(img: np.ndarray, config: AugConfig, rng: np.random.Generator) -> np.ndarray:
    _, h, w = img.shape
    pad = config.crop_padding
    padded = np.pad(img, ((0, 0), (pad, pad), (pad, pad)))
    top = int(rng.integers(0, 2 * pad + 1))
    left = int(rng.integers(0, 2 * pad + 1))
    return padded[:, top : top + h, left : left + w]


def to_grayscale(img: np.ndarray) -> np.ndarray:
    luma = np.tensordot(LUMA, img, axes=1)
    return np.repeat(luma[None], 3, axis=0)


def color_jitter(img: np.ndarray, config: AugConfig, rng: np.random.Generator) -> np.ndarray:
    if config.brightness > 0:
        factor = rng.uniform(max(0.0, 1 - config.brightness), 1 + config.brightness)
        img = np.clip(img * factor, 0.0, 1.0)
    if config.contrast > 0:
        factor = rng.uniform(max(0.0, 1 - config.contrast), 1 + config.contrast)
        mean = np.tensordot(LUMA, img, axes=1).mean()
        img = np.clip((img - mean) * factor + mean, 0.0, 1.0)
    if config.saturation > 0:
        factor = rng.uniform(max(0.0, 1 - config.saturation), 1 + config.saturation)
        gray = to_grayscale(img)
        img = np.clip((img - gray) * factor + gray, 0.0, 1.0)
    if config.hue > 0:
        shift = rng.uniform(-config.hue, config.hue)
        hsv = rgb_to_hsv(np.moveaxis(img, 0, -1))
        hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
        img = np.clip(np.moveaxis(hsv_to_rgb(hsv), -1, 0), 0.0, 1.0)
    return img


def augment_image(example: np.ndarray, config: AugConfig, rng: np.random.Generator) -> np.ndarray:
    img = example.reshape(3, CIFAR_IMAGE_SIDE, CIFAR_IMAGE_SIDE)
    if config.crop:
        if config.crop_mode == "resized":
            img = random_resized_crop(img, config, rng)
        else:
            img = padded_crop(img, config, rng)
        img = np.clip(img, 0.0, 1.0)
    if rng.random() < config.flip_prob:
        img = img[:, :, ::-1]
    if rng.random() < config.jitter_prob:
        img = color_jitter(img, config, rng)
    if rng.random() < config.grayscale_prob:
        img = np.clip(to_grayscale(img), 0.0, 1.0)
    return np.ascontiguousarray(img).reshape(-1)


def augment_synthetic(
    example: np.ndarray,
    config: AugConfig,
    rng: np.random.Generator,
    mixing: SynthMixing,
) -> np.ndarray:
    view = example.copy()
    if config.style_resample and mixing.matrix.shape[0] > mixing.content_dim:
        u = mixing.unmix(view)
        style_dim = u.shape[0] - mixing.content_dim
        u[mixing.content_dim :] = mixing.style_scale * rng.standard_normal(style_dim)
        view = mixing.mix(u)
    if config.noise_sigma > 0:
        view = view + config.noise_sigma * rng.standard_normal(view.shape[0])
    return view


def make_view_pair(
    example: np.ndarray,
    config: AugConfig,
    rng: np.random.Generator,
    mixing: SynthMixing | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    example = np.asarray(example, dtype=np.float64).reshape(-1)
    if config.kind == "image":
        if example.shape[0] != CIFAR_PIXELS:
            raise ShapeError(
                f"image augmentation expects {CIFAR_PIXELS} values, got {example.shape[0]}"
            )
        return augment_image(example, config, rng), augment_image(example, config, rng)
    if mixing is None:
        raise ShapeError("synthetic augmentation needs the dataset's mixing matrix")
    if example.shape[0] != mixing.matrix.shape[0]:
        raise ShapeError(
            f"synthetic augmentation expects {mixing.matrix.shape[0]} values, got {example.shape[0]}"
        )
    return (
        augment_synthetic(example, config, rng, mixing),
        augment_synthetic(example, config, rng, mixing),
    )
