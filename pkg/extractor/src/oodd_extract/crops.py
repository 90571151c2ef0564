"""Seeded multi-view cropping.

View 0 is always the untouched image (resized only if its size differs
from the target), so a single-view extraction degenerates to plain
feature extraction.  Views 1..M-1 are random resized crops whose
geometry comes from a numpy Generator, which keeps runs reproducible
without depending on torch RNG stream details.
"""

import math
from dataclasses import dataclass

import torch
from torchvision.transforms import functional as tvf

from .errors import FormatError


@dataclass(frozen=True)
class CropGeometry:
    """Random-resized-crop parameters; paper leaves these to configuration."""

    scale_min: float = 0.3
    scale_max: float = 1.0
    ratio_min: float = 3.0 / 4.0
    ratio_max: float = 4.0 / 3.0
    size: int = 32

    def __post_init__(self):
        if not (0.0 < self.scale_min <= self.scale_max <= 1.0):
            raise FormatError("crop scale range must satisfy 0 < min <= max <= 1")
        if not (0.0 < self.ratio_min <= self.ratio_max):
            raise FormatError("crop ratio range must be positive and ordered")
        if self.size < 1:
            raise FormatError("crop size must be >= 1")


def sample_crop_box(rng, height, width, geometry):
    """One (top, left, h, w) box, standard random-resized-crop sampling.

    Ten rejection attempts over area scale and log-uniform aspect ratio,
    then a ratio-clamped center box as the fallback.
    """
    area = float(height * width)
    log_ratio = (math.log(geometry.ratio_min), math.log(geometry.ratio_max))
    for _ in range(10):
        target = area * rng.uniform(geometry.scale_min, geometry.scale_max)
        ratio = math.exp(rng.uniform(*log_ratio))
        w = round(math.sqrt(target * ratio))
        h = round(math.sqrt(target / ratio))
        if 0 < w <= width and 0 < h <= height:
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            return top, left, h, w
    # center fallback, clamped to the nearest representable ratio
    in_ratio = width / height
    if in_ratio < geometry.ratio_min:
        w = width
        h = round(w / geometry.ratio_min)
    elif in_ratio > geometry.ratio_max:
        h = height
        w = round(h * geometry.ratio_max)
    else:
        w, h = width, height
    return (height - h) // 2, (width - w) // 2, h, w


def crop_views(image: torch.Tensor, n_views: int, rng, geometry: CropGeometry) -> torch.Tensor:
    """(n_views, C, size, size) stack: identity view first, crops after."""
    if image.ndim != 3:
        raise FormatError(f"expected CHW image tensor, got shape {tuple(image.shape)}")
    if n_views < 1:
        raise FormatError(f"need at least one view, got {n_views}")
    side = geometry.size
    if image.shape[1] == side and image.shape[2] == side:
        plain = image
    else:
        plain = tvf.resize(image, [side, side], antialias=True)
    views = [plain]
    height, width = int(image.shape[1]), int(image.shape[2])
    for _ in range(n_views - 1):
        top, left, h, w = sample_crop_box(rng, height, width, geometry)
        views.append(tvf.resized_crop(image, top, left, h, w, [side, side], antialias=True))
    return torch.stack(views)
