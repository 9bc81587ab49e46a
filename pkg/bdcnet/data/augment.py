"""Geometric augmentation applied identically to an image and its ground truth."""

import logging

import numpy as np
from scipy import ndimage

from ..config.models import AugmentConfig
from ..errors import ConfigurationError
from .dataset import Sample
from .raster import resize_map

logger = logging.getLogger(__name__)


def _map_all(sample: Sample, image_fn, gt_fn) -> Sample:
    return Sample(
        image=np.ascontiguousarray(image_fn(sample.image)),
        gt=np.ascontiguousarray(gt_fn(sample.gt)),
        id=sample.id,
        regions={name: np.ascontiguousarray(gt_fn(r)) for name, r in sample.regions.items()},
    )


def hflip(sample: Sample) -> Sample:
    def flip(a):
        return a[..., ::-1]

    return _map_all(sample, flip, flip)


def rotate(sample: Sample, degrees: float) -> Sample:
    """Counter-clockwise rotation; multiples of 90 are exact, other angles keep the frame size."""
    if float(degrees) % 90 == 0:
        k = int(round(degrees / 90)) % 4

        def quarter(a):
            return np.rot90(a, k, axes=(-2, -1))

        return _map_all(sample, quarter, quarter)

    def image_fn(a):
        return np.clip(ndimage.rotate(a, degrees, axes=(-1, -2), reshape=False, order=1, mode="reflect"), 0, 1)

    def gt_fn(a):
        return ndimage.rotate(a, degrees, axes=(-1, -2), reshape=False, order=0, mode="constant", cval=0.0)

    return _map_all(sample, image_fn, gt_fn)


def rescale(sample: Sample, factor: float) -> Sample:
    """Bilinear for the image, nearest-neighbour for the GT so edges stay thin."""
    if factor <= 0:
        raise ConfigurationError(f"Scale factor must be positive, got {factor}")
    if factor == 1:
        return _map_all(sample, np.copy, np.copy)
    h, w = sample.size
    nh, nw = max(1, round(h * factor)), max(1, round(w * factor))
    return _map_all(
        sample,
        lambda a: resize_map(a, nh, nw, order=1),
        lambda a: resize_map(a, nh, nw, order=0),
    )


def crop(sample: Sample, height: int, width: int, top: int = 0, left: int = 0) -> Sample:
    h, w = sample.size
    if height > h or width > w:
        raise ConfigurationError(f"Crop {height}x{width} is larger than the {h}x{w} image of '{sample.id}'")
    if not (0 <= top <= h - height and 0 <= left <= w - width):
        raise ConfigurationError(f"Crop offset ({top}, {left}) falls outside the image of '{sample.id}'")

    def window(a):
        return a[..., top : top + height, left : left + width]

    return _map_all(sample, window, window)


def augment(sample: Sample, config: AugmentConfig, rng: np.random.Generator | int) -> Sample:
    """Random flip, rotation, rescale and crop drawn from ``config``; deterministic for a given rng state."""
    rng = np.random.default_rng(rng) if isinstance(rng, int) else rng
    out = sample
    if config.flip and rng.random() < 0.5:
        out = hflip(out)
    degrees = float(config.rotations[rng.integers(len(config.rotations))])
    if degrees:
        out = rotate(out, degrees)
    factor = float(config.scales[rng.integers(len(config.scales))])
    if factor != 1.0:
        out = rescale(out, factor)
    if config.crop is not None:
        ch, cw = config.crop
        h, w = out.size
        if ch > h or cw > w:
            raise ConfigurationError(f"Crop {ch}x{cw} is larger than the {h}x{w} augmented image of '{sample.id}'")
        out = crop(out, ch, cw, int(rng.integers(h - ch + 1)), int(rng.integers(w - cw + 1)))
    return out
