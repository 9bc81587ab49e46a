"""Raster and float-map I/O plus align-corners resampling."""

from collections.abc import Mapping
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from ..errors import CheckpointIntegrityError, ConfigurationError, IngestionError
from ..tensor.checkpoint import read_container, write_container

RASTER_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")


def load_raster(path: Path) -> np.ndarray:
    """Read an 8-bit grayscale (h, w) or RGB (h, w, 3) raster."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Raster not found: {path}")
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB" if img.mode in ("RGBA", "P", "CMYK", "YCbCr") else "L")
            return np.asarray(img, dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise IngestionError(f"Not a readable raster: {path}") from e


def save_raster(path: Path, array: np.ndarray) -> None:
    """Write a uint8 grayscale or RGB array; the format follows the file suffix."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8)).save(path)


def quantize(prob: np.ndarray) -> np.ndarray:
    """Probability map to 8-bit: round(255 * p)."""
    return np.rint(np.clip(prob.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_probability_raster(path: Path, prob: np.ndarray) -> None:
    save_raster(path, quantize(prob))


def save_float_map(path: Path, maps: Mapping[str, np.ndarray]) -> None:
    """Dump named probability maps losslessly in the checkpoint container format."""
    write_container(path, {name: np.asarray(m, dtype=np.float32) for name, m in maps.items()}, {"kind": "prediction"})


def load_float_map(path: Path) -> dict[str, np.ndarray]:
    container = read_container(path)
    if container.meta.get("kind") != "prediction":
        raise CheckpointIntegrityError(f"{path} is not a prediction dump (kind={container.meta.get('kind')!r})")
    return container.records


def _align_corners_grid(size_in: int, size_out: int) -> np.ndarray:
    if size_out == 1 or size_in == 1:
        return np.zeros(size_out, dtype=np.float64)
    return np.linspace(0.0, size_in - 1, size_out)


def resize_map(array: np.ndarray, height: int, width: int, order: int = 1) -> np.ndarray:
    """Resample the last two axes to (height, width) with align-corners coordinates.

    ``order=1`` is bilinear (images, probability maps), ``order=0`` nearest-neighbour (GT).
    """
    if height < 1 or width < 1:
        raise ConfigurationError(f"Cannot resize to {height}x{width}")
    h, w = array.shape[-2:]
    if (h, w) == (height, width):
        return array.copy()
    rows = _align_corners_grid(h, height)
    cols = _align_corners_grid(w, width)
    grid = np.meshgrid(rows, cols, indexing="ij")

    flat = array.reshape(-1, h, w)
    out = np.empty((flat.shape[0], height, width), dtype=array.dtype)
    for i, plane in enumerate(flat):
        out[i] = ndimage.map_coordinates(plane, grid, order=order, mode="nearest")
    return out.reshape(*array.shape[:-2], height, width)
