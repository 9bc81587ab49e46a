"""Synthetic shape images with exact boundary ground truth."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image, ImageDraw

from ..errors import ConfigurationError
from .dataset import ManifestRecord, Sample, write_manifest
from .raster import quantize, save_raster

logger = logging.getLogger(__name__)

MIN_SIZE = 32
NOISE_STD = 0.02
POLYGON_SIDES = (3, 4, 5, 6)

Regime = Literal["small", "large"]


@dataclass(frozen=True)
class ShapeSpec:
    """A filled ellipse (``sides == 0``) or regular polygon."""

    center: tuple[float, float]
    radius: float
    sides: int
    rotation: float
    aspect: float
    intensity: float
    regime: Regime

    def rasterize(self, size: int) -> np.ndarray:
        """Boolean (size, size) mask of the filled shape."""
        canvas = Image.new("L", (size, size), 0)
        draw = ImageDraw.Draw(canvas)
        cx, cy = self.center
        if self.sides == 0:
            rx, ry = self.radius, self.radius * self.aspect
            draw.ellipse([cx - rx, cy - ry, cx + rx, cy + ry], fill=255)
        else:
            draw.regular_polygon((cx, cy, self.radius), self.sides, rotation=self.rotation, fill=255)
        return np.asarray(canvas) > 0


@dataclass
class SynthSample(Sample):
    shapes: list[ShapeSpec] = field(default_factory=list)


def label_map(shapes: list[ShapeSpec], size: int) -> np.ndarray:
    """0 for background, k for pixels of shapes[k - 1]."""
    labels = np.zeros((size, size), dtype=np.int32)
    for k, shape in enumerate(shapes, start=1):
        labels[shape.rasterize(size)] = k
    return labels


def boundary_map(labels: np.ndarray) -> np.ndarray:
    """Pixels of shape k with a 4-neighbour whose label is below k."""
    padded = np.pad(labels, 1, mode="edge")
    center = padded[1:-1, 1:-1]
    lower = np.zeros(labels.shape, dtype=bool)
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        neighbour = padded[1 + dr : padded.shape[0] - 1 + dr, 1 + dc : padded.shape[1] - 1 + dc]
        lower |= neighbour < center
    return lower & (labels > 0)


def _radius_range(regime: Regime, size: int) -> tuple[float, float]:
    if regime == "large":
        return size / 5, size / 3.5
    return size / 16, size / 10


def _place(
    rng: np.random.Generator, regime: Regime, size: int, placed: list[ShapeSpec], attempts: int = 200
) -> tuple[tuple[float, float], float] | None:
    """A centre and radius clear of every placed shape, or None after ``attempts`` draws."""
    lo, hi = _radius_range(regime, size)
    for _ in range(attempts):
        radius = float(rng.uniform(lo, hi))
        margin = radius + 2
        center = (float(rng.uniform(margin, size - margin)), float(rng.uniform(margin, size - margin)))
        if all(np.hypot(center[0] - s.center[0], center[1] - s.center[1]) >= radius + s.radius + 3 for s in placed):
            return center, radius
    return None


def generate_shapes(rng: np.random.Generator, size: int, background: float) -> list[ShapeSpec]:
    """Place one or two large and two to four small shapes without overlap."""
    plan: list[Regime] = ["large"] * int(rng.integers(1, 3)) + ["small"] * int(rng.integers(2, 5))
    placed: list[ShapeSpec] = []
    for regime in plan:
        spot = _place(rng, regime, size, placed)
        if spot is None:
            logger.debug("No room for another %s shape", regime)
            continue
        center, radius = spot
        offset = float(rng.uniform(0.3, 0.5))
        intensity = background + offset if background < 0.5 else background - offset
        placed.append(
            ShapeSpec(
                center=center,
                radius=radius,
                sides=int(rng.choice((0, *POLYGON_SIDES))),
                rotation=float(rng.uniform(0, 360)),
                aspect=float(rng.uniform(0.6, 1.0)),
                intensity=float(np.clip(intensity, 0.05, 0.95)),
                regime=regime,
            )
        )
    return placed


def render(shapes: list[ShapeSpec], size: int, background: float, rng: np.random.Generator) -> np.ndarray:
    """(1, 3, size, size) float32 image: shaded background, shaded shapes, gaussian noise."""
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(angle) * xx + np.sin(angle) * yy
    gray = background + 0.1 * (ramp - 0.5)
    for shape in shapes:
        mask = shape.rasterize(size)
        tilt = rng.uniform(0, 2 * np.pi)
        shading = 0.05 * (np.cos(tilt) * xx + np.sin(tilt) * yy - 0.5)
        gray = np.where(mask, shape.intensity + shading, gray)
    tint = rng.uniform(0.9, 1.1, size=3)
    image = gray[None] * tint[:, None, None] + rng.normal(0, NOISE_STD, size=(3, size, size))
    return np.clip(image, 0, 1).astype(np.float32)[None]


def synth_shapes(seed: int, count: int, size: int = 64) -> list[SynthSample]:
    """``count`` deterministic shape images of ``size`` x ``size`` pixels.

    GT is the 1-pixel inner boundary of every shape; the ``small`` and ``large``
    regions hold the boundaries of each size regime separately.
    """
    if size < MIN_SIZE:
        raise ConfigurationError(f"Synthetic images need size >= {MIN_SIZE}, got {size}")
    if count < 0:
        raise ConfigurationError(f"count must be non-negative, got {count}")
    samples = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(count)):
        rng = np.random.default_rng(child)
        background = float(rng.uniform(0.1, 0.9))
        shapes = generate_shapes(rng, size, background)
        edges = boundary_map(label_map(shapes, size))
        regions = {}
        for regime in ("small", "large"):
            subset = [s for s in shapes if s.regime == regime]
            regions[regime] = boundary_map(label_map(subset, size)).astype(np.float32)
        samples.append(
            SynthSample(
                image=render(shapes, size, background, rng),
                gt=edges.astype(np.float32),
                id=f"synth_{i:04d}",
                regions=regions,
                shapes=shapes,
            )
        )
    logger.debug("Generated %d synthetic samples of size %d (seed %d)", count, size, seed)
    return samples


def write_synth_dataset(out_dir: Path, samples: list[Sample]) -> dict[str, Path]:
    """Write rasters and the full, small-only and large-only manifests; returns the manifest paths."""
    out_dir = Path(out_dir)
    records: dict[str, list[ManifestRecord]] = {"": [], "_small": [], "_large": []}
    for sample in samples:
        image_path = out_dir / "images" / f"{sample.id}.png"
        save_raster(image_path, quantize(sample.image[0].transpose(1, 2, 0)))
        maps = {"": sample.gt, **{f"_{name}": sample.regions[name] for name in ("small", "large") if name in sample.regions}}
        for suffix, edge_map in maps.items():
            gt_path = out_dir / f"gt{suffix}" / f"{sample.id}.png"
            save_raster(gt_path, quantize(edge_map))
            records[suffix].append(ManifestRecord(image=image_path, annotations=(gt_path,), id=sample.id))

    manifests = {}
    for suffix, rows in records.items():
        if rows or suffix == "":
            path = out_dir / f"manifest{suffix}.tsv"
            out_dir.mkdir(parents=True, exist_ok=True)
            write_manifest(path, rows)
            manifests[suffix.lstrip("_") or "all"] = path
    logger.info("Wrote %d synthetic samples to %s", len(samples), out_dir)
    return manifests
