"""Image and annotation ingestion, augmentation and synthetic data."""

from .augment import augment, crop, hflip, rescale, rotate
from .dataset import EdgeDataset, ManifestRecord, Sample, consensus, load_sample, parse_manifest, write_manifest
from .raster import (
    load_float_map,
    load_raster,
    quantize,
    resize_map,
    save_float_map,
    save_probability_raster,
    save_raster,
)
from .synth import ShapeSpec, SynthSample, boundary_map, label_map, synth_shapes, write_synth_dataset

__all__ = [
    "EdgeDataset",
    "ManifestRecord",
    "Sample",
    "ShapeSpec",
    "SynthSample",
    "augment",
    "boundary_map",
    "consensus",
    "crop",
    "hflip",
    "label_map",
    "load_float_map",
    "load_raster",
    "load_sample",
    "parse_manifest",
    "quantize",
    "rescale",
    "resize_map",
    "rotate",
    "save_float_map",
    "save_probability_raster",
    "save_raster",
    "synth_shapes",
    "write_manifest",
    "write_synth_dataset",
]
