"""Samples, manifests and the dataset container."""

import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import IngestionError
from .raster import load_raster

logger = logging.getLogger(__name__)

ANNOTATION_THRESHOLD = 128


@dataclass
class Sample:
    """An image (1, 3, h, w) in [0, 1] with its consensus edge map (h, w) in [0, 1]."""

    image: np.ndarray
    gt: np.ndarray
    id: str
    regions: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.image.ndim != 4 or self.image.shape[0] != 1:
            raise IngestionError(f"Sample '{self.id}': image must have shape (1, c, h, w), got {self.image.shape}")
        if self.gt.shape != self.image.shape[2:]:
            raise IngestionError(f"Sample '{self.id}': image {self.image.shape[2:]} and GT {self.gt.shape} differ in size")
        for name, region in self.regions.items():
            if region.shape != self.gt.shape:
                raise IngestionError(f"Sample '{self.id}': region '{name}' has shape {region.shape}")
        if self.gt.size and (self.gt.min() < 0 or self.gt.max() > 1):
            raise IngestionError(f"Sample '{self.id}': GT values must lie in [0, 1]")

    @property
    def size(self) -> tuple[int, int]:
        return self.gt.shape


@dataclass(frozen=True)
class ManifestRecord:
    image: Path
    annotations: tuple[Path, ...]
    id: str


def _gray(raster: np.ndarray) -> np.ndarray:
    if raster.ndim == 3:
        return np.asarray(Image.fromarray(raster).convert("L"))
    return raster


def image_to_array(raster: np.ndarray) -> np.ndarray:
    """8-bit (h, w) or (h, w, 3) raster to a (1, 3, h, w) float32 array in [0, 1]."""
    if raster.ndim == 2:
        raster = np.repeat(raster[:, :, None], 3, axis=2)
    return (raster.astype(np.float32) / 255.0).transpose(2, 0, 1)[None]


def consensus(annotations: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of binarized annotator maps; a single map is taken as-is, scaled to [0, 1]."""
    if not annotations:
        raise IngestionError("At least one annotation is required")
    shapes = {a.shape for a in annotations}
    if len(shapes) > 1:
        raise IngestionError(f"Annotator maps differ in size: {sorted(shapes)}")
    if len(annotations) == 1:
        return annotations[0].astype(np.float32) / 255.0
    binary = np.stack([a >= ANNOTATION_THRESHOLD for a in annotations]).astype(np.float32)
    return binary.mean(axis=0)


def load_sample(image_path: Path, gt_paths: Path | Sequence[Path], sample_id: str | None = None) -> Sample:
    """Read an image and one or more annotator rasters into a Sample."""
    image_path = Path(image_path)
    paths = [Path(gt_paths)] if isinstance(gt_paths, (str, Path)) else [Path(p) for p in gt_paths]
    image = load_raster(image_path)
    annotations = [_gray(load_raster(p)) for p in paths]
    gt = consensus(annotations)
    if gt.shape != image.shape[:2]:
        raise IngestionError(f"Image {image_path} is {image.shape[:2]} but its GT is {gt.shape}")
    return Sample(image=image_to_array(image), gt=gt, id=sample_id or image_path.stem)


def parse_manifest(manifest_path: Path) -> list[ManifestRecord]:
    """Read ``image<TAB>gt[,gt...][<TAB>id]`` lines; relative paths are relative to the manifest."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest not found: {manifest_path}")
    base = manifest_path.parent
    records = []
    with open(manifest_path, encoding="utf-8") as f:
        for line_num, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3) or not fields[0] or not fields[1]:
                raise IngestionError(f"{manifest_path}:{line_num}: expected 'image<TAB>gt[<TAB>id]', got {line!r}")
            image = base / fields[0]
            annotations = tuple(base / p.strip() for p in fields[1].split(",") if p.strip())
            sample_id = fields[2] if len(fields) == 3 and fields[2] else image.stem
            records.append(ManifestRecord(image=image, annotations=annotations, id=sample_id))
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise IngestionError(f"Duplicate sample ids in {manifest_path}")
    return records


def write_manifest(manifest_path: Path, records: Sequence[ManifestRecord]) -> None:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent.resolve()
    lines = []
    for r in records:
        image = Path(r.image).resolve().relative_to(base)
        gts = ",".join(str(Path(p).resolve().relative_to(base)) for p in r.annotations)
        lines.append(f"{image}\t{gts}\t{r.id}")
    manifest_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class EdgeDataset:
    """Dataset container for edge samples, loaded from a manifest or held in memory."""

    def __init__(self, entries: Sequence[ManifestRecord | Sample]):
        self.entries = list(entries)

    @classmethod
    def from_manifest(cls, manifest_path: Path) -> "EdgeDataset":
        records = parse_manifest(manifest_path)
        logger.info("Loaded manifest %s with %d samples", manifest_path, len(records))
        return cls(records)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> Sample:
        entry = self.entries[index]
        if isinstance(entry, Sample):
            return entry
        return load_sample(entry.image, entry.annotations, entry.id)

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def by_id(self, sample_id: str) -> Sample:
        try:
            return self[self.ids.index(sample_id)]
        except ValueError as e:
            raise KeyError(f"No sample with id '{sample_id}'") from e
