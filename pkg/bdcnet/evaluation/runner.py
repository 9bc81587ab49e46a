"""Evaluation runner for bdcnet."""

import asyncio
import logging
import time
from collections.abc import Sequence
from pathlib import Path
from typing import NamedTuple

import numpy as np
from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)

from ..config.models import EvalConfig
from ..data.dataset import EdgeDataset
from ..data.raster import load_float_map, load_raster
from ..errors import EvaluationError
from ..network.bdcn import BdcnNetwork
from ..network.inference import predict
from .benchmark import summarize, sweep_image, thresholds
from .results import EvalSummary, ImageSweep

logger = logging.getLogger(__name__)

console = Console()


class EvalItem(NamedTuple):
    image_id: str
    prob: np.ndarray
    gt_mask: np.ndarray


def prediction_stem(image_id: str, map_name: str = "fused") -> str:
    return image_id if map_name == "fused" else f"{image_id}_{map_name}"


def load_prediction(pred_dir: Path, image_id: str, map_name: str = "fused") -> np.ndarray | None:
    """Float dump if present, else the 8-bit raster scaled to [0, 1]; None when neither exists."""
    stem = prediction_stem(image_id, map_name)
    dump = pred_dir / f"{stem}.f32"
    if dump.exists():
        maps = load_float_map(dump)
        if map_name not in maps:
            raise EvaluationError(f"{dump} holds {sorted(maps)}, not '{map_name}'")
        return maps[map_name].astype(np.float64)
    for suffix in (".png", ".pgm"):
        raster = pred_dir / f"{stem}{suffix}"
        if raster.exists():
            values = load_raster(raster)
            if values.ndim == 3:
                values = values.mean(axis=2)
            return values.astype(np.float64) / 255.0
    return None


def collect_items(pred_dir: Path, dataset: EdgeDataset, map_name: str = "fused") -> list[EvalItem]:
    """Pair predictions with GT edge masks (consensus > 0) by sample id."""
    pred_dir = Path(pred_dir)
    if len(dataset) == 0:
        raise EvaluationError("The GT manifest lists no samples")
    items, missing = [], []
    for sample in dataset:
        prob = load_prediction(pred_dir, sample.id, map_name)
        if prob is None:
            missing.append(sample.id)
            continue
        items.append(EvalItem(sample.id, prob, sample.gt > 0))
    if missing:
        raise EvaluationError(f"Missing '{map_name}' predictions in {pred_dir} for ids: {', '.join(missing)}")
    return items


def predict_items(
    network: BdcnNetwork,
    dataset: EdgeDataset,
    map_name: str = "fused",
    region: str | None = None,
) -> list[EvalItem]:
    """Run ``network`` over ``dataset`` in memory; ``region`` swaps the GT for a named region mask."""
    items = []
    for sample in dataset:
        maps = predict(network, sample.image)
        if map_name not in maps:
            raise EvaluationError(f"Network has no output map '{map_name}'; available: {', '.join(maps)}")
        if region is None:
            gt = sample.gt
        elif region in sample.regions:
            gt = sample.regions[region]
        else:
            raise EvaluationError(f"Sample '{sample.id}' has no region '{region}'")
        items.append(EvalItem(sample.id, maps[map_name].astype(np.float64), gt > 0))
    return items


class EvaluationRunner:
    """Sweeps images concurrently and summarizes them."""

    def __init__(
        self,
        config: EvalConfig | None = None,
        use_progress_bar: bool = False,
        thin: bool = True,
    ):
        self.config = config or EvalConfig()
        self.use_progress_bar = use_progress_bar
        self.thin = thin
        self.grid = thresholds(self.config.num_thresholds)

    def _sweep(self, item: EvalItem) -> ImageSweep:
        return sweep_image(item.prob, item.gt_mask, self.grid, self.config.tolerance, item.image_id, self.thin)

    async def _sweep_concurrent(self, items: Sequence[EvalItem], progress: Progress | None = None) -> list[ImageSweep]:
        """Run sweeps with at most ``max_concurrent`` in flight; results keep input order."""
        semaphore = asyncio.Semaphore(self.config.max_concurrent)
        task_id = progress.add_task("[cyan]Evaluating[/cyan]", total=len(items)) if progress else None

        async def run_with_semaphore(index: int, item: EvalItem) -> tuple[int, ImageSweep]:
            async with semaphore:
                sweep = await asyncio.to_thread(self._sweep, item)
                if progress is not None:
                    progress.advance(task_id)
                return index, sweep

        results = await asyncio.gather(*(run_with_semaphore(i, item) for i, item in enumerate(items)))
        results.sort(key=lambda x: x[0])
        return [sweep for _, sweep in results]

    async def run(self, items: Sequence[EvalItem]) -> EvalSummary:
        if not items:
            raise EvaluationError("Nothing to evaluate")
        start_time = time.time()
        if self.use_progress_bar:
            with Progress(
                SpinnerColumn(),
                TextColumn("[progress.description]{task.description}"),
                BarColumn(),
                MofNCompleteColumn(),
                TimeElapsedColumn(),
                console=console,
            ) as progress:
                sweeps = await self._sweep_concurrent(items, progress)
        else:
            sweeps = await self._sweep_concurrent(items)
        summary = summarize(sweeps)
        logger.debug("Evaluated %d images in %.0fms", len(items), (time.time() - start_time) * 1000)
        return summary

    def evaluate(self, items: Sequence[EvalItem]) -> EvalSummary:
        return asyncio.run(self.run(items))
