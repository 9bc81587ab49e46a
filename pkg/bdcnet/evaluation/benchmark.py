"""Threshold sweeps and ODS / OIS / AP summaries."""

import logging
from collections.abc import Sequence

import numpy as np

from ..errors import ConfigurationError, EvaluationError
from .matching import match_edges
from .nms import nms_thin
from .results import EvalSummary, ImageBest, ImageSweep, PRPoint

logger = logging.getLogger(__name__)


def thresholds(count: int = 99) -> np.ndarray:
    """``count`` uniform thresholds strictly inside (0, 1); 99 gives 0.01 .. 0.99."""
    if count < 1:
        raise ConfigurationError(f"Need at least one threshold, got {count}")
    return np.arange(1, count + 1, dtype=np.float64) / (count + 1)


def _check_thresholds(values: Sequence[float]) -> np.ndarray:
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigurationError("Threshold grid must be a non-empty list")
    if grid.min() <= 0 or grid.max() >= 1:
        raise ConfigurationError("Thresholds must lie strictly inside (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("Thresholds must be strictly ascending")
    return grid


def prf(tp, fp, fn):
    """Precision, recall and F with the empty-denominator conventions (1, 1, 0)."""
    tp, fp, fn = (np.asarray(x, dtype=np.float64) for x in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 1.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 1.0)
        f = np.where(precision + recall > 0, 2 * precision * recall / (precision + recall), 0.0)
    return precision, recall, f


def sweep_image(
    prob: np.ndarray,
    gt_mask: np.ndarray,
    grid: Sequence[float],
    tolerance: float,
    image_id: str = "",
    thin: bool = True,
) -> ImageSweep:
    """Counts of one image at every threshold; ``prob >= t`` marks predicted edges."""
    grid = _check_thresholds(grid)
    if prob.shape != gt_mask.shape:
        raise EvaluationError(f"Prediction {prob.shape} and GT {gt_mask.shape} differ in size for '{image_id}'")
    thinned = nms_thin(prob) if thin else prob
    counts = np.array([match_edges(thinned >= t, gt_mask, tolerance) for t in grid], dtype=np.int64)
    return ImageSweep(image_id=image_id, thresholds=grid, tp=counts[:, 0], fp=counts[:, 1], fn=counts[:, 2])


def sweep_thresholds(
    prob_maps: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    grid: Sequence[float] | None = None,
    tolerance: float = 0.0075,
    ids: Sequence[str] | None = None,
    thin: bool = True,
) -> list[ImageSweep]:
    """Per-image, per-threshold (tp, fp, fn) for a whole dataset."""
    if not prob_maps:
        raise EvaluationError("Cannot sweep an empty dataset")
    if len(prob_maps) != len(gts):
        raise EvaluationError(f"{len(prob_maps)} predictions for {len(gts)} ground truths")
    grid = thresholds() if grid is None else grid
    ids = ids or [str(i) for i in range(len(prob_maps))]
    return [
        sweep_image(p, g, grid, tolerance, image_id, thin)
        for p, g, image_id in zip(prob_maps, gts, ids, strict=True)
    ]


def image_optima(sweeps: Sequence[ImageSweep]) -> list[int]:
    """Index of each image's own best-F threshold; ties go to the lowest threshold."""
    return [int(np.argmax(prf(s.tp, s.fp, s.fn)[2])) for s in sweeps]


def optimal_image_scale(sweeps: Sequence[ImageSweep], choices: Sequence[int]) -> float:
    """F of the counts summed at each image's chosen threshold."""
    tp = sum(int(s.tp[i]) for s, i in zip(sweeps, choices, strict=True))
    fp = sum(int(s.fp[i]) for s, i in zip(sweeps, choices, strict=True))
    fn = sum(int(s.fn[i]) for s, i in zip(sweeps, choices, strict=True))
    return float(prf(tp, fp, fn)[2])


def average_precision(points: Sequence[PRPoint]) -> float:
    """Trapezoidal area under precision over recall, anchored at recall 0."""
    if not points:
        return 0.0
    ordered = sorted(points, key=lambda p: (p.recall, -p.precision))
    recall = np.array([0.0] + [p.recall for p in ordered])
    precision = np.array([ordered[0].precision] + [p.precision for p in ordered])
    return float(np.trapezoid(precision, recall))


def summarize(sweeps: Sequence[ImageSweep]) -> EvalSummary:
    """Dataset-level ODS and AP, and OIS from each image's own best threshold."""
    if not sweeps:
        raise EvaluationError("Cannot summarize an empty sweep")
    grid = sweeps[0].thresholds
    for s in sweeps:
        if not np.array_equal(s.thresholds, grid):
            raise EvaluationError(f"Image '{s.image_id}' was swept on a different threshold grid")

    tp = np.sum([s.tp for s in sweeps], axis=0)
    fp = np.sum([s.fp for s in sweeps], axis=0)
    fn = np.sum([s.fn for s in sweeps], axis=0)
    precision, recall, f = prf(tp, fp, fn)
    points = [
        PRPoint(
            threshold=float(t),
            tp=int(tp[i]),
            fp=int(fp[i]),
            fn=int(fn[i]),
            precision=float(precision[i]),
            recall=float(recall[i]),
            f_measure=float(f[i]),
        )
        for i, t in enumerate(grid)
    ]

    ods_index = int(np.argmax(f))
    choices = image_optima(sweeps)

    per_image = []
    for s, best in zip(sweeps, choices, strict=True):
        own_f = prf(s.tp[best], s.fp[best], s.fn[best])[2]
        per_image.append(ImageBest(image_id=s.image_id, best_threshold=float(grid[best]), best_f=float(own_f)))

    summary = EvalSummary(
        ods_f=float(f[ods_index]),
        ods_threshold=float(grid[ods_index]),
        ois_f=optimal_image_scale(sweeps, choices),
        ap=average_precision(points),
        points=points,
        per_image=per_image,
    )
    logger.info("ODS %.4f  OIS %.4f  AP %.4f over %d images", summary.ods_f, summary.ois_f, summary.ap, len(sweeps))
    return summary
