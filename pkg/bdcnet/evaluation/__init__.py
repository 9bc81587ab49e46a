"""Edge-benchmark evaluation: NMS, matching, threshold sweeps and summaries."""

from .benchmark import (
    average_precision,
    image_optima,
    optimal_image_scale,
    prf,
    summarize,
    sweep_image,
    sweep_thresholds,
    thresholds,
)
from .matching import MatchCounts, assignment_match, compare_matchers, match_edges, match_radius
from .nms import conv_tri, edge_orientation, nms_thin
from .results import EvalSummary, ImageBest, ImageSweep, PRPoint
from .runner import EvalItem, EvaluationRunner, collect_items, load_prediction, predict_items

__all__ = [
    "EvalItem",
    "EvalSummary",
    "EvaluationRunner",
    "ImageBest",
    "ImageSweep",
    "MatchCounts",
    "PRPoint",
    "assignment_match",
    "average_precision",
    "collect_items",
    "compare_matchers",
    "conv_tri",
    "edge_orientation",
    "image_optima",
    "load_prediction",
    "match_edges",
    "match_radius",
    "nms_thin",
    "optimal_image_scale",
    "predict_items",
    "prf",
    "summarize",
    "sweep_image",
    "sweep_thresholds",
    "thresholds",
]
