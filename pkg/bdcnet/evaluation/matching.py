"""One-to-one correspondence between predicted and ground-truth edge pixels."""

import logging
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from ..errors import TensorUsageError

logger = logging.getLogger(__name__)


class MatchCounts(NamedTuple):
    tp: int
    fp: int
    fn: int


class MatcherComparison(NamedTuple):
    greedy: MatchCounts
    reference: MatchCounts

    @property
    def divergence(self) -> int:
        return self.reference.tp - self.greedy.tp


def match_radius(shape: tuple[int, int], tolerance: float) -> float:
    """Maximum match distance in pixels: tolerance times the image diagonal."""
    if tolerance <= 0:
        raise TensorUsageError(f"Match tolerance must be positive, got {tolerance}")
    h, w = shape
    return tolerance * float(np.hypot(h, w))


def _check_masks(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise TensorUsageError(f"Prediction {pred.shape} and GT {gt.shape} masks differ in size")
    if pred.ndim != 2:
        raise TensorUsageError(f"Edge masks must be 2-D, got shape {pred.shape}")


def candidate_pairs(pred: np.ndarray, gt: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (pred index, gt index, squared distance) pairs within ``radius``.

    Indices are row-major positions into the lists of edge pixels of each mask.
    """
    p_coords = np.argwhere(pred)
    g_coords = np.argwhere(gt)
    empty = np.zeros(0, dtype=np.int64)
    if len(p_coords) == 0 or len(g_coords) == 0:
        return empty, empty, empty
    neighbours = cKDTree(p_coords).query_ball_tree(cKDTree(g_coords), r=radius + 1e-9)
    pi = np.repeat(np.arange(len(p_coords)), [len(n) for n in neighbours])
    gi = np.fromiter((j for n in neighbours for j in n), dtype=np.int64, count=len(pi))
    if len(pi) == 0:
        return empty, empty, empty
    d2 = ((p_coords[pi] - g_coords[gi]) ** 2).sum(axis=1)
    inside = d2 <= radius * radius
    return pi[inside], gi[inside], d2[inside]


def match_edges(pred: np.ndarray, gt: np.ndarray, tolerance: float) -> MatchCounts:
    """Greedy matching in order of increasing distance; each pixel is used at most once.

    Ties in distance are broken by the row-major pixel positions of the pair, so
    swapping ``pred`` and ``gt`` swaps fp and fn and keeps tp.
    """
    _check_masks(pred, gt)
    pred, gt = pred.astype(bool), gt.astype(bool)
    n_pred, n_gt = int(pred.sum()), int(gt.sum())
    pi, gi, d2 = candidate_pairs(pred, gt, match_radius(pred.shape, tolerance))
    if len(pi) == 0:
        return MatchCounts(tp=0, fp=n_pred, fn=n_gt)

    width = pred.shape[1]
    p_lin = (np.argwhere(pred) @ np.array([width, 1]))[pi]
    g_lin = (np.argwhere(gt) @ np.array([width, 1]))[gi]
    order = np.lexsort((p_lin, np.maximum(p_lin, g_lin), np.minimum(p_lin, g_lin), d2))

    used_p = np.zeros(n_pred, dtype=bool)
    used_g = np.zeros(n_gt, dtype=bool)
    tp = 0
    for k in order:
        a, b = pi[k], gi[k]
        if used_p[a] or used_g[b]:
            continue
        used_p[a] = used_g[b] = True
        tp += 1
    return MatchCounts(tp=tp, fp=n_pred - tp, fn=n_gt - tp)


def assignment_match(pred: np.ndarray, gt: np.ndarray, tolerance: float) -> MatchCounts:
    """Maximum-cardinality, minimum-cost matching; the reference for the greedy matcher."""
    _check_masks(pred, gt)
    pred, gt = pred.astype(bool), gt.astype(bool)
    n_pred, n_gt = int(pred.sum()), int(gt.sum())
    pi, gi, d2 = candidate_pairs(pred, gt, match_radius(pred.shape, tolerance))
    if len(pi) == 0:
        return MatchCounts(tp=0, fp=n_pred, fn=n_gt)

    rows, row_idx = np.unique(pi, return_inverse=True)
    cols, col_idx = np.unique(gi, return_inverse=True)
    dist = np.sqrt(d2)
    # Any missing edge outweighs every admissible one, so cardinality comes first.
    blocked = dist.sum() + 1.0
    cost = np.full((len(rows), len(cols)), blocked)
    cost[row_idx, col_idx] = dist
    r, c = linear_sum_assignment(cost)
    tp = int((cost[r, c] < blocked).sum())
    return MatchCounts(tp=tp, fp=n_pred - tp, fn=n_gt - tp)


def compare_matchers(pred: np.ndarray, gt: np.ndarray, tolerance: float) -> MatcherComparison:
    """Run both matchers and log any difference in tp."""
    comparison = MatcherComparison(
        greedy=match_edges(pred, gt, tolerance),
        reference=assignment_match(pred, gt, tolerance),
    )
    if comparison.divergence:
        logger.warning(
            "Greedy matcher found %d matches, assignment found %d (divergence %d)",
            comparison.greedy.tp,
            comparison.reference.tp,
            comparison.divergence,
        )
    return comparison
