"""Non-maximum suppression of edge probability maps."""

import numpy as np
from scipy import ndimage

SMOOTH_RADIUS = 2
NEIGHBOUR_DISTANCE = 1.0
SUPPRESSION_MARGIN = 1.01


def triangle_kernel(radius: int) -> np.ndarray:
    """1-D triangle filter with 2 * radius + 1 taps, normalized to sum 1."""
    taps = np.concatenate([np.arange(1, radius + 2), np.arange(radius, 0, -1)]).astype(np.float64)
    return taps / taps.sum()


def conv_tri(image: np.ndarray, radius: int = SMOOTH_RADIUS) -> np.ndarray:
    """Separable triangle smoothing with symmetric border extension."""
    if radius <= 0:
        return image.astype(np.float64)
    kernel = triangle_kernel(radius)
    out = ndimage.convolve1d(image.astype(np.float64), kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")


def edge_orientation(prob: np.ndarray, radius: int = SMOOTH_RADIUS) -> np.ndarray:
    """Edge-normal angle in [0, pi) from second derivatives of the smoothed map."""
    smoothed = conv_tri(prob, radius)
    dy, dx = np.gradient(smoothed)
    _, dxx = np.gradient(dx)
    dyy, dxy = np.gradient(dy)
    return np.mod(np.arctan2(dyy * np.sign(-dxy) + 1e-5, dxx), np.pi)


def nms_thin(prob: np.ndarray, radius: int = SMOOTH_RADIUS, margin: float = SUPPRESSION_MARGIN) -> np.ndarray:
    """Keep pixels that are maximal along the edge normal; others become 0.

    A pixel with value e is suppressed when ``margin * e`` is below either neighbour at
    distance 1 along its normal (bilinear lookup, clamped at the border).
    """
    prob = np.asarray(prob)
    if prob.ndim != 2:
        raise ValueError(f"nms_thin expects a 2-D map, got shape {prob.shape}")
    if not prob.any():
        return np.zeros_like(prob)

    orientation = edge_orientation(prob, radius)
    cos, sin = np.cos(orientation), np.sin(orientation)
    rows, cols = np.indices(prob.shape, dtype=np.float64)
    values = prob.astype(np.float64)

    keep = values > 0
    for sign in (1.0, -1.0):
        coords = [rows + sign * NEIGHBOUR_DISTANCE * sin, cols + sign * NEIGHBOUR_DISTANCE * cos]
        neighbour = ndimage.map_coordinates(values, coords, order=1, mode="nearest")
        keep &= ~(margin * values < neighbour)
    return np.where(keep, prob, 0).astype(prob.dtype)
