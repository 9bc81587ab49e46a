"""Multi-scale prediction and architecture reports."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..config.models import BdcnConfig
from ..data.raster import resize_map
from ..errors import ConfigurationError
from .bdcn import BdcnNetwork, BdcnOutputs

logger = logging.getLogger(__name__)


def side_maps(outputs: BdcnOutputs) -> dict[str, np.ndarray]:
    """Name every output map (``s2d_k``, ``d2s_k``, ``fused``) as a 2-D array."""
    return {name: t.data[0, 0] for name, t in outputs.maps().items()}


def predict(network: BdcnNetwork, image: np.ndarray) -> dict[str, np.ndarray]:
    """Single-scale forward pass of one (1, c, h, w) image."""
    return side_maps(network(image))


def predict_multiscale(network: BdcnNetwork, image: np.ndarray, scales: Sequence[float]) -> np.ndarray:
    """Average of the fused maps predicted on rescaled copies of ``image``.

    Each copy is resized by a scale factor, run through the network and its fused map
    resized back to the original resolution.
    """
    if not scales:
        raise ConfigurationError("predict_multiscale needs at least one scale")
    bad = [s for s in scales if not s > 0]
    if bad:
        raise ConfigurationError(f"Scale factors must be positive, got {bad}")

    h, w = image.shape[-2:]
    fused = []
    for s in scales:
        sh, sw = max(1, round(h * s)), max(1, round(w * s))
        scaled = resize_map(image, sh, sw, order=1)
        prob = network(scaled).fused.data[0, 0]
        fused.append(resize_map(prob, h, w, order=1))
        logger.debug("Scale %.3g -> %dx%d", s, sh, sw)
    return np.mean(np.stack(fused), axis=0, dtype=np.float64).astype(fused[0].dtype)


@dataclass(frozen=True)
class ReceptiveField:
    """Receptive-field extent (pixels) of one ID Block's side output."""

    block: int
    stride: int
    backbone: int
    with_sem: int


def receptive_fields(config: BdcnConfig) -> list[ReceptiveField]:
    """Per-block extent of the last backbone conv, and of the widest SEM branch on top of it."""
    rates = config.rate_schedule
    widest = max(rates) if rates else 0
    rf, jump = 1, 1
    report = []
    for index, widths in enumerate(config.blocks, start=1):
        if index > 1:
            rf += jump
            jump *= 2
        rf += 2 * jump * len(widths)
        sem = rf + jump * (2 + 2 * widest) if rates else rf
        report.append(ReceptiveField(block=index, stride=jump, backbone=rf, with_sem=sem))
    return report
