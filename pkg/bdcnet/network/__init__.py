"""BDCN architecture, inference and checkpoints."""

from .bdcn import (
    BdcnNetwork,
    BdcnOutputs,
    ScaleEnhancementModule,
    build_network,
    param_count,
    rate_schedule,
    sem_forward,
)
from .inference import ReceptiveField, predict, predict_multiscale, receptive_fields, side_maps
from .serialization import Checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "BdcnNetwork",
    "BdcnOutputs",
    "Checkpoint",
    "ReceptiveField",
    "ScaleEnhancementModule",
    "build_network",
    "load_checkpoint",
    "param_count",
    "predict",
    "predict_multiscale",
    "rate_schedule",
    "receptive_fields",
    "save_checkpoint",
    "sem_forward",
    "side_maps",
]
