"""Configuration management for bdcnet."""

from .loader import load_config
from .models import (
    VGG16_CHANNEL_PLAN,
    AugmentConfig,
    BdcnConfig,
    EvalConfig,
    LossConfig,
    OptimConfig,
    RunConfig,
)

__all__ = [
    "VGG16_CHANNEL_PLAN",
    "AugmentConfig",
    "BdcnConfig",
    "EvalConfig",
    "LossConfig",
    "OptimConfig",
    "RunConfig",
    "load_config",
]
