"""Training losses."""

from .cascade import (
    EPSILON,
    CascadeTargets,
    ConsensusGT,
    LossBreakdown,
    SupervisionTarget,
    balanced_bce,
    build_cascade_targets,
    class_weights,
    naive_summed_loss,
    total_loss,
)

__all__ = [
    "EPSILON",
    "CascadeTargets",
    "ConsensusGT",
    "LossBreakdown",
    "SupervisionTarget",
    "balanced_bce",
    "build_cascade_targets",
    "class_weights",
    "naive_summed_loss",
    "total_loss",
]
