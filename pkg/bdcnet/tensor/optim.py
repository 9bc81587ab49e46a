"""SGD with momentum and coupled L2 weight decay."""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, TrainingError
from .core import Tensor

logger = logging.getLogger(__name__)


@dataclass
class OptimState:
    """Hyperparameters plus one velocity buffer per parameter name."""

    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 2e-4
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError(f"Learning rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError(f"Momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"Weight decay must be non-negative, got {self.weight_decay}")


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: OptimState,
) -> Mapping[str, Tensor]:
    """Update parameters in place.

    v <- momentum * v + grad + weight_decay * param
    param <- param - lr * v

    All gradients are checked before any parameter moves, so a non-finite gradient
    leaves the model untouched.
    """
    for name, grad in grads.items():
        if name not in params:
            raise TrainingError(f"Gradient for unknown parameter '{name}'", term=name)
        if grad.shape != params[name].shape:
            raise TrainingError(
                f"Gradient shape {grad.shape} does not match parameter '{name}' {params[name].shape}",
                term=name,
            )
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient for parameter '{name}'", term=name)

    for name, grad in grads.items():
        param = params[name]
        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = np.zeros_like(param.data)
        elif velocity.shape != param.shape:
            raise TrainingError(
                f"Velocity buffer {velocity.shape} does not match parameter '{name}' {param.shape}",
                term=name,
            )
        velocity = state.momentum * velocity + grad + state.weight_decay * param.data
        state.velocity[name] = velocity.astype(param.dtype, copy=False)
        param.data -= (state.learning_rate * state.velocity[name]).astype(param.dtype, copy=False)
    return params


def step_decay(base_lr: float, iteration: int, step: int, factor: float) -> float:
    """Learning rate after ``iteration`` updates with decay by ``factor`` every ``step``."""
    if step <= 0:
        return base_lr
    return base_lr * factor ** (iteration // step)
