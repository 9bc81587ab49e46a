"""Training loop."""

from .trainer import FINAL_CHECKPOINT, LOG_HEADER, Trainer, TrainingResult, checkpoint_name, train

__all__ = ["FINAL_CHECKPOINT", "LOG_HEADER", "Trainer", "TrainingResult", "checkpoint_name", "train"]
