"""
bdcnet - Bi-Directional Cascade Network edge detection in plain numpy

A self-contained toolkit for training, running and benchmarking BDCN edge
detectors: a small autodiff engine, the network with its scale enhancement
modules, cascade supervision, and the standard ODS/OIS/AP edge benchmark.
"""

__version__ = "0.1.0"

from .config.models import BdcnConfig, RunConfig
from .evaluation.runner import EvaluationRunner
from .network.bdcn import BdcnNetwork, build_network

__all__ = [
    "BdcnConfig",
    "BdcnNetwork",
    "EvaluationRunner",
    "RunConfig",
    "build_network",
]
