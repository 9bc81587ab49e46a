"""Checkpoints: network parameters plus the architecture echoed as ``key = value`` lines."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from pydantic import ValidationError

from ..config.models import BdcnConfig
from ..errors import CheckpointIntegrityError, ConfigurationError
from ..tensor.checkpoint import read_container, write_container
from .bdcn import BdcnNetwork, build_network

logger = logging.getLogger(__name__)

_MODEL_PREFIX = "model."


@dataclass
class Checkpoint:
    network: BdcnNetwork
    iteration: int
    meta: dict[str, str]

    @property
    def config(self) -> BdcnConfig:
        return self.network.config


def config_to_meta(config: BdcnConfig) -> dict[str, str]:
    return {f"{_MODEL_PREFIX}{key}": json.dumps(value) for key, value in config.model_dump(mode="json").items()}


def config_from_meta(meta: dict[str, str]) -> BdcnConfig:
    fields = {}
    for key, value in meta.items():
        if key.startswith(_MODEL_PREFIX):
            try:
                fields[key.removeprefix(_MODEL_PREFIX)] = json.loads(value)
            except json.JSONDecodeError as e:
                raise CheckpointIntegrityError(f"Unparseable config entry {key} = {value}") from e
    if not fields:
        raise CheckpointIntegrityError("Checkpoint header carries no model configuration")
    try:
        return BdcnConfig(**fields)
    except ValidationError as e:
        raise CheckpointIntegrityError(f"Checkpoint header holds an invalid model configuration: {e}") from e


def save_checkpoint(path: Path, network: BdcnNetwork, iteration: int = 0, extra: dict[str, str] | None = None) -> None:
    meta = {"kind": "checkpoint", "iteration": str(iteration), **config_to_meta(network.config)}
    meta.update(extra or {})
    write_container(path, network.state_dict(), meta)
    logger.debug("Wrote checkpoint %s at iteration %d", path, iteration)


def load_checkpoint(path: Path) -> Checkpoint:
    """Rebuild the exact network a checkpoint was written from."""
    container = read_container(path)
    if container.meta.get("kind") != "checkpoint":
        raise CheckpointIntegrityError(f"{path} is not a network checkpoint")
    config = config_from_meta(container.meta)
    network = build_network(config)
    try:
        network.load_state_dict(container.records)
    except ConfigurationError as e:
        raise CheckpointIntegrityError(f"Parameters in {path} do not fit the recorded architecture: {e}") from e
    return Checkpoint(network=network, iteration=int(container.meta.get("iteration", 0)), meta=container.meta)
