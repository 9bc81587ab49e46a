"""Configuration file loading utilities."""

import json
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from ..errors import ConfigurationError
from .models import RunConfig

_PATH_KEYS = ("manifest", "output_dir")


def load_config(config_path: Path) -> RunConfig:
    """Load a run configuration from a YAML or JSON file."""

    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    try:
        with open(config_path, encoding="utf-8") as f:
            if config_path.suffix.lower() in [".yaml", ".yml"]:
                data = yaml.safe_load(f)
            elif config_path.suffix.lower() == ".json":
                data = json.load(f)
            else:
                raise ConfigurationError(
                    f"Unsupported config file format: {config_path.suffix}. "
                    f"Supported formats: .yaml, .yml, .json"
                )
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Invalid YAML syntax in config file: {config_path}\nError: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON syntax in config file: {config_path}\nError: {e}") from e
    except OSError as e:
        raise ConfigurationError(f"Failed to read config file: {config_path}\nError: {e}") from e

    if data is None:
        raise ConfigurationError(f"Config file is empty or contains only null values: {config_path}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file must contain a mapping of sections: {config_path}")

    data = _resolve_relative_paths(data, config_path.parent)

    try:
        return RunConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(
            f"Configuration validation failed for: {config_path}\n"
            f"Error: {e}\n"
            f"Hint: sections are model, optim, loss, augment, eval; see README for the keys."
        ) from e


def _resolve_relative_paths(data: dict[str, Any], base_path: Path) -> dict[str, Any]:
    """Resolve relative file paths in configuration relative to config file location."""
    result = dict(data)
    for key in _PATH_KEYS:
        value = result.get(key)
        if isinstance(value, str) and value:
            path = Path(value)
            result[key] = path if path.is_absolute() else base_path / path
    return result
