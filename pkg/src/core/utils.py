"""Shared utilities: config files, environment, text documents and hashing."""

import csv
import hashlib
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import yaml

from .errors import EXIT_OK, GaussDigitsError, SerializationError

logger = logging.getLogger(__name__)

try:
    _Dumper: type = yaml.CSafeDumper
    _Loader: type = yaml.CSafeLoader
except AttributeError:
    _Dumper = yaml.SafeDumper
    _Loader = yaml.SafeLoader


def load_config(config_path: str | Path | None) -> dict[str, Any]:
    """Load configuration from a YAML file.

    Args:
        config_path: Path to the configuration file (None means no file)

    Returns:
        Configuration dictionary; empty if the file does not exist
    """
    if config_path is None:
        return {}
    try:
        with open(config_path) as f:
            loaded = yaml.load(f, Loader=_Loader) or {}
    except FileNotFoundError:
        return {}
    except yaml.YAMLError as e:
        raise SerializationError(f"Error loading config from {config_path}: {e}") from e
    if not isinstance(loaded, dict):
        raise SerializationError(f"Config {config_path} must be a mapping")
    return loaded


def get_section(config: dict[str, Any], name: str) -> dict[str, Any]:
    """Get one top-level section of a loaded config."""
    section = config.get(name, {})
    if isinstance(section, dict):
        return section
    return {}


def get_env_var(key: str, default: str = "") -> str:
    """Get environment variable with fallback."""
    return os.environ.get(key, default)


def get_timestamp() -> str:
    """Get current UTC timestamp in ISO format."""
    return datetime.now(timezone.utc).isoformat()


def write_yaml_document(path: Path, data: Any) -> None:
    """Write a YAML document; leaf lists are emitted in flow style."""
    try:
        with open(path, "w") as f:
            yaml.dump(data, f, Dumper=_Dumper, sort_keys=False, default_flow_style=None)
    except (OSError, yaml.YAMLError) as e:
        raise SerializationError(f"Error saving {path}: {e}") from e


def read_yaml_document(path: Path) -> Any:
    try:
        with open(path) as f:
            return yaml.load(f, Loader=_Loader)
    except FileNotFoundError as e:
        raise SerializationError(f"{path} does not exist") from e
    except (OSError, yaml.YAMLError) as e:
        raise SerializationError(f"Error loading {path}: {e}") from e


def write_csv_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise SerializationError(f"Error saving {path}: {e}") from e


def sha256_bytes(*chunks: bytes) -> str:
    digest = hashlib.sha256()
    for chunk in chunks:
        digest.update(chunk)
    return digest.hexdigest()


def tool_result(success: bool, exit_code: int, message: str, **details: Any) -> str:
    """JSON document every tool returns."""
    return json.dumps(
        {"success": success, "exit_code": exit_code, "message": message, **details},
        indent=2,
        default=str,
    )


def tool_success(message: str, **details: Any) -> str:
    return tool_result(True, EXIT_OK, message, **details)


def tool_failure(error: GaussDigitsError, **details: Any) -> str:
    logger.error(f"{type(error).__name__}: {error}")
    return tool_result(False, error.exit_code, str(error), error=type(error).__name__, **details)


def resolve_setting(flag: Any, file_config: dict[str, Any], key: str, env_key: str, default: Any) -> Any:
    """Pick flag, then config file, then environment, then default."""
    if flag not in (None, ""):
        return flag
    if file_config.get(key) not in (None, ""):
        return file_config[key]
    return get_env_var(env_key) or default
