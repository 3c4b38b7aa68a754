"""Layered runtime configuration: defaults < TOML file < environment < flags.

Keys are dotted (``service.port``); the file uses matching TOML tables and
the environment uses ``VERIFRAME_`` plus the key upper-cased with dots as
underscores (``VERIFRAME_SERVICE_PORT``).
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any, Mapping

from .errors import VeriframeError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "VERIFRAME_"
DEFAULT_CONFIG_FILENAME = "veriframe.toml"

DEFAULTS: dict[str, Any] = {
    "faces.backend": "stub",
    "model.backbone": "tiny_test",
    "service.model_artifact": None,
    "service.detector": "stub",
    "service.max_upload_mb": 50,
    "service.port": 8000,
    "service.host": "127.0.0.1",
}

_INT_KEYS = {"service.max_upload_mb", "service.port"}


def _flatten(table: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in table.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, prefix=f"{dotted}."))
        else:
            flat[dotted] = value
    return flat


def _env_name(key: str) -> str:
    return ENV_PREFIX + key.replace(".", "_").upper()


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _INT_KEYS:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise VeriframeError(f"config key {key} expects an integer, got {value!r}")
    return value


def load_config(
    config_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    """Resolve every known key with precedence flags > env > file > defaults.

    When no path is given, ``./veriframe.toml`` is used if present. Unknown
    keys in the file are kept (forward compatibility); unknown override keys
    are an error.
    """
    env = os.environ if env is None else env
    merged = dict(DEFAULTS)

    path = Path(config_path) if config_path else Path(DEFAULT_CONFIG_FILENAME)
    if config_path and not path.is_file():
        raise VeriframeError(f"config file not found: {path}")
    if path.is_file():
        with path.open("rb") as handle:
            try:
                table = tomllib.load(handle)
            except tomllib.TOMLDecodeError as exc:
                raise VeriframeError(f"invalid config file {path}: {exc}") from exc
        merged.update(_flatten(table))

    for key in list(merged):
        env_value = env.get(_env_name(key))
        if env_value is not None:
            merged[key] = env_value

    for key, value in (overrides or {}).items():
        if key not in DEFAULTS and key not in merged:
            raise VeriframeError(f"unknown config key {key!r}")
        if value is not None:
            merged[key] = value

    return {key: _coerce(key, value) for key, value in merged.items()}
