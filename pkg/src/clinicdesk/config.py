"""Service configuration: a flat `key = value` file with environment
overrides (CLINICDESK_<KEY>). Documented in docs/config.md."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from .errors import ConfigError

ENV_PREFIX = "CLINICDESK_"


@dataclass
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8765
    store_path: str = "clinic.db"
    sms_sink_path: str = "sms_outbox.log"
    tick_seconds: int = 60
    session_ttl_hours: int = 12

    def validate(self) -> "ServiceConfig":
        if not (1 <= self.listen_port <= 65535):
            raise ConfigError(f"listen_port {self.listen_port} out of range")
        if self.tick_seconds < 1:
            raise ConfigError("tick_seconds must be at least 1")
        if self.session_ttl_hours < 1:
            raise ConfigError("session_ttl_hours must be at least 1")
        if not self.store_path:
            raise ConfigError("store_path must not be empty")
        if not self.sms_sink_path:
            raise ConfigError("sms_sink_path must not be empty")
        return self


_INT_KEYS = {"listen_port", "tick_seconds", "session_ttl_hours"}
_KNOWN_KEYS = {f.name for f in fields(ServiceConfig)}


def _parse_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def load_config(
    path: Optional[str] = None, env: Optional[Mapping[str, str]] = None
) -> ServiceConfig:
    """Defaults, then the config file (if given), then env overrides."""
    env = os.environ if env is None else env
    merged: dict[str, str] = {}
    if path:
        merged.update(_parse_file(path))
    for key in _KNOWN_KEYS:
        env_value = env.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            merged[key] = env_value

    config = ServiceConfig()
    for key, value in merged.items():
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        if key in _INT_KEYS:
            try:
                setattr(config, key, int(value))
            except ValueError as exc:
                raise ConfigError(f"config key {key!r} expects an integer, got {value!r}") from exc
        else:
            setattr(config, key, value)
    return config.validate()
