"""Runtime configuration: one key=value text file, env overrides, flags win.

Precedence: command-line flags beat environment variables (DATA_DIR,
BIND_ADDR, ADMIN_TOKEN) which beat the config file. Unknown file keys are
rejected. Feature-pipeline constants are overridden with ``feature.<name>``
keys; see docs/cli.md for the full reference.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .features.config import FeatureConfig

_KNOWN_KEYS = {
    "data_dir",
    "bind_addr",
    "vendor_bind_addr",
    "admin_token",
    "access_ttl_seconds",
    "fsync",
    "fixed_time",
    "vendor_client_id",
    "vendor_client_secret",
    "vendor_authorize_url",
    "vendor_token_url",
    "vendor_api_base",
    "vendor_scopes",
    "poll_interval_seconds",
}

_ENV_KEYS = {"DATA_DIR": "data_dir", "BIND_ADDR": "bind_addr", "ADMIN_TOKEN": "admin_token"}


@dataclass
class Config:
    data_dir: str = "./data"
    bind_addr: str = "127.0.0.1:8080"
    vendor_bind_addr: str = "127.0.0.1:8082"
    admin_token: str = "change-me"
    access_ttl_seconds: float = 30 * 86400.0
    fsync: bool = True
    fixed_time: float | None = None
    vendor_client_id: str = "cohortkit-client"
    vendor_client_secret: str = "cohortkit-secret"
    vendor_authorize_url: str = ""
    vendor_token_url: str = ""
    vendor_api_base: str = ""
    vendor_scopes: str = "sleep activity heartrate"
    poll_interval_seconds: float = 86400.0
    feature_overrides: dict = field(default_factory=dict)

    def resolve(self) -> "Config":
        self.data_dir = str(Path(self.data_dir).expanduser().resolve())
        return self

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig().with_overrides(self.feature_overrides)

    def clock(self):
        if self.fixed_time is not None:
            fixed = float(self.fixed_time)
            return lambda: fixed
        import time

        return time.time


def _parse_value(key: str, value: str):
    if key in ("access_ttl_seconds", "fixed_time", "poll_interval_seconds"):
        return float(value)
    if key == "fsync":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    return value


def load_config(path: str | None = None, env: dict | None = None) -> Config:
    cfg = Config()
    if path:
        text = Path(path).read_text("utf-8")
        for lineno, line in enumerate(text.split("\n"), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key.startswith("feature."):
                cfg.feature_overrides[key[len("feature."):]] = float(raw)
            elif key in _KNOWN_KEYS:
                setattr(cfg, key, _parse_value(key, raw))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    env = os.environ if env is None else env
    for env_name, key in _ENV_KEYS.items():
        if env_name in env:
            setattr(cfg, key, _parse_value(key, env[env_name]))
    return cfg
