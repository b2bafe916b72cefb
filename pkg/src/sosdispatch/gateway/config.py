"""Gateway configuration: a JSON file, optionally overridden by CLI flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..transport import RetryPolicy

DEFAULT_LISTEN = "127.0.0.1:8787"
CONFIG_ENV_VAR = "SOS_GATEWAY_CONFIG"


class ConfigError(Exception):
    pass


@dataclass
class GatewayConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8787
    snapshot_path: str | None = None
    gazetteer_path: str | None = None
    cell_db_path: str | None = None
    transport: str = "mock"  # "mock" | "http"
    http_endpoint: str | None = None
    http_bearer_token: str = ""
    http_timeout_s: float = 5.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_fix_age_ms: int = 120_000
    geocode_radius_km: float = 10.0
    max_in_flight: int = 8
    heartbeat_s: float = 15.0
    console_dir: str | None = None

    def validate(self) -> "GatewayConfig":
        if self.transport not in ("mock", "http"):
            raise ConfigError(f"transport must be 'mock' or 'http', got {self.transport!r}")
        if self.transport == "http" and not self.http_endpoint:
            raise ConfigError("transport 'http' requires http_transport.endpoint")
        if not 0 < self.listen_port < 65536:
            raise ConfigError(f"listen port {self.listen_port} out of range")
        # snapshot_path is exempt: it is created on first save
        for label, path in (
            ("gazetteer_path", self.gazetteer_path),
            ("cell_db_path", self.cell_db_path),
        ):
            if path is not None and not os.path.isfile(path):
                raise ConfigError(f"{label} {path!r} is not a readable file")
        if self.max_fix_age_ms < 0 or self.geocode_radius_km < 0:
            raise ConfigError("max_fix_age_ms and geocode_radius_km must be >= 0")
        return self


def parse_listen(value: str) -> tuple[str, int]:
    host, sep, port_text = value.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"listen address {value!r} must be host:port")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"listen port {port_text!r} is not a number") from None
    return host, port


def load_config(path: str | None) -> GatewayConfig:
    """Build a config from a JSON document; None means all defaults."""
    config = GatewayConfig()
    if path is None:
        return config.validate()
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(p: str | None) -> str | None:
        if p is None:
            return None
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    if "listen" in doc:
        config.listen_host, config.listen_port = parse_listen(str(doc["listen"]))
    config.snapshot_path = resolve(doc.get("snapshot_path"))
    config.gazetteer_path = resolve(doc.get("gazetteer_path"))
    config.cell_db_path = resolve(doc.get("cell_db_path"))
    config.transport = doc.get("transport", config.transport)
    http_doc = doc.get("http_transport") or {}
    config.http_endpoint = http_doc.get("endpoint")
    config.http_bearer_token = http_doc.get("bearer_token", "")
    config.http_timeout_s = float(http_doc.get("timeout_s", config.http_timeout_s))
    retry_doc = doc.get("retry") or {}
    try:
        config.retry = RetryPolicy(
            max_attempts=int(retry_doc.get("max_attempts", 4)),
            base_delay_ms=int(retry_doc.get("base_delay_ms", 500)),
            factor=int(retry_doc.get("factor", 2)),
            cap_ms=int(retry_doc.get("cap_ms", 8000)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad retry policy: {exc}") from exc
    config.max_fix_age_ms = int(doc.get("max_fix_age_ms", config.max_fix_age_ms))
    config.geocode_radius_km = float(doc.get("reverse_geocode_radius_km", config.geocode_radius_km))
    config.max_in_flight = int(doc.get("max_in_flight", config.max_in_flight))
    config.heartbeat_s = float(doc.get("heartbeat_s", config.heartbeat_s))
    config.console_dir = resolve(doc.get("console_dir"))
    return config.validate()
