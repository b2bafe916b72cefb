"""HTTP/JSON surface binding the alert pipeline together, plus the live
server-sent-events feed consumed by the responder console."""

from .app import create_app
from .config import ConfigError, GatewayConfig, load_config

__all__ = ["ConfigError", "GatewayConfig", "create_app", "load_config"]
