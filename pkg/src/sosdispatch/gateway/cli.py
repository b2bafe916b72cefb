"""`sos-gateway` entry point."""

from __future__ import annotations

import argparse
import os
import sys

import uvicorn

from .app import create_app
from .config import CONFIG_ENV_VAR, ConfigError, load_config, parse_listen


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sos-gateway",
        description="Emergency-alert dispatch gateway (HTTP/JSON + SSE).",
    )
    parser.add_argument(
        "--config",
        default=None,
        help=f"path to JSON config (default: ${CONFIG_ENV_VAR} if set, else built-ins)",
    )
    parser.add_argument("--listen", default=None, help="host:port override")
    parser.add_argument("--transport", choices=["mock", "http"], default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    try:
        config = load_config(config_path)
        if args.listen:
            config.listen_host, config.listen_port = parse_listen(args.listen)
        if args.transport:
            config.transport = args.transport
        config.validate()
        app = create_app(config)
    except ConfigError as exc:
        print(f"sos-gateway: {exc}", file=sys.stderr)
        return 2
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
