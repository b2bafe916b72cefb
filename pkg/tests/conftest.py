"""Shared fixtures: sample geo data, a gateway app factory, and a live
uvicorn server for the simulator tests."""

from __future__ import annotations

import socket
import threading
import time

import pytest
import uvicorn
from fastapi.testclient import TestClient

from sosdispatch.gateway.app import create_app
from sosdispatch.gateway.config import GatewayConfig

NH37_NAME = "National Highway 37, Borjhar"
NH37_RENDERED = "National Highway 37, Borjhar, Guwahati, Assam, India"

GAZETTEER_TSV = (
    "# place_id\tname\tadmin\tcountry\tlat\tlon\n"
    "nh37\tNational Highway 37, Borjhar\tGuwahati, Assam\tIndia\t26.1\t91.6\n"
    "guw\tGuwahati\tKamrup, Assam\tIndia\t26.1445\t91.7362\n"
    "dispur\tDispur\tKamrup, Assam\tIndia\t26.1433\t91.7898\n"
)

CELL_DB_CSV = (
    "mcc,mnc,lac,cid,lat,lon,range_m,label\n"
    "404,70,1234,5678,26.105,91.59,1500,Borjhar cell\n"
    "404,70,1234,5679,26.15,91.74,2200,Guwahati central cell\n"
)


def now_ms() -> int:
    return int(time.time() * 1000)


@pytest.fixture
def geo_files(tmp_path):
    gaz = tmp_path / "gazetteer.tsv"
    gaz.write_text(GAZETTEER_TSV, encoding="utf-8")
    cells = tmp_path / "cells.csv"
    cells.write_text(CELL_DB_CSV, encoding="utf-8")
    return {"gazetteer_path": str(gaz), "cell_db_path": str(cells)}


def make_config(tmp_path, geo_files, **overrides) -> GatewayConfig:
    config = GatewayConfig(
        snapshot_path=str(tmp_path / "registry.json"),
        gazetteer_path=geo_files["gazetteer_path"],
        cell_db_path=geo_files["cell_db_path"],
        heartbeat_s=0.2,
    )
    for key, value in overrides.items():
        setattr(config, key, value)
    return config


@pytest.fixture
def gateway(tmp_path, geo_files):
    config = make_config(tmp_path, geo_files)
    app = create_app(config)
    with TestClient(app) as client:
        client.app = app
        yield client


class GatewayHelper:
    """Drives a gateway over plain HTTP helpers shared by several suites."""

    TERMINAL = {"delivered", "partially_delivered", "failed"}

    def __init__(self, client):
        self.client = client

    def register(self, device_id: str, contacts: list[str], custom: str | None = None) -> None:
        assert self.client.post("/devices", json={"device_id": device_id}).status_code in (200, 201)
        for i, number in enumerate(contacts):
            resp = self.client.post(
                f"/devices/{device_id}/contacts", json={"number": number, "label": f"c{i}"}
            )
            assert resp.status_code == 201, resp.text
        if custom is not None:
            assert self.client.put(f"/devices/{device_id}/message", json={"text": custom}).status_code == 204

    def trigger(self, device_id: str, trigger_id: str, fix: dict | None = None, cell: dict | None = None):
        body: dict = {"trigger_id": trigger_id}
        if fix is not None:
            body["fix"] = fix
        if cell is not None:
            body["cell"] = cell
        return self.client.post(f"/devices/{device_id}/sos", json=body)

    def wait_terminal(self, alert_id: str, timeout_s: float = 5.0) -> dict:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            resp = self.client.get(f"/alerts/{alert_id}")
            assert resp.status_code == 200, resp.text
            view = resp.json()
            if view["state"] in self.TERMINAL:
                return view
            time.sleep(0.005)
        raise AssertionError(f"alert {alert_id} never reached a terminal state")


@pytest.fixture
def helper(gateway):
    return GatewayHelper(gateway)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveGateway:
    """A real uvicorn server in a thread, for the simulator CLI tests."""

    def __init__(self, tmp_path, geo_files, **overrides):
        self.config = make_config(tmp_path, geo_files, **overrides)
        self.config.listen_port = free_port()
        self.app = create_app(self.config)
        self.base_url = f"http://127.0.0.1:{self.config.listen_port}"
        server_config = uvicorn.Config(
            self.app, host="127.0.0.1", port=self.config.listen_port, log_level="warning"
        )
        self.server = uvicorn.Server(server_config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline:
            if self.server.started:
                return self
            time.sleep(0.01)
        raise RuntimeError("gateway server did not start")

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture
def live_gateway(tmp_path, geo_files):
    with LiveGateway(tmp_path, geo_files) as gw:
        yield gw
