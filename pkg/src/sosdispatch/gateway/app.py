"""HTTP/JSON surface: device and contact management, the SOS trigger, alert
inspection, the live event stream, and (when built) the static console."""

from __future__ import annotations

import asyncio
import contextlib
import os
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .. import registry as registry_mod
from ..alerts import AlreadyAcknowledged, InvalidTrigger
from ..geo import CellDb, CellKey, Gazetteer, GpsFix, LatLon, parse_cell_db, parse_gazetteer
from ..registry import Registry, RegistryError, load_snapshot
from ..transport import (
    ACCEPTED,
    HttpProviderConfig,
    HttpSmsBackend,
    MockSmsBackend,
    SendOutcome,
    SmsBackend,
    permanent,
    transient,
)
from .config import GatewayConfig
from .events import AlertEvent, EventBus
from .service import AlertService, Locator, UnknownAlert


class BadRequest(Exception):
    pass


def _load_registry(config: GatewayConfig) -> Registry:
    if config.snapshot_path and os.path.exists(config.snapshot_path):
        return load_snapshot(config.snapshot_path)
    return Registry()


def _load_geo_data(config: GatewayConfig) -> tuple[Gazetteer, CellDb]:
    gazetteer = Gazetteer([])
    cell_db = CellDb({})
    if config.gazetteer_path:
        with open(config.gazetteer_path, "rb") as handle:
            gazetteer = parse_gazetteer(handle.read())
    if config.cell_db_path:
        with open(config.cell_db_path, "rb") as handle:
            cell_db = parse_cell_db(handle.read())
    return gazetteer, cell_db


def _make_backend(config: GatewayConfig) -> SmsBackend:
    if config.transport == "mock":
        return MockSmsBackend()
    return HttpSmsBackend(
        HttpProviderConfig(
            endpoint=config.http_endpoint or "",
            bearer_token=config.http_bearer_token,
            timeout_s=config.http_timeout_s,
        )
    )


async def _read_json_object(request: Request) -> dict[str, Any]:
    try:
        doc = await request.json()
    except Exception:
        raise BadRequest("body is not valid JSON") from None
    if not isinstance(doc, dict):
        raise BadRequest("body must be a JSON object")
    return doc


def _need_str(doc: dict, key: str) -> str:
    value = doc.get(key)
    if not isinstance(value, str):
        raise BadRequest(f"field {key!r} must be a string")
    return value


def _number(doc: dict, key: str, required: bool = True) -> float | None:
    value = doc.get(key)
    if value is None:
        if required:
            raise BadRequest(f"field {key!r} is required")
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadRequest(f"field {key!r} must be a number")
    return value


def _parse_fix(doc: dict | None) -> GpsFix | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise BadRequest("field 'fix' must be an object")
    lat = _number(doc, "lat")
    lon = _number(doc, "lon")
    fixed_at = _number(doc, "fixed_at")
    accuracy = _number(doc, "accuracy_m", required=False)
    try:
        return GpsFix(LatLon(lat, lon), int(fixed_at), accuracy)
    except ValueError as exc:
        raise BadRequest(str(exc)) from None


def _parse_cell(doc: dict | None) -> CellKey | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise BadRequest("field 'cell' must be an object")
    values = {}
    for key in ("mcc", "mnc", "lac", "cid"):
        raw = doc.get(key)
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise BadRequest(f"field 'cell.{key}' must be an integer")
        values[key] = raw
    try:
        return CellKey(**values)
    except ValueError as exc:
        raise BadRequest(str(exc)) from None


def _parse_outcome(entry: Any) -> SendOutcome:
    if isinstance(entry, str):
        kind, reason = entry, "scripted"
    elif isinstance(entry, dict):
        kind = entry.get("kind", "")
        reason = entry.get("reason", "scripted")
    else:
        raise BadRequest("plan entries must be strings or objects")
    if kind == "accepted":
        return ACCEPTED
    if kind == "transient":
        return transient(reason)
    if kind == "permanent":
        return permanent(reason)
    raise BadRequest(f"unknown outcome kind {kind!r}")


def _sse_frame(event: AlertEvent) -> str:
    import json

    return f"id: {event.seq}\nevent: alert\ndata: {json.dumps(event.to_json(), separators=(',', ':'))}\n\n"


def create_app(
    config: GatewayConfig | None = None,
    *,
    backend: SmsBackend | None = None,
    registry: Registry | None = None,
    bus: EventBus | None = None,
) -> FastAPI:
    config = config or GatewayConfig()
    gazetteer, cell_db = _load_geo_data(config)
    registry = registry if registry is not None else _load_registry(config)
    backend = backend if backend is not None else _make_backend(config)
    bus = bus or EventBus()

    from ..transport import SystemClock

    clock = SystemClock()
    locator = Locator(gazetteer, cell_db, config.max_fix_age_ms, config.geocode_radius_km, clock)
    service = AlertService(
        registry=registry,
        locator=locator,
        backend=backend,
        retry_policy=config.retry,
        bus=bus,
        clock=clock,
        snapshot_path=config.snapshot_path,
        max_in_flight=config.max_in_flight,
    )

    @contextlib.asynccontextmanager
    async def lifespan(_: FastAPI):
        try:
            yield
        finally:
            service.shutdown()

    app = FastAPI(
        title="sos-gateway", version="0.1.0", docs_url=None, redoc_url=None, lifespan=lifespan
    )
    app.state.service = service
    app.state.config = config
    app.state.mock_backend = backend if isinstance(backend, MockSmsBackend) else None

    @app.exception_handler(BadRequest)
    async def bad_request_handler(request: Request, exc: BadRequest):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def error(status: int, exc: Exception) -> JSONResponse:
        return JSONResponse(
            status_code=status, content={"error": type(exc).__name__, "detail": str(exc)}
        )

    @app.exception_handler(registry_mod.UnknownDevice)
    @app.exception_handler(registry_mod.UnknownContact)
    async def not_found_handler(request: Request, exc: Exception):
        return error(404, exc)

    @app.exception_handler(UnknownAlert)
    async def unknown_alert_handler(request: Request, exc: UnknownAlert):
        return JSONResponse(status_code=404, content={"error": "UnknownAlert", "detail": str(exc)})

    @app.exception_handler(registry_mod.DuplicateContact)
    @app.exception_handler(registry_mod.ContactLimitReached)
    async def conflict_handler(request: Request, exc: Exception):
        return error(409, exc)

    @app.exception_handler(AlreadyAcknowledged)
    async def already_acked_handler(request: Request, exc: AlreadyAcknowledged):
        return error(409, exc)

    @app.exception_handler(RegistryError)
    async def registry_error_handler(request: Request, exc: RegistryError):
        # remaining registry errors are caller mistakes (ids, numbers, text)
        return error(400, exc)

    @app.exception_handler(InvalidTrigger)
    async def invalid_trigger_handler(request: Request, exc: InvalidTrigger):
        return error(400, exc)

    # -- health ---------------------------------------------------------

    @app.get("/healthz")
    async def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    # -- devices and contacts --------------------------------------------

    @app.post("/devices")
    async def register_device(request: Request):
        doc = await _read_json_object(request)
        view, created = service.register_device(_need_str(doc, "device_id"))
        return JSONResponse(status_code=201 if created else 200, content=view)

    @app.get("/devices/{device_id}")
    async def get_device(device_id: str):
        return service.device_view(device_id)

    @app.post("/devices/{device_id}/contacts")
    async def add_contact(device_id: str, request: Request):
        doc = await _read_json_object(request)
        number = _need_str(doc, "number")
        label = doc.get("label", "")
        if not isinstance(label, str):
            raise BadRequest("field 'label' must be a string")
        view = service.add_contact(device_id, number, label)
        return JSONResponse(status_code=201, content=view)

    @app.delete("/devices/{device_id}/contacts/{msisdn}", status_code=204)
    async def remove_contact(device_id: str, msisdn: str):
        service.remove_contact(device_id, msisdn)

    @app.put("/devices/{device_id}/message", status_code=204)
    async def set_custom_message(device_id: str, request: Request):
        doc = await _read_json_object(request)
        service.set_custom_message(device_id, _need_str(doc, "text"))

    # -- alerts -----------------------------------------------------------

    @app.post("/devices/{device_id}/sos")
    async def trigger_sos(device_id: str, request: Request):
        doc = await _read_json_object(request)
        trigger_id = _need_str(doc, "trigger_id")
        fix = _parse_fix(doc.get("fix"))
        cell = _parse_cell(doc.get("cell"))
        view, created = service.trigger(device_id, trigger_id, fix, cell)
        body = {"alert_id": view["alert_id"], "state": view["state"]}
        return JSONResponse(status_code=202 if created else 200, content=body)

    @app.get("/alerts/{alert_id}")
    async def get_alert(alert_id: str):
        return service.get_alert_view(alert_id)

    @app.post("/alerts/{alert_id}/ack")
    async def acknowledge_alert(alert_id: str, request: Request):
        doc = await _read_json_object(request)
        responder_id = _need_str(doc, "responder_id")
        if not responder_id:
            raise BadRequest("responder_id must be non-empty")
        return service.acknowledge_alert(alert_id, responder_id)

    # -- live feed ---------------------------------------------------------

    @app.get("/events")
    async def stream_events(request: Request):
        replay, subscriber = bus.subscribe()

        async def generate():
            try:
                for event in replay:
                    yield _sse_frame(event)
                while True:
                    if await request.is_disconnected():
                        return
                    event = await asyncio.to_thread(subscriber.next, config.heartbeat_s)
                    if event is None:
                        yield ": hb\n\n"
                    else:
                        yield _sse_frame(event)
            finally:
                bus.unsubscribe(subscriber)

        return StreamingResponse(
            generate(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # -- mock transport control (tests and the device simulator) -----------

    if app.state.mock_backend is not None:
        mock: MockSmsBackend = app.state.mock_backend

        @app.get("/_mock/delivered")
        async def mock_delivered(msisdn: str | None = None):
            messages = [
                {
                    "msisdn": m.msisdn,
                    "text": m.text,
                    "seq": m.segment.seq,
                    "total": m.segment.total,
                    "charset": m.charset,
                    "idempotency_key": m.idempotency_key,
                }
                for m in mock.delivered(msisdn)
            ]
            body: dict[str, Any] = {"messages": messages, "count": len(messages)}
            if msisdn is not None:
                body["texts"] = mock.delivered_texts(msisdn)
            return body

        @app.post("/_mock/failure-plan", status_code=204)
        async def mock_failure_plan(request: Request):
            doc = await _read_json_object(request)
            msisdn = _need_str(doc, "msisdn")
            plan = doc.get("plan")
            if not isinstance(plan, list):
                raise BadRequest("field 'plan' must be a list")
            mock.script_failures(msisdn, [_parse_outcome(entry) for entry in plan])

        @app.post("/_mock/reset", status_code=204)
        async def mock_reset():
            mock.clear()

    # -- static console -----------------------------------------------------

    if config.console_dir and os.path.isdir(config.console_dir):
        app.mount("/console", StaticFiles(directory=config.console_dir, html=True), name="console")

    return app
