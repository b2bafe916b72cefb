"""Application service wiring the pipeline together behind the HTTP surface.

One AlertService owns all in-flight alerts. Each alert is written only by the
pipeline execution that owns it; readers get the latest rendered view, which
is replaced atomically at every state change.
"""

from __future__ import annotations

import logging
import random
import threading
import uuid
from concurrent.futures import Future, ThreadPoolExecutor

from ..alerts import (
    Alert,
    AlertState,
    TriggerRequest,
    acknowledge,
    create_alert,
    run_pipeline,
)
from ..geo import (
    Approximate,
    CellDb,
    CellKey,
    Exact,
    Gazetteer,
    GpsFix,
    ResolvedLocation,
    StaleFix,
    Unavailable,
    format_coord,
    render_place,
    resolve_cell,
    reverse_geocode,
    validate_fix,
)
from ..message import MessageText, compose, segment_message
from ..registry import Registry, save_snapshot
from ..transport import (
    Clock,
    DeliveryRecord,
    RetryPolicy,
    SmsBackend,
    SystemClock,
    dispatch_fanout,
)
from .events import EventBus, EventKind

log = logging.getLogger(__name__)


class UnknownAlert(Exception):
    pass


def mask_msisdn(msisdn: str) -> str:
    """Hide all digits except the country code (approximated as the first
    digit) and the last four: +15551234567 -> +1•••••••4567."""
    digits = msisdn.lstrip("+")
    if len(digits) <= 5:
        return "+" + digits[0] + "•" * (len(digits) - 1)
    return "+" + digits[0] + "•" * (len(digits) - 5) + digits[-4:]


class RegistryContacts:
    """Adapter giving the pipeline the registry's numbers and custom text."""

    def __init__(self, registry: Registry) -> None:
        self._registry = registry

    def contacts(self, device_id: str) -> list[str]:
        return [c.msisdn for c in self._registry.contacts(device_id)]

    def custom_message(self, device_id: str) -> str:
        return self._registry.custom_message(device_id)


class Locator:
    """Resolves a trigger's position: fresh GPS fix first, then the serving
    cell's known area, else unavailable. Also renders the place string."""

    def __init__(
        self,
        gazetteer: Gazetteer,
        cell_db: CellDb,
        max_fix_age_ms: int,
        geocode_radius_km: float,
        clock: Clock,
    ) -> None:
        self._gazetteer = gazetteer
        self._cell_db = cell_db
        self._max_fix_age_ms = max_fix_age_ms
        self._radius_km = geocode_radius_km
        self._clock = clock

    def resolve(self, trigger: TriggerRequest) -> tuple[ResolvedLocation, str | None]:
        if trigger.fix is not None:
            try:
                fix = validate_fix(trigger.fix, self._clock.now_ms(), self._max_fix_age_ms)
            except StaleFix as stale:
                log.info("trigger %s: %s; falling back", trigger.trigger_id, stale)
            else:
                place = reverse_geocode(fix.point, self._gazetteer, self._radius_km)
                return Exact(fix.point, place), render_place(place) if place else None
        if trigger.cell is not None:
            area = resolve_cell(trigger.cell, self._cell_db)
            if area is not None:
                place = reverse_geocode(area.point, self._gazetteer, self._radius_km)
                place_text = render_place(place) if place else (area.label or None)
                return Approximate(area.point, area.range_m, place), place_text
        return Unavailable(), None


def location_view(location: ResolvedLocation | None, place_text: str | None) -> dict | None:
    if location is None:
        return None
    if isinstance(location, Unavailable):
        return {"kind": "unavailable"}
    view = {
        "kind": "exact" if isinstance(location, Exact) else "approximate",
        "lon": format_coord(location.point.lon),
        "lat": format_coord(location.point.lat),
        "place": place_text,
    }
    if isinstance(location, Approximate):
        view["radius_m"] = location.radius_m
    return view


class AlertService:
    def __init__(
        self,
        registry: Registry,
        locator: Locator,
        backend: SmsBackend,
        retry_policy: RetryPolicy,
        bus: EventBus,
        clock: Clock | None = None,
        snapshot_path: str | None = None,
        max_in_flight: int = 8,
        rng: random.Random | None = None,
    ) -> None:
        self.registry = registry
        self.bus = bus
        self._locator = locator
        self._backend = backend
        self._policy = retry_policy
        self._clock = clock or SystemClock()
        self._snapshot_path = snapshot_path
        self._max_in_flight = max_in_flight
        self._rng = rng or random.Random()
        self._alerts: dict[str, Alert] = {}
        self._views: dict[str, dict] = {}
        self._futures: dict[str, Future] = {}
        self._trigger_index: dict[tuple[str, str], str] = {}
        self._lock = threading.RLock()
        self._executor = ThreadPoolExecutor(max_workers=max(2, max_in_flight))

    # -- registry operations (persisted after every mutation) ---------------

    def register_device(self, device_id: str) -> tuple[dict, bool]:
        existed = self.registry.has_device(device_id)
        profile = self.registry.register_device(device_id, self._clock.now_ms())
        if not existed:
            self._persist()
        return self.device_view(profile.device_id), not existed

    def add_contact(self, device_id: str, number: str, label: str) -> dict:
        contact = self.registry.add_contact(device_id, number, label, self._clock.now_ms())
        self._persist()
        return {
            "msisdn": mask_msisdn(contact.msisdn),
            "label": contact.label,
            "added_at": contact.added_at,
        }

    def remove_contact(self, device_id: str, msisdn: str) -> None:
        self.registry.remove_contact(device_id, msisdn)
        self._persist()

    def set_custom_message(self, device_id: str, text: str) -> None:
        self.registry.set_custom_message(device_id, text)
        self._persist()

    def device_view(self, device_id: str) -> dict:
        profile = self.registry.get_device(device_id)
        return {
            "device_id": profile.device_id,
            "created_at": profile.created_at,
            "custom_message": profile.custom_message,
            "contacts": [
                {"msisdn": mask_msisdn(c.msisdn), "label": c.label, "added_at": c.added_at}
                for c in profile.contacts
            ],
        }

    def _persist(self) -> None:
        if self._snapshot_path:
            save_snapshot(self.registry, self._snapshot_path)

    # -- alerts --------------------------------------------------------------

    def trigger(
        self,
        device_id: str,
        trigger_id: str,
        fix: GpsFix | None,
        cell: CellKey | None,
    ) -> tuple[dict, bool]:
        """Create an alert and run its pipeline in the background.

        Returns (view, created). A repeated (device_id, trigger_id) returns
        the original alert's current view with created=False and never fans
        out twice.
        """
        self.registry.get_device(device_id)  # raises UnknownDevice
        now = self._clock.now_ms()
        with self._lock:
            existing = self._trigger_index.get((device_id, trigger_id))
            if existing is not None:
                return self._views[existing], False
            request = TriggerRequest(
                trigger_id=trigger_id,
                device_id=device_id,
                triggered_at=now,
                fix=fix,
                cell=cell,
            )
            alert_id = f"alert-{uuid.uuid4().hex[:12]}"
            alert = create_alert(request, now, alert_id)
            self._alerts[alert_id] = alert
            self._trigger_index[(device_id, trigger_id)] = alert_id
            view = self._render(alert)
            self.bus.publish(EventKind.CREATED, view, now)
            self._futures[alert_id] = self._executor.submit(self._run, alert)
        return view, True

    def _run(self, alert: Alert) -> Alert:
        def observer(a: Alert) -> None:
            view = self._render(a)
            self.bus.publish(EventKind.STATE_CHANGED, view, self._clock.now_ms())

        def dispatcher(contacts: list[str], message: MessageText, alert_id: str) -> list[DeliveryRecord]:
            encoded = segment_message(message.text, rng=self._rng)
            return dispatch_fanout(
                contacts,
                encoded,
                self._backend,
                self._policy,
                self._clock,
                key_prefix=alert_id,
                max_in_flight=self._max_in_flight,
            )

        try:
            return run_pipeline(
                alert,
                RegistryContacts(self.registry),
                self._locator,
                compose,
                dispatcher,
                self._clock.now_ms,
                observer,
            )
        except Exception:
            log.exception("pipeline for %s crashed", alert.alert_id)
            alert.failure_reason = alert.failure_reason or "PipelineError"
            alert.state = AlertState.FAILED
            alert.state_history.append((AlertState.FAILED, self._clock.now_ms()))
            observer(alert)
            return alert

    def wait_terminal(self, alert_id: str, timeout_s: float = 10.0) -> Alert:
        """Block until the alert's pipeline finishes; for tests and tooling."""
        future = self._futures.get(alert_id)
        if future is None:
            raise UnknownAlert(alert_id)
        return future.result(timeout=timeout_s)

    def get_alert_view(self, alert_id: str) -> dict:
        view = self._views.get(alert_id)
        if view is None:
            raise UnknownAlert(alert_id)
        return view

    def alert_views(self) -> list[dict]:
        with self._lock:
            return list(self._views.values())

    def acknowledge_alert(self, alert_id: str, responder_id: str) -> dict:
        with self._lock:
            alert = self._alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(alert_id)
            now = self._clock.now_ms()
            acknowledge(alert, responder_id, now)
            view = self._render(alert)
            self.bus.publish(EventKind.ACKNOWLEDGED, view, now)
        return view

    def _render(self, alert: Alert) -> dict:
        view = {
            "alert_id": alert.alert_id,
            "device_id": alert.trigger.device_id,
            "trigger_id": alert.trigger.trigger_id,
            "state": alert.state.value,
            "created_at": alert.state_history[0][1],
            "location": location_view(alert.location, alert.place_text),
            "message": alert.message.text if alert.message else None,
            "deliveries": [
                {
                    "msisdn": mask_msisdn(r.msisdn),
                    "final_status": r.final_status.value,
                    "attempts": len(r.attempts),
                }
                for r in alert.deliveries
            ],
            "acknowledged_by": (
                {"responder_id": alert.acknowledged_by[0], "at": alert.acknowledged_by[1]}
                if alert.acknowledged_by
                else None
            ),
            "state_history": [{"state": s.value, "at": at} for s, at in alert.state_history],
            "failure_reason": alert.failure_reason,
        }
        self._views[alert.alert_id] = view
        return view

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True, cancel_futures=False)
