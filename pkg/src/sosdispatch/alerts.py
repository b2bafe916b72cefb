"""Alert lifecycle: the trigger->locate->compose->dispatch pipeline and its
state machine.

An alert is single-writer: the pipeline execution owns it until it reaches a
terminal state. Collaborators (contact lookup, location resolution, message
composition, dispatch) are injected so the pipeline is deterministic given
deterministic dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from .geo import CellKey, GpsFix, ResolvedLocation, Unavailable
from .message import MessageText
from .transport import DeliveryRecord, DeliveryStatus

MAX_TRIGGER_ID_CHARS = 64

NO_CONTACTS_REASON = "NoContactsRegistered"


class AlertState(str, Enum):
    TRIGGERED = "triggered"
    LOCATING = "locating"
    COMPOSING = "composing"
    DISPATCHING = "dispatching"
    DELIVERED = "delivered"
    PARTIALLY_DELIVERED = "partially_delivered"
    FAILED = "failed"


TERMINAL_STATES = frozenset(
    {AlertState.DELIVERED, AlertState.PARTIALLY_DELIVERED, AlertState.FAILED}
)


class PipelineEvent(str, Enum):
    LOCATION_RESOLVED = "location_resolved"
    LOCATION_UNAVAILABLE = "location_unavailable"
    MESSAGE_COMPOSED = "message_composed"
    DISPATCH_ALL_OK = "dispatch_all_ok"
    DISPATCH_PARTIAL = "dispatch_partial"
    DISPATCH_ALL_FAILED = "dispatch_all_failed"


# Legality table. Both location outcomes proceed to composition: a missing
# position must never prevent the SMS fan-out. Locating itself is a recorded
# history stage between Triggered and Composing, not a transition source.
_TRANSITIONS: dict[tuple[AlertState, PipelineEvent], AlertState] = {
    (AlertState.TRIGGERED, PipelineEvent.LOCATION_RESOLVED): AlertState.COMPOSING,
    (AlertState.TRIGGERED, PipelineEvent.LOCATION_UNAVAILABLE): AlertState.COMPOSING,
    (AlertState.COMPOSING, PipelineEvent.MESSAGE_COMPOSED): AlertState.DISPATCHING,
    (AlertState.DISPATCHING, PipelineEvent.DISPATCH_ALL_OK): AlertState.DELIVERED,
    (AlertState.DISPATCHING, PipelineEvent.DISPATCH_PARTIAL): AlertState.PARTIALLY_DELIVERED,
    (AlertState.DISPATCHING, PipelineEvent.DISPATCH_ALL_FAILED): AlertState.FAILED,
}

# Legal consecutive history pairs. Composing->Failed is the sanctioned abort
# when a device has no registered contacts (recorded, never dispatched).
_HISTORY_SUCCESSORS: dict[AlertState, frozenset[AlertState]] = {
    AlertState.TRIGGERED: frozenset({AlertState.LOCATING}),
    AlertState.LOCATING: frozenset({AlertState.COMPOSING}),
    AlertState.COMPOSING: frozenset({AlertState.DISPATCHING, AlertState.FAILED}),
    AlertState.DISPATCHING: frozenset(TERMINAL_STATES),
    AlertState.DELIVERED: frozenset(),
    AlertState.PARTIALLY_DELIVERED: frozenset(),
    AlertState.FAILED: frozenset(),
}


class AlertError(Exception):
    pass


class InvalidTrigger(AlertError):
    pass


class IllegalTransition(AlertError):
    def __init__(self, state: AlertState, event: PipelineEvent) -> None:
        super().__init__(f"no transition from {state.value} on {event.value}")
        self.state = state
        self.event = event


class AlreadyAcknowledged(AlertError):
    pass


class NoContactsRegistered(AlertError):
    pass


@dataclass(frozen=True)
class TriggerRequest:
    trigger_id: str
    device_id: str
    triggered_at: int  # UTC ms
    fix: GpsFix | None = None
    cell: CellKey | None = None

    def __post_init__(self) -> None:
        if not self.trigger_id:
            raise InvalidTrigger("trigger_id is empty")
        if len(self.trigger_id) > MAX_TRIGGER_ID_CHARS:
            raise InvalidTrigger(f"trigger_id longer than {MAX_TRIGGER_ID_CHARS} chars")
        if not self.device_id:
            raise InvalidTrigger("device_id is empty")
        if self.triggered_at <= 0:
            raise InvalidTrigger("triggered_at must be > 0")


@dataclass
class Alert:
    alert_id: str
    trigger: TriggerRequest
    state: AlertState
    location: ResolvedLocation | None = None
    place_text: str | None = None
    message: MessageText | None = None
    deliveries: list[DeliveryRecord] = field(default_factory=list)
    acknowledged_by: tuple[str, int] | None = None
    state_history: list[tuple[AlertState, int]] = field(default_factory=list)
    failure_reason: str | None = None

    @property
    def terminal(self) -> bool:
        return self.state in TERMINAL_STATES


def transition(state: AlertState, event: PipelineEvent) -> AlertState:
    """Next state for a (state, event) pair, or IllegalTransition."""
    nxt = _TRANSITIONS.get((state, event))
    if nxt is None:
        raise IllegalTransition(state, event)
    return nxt


def legal_history(history: list[tuple[AlertState, int]]) -> bool:
    """True iff the history starts at Triggered, timestamps never decrease,
    and every consecutive state pair is reachable."""
    if not history or history[0][0] is not AlertState.TRIGGERED:
        return False
    for (prev_state, prev_at), (state, at) in zip(history, history[1:]):
        if at < prev_at:
            return False
        if state not in _HISTORY_SUCCESSORS[prev_state]:
            return False
    return True


def create_alert(trigger: TriggerRequest, now: int, alert_id: str) -> Alert:
    """New alert in state Triggered with an empty delivery list."""
    return Alert(
        alert_id=alert_id,
        trigger=trigger,
        state=AlertState.TRIGGERED,
        state_history=[(AlertState.TRIGGERED, now)],
    )


def acknowledge(alert: Alert, responder_id: str, now: int) -> Alert:
    """Record which responder took the incident. Metadata only: the delivery
    state machine is unaffected and any state may be acknowledged once."""
    if not responder_id:
        raise InvalidTrigger("responder_id is empty")
    if alert.acknowledged_by is not None:
        raise AlreadyAcknowledged(f"alert {alert.alert_id} already acknowledged")
    alert.acknowledged_by = (responder_id, now)
    return alert


class RegistryView(Protocol):
    def contacts(self, device_id: str) -> list[str]: ...

    def custom_message(self, device_id: str) -> str: ...


class GeoResolver(Protocol):
    def resolve(self, trigger: TriggerRequest) -> tuple[ResolvedLocation, str | None]: ...


Composer = Callable[[str, ResolvedLocation, "str | None"], MessageText]
Dispatcher = Callable[[list[str], MessageText, str], list[DeliveryRecord]]
Observer = Callable[[Alert], None]


def _enter(alert: Alert, state: AlertState, now: int, observer: Observer | None) -> None:
    alert.state = state
    alert.state_history.append((state, now))
    if observer is not None:
        observer(alert)


def run_pipeline(
    alert: Alert,
    registry_view: RegistryView,
    geo_service: GeoResolver,
    composer: Composer,
    dispatcher: Dispatcher,
    clock: Callable[[], int],
    observer: Observer | None = None,
) -> Alert:
    """Drive a freshly triggered alert to a terminal state.

    Location resolution that comes back empty still proceeds to composition
    and dispatch. A device without contacts is recorded as Failed (reason
    NoContactsRegistered) after composing, without entering Dispatching, so
    the incident stays visible instead of being dropped.
    """
    if alert.state is not AlertState.TRIGGERED:
        raise IllegalTransition(alert.state, PipelineEvent.LOCATION_RESOLVED)

    _enter(alert, AlertState.LOCATING, clock(), observer)
    location, place_string = geo_service.resolve(alert.trigger)
    alert.location = location
    alert.place_text = place_string
    event = (
        PipelineEvent.LOCATION_UNAVAILABLE
        if isinstance(location, Unavailable)
        else PipelineEvent.LOCATION_RESOLVED
    )
    _enter(alert, transition(AlertState.TRIGGERED, event), clock(), observer)

    custom = registry_view.custom_message(alert.trigger.device_id)
    alert.message = composer(custom, location, place_string)

    contacts = registry_view.contacts(alert.trigger.device_id)
    if not contacts:
        alert.failure_reason = NO_CONTACTS_REASON
        _enter(alert, AlertState.FAILED, clock(), observer)
        return alert

    # one Pending record per contact exists from the moment we dispatch
    alert.deliveries = [DeliveryRecord(msisdn=m) for m in contacts]
    _enter(alert, transition(alert.state, PipelineEvent.MESSAGE_COMPOSED), clock(), observer)
    records = dispatcher(contacts, alert.message, alert.alert_id)
    alert.deliveries = records

    succeeded = sum(1 for r in records if r.final_status is DeliveryStatus.SUCCEEDED)
    if succeeded == len(records):
        event = PipelineEvent.DISPATCH_ALL_OK
    elif succeeded == 0:
        event = PipelineEvent.DISPATCH_ALL_FAILED
        alert.failure_reason = "AllDeliveriesFailed"
    else:
        event = PipelineEvent.DISPATCH_PARTIAL
    _enter(alert, transition(alert.state, event), clock(), observer)
    return alert
