"""Alert event fan-out for the live feed.

A bounded ring buffer keeps the most recent events for replay on connect;
each subscriber gets its own bounded queue (drop-oldest on overflow) so a
slow console can never block the pipeline.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum

REPLAY_SIZE = 50
SUBSCRIBER_BUFFER = 256


class EventKind(str, Enum):
    CREATED = "created"
    STATE_CHANGED = "state_changed"
    ACKNOWLEDGED = "acknowledged"


@dataclass(frozen=True)
class AlertEvent:
    seq: int
    kind: EventKind
    at: int  # UTC ms
    alert: dict  # public alert view (numbers already masked)

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind.value, "at": self.at, "alert": self.alert}


class Subscriber:
    def __init__(self, buffer_size: int = SUBSCRIBER_BUFFER) -> None:
        self._queue: deque[AlertEvent] = deque(maxlen=buffer_size)
        self._cond = threading.Condition()

    def push(self, event: AlertEvent) -> None:
        with self._cond:
            self._queue.append(event)  # deque drops the oldest when full
            self._cond.notify()

    def next(self, timeout_s: float) -> AlertEvent | None:
        """Next event, or None when the timeout elapses (heartbeat time)."""
        with self._cond:
            if not self._queue:
                self._cond.wait(timeout_s)
            if self._queue:
                return self._queue.popleft()
            return None


class EventBus:
    def __init__(self, replay_size: int = REPLAY_SIZE, buffer_size: int = SUBSCRIBER_BUFFER) -> None:
        self._lock = threading.Lock()
        self._ring: deque[AlertEvent] = deque(maxlen=replay_size)
        self._subscribers: list[Subscriber] = []
        self._seq = 0
        self._buffer_size = buffer_size

    def publish(self, kind: EventKind, alert_view: dict, at: int) -> AlertEvent:
        # Pushing under the lock keeps every subscriber's stream in global
        # seq order; push itself is a bounded deque append, never blocking.
        with self._lock:
            self._seq += 1
            event = AlertEvent(seq=self._seq, kind=kind, at=at, alert=alert_view)
            self._ring.append(event)
            for sub in self._subscribers:
                sub.push(event)
        return event

    def subscribe(self) -> tuple[list[AlertEvent], Subscriber]:
        """Register a subscriber and atomically snapshot the replay ring, so
        the replay plus the live queue is gap-free and duplicate-free."""
        sub = Subscriber(self._buffer_size)
        with self._lock:
            replay = list(self._ring)
            self._subscribers.append(sub)
        return replay, sub

    def unsubscribe(self, sub: Subscriber) -> None:
        with self._lock:
            try:
                self._subscribers.remove(sub)
            except ValueError:
                pass

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return len(self._subscribers)
