"""SMS transport: pluggable backends (deterministic mock, HTTP provider),
per-segment retry with exponential backoff, and the per-contact fan-out that
produces delivery records.

Failures are values, never exceptions: a backend returns Accepted,
TransientFailure, or PermanentFailure and the fan-out records what happened.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol

import httpx

from .message import EncodedSms, SmsSegment, decode_segment

DEFAULT_MAX_IN_FLIGHT = 8


class OutcomeKind(str, Enum):
    ACCEPTED = "accepted"
    TRANSIENT_FAILURE = "transient_failure"
    PERMANENT_FAILURE = "permanent_failure"


@dataclass(frozen=True)
class SendOutcome:
    kind: OutcomeKind
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.kind is OutcomeKind.ACCEPTED


ACCEPTED = SendOutcome(OutcomeKind.ACCEPTED)


def transient(reason: str) -> SendOutcome:
    return SendOutcome(OutcomeKind.TRANSIENT_FAILURE, reason)


def permanent(reason: str) -> SendOutcome:
    return SendOutcome(OutcomeKind.PERMANENT_FAILURE, reason)


class DeliveryStatus(str, Enum):
    PENDING = "pending"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


@dataclass(frozen=True)
class SendRequest:
    msisdn: str
    encoded: EncodedSms  # the segment(s) carried by this send
    idempotency_key: str


@dataclass(frozen=True)
class DeliveryAttempt:
    attempt_no: int  # 1-based, per segment
    at: int  # UTC ms
    outcome: SendOutcome
    segment_seq: int = 1


@dataclass
class DeliveryRecord:
    msisdn: str
    attempts: list[DeliveryAttempt] = field(default_factory=list)
    final_status: DeliveryStatus = DeliveryStatus.PENDING


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 4
    base_delay_ms: int = 500
    factor: int = 2
    cap_ms: int = 8000

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.base_delay_ms < 0:
            raise ValueError("base_delay_ms must be >= 0")


def next_retry_delay(policy: RetryPolicy, attempt_no: int) -> int:
    """Delay before the retry following attempt attempt_no. Deterministic,
    no jitter: min(cap, base * factor^(attempt_no - 1))."""
    return min(policy.cap_ms, policy.base_delay_ms * policy.factor ** (attempt_no - 1))


class Clock(Protocol):
    def now_ms(self) -> int: ...

    def sleep_ms(self, ms: int) -> None: ...


class SystemClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)

    def sleep_ms(self, ms: int) -> None:
        if ms > 0:
            time.sleep(ms / 1000)


class SmsBackend(Protocol):
    """Must be safe for concurrent send_sms calls."""

    def send_sms(self, req: SendRequest) -> SendOutcome: ...


def send_sms(backend: SmsBackend, req: SendRequest) -> SendOutcome:
    return backend.send_sms(req)


@dataclass(frozen=True)
class DeliveredMessage:
    msisdn: str
    charset: str
    segment: SmsSegment
    text: str
    idempotency_key: str


class MockSmsBackend:
    """Deterministic in-memory backend.

    A per-msisdn failure plan scripts the outcomes to return in order; once
    exhausted every send is Accepted. An idempotency table replays Accepted
    for keys already delivered without appending a duplicate message.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._plans: dict[str, list[SendOutcome]] = {}
        self._accepted_keys: set[str] = set()
        self._delivered: list[DeliveredMessage] = []

    def script_failures(self, msisdn: str, outcomes: list[SendOutcome]) -> None:
        with self._lock:
            self._plans[msisdn] = list(outcomes)

    def clear(self) -> None:
        with self._lock:
            self._plans.clear()
            self._accepted_keys.clear()
            self._delivered.clear()

    def send_sms(self, req: SendRequest) -> SendOutcome:
        with self._lock:
            if req.idempotency_key in self._accepted_keys:
                return ACCEPTED
            plan = self._plans.get(req.msisdn)
            if plan:
                outcome = plan.pop(0)
                if not outcome.accepted:
                    return outcome
            self._accepted_keys.add(req.idempotency_key)
            for segment in req.encoded.segments:
                self._delivered.append(
                    DeliveredMessage(
                        msisdn=req.msisdn,
                        charset=req.encoded.charset.value,
                        segment=segment,
                        text=decode_segment(req.encoded.charset, segment),
                        idempotency_key=req.idempotency_key,
                    )
                )
            return ACCEPTED

    def delivered(self, msisdn: str | None = None) -> list[DeliveredMessage]:
        with self._lock:
            return [m for m in self._delivered if msisdn is None or m.msisdn == msisdn]

    def delivered_texts(self, msisdn: str) -> list[str]:
        """Full message texts for one recipient, concatenated segments in
        seq order per concat reference."""
        with self._lock:
            singles = [m for m in self._delivered if m.msisdn == msisdn and m.segment.udh is None]
            groups: dict[int, list[DeliveredMessage]] = {}
            for m in self._delivered:
                if m.msisdn == msisdn and m.segment.udh is not None:
                    groups.setdefault(m.segment.concat_ref, []).append(m)
        texts = [m.text for m in singles]
        for ref in sorted(groups):
            parts = sorted(groups[ref], key=lambda m: m.segment.seq)
            texts.append("".join(p.text for p in parts))
        return texts


@dataclass(frozen=True)
class HttpProviderConfig:
    endpoint: str
    bearer_token: str
    timeout_s: float = 5.0


class HttpSmsBackend:
    """Client for an HTTP SMS provider.

    POSTs {to, charset, segments: [{udh_hex, payload_hex}], idempotency_key}.
    2xx maps to Accepted, 429 and 5xx to TransientFailure, other statuses to
    PermanentFailure; timeouts and connection errors are transient.
    Provider-side idempotency is best-effort via the forwarded key.
    """

    def __init__(self, config: HttpProviderConfig, client: httpx.Client | None = None) -> None:
        self._config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def send_sms(self, req: SendRequest) -> SendOutcome:
        body = {
            "to": req.msisdn,
            "charset": req.encoded.charset.value,
            "segments": [
                {
                    "udh_hex": seg.udh.hex() if seg.udh else "",
                    "payload_hex": seg.payload.hex(),
                }
                for seg in req.encoded.segments
            ],
            "idempotency_key": req.idempotency_key,
        }
        headers = {"Authorization": f"Bearer {self._config.bearer_token}"}
        try:
            response = self._client.post(self._config.endpoint, json=body, headers=headers)
        except httpx.TimeoutException:
            return transient("timeout")
        except httpx.HTTPError as exc:
            return transient(f"backend unreachable: {exc}")
        if 200 <= response.status_code < 300:
            return ACCEPTED
        if response.status_code == 429 or response.status_code >= 500:
            return transient(f"status {response.status_code}")
        return permanent(f"status {response.status_code}")


def http_provider_send(config: HttpProviderConfig, req: SendRequest) -> SendOutcome:
    return HttpSmsBackend(config).send_sms(req)


def _send_to_contact(
    msisdn: str,
    encoded: EncodedSms,
    backend: SmsBackend,
    policy: RetryPolicy,
    clock: Clock,
    key_prefix: str,
) -> DeliveryRecord:
    record = DeliveryRecord(msisdn=msisdn)
    for segment in encoded.segments:
        per_segment = EncodedSms(encoded.charset, (segment,))
        req = SendRequest(
            msisdn=msisdn,
            encoded=per_segment,
            idempotency_key=f"{key_prefix}:{msisdn}:{segment.seq}",
        )
        segment_ok = False
        for attempt_no in range(1, policy.max_attempts + 1):
            outcome = backend.send_sms(req)
            record.attempts.append(
                DeliveryAttempt(
                    attempt_no=attempt_no,
                    at=clock.now_ms(),
                    outcome=outcome,
                    segment_seq=segment.seq,
                )
            )
            if outcome.accepted:
                segment_ok = True
                break
            if outcome.kind is OutcomeKind.PERMANENT_FAILURE:
                break
            if attempt_no < policy.max_attempts:
                clock.sleep_ms(next_retry_delay(policy, attempt_no))
        if not segment_ok:
            record.final_status = DeliveryStatus.FAILED
            return record
    record.final_status = DeliveryStatus.SUCCEEDED
    return record


def dispatch_fanout(
    contacts: list[str],
    encoded: EncodedSms,
    backend: SmsBackend,
    policy: RetryPolicy,
    clock: Clock,
    key_prefix: str = "",
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
) -> list[DeliveryRecord]:
    """Send every segment to every contact, in segment order per contact.

    Transient failures retry per policy, a permanent failure stops that
    contact immediately, and one contact's failures never block another.
    Records come back in contact order, one per contact.
    """
    if not contacts:
        return []
    workers = max(1, min(max_in_flight, len(contacts)))
    if workers == 1:
        return [
            _send_to_contact(msisdn, encoded, backend, policy, clock, key_prefix)
            for msisdn in contacts
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_send_to_contact, msisdn, encoded, backend, policy, clock, key_prefix)
            for msisdn in contacts
        ]
        return [f.result() for f in futures]
