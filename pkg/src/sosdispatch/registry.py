"""Persistent store of devices, their emergency contacts, and their custom
message. Single-writer, multi-reader: mutations are serialized behind one
lock; readers get consistent copies.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field

SNAPSHOT_VERSION = 1
MAX_CONTACTS = 20
MAX_CUSTOM_MESSAGE_CHARS = 200
DEFAULT_CUSTOM_MESSAGE = "EMERGENCY! I need help."

_DEVICE_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_MSISDN_RE = re.compile(r"^\+\d{8,15}$")
_SEPARATORS = str.maketrans("", "", " -()")


class RegistryError(Exception):
    pass


class MissingPlus(RegistryError):
    pass


class BadLength(RegistryError):
    pass


class BadCharacter(RegistryError):
    pass


class BadDeviceId(RegistryError):
    pass


class UnknownDevice(RegistryError):
    pass


class UnknownContact(RegistryError):
    pass


class DuplicateContact(RegistryError):
    pass


class ContactLimitReached(RegistryError):
    pass


class EmptyMessage(RegistryError):
    pass


class MessageTooLong(RegistryError):
    pass


class CorruptSnapshot(RegistryError):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


def validate_msisdn(raw: str) -> str:
    """Normalize to E.164: strip spaces/hyphens/parens, require '+' then 8-15 digits."""
    cleaned = raw.translate(_SEPARATORS)
    if not cleaned.startswith("+"):
        raise MissingPlus(f"{raw!r} must start with '+'")
    digits = cleaned[1:]
    if not digits.isascii() or not digits.isdigit():
        raise BadCharacter(f"{raw!r} contains non-digit characters")
    if not 8 <= len(digits) <= 15:
        raise BadLength(f"{raw!r} has {len(digits)} digits, need 8-15")
    return cleaned


@dataclass(frozen=True)
class Contact:
    msisdn: str
    label: str
    added_at: int


@dataclass
class DeviceProfile:
    device_id: str
    contacts: list[Contact] = field(default_factory=list)
    custom_message: str = DEFAULT_CUSTOM_MESSAGE
    created_at: int = 0


class Registry:
    """In-memory device/contact store with an atomic JSON snapshot on disk."""

    def __init__(self) -> None:
        self._devices: dict[str, DeviceProfile] = {}
        self._lock = threading.RLock()

    def register_device(self, device_id: str, now: int) -> DeviceProfile:
        """Create a profile with no contacts and the default custom message.

        Idempotent: an existing id returns the existing profile unchanged.
        """
        if not _DEVICE_ID_RE.match(device_id):
            raise BadDeviceId(f"{device_id!r} must match [A-Za-z0-9_-]{{1,64}}")
        with self._lock:
            profile = self._devices.get(device_id)
            if profile is None:
                profile = DeviceProfile(device_id=device_id, created_at=now)
                self._devices[device_id] = profile
            return self._copy(profile)

    def has_device(self, device_id: str) -> bool:
        with self._lock:
            return device_id in self._devices

    def get_device(self, device_id: str) -> DeviceProfile:
        with self._lock:
            return self._copy(self._require(device_id))

    def add_contact(self, device_id: str, raw_number: str, label: str, now: int) -> Contact:
        msisdn = validate_msisdn(raw_number)
        with self._lock:
            profile = self._require(device_id)
            if any(c.msisdn == msisdn for c in profile.contacts):
                raise DuplicateContact(f"{msisdn} already registered for {device_id}")
            if len(profile.contacts) >= MAX_CONTACTS:
                raise ContactLimitReached(f"device {device_id} already has {MAX_CONTACTS} contacts")
            contact = Contact(msisdn=msisdn, label=label, added_at=now)
            profile.contacts.append(contact)
            return contact

    def remove_contact(self, device_id: str, msisdn: str) -> Contact:
        with self._lock:
            profile = self._require(device_id)
            for i, contact in enumerate(profile.contacts):
                if contact.msisdn == msisdn:
                    return profile.contacts.pop(i)
            raise UnknownContact(f"{msisdn} not registered for {device_id}")

    def set_custom_message(self, device_id: str, text: str) -> None:
        trimmed = text.strip()
        if not trimmed:
            raise EmptyMessage("custom message is empty after trimming")
        if len(trimmed) > MAX_CUSTOM_MESSAGE_CHARS:
            raise MessageTooLong(
                f"custom message is {len(trimmed)} chars (max {MAX_CUSTOM_MESSAGE_CHARS})"
            )
        with self._lock:
            self._require(device_id).custom_message = trimmed

    def contacts(self, device_id: str) -> list[Contact]:
        with self._lock:
            return list(self._require(device_id).contacts)

    def custom_message(self, device_id: str) -> str:
        with self._lock:
            return self._require(device_id).custom_message

    def device_ids(self) -> list[str]:
        with self._lock:
            return list(self._devices)

    def _require(self, device_id: str) -> DeviceProfile:
        profile = self._devices.get(device_id)
        if profile is None:
            raise UnknownDevice(f"no device {device_id!r}")
        return profile

    @staticmethod
    def _copy(profile: DeviceProfile) -> DeviceProfile:
        return DeviceProfile(
            device_id=profile.device_id,
            contacts=list(profile.contacts),
            custom_message=profile.custom_message,
            created_at=profile.created_at,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return self._devices == other._devices

    # -- snapshot ----------------------------------------------------------

    def to_snapshot(self) -> dict:
        with self._lock:
            return {
                "v": SNAPSHOT_VERSION,
                "devices": [
                    {
                        "device_id": p.device_id,
                        "created_at": p.created_at,
                        "custom_message": p.custom_message,
                        "contacts": [
                            {"msisdn": c.msisdn, "label": c.label, "added_at": c.added_at}
                            for c in p.contacts
                        ],
                    }
                    for p in self._devices.values()
                ],
            }


def save_snapshot(store: Registry, path: str) -> None:
    """Write the store atomically: temp file in the same directory, fsync,
    then rename over the target. A crash leaves either the old or the new
    snapshot, never a hybrid."""
    payload = json.dumps(store.to_snapshot(), ensure_ascii=False, indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".registry-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        try:
            os.unlink(tmp_path)
        except OSError:
            pass
        raise


def load_snapshot(path: str) -> Registry:
    """Load a snapshot written by save_snapshot.

    Unknown JSON fields are ignored for forward compatibility; structural
    damage raises CorruptSnapshot.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = handle.read()
    except OSError as exc:
        raise CorruptSnapshot(f"cannot read snapshot: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptSnapshot("top-level value is not an object")
    if doc.get("v") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"unsupported snapshot version {doc.get('v')!r}")
    devices = doc.get("devices")
    if not isinstance(devices, list):
        raise CorruptSnapshot("'devices' is missing or not a list")

    store = Registry()
    for i, entry in enumerate(devices):
        if not isinstance(entry, dict):
            raise CorruptSnapshot(f"devices[{i}] is not an object")
        try:
            device_id = entry["device_id"]
            created_at = entry["created_at"]
            custom_message = entry["custom_message"]
            raw_contacts = entry["contacts"]
            contacts = [
                Contact(msisdn=c["msisdn"], label=c["label"], added_at=c["added_at"])
                for c in raw_contacts
            ]
        except (KeyError, TypeError) as exc:
            raise CorruptSnapshot(f"devices[{i}] is malformed: {exc!r}") from exc
        if not isinstance(device_id, str) or not isinstance(custom_message, str):
            raise CorruptSnapshot(f"devices[{i}] has wrong field types")
        profile = DeviceProfile(
            device_id=device_id,
            contacts=contacts,
            custom_message=custom_message,
            created_at=created_at,
        )
        with store._lock:
            if device_id in store._devices:
                raise CorruptSnapshot(f"duplicate device_id {device_id!r}")
            store._devices[device_id] = profile
    return store
