"""Outgoing alert text: composition from the stored custom message plus the
resolved location, and encoding into SMS wire segments (GSM 03.38 7-bit or
UCS-2, with concatenation headers when the text spans several messages).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .geo import Approximate, Exact, ResolvedLocation, Unavailable, format_coord
from .gsm0338 import (
    Charset,
    detect_charset,
    gsm7_encode,
    pack_septets,
    septet_cost,
    to_septets,
)

MAX_MESSAGE_CHARS = 1000

# Septet budget of a single SMS, and of one segment of a concatenated SMS
# (a 6-byte concat UDH plus its fill bit occupies 7 septets).
GSM7_SINGLE_LIMIT = 160
GSM7_CONCAT_LIMIT = 153
# UCS-2 limits in 16-bit code units: 140 / 134 octets of user data.
UCS2_SINGLE_LIMIT = 70
UCS2_CONCAT_LIMIT = 67

MAX_SEGMENTS = 255

_default_rng = random.Random()


class MessageTooLong(Exception):
    def __init__(self, length: int) -> None:
        super().__init__(f"composed message is {length} chars (max {MAX_MESSAGE_CHARS})")
        self.length = length


class TooManySegments(Exception):
    def __init__(self, count: int) -> None:
        super().__init__(f"message needs {count} segments (max {MAX_SEGMENTS})")
        self.count = count


@dataclass(frozen=True)
class MessageText:
    text: str
    composed_from: tuple[str, str]  # (custom message, location kind)


@dataclass(frozen=True)
class SmsSegment:
    """One wire segment: optional concatenation UDH plus the packed payload.

    ``septet_or_char_count`` is septets for GSM-7 payloads and 16-bit code
    units for UCS-2 payloads; decoders need it because packing pads to octet
    boundaries.
    """

    udh: bytes | None
    payload: bytes
    septet_or_char_count: int

    @property
    def seq(self) -> int:
        return self.udh[5] if self.udh else 1

    @property
    def total(self) -> int:
        return self.udh[4] if self.udh else 1

    @property
    def concat_ref(self) -> int | None:
        return self.udh[3] if self.udh else None


@dataclass(frozen=True)
class EncodedSms:
    charset: Charset
    segments: tuple[SmsSegment, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.segments) <= MAX_SEGMENTS:
            raise ValueError(f"segment count {len(self.segments)} out of range 1..{MAX_SEGMENTS}")
        if len(self.segments) > 1:
            refs = {seg.concat_ref for seg in self.segments}
            if len(refs) != 1 or None in refs:
                raise ValueError("concatenated segments must share one reference")


def location_kind(location: ResolvedLocation) -> str:
    if isinstance(location, Exact):
        return "exact"
    if isinstance(location, Approximate):
        return "approximate"
    return "unavailable"


def compose(custom: str, location: ResolvedLocation, place_string: str | None = None) -> MessageText:
    """Build the outgoing alert text.

    With a position: "<custom> Longitude:<lon> Latitude:<lat>", then
    " Near: <place>" when a place is known, then " (approx., cell area)" for
    cell-derived positions. Without one: "<custom> Location unavailable".
    """
    if isinstance(location, Unavailable):
        text = f"{custom} Location unavailable"
    else:
        lon = format_coord(location.point.lon)
        lat = format_coord(location.point.lat)
        text = f"{custom} Longitude:{lon} Latitude:{lat}"
        if place_string:
            text += f" Near: {place_string}"
        if isinstance(location, Approximate):
            text += " (approx., cell area)"
    if len(text) > MAX_MESSAGE_CHARS:
        raise MessageTooLong(len(text))
    return MessageText(text=text, composed_from=(custom, location_kind(location)))


def _concat_udh(ref: int, total: int, seq: int) -> bytes:
    # UDHL 05, IEI 00 (8-bit concat), IEDL 03, then ref/total/seq.
    return bytes((0x05, 0x00, 0x03, ref & 0xFF, total & 0xFF, seq & 0xFF))


def _split_gsm7(text: str) -> list[str]:
    chunks: list[str] = []
    current: list[str] = []
    used = 0
    for ch in text:
        cost = septet_cost(ch)
        if used + cost > GSM7_CONCAT_LIMIT:
            chunks.append("".join(current))
            current = [ch]
            used = cost
        else:
            current.append(ch)
            used += cost
    chunks.append("".join(current))
    return chunks


def _ucs2_units(ch: str) -> int:
    # Astral characters occupy a surrogate pair on the wire.
    return 2 if ord(ch) > 0xFFFF else 1


def _split_ucs2(text: str) -> list[str]:
    chunks: list[str] = []
    current: list[str] = []
    used = 0
    for ch in text:
        cost = _ucs2_units(ch)
        if used + cost > UCS2_CONCAT_LIMIT:
            chunks.append("".join(current))
            current = [ch]
            used = cost
        else:
            current.append(ch)
            used += cost
    chunks.append("".join(current))
    return chunks


def segment_message(text: str, rng: random.Random | None = None) -> EncodedSms:
    """Encode text into one or more wire segments.

    GSM-7 texts costing <= 160 septets yield one UDH-less segment; longer
    texts split greedily into <= 153-septet segments (a character's septets
    never straddle segments) sharing one random 8-bit concat reference.
    UCS-2 uses the 70/67 code-unit limits with the same rule for surrogate
    pairs.
    """
    charset = detect_charset(text)
    if charset is Charset.GSM7:
        total_cost = sum(septet_cost(ch) for ch in text)
        if total_cost <= GSM7_SINGLE_LIMIT:
            payload, count = gsm7_encode(text)
            return EncodedSms(charset, (SmsSegment(None, payload, count),))
        parts = _split_gsm7(text)
    else:
        total_cost = sum(_ucs2_units(ch) for ch in text)
        if total_cost <= UCS2_SINGLE_LIMIT:
            return EncodedSms(charset, (SmsSegment(None, text.encode("utf-16-be"), total_cost),))
        parts = _split_ucs2(text)

    if len(parts) > MAX_SEGMENTS:
        raise TooManySegments(len(parts))
    ref = (rng or _default_rng).randrange(256)
    segments = []
    for seq, part in enumerate(parts, start=1):
        udh = _concat_udh(ref, len(parts), seq)
        if charset is Charset.GSM7:
            septets = to_septets(part)
            segments.append(SmsSegment(udh, pack_septets(septets), len(septets)))
        else:
            segments.append(SmsSegment(udh, part.encode("utf-16-be"), sum(_ucs2_units(c) for c in part)))
    return EncodedSms(charset, tuple(segments))


def decode_segment(charset: Charset, segment: SmsSegment) -> str:
    """Recover one segment's text; used by the mock transport and tests."""
    if charset is Charset.GSM7:
        from .gsm0338 import gsm7_decode

        return gsm7_decode(segment.payload, segment.septet_or_char_count)
    return segment.payload.decode("utf-16-be")
