"""GSM 03.38 default alphabet: charset detection, septet mapping, and the
7-bit packing used on the SMS air interface (8 septets per 7 octets,
LSB-first).

Extension-table characters encode as ESC (0x1B) plus a second septet and
therefore cost 2 septets. National language shift tables are not supported.
"""

from __future__ import annotations

from enum import Enum

ESC = 0x1B

# Basic character set, indexed by septet value. Index 0x1B is the escape
# septet and never maps to a character on its own.
_BASIC = (
    "@£$¥èéùìòÇ\nØø\rÅå"
    "Δ_ΦΓΛΩΠΨΣΘΞ\x1bÆæßÉ"
    " !\"#¤%&'()*+,-./"
    "0123456789:;<=>?"
    "¡ABCDEFGHIJKLMNOPQRSTUVWXYZÄÖÑÜ§"
    "¿abcdefghijklmnopqrstuvwxyzäöñüà"
)

# Extension table: ESC + code -> character.
_EXTENSION = {
    0x0A: "\f",
    0x14: "^",
    0x28: "{",
    0x29: "}",
    0x2F: "\\",
    0x3C: "[",
    0x3D: "~",
    0x3E: "]",
    0x40: "|",
    0x65: "€",
}

_BASIC_TO_SEPTET = {ch: code for code, ch in enumerate(_BASIC) if code != ESC}
_EXT_TO_SEPTET = {ch: code for code, ch in _EXTENSION.items()}

GSM7_CHARS = frozenset(_BASIC_TO_SEPTET) | frozenset(_EXT_TO_SEPTET)


class Charset(str, Enum):
    GSM7 = "gsm7"
    UCS2 = "ucs2"


class NotRepresentable(Exception):
    """Character outside the GSM 03.38 alphabet and extension table."""

    def __init__(self, char: str) -> None:
        super().__init__(f"character {char!r} (U+{ord(char):04X}) is not GSM 03.38")
        self.char = char


class MalformedPacking(Exception):
    """Packed byte length inconsistent with the declared septet count."""


class DanglingEscape(Exception):
    """Septet stream ends on an unpaired ESC."""


def is_gsm7(text: str) -> bool:
    return all(ch in GSM7_CHARS for ch in text)


def detect_charset(text: str) -> Charset:
    """GSM7 iff every character is in the default alphabet or its extension
    table, otherwise UCS2."""
    return Charset.GSM7 if is_gsm7(text) else Charset.UCS2


def to_septets(text: str) -> list[int]:
    """Map text to its septet sequence; extension chars expand to ESC + code."""
    septets: list[int] = []
    for ch in text:
        code = _BASIC_TO_SEPTET.get(ch)
        if code is not None:
            septets.append(code)
            continue
        ext = _EXT_TO_SEPTET.get(ch)
        if ext is None:
            raise NotRepresentable(ch)
        septets.append(ESC)
        septets.append(ext)
    return septets


def septet_cost(ch: str) -> int:
    """Septets one character occupies: 1 for basic, 2 for extension chars."""
    if ch in _BASIC_TO_SEPTET:
        return 1
    if ch in _EXT_TO_SEPTET:
        return 2
    raise NotRepresentable(ch)


def text_septet_cost(text: str) -> int:
    return sum(septet_cost(ch) for ch in text)


def pack_septets(septets: list[int]) -> bytes:
    """Pack 7-bit values LSB-first: each octet takes the low bits of the
    current septet and borrows the next septet's low bits for its high end,
    so 8 septets fill exactly 7 octets."""
    out = bytearray()
    acc = 0
    nbits = 0
    for s in septets:
        acc |= (s & 0x7F) << nbits
        nbits += 7
        while nbits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            nbits -= 8
    if nbits:
        out.append(acc & 0xFF)
    return bytes(out)


def packed_length(septet_count: int) -> int:
    return (septet_count * 7 + 7) // 8


def unpack_septets(packed: bytes, septet_count: int) -> list[int]:
    """Inverse of pack_septets for a known septet count."""
    if len(packed) != packed_length(septet_count):
        raise MalformedPacking(
            f"{septet_count} septets need {packed_length(septet_count)} bytes, got {len(packed)}"
        )
    septets: list[int] = []
    acc = 0
    nbits = 0
    for byte in packed:
        acc |= byte << nbits
        nbits += 8
        while nbits >= 7 and len(septets) < septet_count:
            septets.append(acc & 0x7F)
            acc >>= 7
            nbits -= 7
    if len(septets) != septet_count:
        raise MalformedPacking("byte stream exhausted before septet count")
    return septets


def from_septets(septets: list[int]) -> str:
    """Decode a septet sequence back to text.

    An ESC followed by a code missing from the extension table decodes as the
    basic-table character at that code, per the standard's receiver rule.
    """
    chars: list[str] = []
    i = 0
    n = len(septets)
    while i < n:
        code = septets[i]
        if code == ESC:
            if i + 1 >= n:
                raise DanglingEscape("septet stream ends on ESC")
            nxt = septets[i + 1]
            chars.append(_EXTENSION.get(nxt, _BASIC[nxt]))
            i += 2
        else:
            chars.append(_BASIC[code])
            i += 1
    return "".join(chars)


def gsm7_encode(text: str) -> tuple[bytes, int]:
    """Encode GSM-7 text to (packed bytes, septet count)."""
    septets = to_septets(text)
    return pack_septets(septets), len(septets)


def gsm7_decode(packed: bytes, septet_count: int) -> str:
    """Inverse of gsm7_encode."""
    return from_septets(unpack_septets(packed, septet_count))
