"""Position handling: input validation, great-circle distance, offline reverse
geocoding, and the cell-area fallback used when no GPS fix is available.

Everything here is pure over immutable loaded data. A ``Gazetteer`` and a
``CellDb`` are read-only after parsing and safe to share across threads.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

# IUGG mean Earth radius, km. Fixed so distances are reproducible.
EARTH_RADIUS_KM = 6371.0088

DEFAULT_MAX_FIX_AGE_MS = 120_000
DEFAULT_GEOCODE_RADIUS_KM = 10.0


class StaleFix(Exception):
    """GPS fix older than the freshness bound; downstream treats it as no-GPS."""

    def __init__(self, age_ms: int, max_age_ms: int) -> None:
        super().__init__(f"fix is {age_ms} ms old (max {max_age_ms} ms)")
        self.age_ms = age_ms
        self.max_age_ms = max_age_ms


class ParseError(Exception):
    """Line-numbered parse failure for gazetteer / cell-db files."""

    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class LatLon:
    """A WGS-84 point in decimal degrees. Ranges enforced at construction."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range [-180, 180]")


@dataclass(frozen=True)
class GpsFix:
    point: LatLon
    fixed_at: int  # UTC ms
    accuracy_m: float | None = None

    def __post_init__(self) -> None:
        if self.fixed_at <= 0:
            raise ValueError("fixed_at must be > 0")
        if self.accuracy_m is not None and self.accuracy_m < 0:
            raise ValueError("accuracy_m must be >= 0")


@dataclass(frozen=True)
class CellKey:
    """MCC/MNC/LAC/CID identifying a serving cell."""

    mcc: int
    mnc: int
    lac: int
    cid: int

    def __post_init__(self) -> None:
        if not 0 <= self.mcc <= 999:
            raise ValueError(f"mcc {self.mcc} out of range 0..999")
        if not 0 <= self.mnc <= 999:
            raise ValueError(f"mnc {self.mnc} out of range 0..999")
        if not 0 <= self.lac <= 65535:
            raise ValueError(f"lac {self.lac} out of range 0..65535")
        if self.cid < 0:
            raise ValueError("cid must be >= 0")


@dataclass(frozen=True)
class PlaceRecord:
    place_id: str
    name: str
    admin: str
    country: str
    point: LatLon

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("place name must be non-empty")


@dataclass(frozen=True)
class CellArea:
    point: LatLon
    range_m: float
    label: str


class LocationSource(str, Enum):
    GPS = "gps"
    CELL_AREA = "cell_area"


@dataclass(frozen=True)
class Exact:
    """Position from a fresh GPS fix."""

    point: LatLon
    place: PlaceRecord | None = None
    source: LocationSource = LocationSource.GPS


@dataclass(frozen=True)
class Approximate:
    """Position inferred from the serving cell's known coordinates."""

    point: LatLon
    radius_m: float
    place: PlaceRecord | None = None
    source: LocationSource = LocationSource.CELL_AREA


@dataclass(frozen=True)
class Unavailable:
    """No usable position input; the alert still dispatches."""


ResolvedLocation = Exact | Approximate | Unavailable


class Gazetteer:
    """Immutable list of named places, unique by place_id."""

    def __init__(self, records: list[PlaceRecord]) -> None:
        seen: set[str] = set()
        for rec in records:
            if rec.place_id in seen:
                raise ValueError(f"duplicate place_id {rec.place_id!r}")
            seen.add(rec.place_id)
        self._records = tuple(records)

    @property
    def records(self) -> tuple[PlaceRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Gazetteer) and self._records == other._records


class CellDb:
    """Immutable map from CellKey to the cell's known area."""

    def __init__(self, cells: dict[CellKey, CellArea]) -> None:
        self._cells = dict(cells)

    def get(self, key: CellKey) -> CellArea | None:
        return self._cells.get(key)

    def __len__(self) -> int:
        return len(self._cells)


def haversine_km(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in km on a sphere of radius EARTH_RADIUS_KM."""
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def validate_fix(fix: GpsFix, now: int, max_age_ms: int = DEFAULT_MAX_FIX_AGE_MS) -> GpsFix:
    """Return the fix unchanged if its age is within the bound (inclusive).

    Raises StaleFix otherwise; callers fall back to the no-GPS path.
    """
    age = now - fix.fixed_at
    if age > max_age_ms:
        raise StaleFix(age, max_age_ms)
    return fix


def reverse_geocode(
    point: LatLon,
    gazetteer: Gazetteer,
    max_radius_km: float = DEFAULT_GEOCODE_RADIUS_KM,
) -> PlaceRecord | None:
    """Nearest gazetteer record within max_radius_km, or None.

    Ties on distance break by lexicographically smallest name, then smallest
    place_id.
    """
    best: PlaceRecord | None = None
    best_key: tuple[float, str, str] | None = None
    for rec in gazetteer.records:
        key = (haversine_km(point, rec.point), rec.name, rec.place_id)
        if best_key is None or key < best_key:
            best, best_key = rec, key
    if best is None or best_key is None or best_key[0] > max_radius_km:
        return None
    return best


def resolve_cell(cell: CellKey, db: CellDb) -> CellArea | None:
    """Exact-key lookup of the serving cell's area; no interpolation."""
    return db.get(cell)


def render_place(place: PlaceRecord) -> str:
    """Human-readable place string: name, admin hierarchy, country."""
    return ", ".join(part for part in (place.name, place.admin, place.country) if part)


def _parse_coord(raw: str, low: float, high: float, what: str, line_no: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(line_no, f"{what} {raw!r} is not a number") from None
    if not math.isfinite(value) or not low <= value <= high:
        raise ParseError(line_no, f"{what} {raw!r} out of range [{low}, {high}]")
    return value


def parse_gazetteer(data: bytes | str) -> Gazetteer:
    """Parse the gazetteer TSV: place_id, name, admin, country, lat, lon.

    Blank lines and '#' comments are skipped. Any malformed line raises a
    line-numbered ParseError.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    records: list[PlaceRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 6:
            raise ParseError(line_no, f"expected 6 tab-separated fields, got {len(fields)}")
        place_id, name, admin, country, lat_raw, lon_raw = fields
        if not place_id:
            raise ParseError(line_no, "empty place_id")
        if place_id in seen:
            raise ParseError(line_no, f"duplicate place_id {place_id!r}")
        if not name:
            raise ParseError(line_no, "empty name")
        lat = _parse_coord(lat_raw, -90.0, 90.0, "lat", line_no)
        lon = _parse_coord(lon_raw, -180.0, 180.0, "lon", line_no)
        seen.add(place_id)
        records.append(PlaceRecord(place_id, name, admin, country, LatLon(lat, lon)))
    return Gazetteer(records)


def serialize_gazetteer(gazetteer: Gazetteer) -> str:
    """Inverse of parse_gazetteer; parse(serialize(g)) == g."""
    lines = []
    for rec in gazetteer.records:
        lines.append(
            "\t".join(
                (
                    rec.place_id,
                    rec.name,
                    rec.admin,
                    rec.country,
                    format_coord(rec.point.lat),
                    format_coord(rec.point.lon),
                )
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


_CELL_DB_COLUMNS = ["mcc", "mnc", "lac", "cid", "lat", "lon", "range_m", "label"]


def parse_cell_db(data: bytes | str) -> CellDb:
    """Parse the cell-db CSV (header row required): mcc,mnc,lac,cid,lat,lon,range_m,label."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "missing header row") from None
    if [col.strip() for col in header] != _CELL_DB_COLUMNS:
        raise ParseError(1, f"bad header, expected {','.join(_CELL_DB_COLUMNS)}")
    cells: dict[CellKey, CellArea] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 8:
            raise ParseError(line_no, f"expected 8 columns, got {len(row)}")
        try:
            key = CellKey(int(row[0]), int(row[1]), int(row[2]), int(row[3]))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from None
        lat = _parse_coord(row[4], -90.0, 90.0, "lat", line_no)
        lon = _parse_coord(row[5], -180.0, 180.0, "lon", line_no)
        try:
            range_m = float(row[6])
        except ValueError:
            raise ParseError(line_no, f"range_m {row[6]!r} is not a number") from None
        if not math.isfinite(range_m) or range_m < 0:
            raise ParseError(line_no, f"range_m {row[6]!r} must be >= 0")
        if key in cells:
            raise ParseError(line_no, f"duplicate cell key {key}")
        cells[key] = CellArea(LatLon(lat, lon), range_m, row[7])
    return CellDb(cells)


_SIX_DP = Decimal("0.000001")


def format_coord(value: float) -> str:
    """Render a coordinate for display and message composition.

    Rounds half-away-from-zero at 6 decimal places (on the shortest decimal
    representation of the float), trims trailing zeros and a bare decimal
    point, never uses exponent notation, and normalizes "-0" to "0".
    """
    if not math.isfinite(value):
        raise ValueError("coordinate must be finite")
    quantized = Decimal(repr(value)).quantize(_SIX_DP, rounding=ROUND_HALF_UP)
    text = format(quantized, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text
