"""City gazetteer ingestion and point-to-city resolution.

Gazetteer rows are tab separated::

    city_id  name  country  lat  lon  population

and the companion bbox file holds ``city_id  min_lat  min_lon  max_lat  max_lon``.
Bad rows are counted in a :class:`ParseReport` and skipped; they never abort
the stream.
"""

from __future__ import annotations

import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Optional, Sequence, Union

from .geo import BBox, GeoPoint, bbox_around, haversine_km
from .geoindex import GeoIndex

DEFAULT_BBOX_HALF_DEG = 0.1
DEFAULT_FALLBACK_KM = 30.0

_COUNTRY = re.compile(r"^[A-Z]{2}$")

Source = Union[bytes, str, BinaryIO, io.TextIOBase]


@dataclass(frozen=True)
class CityRecord:
    city_id: str
    name: str
    country: str
    center: GeoPoint
    population: int
    bbox: BBox


@dataclass
class ParseReport:
    accepted: int = 0
    rejected: int = 0
    reasons: Counter = field(default_factory=Counter)
    problems: list = field(default_factory=list)

    def reject(self, where: str, lineno: int, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] += 1
        self.problems.append((where, lineno, reason))

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected,
                "reasons": dict(sorted(self.reasons.items()))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class RowError(ValueError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _iter_rows(src: Optional[Source]) -> Iterator[tuple[int, Optional[list[str]]]]:
    """(line number, fields) for data lines; fields is None for undecodable bytes."""
    if src is None:
        return
    if isinstance(src, (bytes, bytearray)):
        src = io.BytesIO(src)
    elif isinstance(src, str):
        src = io.StringIO(src)
    for lineno, raw in enumerate(src, 1):
        if isinstance(raw, (bytes, bytearray)):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                yield lineno, None
                continue
        else:
            line = raw
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        yield lineno, line.split("\t")


def _float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise RowError("malformed-number") from None
    if not math.isfinite(v):
        raise RowError("malformed-number")
    return v


def _int(s: str) -> int:
    try:
        return int(s.strip())
    except ValueError:
        raise RowError("malformed-number") from None


def _check_lat(v: float) -> float:
    if not -90.0 <= v <= 90.0:
        raise RowError("coordinate-out-of-range")
    return v


def _check_lon(v: float) -> float:
    if not -180.0 <= v <= 180.0:
        raise RowError("coordinate-out-of-range")
    return v


def _parse_bbox_row(fields: list[str]) -> tuple[str, BBox]:
    if len(fields) != 5:
        raise RowError("arity")
    cid = fields[0].strip()
    if not cid:
        raise RowError("empty-id")
    min_lat, min_lon, max_lat, max_lon = (_float(f) for f in fields[1:])
    box = BBox(_check_lat(min_lat), _check_lon(min_lon), _check_lat(max_lat), _check_lon(max_lon))
    if box.min_lat > box.max_lat:
        raise RowError("inverted-latitudes")
    return cid, box


def _parse_city_row(fields: list[str]) -> tuple[str, str, str, GeoPoint, int]:
    if len(fields) != 6:
        raise RowError("arity")
    cid, name, country = fields[0].strip(), fields[1], fields[2].strip()
    if not cid:
        raise RowError("empty-id")
    lat, lon = _float(fields[3]), _float(fields[4])
    population = _int(fields[5])
    center = GeoPoint(_check_lat(lat), _check_lon(lon))
    if population < 1:
        raise RowError("population-below-1")
    if not _COUNTRY.match(country):
        raise RowError("bad-country")
    return cid, name, country, center, population


def parse_gazetteer(stream: Source, bbox_stream: Optional[Source] = None,
                    default_half_deg: float = DEFAULT_BBOX_HALF_DEG) -> tuple[list[CityRecord], ParseReport]:
    """Parse gazetteer + bbox TSV into city records, in file order.

    Bbox-file rejections are reported with a ``bbox-`` prefixed reason; a city
    without a usable bbox row gets a +-``default_half_deg`` square around its
    center.  A bbox that does not contain its city's center rejects the city.
    """
    report = ParseReport()
    boxes: dict[str, BBox] = {}
    for lineno, fields in _iter_rows(bbox_stream):
        try:
            if fields is None:
                raise RowError("encoding")
            cid, box = _parse_bbox_row(fields)
            if cid in boxes:
                raise RowError("duplicate-id")
        except RowError as e:
            report.reject("bbox", lineno, "bbox-" + e.reason)
            continue
        boxes[cid] = box

    records: list[CityRecord] = []
    seen: set[str] = set()
    for lineno, fields in _iter_rows(stream):
        try:
            if fields is None:
                raise RowError("encoding")
            cid, name, country, center, population = _parse_city_row(fields)
            if cid in seen:
                raise RowError("duplicate-id")
            box = boxes.get(cid) or bbox_around(center, default_half_deg)
            if not box.contains(center):
                raise RowError("bbox-excludes-center")
        except RowError as e:
            report.reject("gazetteer", lineno, e.reason)
            continue
        seen.add(cid)
        records.append(CityRecord(cid, name, country, center, population, box))
        report.accepted += 1
    return records, report


def write_gazetteer(cities: Sequence[CityRecord]) -> tuple[str, str]:
    """Serialize records back to (gazetteer TSV, bbox TSV) text."""
    g = io.StringIO()
    b = io.StringIO()
    for c in cities:
        g.write(f"{c.city_id}\t{c.name}\t{c.country}\t{c.center.lat!r}\t{c.center.lon!r}\t{c.population}\n")
        bx = c.bbox
        b.write(f"{c.city_id}\t{bx.min_lat!r}\t{bx.min_lon!r}\t{bx.max_lat!r}\t{bx.max_lon!r}\n")
    return g.getvalue(), b.getvalue()


def resolve_city(p: GeoPoint, cities: Sequence[CityRecord], index: Optional[GeoIndex] = None,
                 fallback_km: float = DEFAULT_FALLBACK_KM) -> Optional[str]:
    """City for a point: smallest containing bbox, else nearest center within ``fallback_km``.

    With an index, its own fallback radius applies; without one every city is scanned.
    """
    if index is not None:
        return index.resolve(p)
    inside = [c for c in cities if c.bbox.contains(p)]
    if inside:
        return min(inside, key=lambda c: (c.bbox.solid_angle(), c.city_id)).city_id
    best = None
    for c in cities:
        d = haversine_km(p, c.center)
        if d <= fallback_km and (best is None or (d, c.city_id) < best):
            best = (d, c.city_id)
    return best[1] if best else None
