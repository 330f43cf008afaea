"""Basic spherical geometry: WGS84 points, bounding boxes, great-circle distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

EARTH_RADIUS_KM = 6371.0088


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    if -180.0 <= lon < 180.0:
        return float(lon)
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped < 0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", normalize_lon(lon))

    def to_xyz(self) -> tuple[float, float, float]:
        return to_xyz(self.lat, self.lon)


def to_xyz(lat: float, lon: float) -> tuple[float, float, float]:
    phi, lam = math.radians(lat), math.radians(lon)
    c = math.cos(phi)
    return (c * math.cos(lam), c * math.sin(lam), math.sin(phi))


def from_xyz(x: float, y: float, z: float) -> GeoPoint:
    """Point for a (not necessarily unit) Cartesian direction."""
    r = math.sqrt(x * x + y * y + z * z)
    if r == 0.0:
        raise ValueError("zero vector has no direction")
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z / r))))
    lon = math.degrees(math.atan2(y, x)) if (x or y) else 0.0
    return GeoPoint(lat, normalize_lon(lon))


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometres."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def spherical_centroid(points: Iterable[GeoPoint]) -> GeoPoint:
    """Normalized mean of unit vectors; immune to antimeridian wrap."""
    sx = sy = sz = 0.0
    n = 0
    for p in points:
        x, y, z = p.to_xyz()
        sx += x
        sy += y
        sz += z
        n += 1
    if n == 0:
        raise ValueError("centroid of no points")
    return from_xyz(sx, sy, sz)


class BBox(NamedTuple):
    """Lat/lon rectangle in degrees. ``min_lon > max_lon`` means it crosses the antimeridian."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    @property
    def lon_width(self) -> float:
        w = self.max_lon - self.min_lon
        return w if w >= 0 else w + 360.0

    def contains_latlon(self, lat: float, lon: float, eps: float = 0.0) -> bool:
        if lat < self.min_lat - eps or lat > self.max_lat + eps:
            return False
        if abs(lat) >= 90.0:
            return True
        off = lon_offset(lon, self.min_lon)
        return off <= self.lon_width + eps or off >= 360.0 - eps

    def contains(self, p: GeoPoint) -> bool:
        return self.contains_latlon(p.lat, p.lon)

    def solid_angle(self) -> float:
        """Area on the unit sphere, in steradians."""
        band = math.sin(math.radians(self.max_lat)) - math.sin(math.radians(self.min_lat))
        return band * math.radians(self.lon_width)

    def corners(self) -> Sequence[tuple[float, float]]:
        return (
            (self.min_lat, self.min_lon),
            (self.min_lat, self.max_lon),
            (self.max_lat, self.max_lon),
            (self.max_lat, self.min_lon),
        )

    def is_point(self) -> bool:
        return self.min_lat == self.max_lat and self.min_lon == self.max_lon


def lon_offset(lon: float, start: float) -> float:
    """Eastward angular offset of ``lon`` from ``start`` in [0, 360)."""
    d = math.fmod(lon - start, 360.0)
    return d + 360.0 if d < 0 else d


def bbox_around(center: GeoPoint, half_deg: float) -> BBox:
    """Square box of +-half_deg around center, clipped at the poles, wrapped in longitude."""
    min_lat = max(-90.0, center.lat - half_deg)
    max_lat = min(90.0, center.lat + half_deg)
    if half_deg >= 180.0:
        return BBox(min_lat, -180.0, max_lat, 180.0)
    return BBox(min_lat, normalize_lon(center.lon - half_deg), max_lat, normalize_lon(center.lon + half_deg))


def disk_bbox(center: GeoPoint, radius_km: float) -> BBox:
    """Smallest lat/lon box containing the spherical cap of ``radius_km`` around center."""
    d = radius_km / EARTH_RADIUS_KM
    d_deg = math.degrees(d)
    if d_deg >= 180.0:
        return BBox(-90.0, -180.0, 90.0, 180.0)
    min_lat = center.lat - d_deg
    max_lat = center.lat + d_deg
    if max_lat >= 90.0 or min_lat <= -90.0:
        return BBox(max(min_lat, -90.0), -180.0, min(max_lat, 90.0), 180.0)
    dlon = math.degrees(math.asin(min(1.0, math.sin(d) / math.cos(math.radians(center.lat)))))
    if dlon >= 180.0:
        return BBox(min_lat, -180.0, max_lat, 180.0)
    return BBox(min_lat, normalize_lon(center.lon - dlon), max_lat, normalize_lon(center.lon + dlon))
