"""Hierarchical Triangular Mesh (HTM) over the unit sphere.

The octahedron uses the canonical layout: poles on +-z, longitude 0 on +x.
Roots are ordered S0..S3, N0..N3 and every trixel is counterclockwise seen
from outside.  Children follow the digit convention

    0 = (v0, m01, m02)   1 = (v1, m12, m01)
    2 = (v2, m02, m12)   3 = (m01, m12, m02)

where ``mij`` is the renormalized midpoint of edge ``vi vj``.  Point location
tests children in digit order with inclusive sidedness and keeps the first
hit, so points on shared edges land in a deterministic trixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np

from .geo import EARTH_RADIUS_KM, BBox, GeoPoint, disk_bbox, haversine_km, lon_offset, to_xyz

if TYPE_CHECKING:
    from .gazetteer import CityRecord

MAX_DEPTH = 30
SIDE_EPS = 1e-12
ROOT_NAMES = ("S0", "S1", "S2", "S3", "N0", "N1", "N2", "N3")

Vec = tuple[float, float, float]

_V0: Vec = (0.0, 0.0, 1.0)
_V1: Vec = (1.0, 0.0, 0.0)
_V2: Vec = (0.0, 1.0, 0.0)
_V3: Vec = (-1.0, 0.0, 0.0)
_V4: Vec = (0.0, -1.0, 0.0)
_V5: Vec = (0.0, 0.0, -1.0)

ROOT_VERTICES: tuple[tuple[Vec, Vec, Vec], ...] = (
    (_V1, _V5, _V2),  # S0
    (_V2, _V5, _V3),  # S1
    (_V3, _V5, _V4),  # S2
    (_V4, _V5, _V1),  # S3
    (_V1, _V0, _V4),  # N0
    (_V4, _V0, _V3),  # N1
    (_V3, _V0, _V2),  # N2
    (_V2, _V0, _V1),  # N3
)


class DepthError(ValueError):
    pass


def _check_depth(depth: int) -> None:
    if not isinstance(depth, (int, np.integer)) or not 0 <= depth <= MAX_DEPTH:
        raise DepthError(f"depth must be an integer in 0..{MAX_DEPTH}, got {depth!r}")


@dataclass(frozen=True, order=True)
class TrixelId:
    root: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.root < 8:
            raise ValueError(f"root must be in 0..7, got {self.root}")
        if len(self.path) > MAX_DEPTH:
            raise DepthError(f"path longer than {MAX_DEPTH}")
        if any(d not in (0, 1, 2, 3) for d in self.path):
            raise ValueError(f"child digits must be 0..3, got {self.path}")
        object.__setattr__(self, "path", tuple(int(d) for d in self.path))

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def packed(self) -> int:
        value = 8 | self.root
        for d in self.path:
            value = (value << 2) | d
        return value

    @classmethod
    def from_packed(cls, value: int) -> "TrixelId":
        value = int(value)
        if value < 8 or value >= 1 << 64:
            raise ValueError(f"not a packed trixel id: {value}")
        nbits = value.bit_length()
        if (nbits - 4) % 2:
            raise ValueError(f"not a packed trixel id: {value}")
        depth = (nbits - 4) // 2
        path = tuple((value >> (2 * (depth - 1 - i))) & 3 for i in range(depth))
        return cls((value >> (2 * depth)) & 7, path)

    def parent(self) -> "TrixelId":
        if not self.path:
            raise ValueError("root trixel has no parent")
        return TrixelId(self.root, self.path[:-1])

    def child(self, digit: int) -> "TrixelId":
        if digit not in (0, 1, 2, 3):
            raise ValueError(f"child digit must be 0..3, got {digit}")
        if len(self.path) >= MAX_DEPTH:
            raise DepthError(f"path longer than {MAX_DEPTH}")
        return TrixelId._trusted(self.root, self.path + (digit,))

    @classmethod
    def _trusted(cls, root: int, path: tuple[int, ...]) -> "TrixelId":
        obj = object.__new__(cls)
        object.__setattr__(obj, "root", root)
        object.__setattr__(obj, "path", path)
        return obj

    def is_prefix_of(self, other: "TrixelId") -> bool:
        return self.root == other.root and other.path[: len(self.path)] == self.path

    @property
    def name(self) -> str:
        return ROOT_NAMES[self.root] + "".join(str(d) for d in self.path)

    def __str__(self) -> str:
        return str(self.packed)


def _cross(a: Vec, b: Vec) -> Vec:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot(a: Vec, b: Vec) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _unit(a: Vec) -> Vec:
    n = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    return (a[0] / n, a[1] / n, a[2] / n)


def _mid(a: Vec, b: Vec) -> Vec:
    return _unit((a[0] + b[0], a[1] + b[1], a[2] + b[2]))


def _side(a: Vec, b: Vec, p: Vec) -> float:
    """Signed sine of p's angular offset from great circle ab (positive = left)."""
    return _dot(_unit(_cross(a, b)), p)


def _min_side(v0: Vec, v1: Vec, v2: Vec, p: Vec) -> float:
    return min(_side(v0, v1, p), _side(v1, v2, p), _side(v2, v0, p))


@dataclass(frozen=True)
class Trixel:
    id: TrixelId
    v0: Vec
    v1: Vec
    v2: Vec

    @property
    def vertices(self) -> tuple[Vec, Vec, Vec]:
        return (self.v0, self.v1, self.v2)

    def contains_xyz(self, p: Vec, eps: float = SIDE_EPS) -> bool:
        return _min_side(self.v0, self.v1, self.v2, p) >= -eps

    def contains(self, p: GeoPoint, eps: float = SIDE_EPS) -> bool:
        return self.contains_xyz(p.to_xyz(), eps)

    def solid_angle(self) -> float:
        """Spherical excess by the Van Oosterom-Strackee formula."""
        a, b, c = self.vertices
        num = abs(_dot(a, _cross(b, c)))
        den = 1.0 + _dot(a, b) + _dot(b, c) + _dot(c, a)
        return 2.0 * math.atan2(num, den)


def root_trixels() -> list[Trixel]:
    return [Trixel(TrixelId(r), *ROOT_VERTICES[r]) for r in range(8)]


def subdivide(t: Trixel) -> list[Trixel]:
    if t.id.depth >= MAX_DEPTH:
        raise DepthError(f"cannot subdivide below depth {MAX_DEPTH}")
    v0, v1, v2 = t.vertices
    m01, m12, m02 = _mid(v0, v1), _mid(v1, v2), _mid(v0, v2)
    return [
        Trixel(t.id.child(0), v0, m01, m02),
        Trixel(t.id.child(1), v1, m12, m01),
        Trixel(t.id.child(2), v2, m02, m12),
        Trixel(t.id.child(3), m01, m12, m02),
    ]


def _first_hit(triangles: Sequence[tuple[Vec, Vec, Vec]], p: Vec) -> int:
    best, best_k = -math.inf, 0
    for k, (a, b, c) in enumerate(triangles):
        s = _min_side(a, b, c, p)
        if s >= -SIDE_EPS:
            return k
        if s > best:
            best, best_k = s, k
    # rounding can leave a boundary point outside every child; take the nearest
    return best_k


def trixel_of(tid: TrixelId) -> Trixel:
    """Geometry of a trixel from its id."""
    t = root_trixels()[tid.root]
    for d in tid.path:
        t = subdivide(t)[d]
    return t


def locate_trixel(p: GeoPoint, depth: int) -> Trixel:
    _check_depth(depth)
    xyz = p.to_xyz()
    root = _first_hit(ROOT_VERTICES, xyz)
    v0, v1, v2 = ROOT_VERTICES[root]
    path = []
    for _ in range(depth):
        m01, m12, m02 = _mid(v0, v1), _mid(v1, v2), _mid(v0, v2)
        children = ((v0, m01, m02), (v1, m12, m01), (v2, m02, m12), (m01, m12, m02))
        d = _first_hit(children, xyz)
        path.append(d)
        v0, v1, v2 = children[d]
    return Trixel(TrixelId._trusted(root, tuple(path)), v0, v1, v2)


def locate(p: GeoPoint, depth: int) -> TrixelId:
    """Id of the unique trixel at ``depth`` containing ``p``."""
    return locate_trixel(p, depth).id


# -- vectorized point location ------------------------------------------------


def _np_unit(a: np.ndarray) -> np.ndarray:
    n = np.sqrt(a[:, 0] * a[:, 0] + a[:, 1] * a[:, 1] + a[:, 2] * a[:, 2])
    return a / n[:, None]


def _np_side(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    c = np.empty_like(a)
    c[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    c[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    c[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    c = _np_unit(c)
    return c[:, 0] * p[:, 0] + c[:, 1] * p[:, 1] + c[:, 2] * p[:, 2]


def _np_min_side(v0, v1, v2, p):
    return np.minimum(np.minimum(_np_side(v0, v1, p), _np_side(v1, v2, p)), _np_side(v2, v0, p))


def _np_first_hit(triangles, p):
    """Index of the first triangle containing each point (nearest one as fallback)."""
    n = len(p)
    choice = np.full(n, -1, dtype=np.int64)
    best = np.full(n, -np.inf)
    best_idx = np.zeros(n, dtype=np.int64)
    for k, (v0, v1, v2) in enumerate(triangles):
        s = _np_min_side(v0, v1, v2, p)
        choice[(choice < 0) & (s >= -SIDE_EPS)] = k
        better = s > best
        best[better] = s[better]
        best_idx[better] = k
    miss = choice < 0
    choice[miss] = best_idx[miss]
    return choice


def locate_many(lat: Iterable[float], lon: Iterable[float], depth: int) -> np.ndarray:
    """Packed trixel ids (uint64) for arrays of coordinates; same answers as :func:`locate`."""
    _check_depth(depth)
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    c = np.cos(lat)
    p = np.stack([c * np.cos(lon), c * np.sin(lon), np.sin(lat)], axis=1)
    n = len(p)
    roots = [tuple(np.broadcast_to(np.array(v), (n, 3)) for v in tri) for tri in ROOT_VERTICES]
    r = _np_first_hit(roots, p)
    verts = np.array(ROOT_VERTICES)  # (8, 3, 3)
    v0, v1, v2 = (verts[r, i].copy() for i in range(3))
    ids = (8 | r).astype(np.uint64)
    for _ in range(depth):
        m01, m12, m02 = _np_unit(v0 + v1), _np_unit(v1 + v2), _np_unit(v0 + v2)
        children = [(v0, m01, m02), (v1, m12, m01), (v2, m02, m12), (m01, m12, m02)]
        d = _np_first_hit(children, p)
        nv0, nv1, nv2 = np.empty_like(v0), np.empty_like(v0), np.empty_like(v0)
        for k, (a, b, cc) in enumerate(children):
            sel = d == k
            nv0[sel], nv1[sel], nv2[sel] = a[sel], b[sel], cc[sel]
        v0, v1, v2 = nv0, nv1, nv2
        ids = (ids << np.uint64(2)) | d.astype(np.uint64)
    return ids


# -- bounding-box covers ------------------------------------------------------

_DEG_EPS = 1e-9
FULL = "full"
PARTIAL = "partial"


def _lat_of(v: Vec) -> float:
    return math.degrees(math.asin(max(-1.0, min(1.0, v[2]))))


def _lon_of(v: Vec) -> float:
    return math.degrees(math.atan2(v[1], v[0]))


def _at_pole(v: Vec) -> bool:
    return v[0] == 0.0 and v[1] == 0.0


def _on_arc(a: Vec, b: Vec, n: Vec, q: Vec) -> bool:
    return _dot(_cross(a, q), n) >= 0.0 and _dot(_cross(q, b), n) >= 0.0


def _arc_lat_range(a: Vec, b: Vec) -> tuple[float, float]:
    lo = min(a[2], b[2])
    hi = max(a[2], b[2])
    n = _unit(_cross(a, b))
    q = (-n[2] * n[0], -n[2] * n[1], 1.0 - n[2] * n[2])
    qn = math.sqrt(_dot(q, q))
    if qn > 1e-15:
        q = (q[0] / qn, q[1] / qn, q[2] / qn)
        if _on_arc(a, b, n, q):
            hi = max(hi, q[2])
        mq = (-q[0], -q[1], -q[2])
        if _on_arc(a, b, n, mq):
            lo = min(lo, mq[2])
    return (math.degrees(math.asin(max(-1.0, lo))), math.degrees(math.asin(min(1.0, hi))))


def _arc_lon_interval(a: Vec, b: Vec) -> tuple[float, float]:
    """(start, width) of the longitudes swept by arc ab; width 360 if it crosses a pole."""
    if _at_pole(a) and _at_pole(b):
        return (0.0, 360.0)
    if _at_pole(a):
        return (_lon_of(b), 0.0)
    if _at_pole(b):
        return (_lon_of(a), 0.0)
    cross2 = a[0] * b[1] - a[1] * b[0]
    dot2 = a[0] * b[0] + a[1] * b[1]
    # the arc's xy projection is the segment a_xy b_xy
    if dot2 < 0 and abs(cross2) <= 1e-15 * (1.0 + abs(dot2)):
        return (0.0, 360.0)
    la, lb = _lon_of(a), _lon_of(b)
    if cross2 >= 0:
        return (la, lon_offset(lb, la))
    return (lb, lon_offset(la, lb))


def _arc_frame(a: Vec, b: Vec) -> tuple[Vec, float]:
    """Unit tangent u at a toward b and the arc length theta."""
    ab = _dot(a, b)
    u = (b[0] - ab * a[0], b[1] - ab * a[1], b[2] - ab * a[2])
    un = math.sqrt(_dot(u, u))
    if un == 0.0:
        return (0.0, 0.0, 0.0), 0.0
    u = (u[0] / un, u[1] / un, u[2] / un)
    return u, math.atan2(math.sqrt(_dot(_cross(a, b), _cross(a, b))), ab)


def _arc_point(a: Vec, u: Vec, t: float) -> Vec:
    c, s = math.cos(t), math.sin(t)
    return (a[0] * c + u[0] * s, a[1] * c + u[1] * s, a[2] * c + u[2] * s)


def _params_on_arc(ts: Iterable[float], theta: float) -> list[float]:
    out = []
    for t in ts:
        t = math.fmod(t, 2 * math.pi)
        if t < 0:
            t += 2 * math.pi
        if t <= theta + 1e-12 or t >= 2 * math.pi - 1e-12:
            out.append(min(t, theta) if t <= theta + 1e-12 else 0.0)
    return out


def _arc_crosses_parallel(a: Vec, b: Vec, lat: float, box: BBox) -> bool:
    u, theta = _arc_frame(a, b)
    s = math.sin(math.radians(lat))
    r = math.hypot(a[2], u[2])
    if r < 1e-15:
        if abs(s) > 1e-12:
            return False
        # arc runs along the equator
        start, span = _arc_lon_interval(a, b)
        return (lon_offset(box.min_lon, start) <= span + _DEG_EPS
                or lon_offset(start, box.min_lon) <= box.lon_width + _DEG_EPS)
    if abs(s) > r + 1e-12:
        return False
    t0 = math.atan2(u[2], a[2])
    w = math.acos(max(-1.0, min(1.0, s / r)))
    for t in _params_on_arc((t0 + w, t0 - w), theta):
        q = _arc_point(a, u, t)
        if _at_pole(q) or box.contains_latlon(lat, _lon_of(q), _DEG_EPS):
            return True
    return False


def _arc_crosses_meridian(a: Vec, b: Vec, lon: float, box: BBox) -> bool:
    lam = math.radians(lon)
    m = (-math.sin(lam), math.cos(lam), 0.0)
    e = (math.cos(lam), math.sin(lam), 0.0)
    u, theta = _arc_frame(a, b)
    ca, cu = _dot(a, m), _dot(u, m)
    if abs(ca) < 1e-15 and abs(cu) < 1e-15:
        lo, hi = _arc_lat_range(a, b)
        return lo <= box.max_lat + _DEG_EPS and hi >= box.min_lat - _DEG_EPS
    t1 = math.atan2(-ca, cu)
    for t in _params_on_arc((t1, t1 + math.pi), theta):
        q = _arc_point(a, u, t)
        if _dot(q, e) < -1e-12:
            continue
        lat = _lat_of(q)
        if box.min_lat - _DEG_EPS <= lat <= box.max_lat + _DEG_EPS:
            return True
    return False


def _vertex_in_box(v: Vec, box: BBox, eps: float = 0.0) -> bool:
    return box.contains_latlon(_lat_of(v), 0.0 if _at_pole(v) else _lon_of(v), eps)


def _trixel_inside_box(t: Trixel, box: BBox) -> bool:
    vs = t.vertices
    if not all(_vertex_in_box(v, box) for v in vs):
        return False
    width = box.lon_width
    for a, b in ((vs[0], vs[1]), (vs[1], vs[2]), (vs[2], vs[0])):
        lo, hi = _arc_lat_range(a, b)
        if lo < box.min_lat or hi > box.max_lat:
            return False
        if width >= 360.0:
            continue
        start, span = _arc_lon_interval(a, b)
        if span >= 360.0 or lon_offset(start, box.min_lon) + span > width:
            return False
    return True


def _arc_range_meets_box(a: Vec, b: Vec, box: BBox) -> bool:
    """Whether the lat/lon extent of arc ab overlaps the box (necessary for any crossing)."""
    lo, hi = _arc_lat_range(a, b)
    if hi < box.min_lat - _DEG_EPS or lo > box.max_lat + _DEG_EPS:
        return False
    start, span = _arc_lon_interval(a, b)
    if span >= 360.0 or box.lon_width >= 360.0:
        return True
    return (lon_offset(box.min_lon, start) <= span + _DEG_EPS
            or lon_offset(start, box.min_lon) <= box.lon_width + _DEG_EPS
            or lon_offset(start, box.min_lon) >= 360.0 - _DEG_EPS)


def _trixel_meets_box(t: Trixel, box: BBox) -> bool:
    """Conservative intersection test: may report true for a disjoint pair, never false for a meeting one."""
    vs = t.vertices
    if any(_vertex_in_box(v, box, _DEG_EPS) for v in vs):
        return True
    for lat, lon in box.corners():
        if t.contains_xyz(to_xyz(lat, lon), 1e-10):
            return True
    edges = ((vs[0], vs[1]), (vs[1], vs[2]), (vs[2], vs[0]))
    for a, b in edges:
        if not _arc_range_meets_box(a, b, box):
            continue
        for lat in (box.min_lat, box.max_lat):
            if abs(lat) < 90.0 and _arc_crosses_parallel(a, b, lat, box):
                return True
        for lon in (box.min_lon, box.max_lon):
            if _arc_crosses_meridian(a, b, lon, box):
                return True
    return False


def _box_cap(box: BBox) -> Optional[tuple[Vec, float]]:
    """Cap (center, angular radius) through the box corners, which bounds boxes up to 180 deg wide."""
    if box.lon_width > 180.0:
        return None
    mid_lat = (box.min_lat + box.max_lat) / 2
    center = to_xyz(mid_lat, box.min_lon + box.lon_width / 2)
    cosr = min(_dot(center, to_xyz(lat, lon)) for lat, lon in box.corners())
    return center, math.acos(max(-1.0, min(1.0, cosr)))


def _trixel_cap(t: Trixel) -> tuple[Vec, float]:
    v0, v1, v2 = t.vertices
    c = _unit((v0[0] + v1[0] + v2[0], v0[1] + v1[1] + v2[1], v0[2] + v1[2] + v2[2]))
    cosr = min(_dot(c, v0), _dot(c, v1), _dot(c, v2))
    return c, math.acos(max(-1.0, min(1.0, cosr)))


def cover_bbox(bbox: Sequence[float], depth: int) -> list[tuple[TrixelId, str]]:
    """Trixels covering a lat/lon box: ``full`` ones lie inside it, ``partial`` ones straddle its edge.

    The union of the returned trixels contains the whole box.
    """
    _check_depth(depth)
    box = BBox(*bbox)
    if box.is_point():
        return [(locate(GeoPoint(box.min_lat, box.min_lon), depth), PARTIAL)]
    cap = _box_cap(box)
    out: list[tuple[TrixelId, str]] = []
    stack = list(reversed(root_trixels()))
    while stack:
        t = stack.pop()
        if cap is not None:
            c, r = _trixel_cap(t)
            gap = math.acos(max(-1.0, min(1.0, _dot(c, cap[0])))) - r - cap[1]
            if gap > 1e-9:
                continue
        if _trixel_inside_box(t, box):
            out.append((t.id, FULL))
        elif _trixel_meets_box(t, box):
            if t.id.depth == depth:
                out.append((t.id, PARTIAL))
            else:
                stack.extend(reversed(subdivide(t)))
    return out


# -- city index -----------------------------------------------------------------


def _depth_for_edge_km(edge_km: float) -> int:
    """Shallowest depth whose trixel edges are no longer than ``edge_km``."""
    quarter = math.pi / 2 * EARTH_RADIUS_KM
    if edge_km <= 0:
        return MAX_DEPTH
    return max(0, min(MAX_DEPTH, math.ceil(math.log2(quarter / edge_km))))


class GeoIndex:
    """HTM lookup tables from trixels to cities.

    Two covers are kept: one of each city's bbox at ``depth`` and one of the
    smallest box around each center's ``fallback_km`` disk at a coarser depth.
    Lookups walk all ancestors of the query trixel, so ``full`` cells emitted
    at shallow levels are found too; candidates are always confirmed exactly.
    """

    def __init__(self, cities: Sequence["CityRecord"], depth: int = 14, fallback_km: float = 30.0,
                 near_depth: Optional[int] = None):
        _check_depth(depth)
        self.depth = depth
        self.fallback_km = fallback_km
        if near_depth is None:
            near_depth = min(depth, _depth_for_edge_km(fallback_km / 2)) if fallback_km > 0 else 0
        _check_depth(near_depth)
        if near_depth > depth:
            raise DepthError("near_depth must not exceed depth")
        self.near_depth = near_depth
        self.cities = {c.city_id: c for c in cities}
        self._box_cells: dict[int, list[str]] = {}
        self._near_cells: dict[int, list[str]] = {}
        for c in sorted(self.cities.values(), key=lambda c: c.city_id):
            for tid, _ in cover_bbox(c.bbox, depth):
                self._box_cells.setdefault(tid.packed, []).append(c.city_id)
            if fallback_km > 0:
                for tid, _ in cover_bbox(disk_bbox(c.center, fallback_km), near_depth):
                    self._near_cells.setdefault(tid.packed, []).append(c.city_id)

    @staticmethod
    def _lookup(cells: dict[int, list[str]], packed: int, depth: int) -> set[str]:
        found: set[str] = set()
        for k in range(depth + 1):
            hit = cells.get(packed >> (2 * k))
            if hit:
                found.update(hit)
        return found

    def candidates(self, p: GeoPoint, packed: Optional[int] = None) -> tuple[set[str], set[str]]:
        """City ids whose bbox cover / fallback cover contains p's trixel."""
        if packed is None:
            packed = locate(p, self.depth).packed
        boxes = self._lookup(self._box_cells, packed, self.depth)
        near_packed = packed >> (2 * (self.depth - self.near_depth))
        near = self._lookup(self._near_cells, near_packed, self.near_depth)
        return boxes, near

    def resolve(self, p: GeoPoint, packed: Optional[int] = None) -> Optional[str]:
        boxes, near = self.candidates(p, packed)
        inside = [self.cities[i] for i in boxes if self.cities[i].bbox.contains(p)]
        if inside:
            return min(inside, key=lambda c: (c.bbox.solid_angle(), c.city_id)).city_id
        best = None
        for i in near:
            d = haversine_km(p, self.cities[i].center)
            if d <= self.fallback_km and (best is None or (d, i) < best):
                best = (d, i)
        return best[1] if best else None

    def resolve_many(self, points: Sequence[GeoPoint]) -> list[Optional[str]]:
        if not points:
            return []
        ids = locate_many([p.lat for p in points], [p.lon for p in points], self.depth)
        return [self.resolve(p, int(t)) for p, t in zip(points, ids)]
