"""Home-location inference by friend-of-friend clustering of a user's geotagged events."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geo import EARTH_RADIUS_KM, GeoPoint, haversine_km, spherical_centroid

__all__ = [
    "GeoEvent", "HomeLocation", "HomeParams", "haversine_km", "cluster_fof", "infer_home",
]


@dataclass(frozen=True)
class GeoEvent:
    user_id: str
    point: GeoPoint
    timestamp: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class HomeLocation:
    user_id: str
    point: GeoPoint
    cluster_size: int
    total_events: int

    @property
    def support(self) -> float:
        return self.cluster_size / self.total_events


@dataclass(frozen=True)
class HomeParams:
    min_events: int = 10
    link_km: float = 1.0
    min_cluster_size: int = 3
    min_support: float = 0.2


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            # keep the smaller index as root
            if rj < ri:
                ri, rj = rj, ri
            self.parent[rj] = ri


def _candidate_pairs(points: Sequence[GeoPoint], link_km: float) -> np.ndarray:
    xyz = np.array([p.to_xyz() for p in points])
    theta = min(math.pi, link_km / EARTH_RADIUS_KM)
    chord = 2.0 * math.sin(theta / 2.0)
    # slack so rounding never drops a pair the exact test would accept
    return cKDTree(xyz).query_pairs(chord * (1 + 1e-9) + 1e-12, output_type="ndarray")


def cluster_fof(points: Sequence[GeoPoint], link_km: float) -> list[list[int]]:
    """Connected components of the graph linking points within ``link_km`` (haversine, inclusive).

    Clusters come largest first, ties by smallest member index; members ascending.
    """
    if not link_km > 0:
        raise ValueError(f"link_km must be positive, got {link_km}")
    n = len(points)
    if n == 0:
        return []
    uf = _UnionFind(n)
    if n > 1:
        for i, j in _candidate_pairs(points, link_km):
            i, j = int(i), int(j)
            if haversine_km(points[i], points[j]) <= link_km:
                uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: (-len(g), g[0]))


def infer_home(events: Sequence[GeoEvent], params: HomeParams = HomeParams()) -> Optional[HomeLocation]:
    """Home of one user: centroid of their largest FoF cluster, if it is big and dominant enough."""
    n = len(events)
    if n == 0 or n < params.min_events:
        return None
    user = events[0].user_id
    if any(e.user_id != user for e in events):
        raise ValueError("events from more than one user")
    # canonical order keeps the result independent of input order
    ordered = sorted(events, key=lambda e: (e.timestamp, e.point.lat, e.point.lon))
    points = [e.point for e in ordered]
    best = cluster_fof(points, params.link_km)[0]
    if len(best) < params.min_cluster_size or len(best) / n < params.min_support:
        return None
    home = spherical_centroid(points[i] for i in best)
    return HomeLocation(user, home, len(best), n)
