"""Urban scaling of geolocated follower counts.

Infer users' home locations from geotagged events, assign homes to
gazetteer cities through a hierarchical triangular mesh, and fit
``Y = Y0 * N**beta`` on log-binned per-city counts.
"""

from .gazetteer import CityRecord, ParseReport, parse_gazetteer, resolve_city, write_gazetteer
from .geo import BBox, GeoPoint, haversine_km
from .geoindex import GeoIndex, Trixel, TrixelId, cover_bbox, locate, locate_many, subdivide
from .homeloc import GeoEvent, HomeLocation, HomeParams, cluster_fof, infer_home
from .scaling import (
    BinnedPoint, CityObservation, FitConfig, FitImpossible, ScalingFit, bin_logspace, classify, fit_scaling,
    fit_wls,
)

__version__ = "0.1.0"

__all__ = [
    "BBox", "BinnedPoint", "CityObservation", "CityRecord", "FitConfig", "FitImpossible", "GeoEvent",
    "GeoIndex", "GeoPoint", "HomeLocation", "HomeParams", "ParseReport", "ScalingFit", "Trixel", "TrixelId",
    "bin_logspace", "classify", "cluster_fof", "cover_bbox", "fit_scaling", "fit_wls", "haversine_km",
    "infer_home", "locate", "locate_many", "parse_gazetteer", "resolve_city", "subdivide", "write_gazetteer",
]
