"""Synthetic city systems with a known scaling exponent.

Populations follow a Zipf rank-size rule and counts are drawn around
``y0 * N**beta``.  Random draws use numpy's PCG64 bit generator seeded with
the configured integer seed; every trial or sub-stream gets its own seed, so
results never depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .gazetteer import CityRecord
from .geo import BBox, GeoPoint, bbox_around, normalize_lon
from .homeloc import GeoEvent
from .scaling import CityObservation, FitConfig, FitImpossible, fit_scaling

NOISE_NONE = "none"
NOISE_POISSON = "poisson"


@dataclass(frozen=True)
class SynthConfig:
    n_cities: int = 1000
    zipf_alpha: float = 1.0
    n_max: int = 10_000_000
    beta: float = 1.0
    y0: float = 1.0
    noise: str = NOISE_POISSON
    seed: int = 0
    country: str = "XX"
    id_prefix: str = "C"
    origin: tuple[float, float] = (0.0, 0.0)
    spacing_deg: float = 0.5
    columns: int = 40

    def __post_init__(self):
        if self.n_cities < 1:
            raise ValueError("n_cities must be >= 1")
        if self.n_max < self.n_cities:
            raise ValueError("n_max must be >= n_cities")
        if not self.zipf_alpha > 0 or not self.y0 > 0:
            raise ValueError("zipf_alpha and y0 must be positive")
        if self.noise not in (NOISE_NONE, NOISE_POISSON):
            raise ValueError(f"unknown noise model {self.noise!r}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def zipf_populations(n_cities: int, n_max: float, alpha: float) -> list[int]:
    return [max(1, _round_half_up(n_max / i ** alpha)) for i in range(1, n_cities + 1)]


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64([seed, *stream] if stream else seed))


def gen_city_system(config: SynthConfig) -> list[CityRecord]:
    """Cities ranked by size, laid out row by row on a regular lat/lon grid."""
    lat0, lon0 = config.origin
    cities = []
    for i, pop in enumerate(zipf_populations(config.n_cities, config.n_max, config.zipf_alpha)):
        row, col = divmod(i, config.columns)
        center = GeoPoint(lat0 + row * config.spacing_deg, normalize_lon(lon0 + col * config.spacing_deg))
        cid = f"{config.id_prefix}{i + 1:06d}"
        cities.append(CityRecord(cid, f"Synthetic {cid}", config.country, center, pop,
                                 bbox_around(center, 0.1)))
    return cities


def gen_counts(cities: Sequence[CityRecord], beta: float, y0: float, noise: str = NOISE_POISSON,
               seed: int = 0) -> list[CityObservation]:
    lam = np.array([y0 * float(c.population) ** beta for c in cities])
    if noise == NOISE_NONE:
        counts = [float(_round_half_up(v)) for v in lam]
    elif noise == NOISE_POISSON:
        counts = [float(v) for v in rng_for(seed).poisson(lam)]
    else:
        raise ValueError(f"unknown noise model {noise!r}")
    return [CityObservation(c.city_id, c.population, y) for c, y in zip(cities, counts)]


@dataclass(frozen=True)
class RecoveryReport:
    true_beta: float
    mean_beta: float
    std_beta: float
    coverage: float
    n_trials: int
    n_failed: int
    betas: tuple[float, ...] = field(repr=False, default=())


def recovery_experiment(config: SynthConfig, fit_config: FitConfig = FitConfig(),
                        n_trials: int = 100) -> RecoveryReport:
    """Generate and fit ``n_trials`` times with seeds ``seed .. seed + n_trials - 1``.

    Coverage counts trials whose estimate lies within two standard errors of the
    true exponent; failed fits count as uncovered.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    cities = gen_city_system(config)
    betas, covered, failed = [], 0, 0
    for k in range(n_trials):
        obs = gen_counts(cities, config.beta, config.y0, config.noise, config.seed + k)
        try:
            fit = fit_scaling(obs, fit_config)
        except FitImpossible:
            failed += 1
            continue
        betas.append(fit.beta)
        if abs(fit.beta - config.beta) <= 2 * fit.beta_stderr:
            covered += 1
    arr = np.array(betas)
    return RecoveryReport(
        true_beta=config.beta,
        mean_beta=float(arr.mean()) if betas else math.nan,
        std_beta=float(arr.std(ddof=1)) if len(betas) > 1 else 0.0,
        coverage=covered / n_trials,
        n_trials=n_trials,
        n_failed=failed,
        betas=tuple(betas),
    )


# -- user-level synthetic data ------------------------------------------------


@dataclass
class SynthUsers:
    events: list[GeoEvent]
    followers: dict[str, set[str]]
    homes: dict[str, str]  # user -> city the user was placed in


def gen_users(cities: Sequence[CityRecord], club_betas: dict[str, float], y0: float, seed: int,
              overlap: float = 0.2, home_events: int = 10, stray_events: int = 2) -> SynthUsers:
    """Followers per club with Poisson(y0 * N**beta) counts per city, plus their geotagged events.

    A share ``overlap`` of each later club's followers is drawn from the first
    club's followers in the same city, so combined counts differ from sums.
    Each user posts ``home_events`` events within ~50 m of a home point inside
    the city bbox and ``stray_events`` scattered roughly 65-330 km away.
    """
    count_rng = rng_for(seed, 0)
    geo_rng = rng_for(seed, 1)
    clubs = list(club_betas)
    followers: dict[str, set[str]] = {c: set() for c in clubs}
    homes: dict[str, str] = {}
    events: list[GeoEvent] = []
    ts = 1_500_000_000
    for city in cities:
        pool: list[str] = []
        first: list[str] = []
        for ci, club in enumerate(clubs):
            y = int(count_rng.poisson(y0 * float(city.population) ** club_betas[club]))
            shared = first[: min(len(first), int(overlap * y))] if ci else []
            fresh = y - len(shared)
            new = [f"u{city.city_id}_{len(pool) + k:05d}" for k in range(fresh)]
            pool.extend(new)
            members = shared + new
            if ci == 0:
                first = members
            followers[club].update(members)
        for user in pool:
            homes[user] = city.city_id
            hlat, hlon = _home_point(city.bbox, city.center, geo_rng)
            for _ in range(home_events):
                dlat, dlon = geo_rng.uniform(-0.0003, 0.0003, 2)
                events.append(GeoEvent(user, _clamped(hlat + dlat, hlon + dlon), ts))
                ts += 1
            for _ in range(stray_events):
                dist = geo_rng.uniform(0.6, 3.0)
                ang = geo_rng.uniform(0, 2 * math.pi)
                events.append(GeoEvent(user, _clamped(hlat + dist * math.sin(ang), hlon + dist * math.cos(ang)), ts))
                ts += 1
    return SynthUsers(events, followers, homes)


def _home_point(box: BBox, center: GeoPoint, rng: np.random.Generator) -> tuple[float, float]:
    half_lat = (box.max_lat - box.min_lat) / 4
    half_lon = box.lon_width / 4
    return (center.lat + rng.uniform(-half_lat, half_lat), center.lon + rng.uniform(-half_lon, half_lon))


def _clamped(lat: float, lon: float) -> GeoPoint:
    return GeoPoint(max(-90.0, min(90.0, lat)), normalize_lon(lon))


@dataclass(frozen=True)
class CountrySpec:
    config: SynthConfig
    club_betas: dict[str, float]


def two_country_preset(seed: int = 7) -> list[CountrySpec]:
    """Small fixture: country XS scales superlinearly (beta 1.2), XL sublinearly (beta 0.8)."""
    clubs = ("club_a", "club_b", "club_c")
    base = SynthConfig(n_cities=40, zipf_alpha=1.0, n_max=200_000, noise=NOISE_POISSON, seed=seed)
    return [
        CountrySpec(replace(base, country="XS", id_prefix="XS", origin=(10.0, 10.0), beta=1.2, y0=1.8e-4),
                    {c: 1.2 for c in clubs}),
        CountrySpec(replace(base, country="XL", id_prefix="XL", origin=(-30.0, 100.0), beta=0.8,
                            y0=5.5e-3, seed=seed + 1),
                    {c: 0.8 for c in clubs}),
    ]


def build_preset(specs: Sequence[CountrySpec], overlap: float = 0.2) -> tuple[list[CityRecord], SynthUsers]:
    cities: list[CityRecord] = []
    merged = SynthUsers([], {}, {})
    for spec in specs:
        cs = gen_city_system(spec.config)
        cities.extend(cs)
        users = gen_users(cs, spec.club_betas, spec.config.y0, spec.config.seed, overlap=overlap)
        merged.events.extend(users.events)
        merged.homes.update(users.homes)
        for club, ids in users.followers.items():
            merged.followers.setdefault(club, set()).update(ids)
    return cities, merged
