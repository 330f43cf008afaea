"""Pipeline stages: events -> homes -> user/city table -> per-country fits -> summary.

Every stage reads and writes plain files (JSONL, CSV, TSV).  Floats are
written with ``repr`` so re-reading an intermediate file gives back the exact
same values, and all outputs are emitted in sorted key order, which makes a
staged run byte-identical to a one-shot run.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, TextIO

from .gazetteer import CityRecord
from .geo import GeoPoint
from .geoindex import GeoIndex
from .homeloc import GeoEvent, HomeLocation, HomeParams, infer_home
from .scaling import (
    CityObservation, FitConfig, FitImpossible, ScalingFit, bin_logspace, fit_wls,
)

COMBINED = "combined"
STATUS_OK = "ok"
STATUS_IMPOSSIBLE = "fit-impossible"

FIT_COLUMNS = ["country", "club", "beta", "beta_stderr", "log10_y0", "r2", "n_bins", "n_cities",
               "zero_cities_excluded", "regime", "status"]
SUMMARY_COLUMNS = ["country", "club", "beta", "beta_stderr", "regime"]
HOMES_COLUMNS = ["user_id", "lat", "lon", "cluster_size", "total_events", "support"]
USER_CITY_COLUMNS = ["user_id", "city_id", "country"]
OBSERVATION_COLUMNS = ["country", "club", "city_id", "population", "count"]


class DataError(ValueError):
    """Input data that cannot be used; fatal in strict mode."""


class UnknownCountry(DataError):
    def __init__(self, code: str, valid: Iterable[str]):
        self.valid = sorted(set(valid))
        super().__init__(f"unknown country {code!r}; valid codes: {', '.join(self.valid) or '(none)'}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- events and homes -----------------------------------------------------------


def read_events(lines: Iterable[str]) -> tuple[dict[str, list[GeoEvent]], int]:
    """Group JSONL events by user; returns (events by user, malformed line count)."""
    by_user: dict[str, list[GeoEvent]] = {}
    bad = 0
    for line in lines:
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            user, lat, lon, ts = obj["user"], obj["lat"], obj["lon"], obj["ts"]
            if not isinstance(user, str) or isinstance(ts, bool) or not isinstance(ts, int):
                raise ValueError("bad field type")
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in (lat, lon)):
                raise ValueError("bad coordinate type")
            ev = GeoEvent(user, GeoPoint(lat, lon), ts)
        except (ValueError, KeyError, TypeError):
            bad += 1
            continue
        by_user.setdefault(user, []).append(ev)
    return by_user, bad


def write_events(events: Iterable[GeoEvent], out: TextIO) -> None:
    for e in events:
        out.write(json.dumps({"user": e.user_id, "lat": e.point.lat, "lon": e.point.lon, "ts": e.timestamp}))
        out.write("\n")


def infer_homes(by_user: Mapping[str, Sequence[GeoEvent]], params: HomeParams = HomeParams()) -> list[HomeLocation]:
    homes = []
    for user in sorted(by_user):
        home = infer_home(by_user[user], params)
        if home is not None:
            homes.append(home)
    return homes


def homes_csv(homes: Iterable[HomeLocation]) -> str:
    return _csv_text(HOMES_COLUMNS, (
        (h.user_id, _fmt(h.point.lat), _fmt(h.point.lon), h.cluster_size, h.total_events, _fmt(h.support))
        for h in sorted(homes, key=lambda h: h.user_id)))


def read_homes_csv(text: str) -> list[HomeLocation]:
    homes = []
    for row in csv.DictReader(io.StringIO(text)):
        try:
            homes.append(HomeLocation(row["user_id"], GeoPoint(float(row["lat"]), float(row["lon"])),
                                      int(row["cluster_size"]), int(row["total_events"])))
        except (KeyError, ValueError, TypeError) as e:
            raise DataError(f"bad homes row {row!r}: {e}") from None
    return homes


# -- city assignment ------------------------------------------------------------


def assign_cities(homes: Iterable[HomeLocation], index: GeoIndex) -> dict[str, str]:
    """user_id -> city_id for every home that resolves to a city."""
    homes = list(homes)
    found = index.resolve_many([h.point for h in homes])
    return dict(sorted((h.user_id, cid) for h, cid in zip(homes, found) if cid is not None))


def user_city_csv(user_city: Mapping[str, str], cities: Sequence[CityRecord]) -> str:
    country = {c.city_id: c.country for c in cities}
    return _csv_text(USER_CITY_COLUMNS, ((u, c, country[c]) for u, c in sorted(user_city.items())))


def read_user_city_csv(text: str) -> dict[str, str]:
    return {row["user_id"]: row["city_id"] for row in csv.DictReader(io.StringIO(text))}


# -- followers --------------------------------------------------------------------


@dataclass(frozen=True)
class FollowerSet:
    club: str
    user_ids: frozenset


def read_follower_file(path: Path) -> FollowerSet:
    ids = {line.strip() for line in path.read_text(encoding="utf-8").splitlines()}
    ids.discard("")
    return FollowerSet(path.stem, frozenset(ids))


def read_followers_dir(directory: Path, clubs: Optional[Sequence[str]] = None) -> list[FollowerSet]:
    """Follower sets from ``<club>.txt`` files; order follows ``clubs`` or else sorted names."""
    files = {p.stem: p for p in sorted(Path(directory).glob("*.txt"))}
    if clubs is None:
        clubs = sorted(files)
    missing = [c for c in clubs if c not in files]
    if missing:
        raise DataError(f"no follower file for club(s): {', '.join(missing)}")
    return [read_follower_file(files[c]) for c in clubs]


def read_totals(text: str) -> dict[str, int]:
    """``club<TAB>total_followers`` lines ('#' comments allowed)."""
    totals = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"bad metadata line {line!r}")
        try:
            totals[parts[0]] = int(parts[1])
        except ValueError:
            raise DataError(f"bad follower total in {line!r}") from None
    return totals


# -- aggregation and fitting ----------------------------------------------------------


def countries_of(cities: Iterable[CityRecord]) -> list[str]:
    return sorted({c.country for c in cities})


def aggregate_city_counts(user_city: Mapping[str, str], cities: Sequence[CityRecord],
                          followers: Sequence[FollowerSet], country: str) -> dict[str, list[CityObservation]]:
    """Per-club and combined follower counts for every city of ``country``.

    Cities without followers are listed with count 0.  The combined series
    counts each user once however many of the listed clubs they follow.
    """
    valid = countries_of(cities)
    if country not in valid:
        raise UnknownCountry(country, valid)
    local = sorted((c for c in cities if c.country == country), key=lambda c: c.city_id)
    local_ids = {c.city_id for c in local}
    tallies: dict[str, dict[str, int]] = {fs.club: {} for fs in followers}
    union: dict[str, set[str]] = {}
    for fs in followers:
        tally = tallies[fs.club]
        for user in fs.user_ids:
            cid = user_city.get(user)
            if cid in local_ids:
                tally[cid] = tally.get(cid, 0) + 1
                union.setdefault(cid, set()).add(user)

    def series(counts: Mapping[str, int]) -> list[CityObservation]:
        return [CityObservation(c.city_id, c.population, counts.get(c.city_id, 0)) for c in local]

    out = {fs.club: series(tallies[fs.club]) for fs in followers}
    out[COMBINED] = series({cid: len(users) for cid, users in union.items()})
    return out


@dataclass
class FitRow:
    country: str
    club: str
    status: str
    fit: Optional[ScalingFit] = None
    observations: list = field(default_factory=list, repr=False)
    bins: list = field(default_factory=list, repr=False)
    message: str = ""
    zeros: Optional[int] = None  # set when read back from a fits file

    @property
    def zero_cities_excluded(self) -> int:
        if self.fit is not None:
            return self.fit.zero_cities_excluded
        if self.zeros is not None:
            return self.zeros
        return sum(1 for o in self.observations if o.count == 0)


def fit_series(country: str, club: str, obs: Sequence[CityObservation], config: FitConfig) -> FitRow:
    zeros = sum(1 for o in obs if o.count == 0)
    try:
        bins = bin_logspace(obs, config.n_bins)
        fit = fit_wls(bins, config.weight_mode)
    except FitImpossible as e:
        return FitRow(country, club, STATUS_IMPOSSIBLE, None, list(obs), [], str(e))
    fit = replace(fit, zero_cities_excluded=zeros)
    return FitRow(country, club, STATUS_OK, fit, list(obs), bins)


def run_country_fit(country: str, series: Mapping[str, Sequence[CityObservation]], clubs: Sequence[str],
                    config: FitConfig = FitConfig()) -> list[FitRow]:
    """One row per club in the given order, then the combined row."""
    rows = [fit_series(country, club, series.get(club, []), config) for club in clubs]
    rows.append(fit_series(country, COMBINED, series.get(COMBINED, []), config))
    return rows


def fit_countries(user_city: Mapping[str, str], cities: Sequence[CityRecord], followers: Sequence[FollowerSet],
                  countries: Optional[Sequence[str]] = None, config: FitConfig = FitConfig()) -> list[FitRow]:
    valid = countries_of(cities)
    if countries is None:
        countries = valid
    for c in countries:
        if c not in valid:
            raise UnknownCountry(c, valid)
    clubs = [fs.club for fs in followers]
    rows = []
    for country in countries:
        series = aggregate_city_counts(user_city, cities, followers, country)
        rows.extend(run_country_fit(country, series, clubs, config))
    return rows


def fits_csv(rows: Iterable[FitRow]) -> str:
    def cells(r: FitRow):
        f = r.fit
        if f is None:
            return [r.country, r.club, "", "", "", "", "", "", r.zero_cities_excluded, "", r.status]
        return [r.country, r.club, _fmt(f.beta), _fmt(f.beta_stderr), _fmt(f.log10_y0), _fmt(f.r2),
                f.n_bins, f.n_cities, f.zero_cities_excluded, f.regime, r.status]
    return _csv_text(FIT_COLUMNS, (cells(r) for r in rows))


def read_fits_csv(text: str) -> list[FitRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        fit = None
        if rec["status"] == STATUS_OK:
            fit = ScalingFit(
                beta=float(rec["beta"]), beta_stderr=float(rec["beta_stderr"]),
                log_y0=float(rec["log10_y0"]) * math.log(10.0), r2=float(rec["r2"]),
                n_bins=int(rec["n_bins"]), n_cities=int(rec["n_cities"]), regime=rec["regime"],
                zero_cities_excluded=int(rec["zero_cities_excluded"]),
            )
        rows.append(FitRow(rec["country"], rec["club"], rec["status"], fit,
                           zeros=int(rec["zero_cities_excluded"] or 0)))
    return rows


def plot_data(row: FitRow) -> dict:
    """Everything needed to redraw one scaling panel, in log10 units."""
    l10 = math.log(10.0)
    pts = [o for o in row.observations if o.count > 0]
    data = {
        "country": row.country,
        "club": row.club,
        "status": row.status,
        "scatter": [[math.log10(o.population), math.log10(o.count)] for o in pts],
        "zero_count_cities": sum(1 for o in row.observations if o.count == 0),
        "bins": [{"log10_n": b.mean_log_n / l10, "log10_y": b.mean_log_y / l10,
                  "n_cities": b.n_cities, "weight": b.weight} for b in row.bins],
    }
    if row.fit is not None:
        f = row.fit
        xs = [b.mean_log_n for b in row.bins]
        lo, hi = min(xs), max(xs)
        data["fit"] = {
            "beta": f.beta, "beta_stderr": f.beta_stderr, "log10_y0": f.log10_y0, "r2": f.r2,
            "regime": f.regime,
            "line": [[lo / l10, (f.log_y0 + f.beta * lo) / l10], [hi / l10, (f.log_y0 + f.beta * hi) / l10]],
        }
    return data


def plot_file_name(row: FitRow) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in row.club)
    return f"{row.country}_{safe}.json"


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def render_summary(rows: Iterable[FitRow]) -> tuple[str, dict]:
    """Exponent table (country, club, beta, stderr, regime) and grouped JSON with the beta = 1 line.

    Rows without a successful fit are left out.
    """
    ok = [r for r in rows if r.fit is not None]
    text = _csv_text(SUMMARY_COLUMNS, (
        (r.country, r.club, _fmt(r.fit.beta), _fmt(r.fit.beta_stderr), r.fit.regime) for r in ok))
    groups: dict[str, list] = {}
    for r in ok:
        groups.setdefault(r.country, []).append(
            {"club": r.club, "beta": r.fit.beta, "beta_stderr": r.fit.beta_stderr, "regime": r.fit.regime})
    data = {
        "reference_beta": 1.0,
        "countries": [{"country": c, "fits": fits} for c, fits in groups.items()],
    }
    return text, data


def observations_csv(country: str, series: Mapping[str, Sequence[CityObservation]]) -> str:
    rows = []
    for club, obs in series.items():
        rows.extend((country, club, o.city_id, o.population, _fmt(o.count)) for o in obs)
    return _csv_text(OBSERVATION_COLUMNS, rows)


def read_observations_csv(text: str) -> dict[str, dict[str, list[CityObservation]]]:
    """country -> club -> observations, in file order."""
    out: dict[str, dict[str, list[CityObservation]]] = {}
    for rec in csv.DictReader(io.StringIO(text)):
        try:
            obs = CityObservation(rec["city_id"], int(rec["population"]), float(rec["count"]))
        except (KeyError, ValueError, TypeError) as e:
            raise DataError(f"bad observation row {rec!r}: {e}") from None
        out.setdefault(rec["country"], {}).setdefault(rec["club"], []).append(obs)
    return out


# -- ingest statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class ClubIngest:
    club: str
    total_followers: int
    geolocated_followers: int

    @property
    def match_rate(self) -> Optional[float]:
        if self.total_followers <= 0:
            return None
        return self.geolocated_followers / self.total_followers


@dataclass(frozen=True)
class IngestStats:
    clubs: tuple[ClubIngest, ...]

    def table(self) -> str:
        return render_ingest_table(self)


def summarize_ingest(followers: Sequence[FollowerSet], homes: Iterable, totals: Optional[Mapping[str, int]] = None) -> IngestStats:
    """Per-club follower totals and how many of them have an inferred home.

    ``homes`` may hold HomeLocation objects or bare user ids.  Without a
    metadata total, a club's total is the size of its follower list.
    """
    located = {h.user_id if isinstance(h, HomeLocation) else h for h in homes}
    totals = totals or {}
    rows = []
    for fs in followers:
        total = totals.get(fs.club, len(fs.user_ids))
        rows.append(ClubIngest(fs.club, total, len(fs.user_ids & located)))
    return IngestStats(tuple(rows))


def _fmt_total(n: int) -> str:
    if n >= 1_000_000:
        return f"{n / 1e6:.1f}M"
    return f"{n:,}"


def _fmt_rate(rate: Optional[float]) -> str:
    return "—" if rate is None else f"{100 * rate:.2f}%"


def render_ingest_table(stats: IngestStats) -> str:
    header = ("Team name", "Total number of followers", "Geolocated followers", "Match rate")
    body = [(r.club, _fmt_total(r.total_followers), f"{r.geolocated_followers:,}", _fmt_rate(r.match_rate))
            for r in stats.clubs]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(4)]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return " | ".join([first, *rest]).rstrip()

    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in body)]) + "\n"
