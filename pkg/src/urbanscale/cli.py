"""Command line interface.

Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command line flags.  Exit status is 0 on
success, 1 for usage or configuration errors and 2 for data errors in
``--strict`` mode.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline as pl
from .gazetteer import CityRecord, ParseReport, parse_gazetteer, write_gazetteer
from .geoindex import GeoIndex
from .homeloc import HomeParams
from .scaling import WEIGHT_MODES, FitConfig
from .synth import (
    NOISE_NONE, NOISE_POISSON, SynthConfig, build_preset, gen_city_system, gen_counts, recovery_experiment,
    two_country_preset,
)

log = logging.getLogger("urbanscale")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class StrictFailure(Exception):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


@dataclass
class Settings:
    seed: int = 0
    n_bins: int = 15
    weight_mode: str = "count-sum"
    link_km: float = 1.0
    min_events: int = 10
    min_cluster_size: int = 3
    min_support: float = 0.2
    index_depth: int = 14
    fallback_km: float = 30.0
    default_bbox_deg: float = 0.1
    strict: bool = False
    countries: Optional[list] = None
    clubs: Optional[list] = None

    def home_params(self) -> HomeParams:
        return HomeParams(self.min_events, self.link_km, self.min_cluster_size, self.min_support)

    def fit_config(self) -> FitConfig:
        return FitConfig(self.n_bins, self.weight_mode)


_CONVERTERS = {
    "seed": int, "n_bins": int, "weight_mode": str, "link_km": float, "min_events": int,
    "min_cluster_size": int, "min_support": float, "index_depth": int, "fallback_km": float,
    "default_bbox_deg": float, "strict": _bool, "countries": _list, "clubs": _list,
}


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _CONVERTERS[key](value)
        except ValueError as e:
            raise UsageError(f"config line {lineno}: {e}") from None
    return out


def load_settings(args: argparse.Namespace) -> Settings:
    s = Settings()
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
        for k, v in parse_config(text).items():
            setattr(s, k, v)
    for f in fields(Settings):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(s, f.name, v)
    if s.weight_mode not in WEIGHT_MODES:
        raise UsageError(f"weight_mode must be one of {', '.join(WEIGHT_MODES)}")
    if s.n_bins < 2:
        raise UsageError("n_bins must be >= 2")
    if not s.link_km > 0:
        raise UsageError("link_km must be positive")
    if not 0 <= s.index_depth <= 30:
        raise UsageError("index_depth must be in 0..30")
    return s


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("settings (override the config file)")
    g.add_argument("--config", help="key = value settings file")
    g.add_argument("--seed", type=int)
    g.add_argument("--n-bins", dest="n_bins", type=int)
    g.add_argument("--weight-mode", dest="weight_mode", choices=WEIGHT_MODES)
    g.add_argument("--link-km", dest="link_km", type=float)
    g.add_argument("--min-events", dest="min_events", type=int)
    g.add_argument("--min-cluster-size", dest="min_cluster_size", type=int)
    g.add_argument("--min-support", dest="min_support", type=float)
    g.add_argument("--index-depth", dest="index_depth", type=int)
    g.add_argument("--fallback-km", dest="fallback_km", type=float)
    g.add_argument("--default-bbox-deg", dest="default_bbox_deg", type=float)
    g.add_argument("--countries", type=_list, help="comma-separated ISO country codes")
    g.add_argument("--clubs", type=_list, help="comma-separated club labels, in output order")
    g.add_argument("--strict", action="store_const", const=True, default=None,
                   help="treat any rejected input row as a failure (exit 2)")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_cities(gazetteer: str, bbox: Optional[str], s: Settings) -> list[CityRecord]:
    try:
        with open(gazetteer, "rb") as g:
            if bbox:
                with open(bbox, "rb") as b:
                    cities, report = parse_gazetteer(g, b, s.default_bbox_deg)
            else:
                cities, report = parse_gazetteer(g, None, s.default_bbox_deg)
    except OSError as e:
        raise UsageError(f"cannot read gazetteer: {e}") from None
    _check_report(report, s)
    return cities


def _check_report(report: ParseReport, s: Settings) -> None:
    log.info("gazetteer: %s", report.to_json())
    if report.rejected and s.strict:
        raise StrictFailure(f"gazetteer rows rejected: {report.to_json()}")


# -- stages ---------------------------------------------------------------------


def _stage_homes(events_path: str, s: Settings):
    try:
        with open(events_path, encoding="utf-8", errors="replace") as fh:
            by_user, bad = pl.read_events(fh)
    except OSError as e:
        raise UsageError(f"cannot read events: {e}") from None
    log.info("events: %d users, %d malformed lines skipped", len(by_user), bad)
    if bad and s.strict:
        raise StrictFailure(f"{bad} malformed event line(s)")
    return pl.infer_homes(by_user, s.home_params())


def _followers(directory: str, s: Settings):
    if not Path(directory).is_dir():
        raise UsageError(f"not a directory: {directory}")
    try:
        return pl.read_followers_dir(Path(directory), s.clubs)
    except pl.DataError as e:
        raise UsageError(str(e)) from None


def _fit_rows(user_city, cities, followers, s: Settings):
    try:
        return pl.fit_countries(user_city, cities, followers, s.countries, s.fit_config())
    except pl.UnknownCountry as e:
        raise UsageError(str(e)) from None


def _write_fit_outputs(rows, out: Path, plotdir: Optional[Path]) -> None:
    _write(out, pl.fits_csv(rows))
    if plotdir is not None:
        for r in rows:
            _write(plotdir / pl.plot_file_name(r), pl.dump_json(pl.plot_data(r)))


def cmd_homes(args, s: Settings) -> None:
    homes = _stage_homes(args.events, s)
    _write(Path(args.out), pl.homes_csv(homes))
    log.info("homes: %d users located", len(homes))


def cmd_assign(args, s: Settings) -> None:
    cities = _load_cities(args.gazetteer, args.bbox, s)
    homes = pl.read_homes_csv(_read(args.homes))
    index = GeoIndex(cities, depth=s.index_depth, fallback_km=s.fallback_km)
    user_city = pl.assign_cities(homes, index)
    _write(Path(args.out), pl.user_city_csv(user_city, cities))
    log.info("assign: %d of %d homes matched a city", len(user_city), len(homes))


def cmd_fit(args, s: Settings) -> None:
    plotdir = Path(args.plotdata) if args.plotdata else None
    if args.observations:
        rows = _fit_observations(pl.read_observations_csv(_read(args.observations)), s)
    else:
        if not (args.user_city and args.gazetteer and args.followers):
            raise UsageError("fit needs --user-city, --gazetteer and --followers (or --observations)")
        cities = _load_cities(args.gazetteer, args.bbox, s)
        user_city = pl.read_user_city_csv(_read(args.user_city))
        rows = _fit_rows(user_city, cities, _followers(args.followers, s), s)
    _write_fit_outputs(rows, Path(args.out), plotdir)


def _fit_observations(table, s: Settings):
    countries = s.countries or sorted(table)
    for c in countries:
        if c not in table:
            raise UsageError(str(pl.UnknownCountry(c, table)))
    rows = []
    for country in countries:
        series = table[country]
        clubs = s.clubs or [c for c in series if c != pl.COMBINED]
        if pl.COMBINED in series:
            rows.extend(pl.run_country_fit(country, series, clubs, s.fit_config()))
        else:
            rows.extend(pl.fit_series(country, club, series.get(club, []), s.fit_config()) for club in clubs)
    return rows


def cmd_report(args, s: Settings) -> None:
    rows = pl.read_fits_csv(_read(args.fits))
    text, data = pl.render_summary(rows)
    _write(Path(args.out_csv), text)
    _write(Path(args.out_json), pl.dump_json(data))


def cmd_run(args, s: Settings) -> None:
    out = Path(args.out_dir)
    homes = _stage_homes(args.events, s)
    cities = _load_cities(args.gazetteer, args.bbox, s)
    index = GeoIndex(cities, depth=s.index_depth, fallback_km=s.fallback_km)
    user_city = pl.assign_cities(homes, index)
    followers = _followers(args.followers, s)
    rows = _fit_rows(user_city, cities, followers, s)
    _write(out / "homes.csv", pl.homes_csv(homes))
    _write(out / "user_city.csv", pl.user_city_csv(user_city, cities))
    _write_fit_outputs(rows, out / "fits.csv", out / "plotdata")
    text, data = pl.render_summary(rows)
    _write(out / "summary.csv", text)
    _write(out / "summary.json", pl.dump_json(data))


def cmd_ingest_stats(args, s: Settings) -> None:
    if args.counts:
        clubs = []
        for line in _read(args.counts).splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                clubs.append(pl.ClubIngest(parts[0], int(parts[1]), int(parts[2])))
            except (IndexError, ValueError):
                raise UsageError(f"bad counts line {line!r}; expected club<TAB>total<TAB>geolocated") from None
        stats = pl.IngestStats(tuple(clubs))
    else:
        if not (args.followers and args.homes):
            raise UsageError("ingest-stats needs --followers and --homes (or --counts)")
        followers = _followers(args.followers, s)
        homes = pl.read_homes_csv(_read(args.homes))
        totals = pl.read_totals(_read(args.metadata)) if args.metadata else None
        stats = pl.summarize_ingest(followers, homes, totals)
    table = pl.render_ingest_table(stats)
    if args.out:
        _write(Path(args.out), table)
    else:
        sys.stdout.write(table)


def cmd_synth(args, s: Settings) -> None:
    out = Path(args.out_dir)
    if args.preset == "two-country":
        specs = two_country_preset(s.seed)
        cities, users = build_preset(specs)
        gaz, box = write_gazetteer(cities)
        _write(out / "gazetteer.tsv", gaz)
        _write(out / "bbox.tsv", box)
        with open(out / "events.jsonl", "w", encoding="utf-8", newline="") as fh:
            pl.write_events(users.events, fh)
        for club, ids in users.followers.items():
            _write(out / "followers" / f"{club}.txt", "".join(f"{u}\n" for u in sorted(ids)))
        truth = "".join(f"{sp.config.country}\t{club}\t{b!r}\n" for sp in specs for club, b in sp.club_betas.items())
        _write(out / "injected_beta.tsv", truth)
        return
    cfg = SynthConfig(n_cities=args.n_cities, zipf_alpha=args.zipf_alpha, n_max=args.n_max, beta=args.beta,
                      y0=args.y0, noise=args.noise, seed=s.seed, country=args.country)
    cities = gen_city_system(cfg)
    obs = gen_counts(cities, cfg.beta, cfg.y0, cfg.noise, cfg.seed)
    gaz, box = write_gazetteer(cities)
    _write(out / "gazetteer.tsv", gaz)
    _write(out / "bbox.tsv", box)
    _write(out / "observations.csv", pl.observations_csv(cfg.country, {"synthetic": obs}))


def cmd_recover(args, s: Settings) -> None:
    cfg = SynthConfig(n_cities=args.n_cities, zipf_alpha=args.zipf_alpha, n_max=args.n_max, beta=args.beta,
                      y0=args.y0, noise=args.noise, seed=s.seed)
    rep = recovery_experiment(cfg, s.fit_config(), args.trials)
    print(f"true beta {rep.true_beta}: mean {rep.mean_beta:.4f}, sd {rep.std_beta:.4f}, "
          f"2-sigma coverage {rep.coverage:.2f}, failed {rep.n_failed}/{rep.n_trials}")


def _add_synth_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-cities", type=int, default=1000)
    p.add_argument("--zipf-alpha", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=10_000_000)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--y0", type=float, default=1.0)
    p.add_argument("--noise", choices=(NOISE_NONE, NOISE_POISSON), default=NOISE_POISSON)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="urbanscale", description="Urban scaling of geolocated follower counts.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("homes", help="events.jsonl -> homes.csv")
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_homes)

    p = sub.add_parser("assign", help="homes.csv + gazetteer -> user_city.csv")
    p.add_argument("--homes", required=True)
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--bbox")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("fit", help="user_city.csv + followers -> fits.csv, plot data")
    p.add_argument("--user-city", dest="user_city")
    p.add_argument("--gazetteer")
    p.add_argument("--bbox")
    p.add_argument("--followers", help="directory of <club>.txt files")
    p.add_argument("--observations", help="observations CSV instead of user/follower files")
    p.add_argument("--out", required=True)
    p.add_argument("--plotdata", help="directory for per-fit plot JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="fits.csv -> summary.csv, summary.json")
    p.add_argument("--fits", required=True)
    p.add_argument("--out-csv", dest="out_csv", required=True)
    p.add_argument("--out-json", dest="out_json", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="all stages in one go")
    p.add_argument("--events", required=True)
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--bbox")
    p.add_argument("--followers", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ingest-stats", help="follower totals vs geolocated followers table")
    p.add_argument("--followers")
    p.add_argument("--homes")
    p.add_argument("--metadata", help="club<TAB>total_followers file")
    p.add_argument("--counts", help="club<TAB>total<TAB>geolocated file instead of raw lists")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest_stats)

    p = sub.add_parser("synth", help="synthetic gazetteer + observations (or a full preset fixture)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--preset", choices=("two-country",))
    p.add_argument("--country", default="XX")
    _add_synth_params(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("recover", help="exponent recovery experiment on synthetic data")
    _add_synth_params(p)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_recover)

    for sp in sub.choices.values():
        _add_common(sp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        settings = load_settings(args)
        args.func(args, settings)
    except UsageError as e:
        print(f"urbanscale: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # config values that only fail deep inside (e.g. bad synth parameters)
        if isinstance(e, pl.DataError):
            print(f"urbanscale: data error: {e}", file=sys.stderr)
            return EXIT_DATA
        print(f"urbanscale: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StrictFailure as e:
        print(f"urbanscale: strict: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
