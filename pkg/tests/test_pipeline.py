import csv
import io
import json
import random

import pytest

from urbanscale import cli
from urbanscale import pipeline as pl
from urbanscale.gazetteer import CityRecord, write_gazetteer
from urbanscale.geo import GeoPoint, bbox_around
from urbanscale.geoindex import GeoIndex
from urbanscale.homeloc import GeoEvent, HomeLocation
from urbanscale.scaling import LINEAR, SUBLINEAR, SUPERLINEAR, FitConfig, ScalingFit, classify
from urbanscale.synth import SynthConfig, gen_city_system, gen_users


def city(cid, country, pop, lat=0.0, lon=0.0):
    c = GeoPoint(lat, lon)
    return CityRecord(cid, cid, country, c, pop, bbox_around(c, 0.1))


def fs(club, *ids):
    return pl.FollowerSet(club, frozenset(ids))


CITIES = [city("A1", "AA", 1000, 0, 0), city("A2", "AA", 5000, 1, 1), city("B1", "BB", 700, 20, 20)]


class TestAggregate:
    def test_union_semantics(self):
        out = pl.aggregate_city_counts({"u": "A1"}, CITIES, [fs("x", "u"), fs("y", "u")], "AA")
        a1 = {k: [o.count for o in v if o.city_id == "A1"][0] for k, v in out.items()}
        assert a1 == {"x": 1, "y": 1, pl.COMBINED: 1}

    def test_no_users(self):
        out = pl.aggregate_city_counts({}, CITIES, [fs("x"), fs("y")], "AA")
        assert list(out) == ["x", "y", pl.COMBINED]
        for series in out.values():
            assert [o.city_id for o in series] == ["A1", "A2"]
            assert all(o.count == 0 for o in series)

    def test_unknown_country(self):
        with pytest.raises(pl.UnknownCountry) as e:
            pl.aggregate_city_counts({}, CITIES, [], "ZZ")
        assert "AA, BB" in str(e.value)

    def test_other_country_ignored(self):
        out = pl.aggregate_city_counts({"u": "B1", "v": "A2"}, CITIES, [fs("x", "u", "v")], "AA")
        assert sum(o.count for o in out["x"]) == 1

    def test_matches_nested_loop_tally(self):
        rng = random.Random(8)
        cities = [city(f"C{i}", rng.choice(["AA", "BB"]), rng.randint(1, 10**6)) for i in range(40)]
        users = [f"u{i}" for i in range(1000)]
        user_city = {u: rng.choice(cities).city_id for u in users if rng.random() < 0.9}
        clubs = [fs(name, *(u for u in users if rng.random() < p)) for name, p in
                 (("x", 0.3), ("y", 0.5), ("z", 0.1))]
        for country in ("AA", "BB"):
            out = pl.aggregate_city_counts(user_city, cities, clubs, country)
            for c in (c for c in cities if c.country == country):
                for f in clubs:
                    want = 0
                    for u in users:
                        if u in f.user_ids and user_city.get(u) == c.city_id:
                            want += 1
                    got = [o.count for o in out[f.club] if o.city_id == c.city_id][0]
                    assert got == want
                combined = 0
                for u in users:
                    if user_city.get(u) == c.city_id and any(u in f.user_ids for f in clubs):
                        combined += 1
                per_club = sum([o.count for o in out[f.club] if o.city_id == c.city_id][0] for f in clubs)
                got = [o.count for o in out[pl.COMBINED] if o.city_id == c.city_id][0]
                assert got == combined <= per_club
                overlap = any(sum(u in f.user_ids for f in clubs) > 1 for u in users
                              if user_city.get(u) == c.city_id)
                assert (got == per_club) == (not overlap)


class TestCountryFit:
    def test_mini_country_recovers_club_exponents(self):
        betas = {"club_a": 0.8, "club_b": 1.0, "club_c": 1.3}
        cities = gen_city_system(SynthConfig(n_cities=150, n_max=200_000, country="XM", id_prefix="XM"))
        user_city, followers = {}, []
        for k, (club, b) in enumerate(betas.items()):
            # prefactor puts about 10 expected followers in the smallest city
            users = gen_users(cities, {club: b}, 10 / 1333 ** b, seed=100 + k, home_events=0, stray_events=0)
            user_city.update({f"{club}:{u}": c for u, c in users.homes.items()})
            followers.append(pl.FollowerSet(club, frozenset(f"{club}:{u}" for u in users.followers[club])))
        rows = pl.fit_countries(user_city, cities, followers)
        assert [r.club for r in rows] == ["club_a", "club_b", "club_c", pl.COMBINED]
        for r in rows[:3]:
            assert r.status == pl.STATUS_OK
            assert abs(r.fit.beta - betas[r.club]) <= 0.05

    def test_single_city(self):
        cities = [city("S1", "SS", 5000)]
        rows = pl.fit_countries({"u": "S1", "v": "S1"}, cities, [fs("a", "u"), fs("b", "u", "v"), fs("c", "v")])
        assert len(rows) == 4
        assert all(r.status == pl.STATUS_IMPOSSIBLE and r.fit is None for r in rows)

    def test_no_clubs(self):
        rows = pl.fit_countries({"u": "A1"}, CITIES, [], countries=["AA"])
        assert [(r.club, r.status) for r in rows] == [(pl.COMBINED, pl.STATUS_IMPOSSIBLE)]
        assert all(o.count == 0 for o in rows[0].observations)

    def test_unknown_country_lists_codes(self):
        with pytest.raises(pl.UnknownCountry, match="valid codes: AA, BB"):
            pl.fit_countries({}, CITIES, [], countries=["XX"])

    def test_fits_csv_round_trip(self):
        rows = pl.fit_countries({"u": "A1", "v": "A2", "w": "A2"}, CITIES, [fs("x", "u", "v", "w")],
                                config=FitConfig(n_bins=2))
        text = pl.fits_csv(rows)
        assert text.splitlines()[0] == ",".join(pl.FIT_COLUMNS)
        again = pl.read_fits_csv(text)
        assert pl.fits_csv(again) == text
        assert [r.status for r in again] == [pl.STATUS_OK, pl.STATUS_OK, pl.STATUS_IMPOSSIBLE, pl.STATUS_IMPOSSIBLE]

    def test_plot_data(self):
        rows = pl.fit_countries({"u": "A1", "v": "A2", "w": "A2"}, CITIES, [fs("x", "u", "v", "w")],
                                countries=["AA"], config=FitConfig(n_bins=2))
        d = pl.plot_data(rows[0])
        assert len(d["scatter"]) == 2 and len(d["bins"]) == 2
        assert d["fit"]["line"][0][0] == pytest.approx(3.0)
        json.dumps(d)


def fit_row(country, club, beta, se):
    return pl.FitRow(country, club, pl.STATUS_OK, ScalingFit(beta, se, 0.0, 0.9, 10, 100, classify(beta, se)))


CLUBS = ["Real Madrid", "Manchester United", "Bayern Munich", pl.COMBINED]


class TestSummary:
    def test_spain(self):
        vals = [(1.07, 0.08), (0.90, 0.12), (0.65, 0.09), (0.89, 0.06)]
        text, data = pl.render_summary([fit_row("ES", c, b, s) for c, (b, s) in zip(CLUBS, vals)])
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == pl.SUMMARY_COLUMNS
        assert rows[1:] == [
            ["ES", "Real Madrid", "1.07", "0.08", LINEAR],
            ["ES", "Manchester United", "0.9", "0.12", LINEAR],
            ["ES", "Bayern Munich", "0.65", "0.09", SUBLINEAR],
            ["ES", pl.COMBINED, "0.89", "0.06", SUBLINEAR],
        ]
        assert [float(r[2]) for r in rows[1:]] == [v[0] for v in vals]
        assert data["reference_beta"] == 1.0
        assert [f["beta"] for f in data["countries"][0]["fits"]] == [v[0] for v in vals]

    def test_indonesia_all_superlinear(self):
        vals = [(1.53, 0.19), (1.19, 0.13), (1.55, 0.11), (1.55, 0.11)]
        text, _ = pl.render_summary([fit_row("ID", c, b, s) for c, (b, s) in zip(CLUBS, vals)])
        assert [r["regime"] for r in csv.DictReader(io.StringIO(text))] == [SUPERLINEAR] * 4

    def test_empty(self):
        text, data = pl.render_summary([])
        assert text == ",".join(pl.SUMMARY_COLUMNS) + "\n"
        assert data["countries"] == []

    def test_failed_rows_skipped(self):
        rows = [fit_row("ES", "a", 1.2, 0.1), pl.FitRow("ES", "b", pl.STATUS_IMPOSSIBLE)]
        text, _ = pl.render_summary(rows)
        assert len(text.splitlines()) == 2


PUBLISHED_COUNTS = [("Real Madrid", 28_700_000, 808_427), ("Manchester United", 17_300_000, 436_515),
          ("Bayern Munich", 4_300_000, 119_056)]


class TestIngest:
    def test_published_rates(self):
        stats = pl.IngestStats(tuple(pl.ClubIngest(*r) for r in PUBLISHED_COUNTS))
        assert [f"{100 * c.match_rate:.2f}%" for c in stats.clubs] == ["2.82%", "2.52%", "2.77%"]
        table = stats.table()
        assert "28.7M" in table and "808,427" in table and "2.82%" in table

    def test_zero_followers(self):
        stats = pl.summarize_ingest([fs("none")], [], {"none": 0})
        assert stats.clubs[0].match_rate is None
        assert "—" in stats.table()

    def test_all_geolocated(self):
        homes = [HomeLocation(u, GeoPoint(0, 0), 3, 10) for u in ("a", "b")]
        stats = pl.summarize_ingest([fs("c", "a", "b")], homes)
        assert stats.clubs[0].match_rate == 1.0 and "100.00%" in stats.table()

    def test_metadata_totals(self):
        stats = pl.summarize_ingest([fs("c", "a", "b", "z")], ["a"], pl.read_totals("c\t1000\n"))
        assert stats.clubs[0] == pl.ClubIngest("c", 1000, 1)


class TestIO:
    def test_events_skip_malformed(self):
        lines = ['{"user": "u", "lat": 1, "lon": 2, "ts": 3}', "not json", '{"user": "u", "lat": 99, "lon": 0, "ts": 1}',
                 '{"user": "u", "lat": 1, "lon": 2}', '{"user": "u", "lat": true, "lon": 2, "ts": 1}', ""]
        by_user, bad = pl.read_events(lines)
        assert len(by_user["u"]) == 1 and bad == 4

    def test_events_round_trip(self):
        ev = [GeoEvent("a", GeoPoint(1.25, -3.5), 9), GeoEvent("b", GeoPoint(-0.1, 179.9), 0)]
        buf = io.StringIO()
        pl.write_events(ev, buf)
        by_user, bad = pl.read_events(buf.getvalue().splitlines())
        assert bad == 0 and by_user["a"] + by_user["b"] == ev

    def test_homes_round_trip(self):
        homes = [HomeLocation("b", GeoPoint(0.1 + 0.2, 7.0), 4, 9), HomeLocation("a", GeoPoint(-1, 2), 3, 3)]
        text = pl.homes_csv(homes)
        assert text.splitlines()[0] == ",".join(pl.HOMES_COLUMNS)
        assert pl.homes_csv(pl.read_homes_csv(text)) == text
        assert pl.read_homes_csv(text)[1].point.lat == 0.1 + 0.2

    def test_observations_round_trip(self):
        series = pl.aggregate_city_counts({"u": "A1"}, CITIES, [fs("x", "u")], "AA")
        text = pl.observations_csv("AA", series)
        assert pl.read_observations_csv(text) == {"AA": series}

    def test_assign(self):
        index = GeoIndex(CITIES)
        homes = [HomeLocation("u", GeoPoint(1.05, 1.0), 3, 3), HomeLocation("v", GeoPoint(50, 50), 3, 3)]
        assert pl.assign_cities(homes, index) == {"u": "A2"}


# -- command line ------------------------------------------------------------------


def write_small_inputs(tmp_path):
    gaz, box = write_gazetteer(CITIES)
    (tmp_path / "gaz.tsv").write_text(gaz)
    (tmp_path / "box.tsv").write_text(box)
    lines = [json.dumps({"user": u, "lat": lat, "lon": lon, "ts": t})
             for u, lat, lon in (("u", 0.0, 0.0), ("v", 1.0, 1.0), ("w", 1.0, 1.0)) for t in range(12)]
    (tmp_path / "events.jsonl").write_text("\n".join(lines) + "\n")
    (tmp_path / "followers").mkdir()
    (tmp_path / "followers" / "x.txt").write_text("u\nv\nw\n")
    return tmp_path


class TestCli:
    def test_usage_error(self, capsys):
        assert cli.main(["homes"]) == 1
        assert cli.main(["bogus"]) == 1
        assert cli.main(["fit", "--out", "x", "--n-bins", "1", "--observations", "y"]) == 1

    def test_unknown_country_is_usage_error(self, tmp_path, capsys):
        d = write_small_inputs(tmp_path)
        code = cli.main(["run", "--events", str(d / "events.jsonl"), "--gazetteer", str(d / "gaz.tsv"),
                         "--followers", str(d / "followers"), "--out-dir", str(d / "out"), "--countries", "QQ"])
        assert code == 1
        assert "AA, BB" in capsys.readouterr().err

    def test_strict_bad_row(self, tmp_path):
        d = write_small_inputs(tmp_path)
        with open(d / "events.jsonl", "a") as fh:
            fh.write("{broken\n")
        args = ["homes", "--events", str(d / "events.jsonl"), "--out", str(d / "homes.csv")]
        assert cli.main(args) == 0
        assert cli.main(args + ["--strict"]) == 2
        (d / "cfg.txt").write_text("strict = true\n")
        assert cli.main(args + ["--config", str(d / "cfg.txt")]) == 2

    def test_config_and_flag_precedence(self, tmp_path):
        (tmp_path / "cfg.txt").write_text("# settings\nn_bins = 4\nlink-km = 2.5\nclubs = a, b\n")
        args = cli.build_parser().parse_args(["report", "--fits", "f", "--out-csv", "c", "--out-json", "j",
                                              "--config", str(tmp_path / "cfg.txt"), "--n-bins", "7"])
        s = cli.load_settings(args)
        assert (s.n_bins, s.link_km, s.clubs, s.min_events) == (7, 2.5, ["a", "b"], 10)

    def test_bad_config(self, tmp_path):
        (tmp_path / "cfg.txt").write_text("colour = blue\n")
        assert cli.main(["homes", "--events", "e", "--out", "o", "--config", str(tmp_path / "cfg.txt")]) == 1

    def test_small_run(self, tmp_path):
        d = write_small_inputs(tmp_path)
        code = cli.main(["run", "--events", str(d / "events.jsonl"), "--gazetteer", str(d / "gaz.tsv"),
                         "--bbox", str(d / "box.tsv"), "--followers", str(d / "followers"),
                         "--out-dir", str(d / "out"), "--n-bins", "2"])
        assert code == 0
        fits = list(csv.DictReader(open(d / "out" / "fits.csv")))
        assert [(r["country"], r["club"], r["status"]) for r in fits] == [
            ("AA", "x", "ok"), ("AA", "combined", "ok"),
            ("BB", "x", "fit-impossible"), ("BB", "combined", "fit-impossible")]
        assert (d / "out" / "plotdata" / "AA_x.json").exists()

    def test_ingest_stats_counts(self, tmp_path, capsys):
        (tmp_path / "t1.tsv").write_text("".join(f"{n}\t{t}\t{g}\n" for n, t, g in PUBLISHED_COUNTS))
        assert cli.main(["ingest-stats", "--counts", str(tmp_path / "t1.tsv")]) == 0
        out = capsys.readouterr().out
        assert "2.82%" in out and "2.52%" in out and "2.77%" in out

    def test_synth_observations_fit(self, tmp_path):
        out = tmp_path / "s"
        assert cli.main(["synth", "--out-dir", str(out), "--n-cities", "200", "--beta", "1.3", "--seed", "4"]) == 0
        assert cli.main(["fit", "--observations", str(out / "observations.csv"), "--out", str(out / "fits.csv")]) == 0
        row = list(csv.DictReader(open(out / "fits.csv")))[0]
        assert abs(float(row["beta"]) - 1.3) < 0.05

    def test_staged_matches_run(self, preset_dir, tmp_path):
        # restartability: each stage from persisted files gives the one-shot result byte for byte
        p, s = preset_dir, tmp_path
        common = ["--gazetteer", str(p / "gazetteer.tsv"), "--bbox", str(p / "bbox.tsv")]
        assert cli.main(["run", "--events", str(p / "events.jsonl"), "--followers", str(p / "followers"),
                         "--out-dir", str(s / "run")] + common) == 0
        assert cli.main(["homes", "--events", str(p / "events.jsonl"), "--out", str(s / "homes.csv")]) == 0
        assert cli.main(["assign", "--homes", str(s / "homes.csv"), "--out", str(s / "user_city.csv")] + common) == 0
        assert cli.main(["fit", "--user-city", str(s / "user_city.csv"), "--followers", str(p / "followers"),
                         "--out", str(s / "fits.csv"), "--plotdata", str(s / "plotdata")] + common) == 0
        assert cli.main(["report", "--fits", str(s / "fits.csv"), "--out-csv", str(s / "summary.csv"),
                         "--out-json", str(s / "summary.json")]) == 0
        for name in ("homes.csv", "user_city.csv", "fits.csv", "summary.csv", "summary.json"):
            assert (s / name).read_bytes() == (s / "run" / name).read_bytes(), name
        for f in sorted((s / "run" / "plotdata").iterdir()):
            assert f.read_bytes() == (s / "plotdata" / f.name).read_bytes()
