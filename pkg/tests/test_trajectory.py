"""Trajectory ingestion: PLT parsing, normalization, session splitting."""

from __future__ import annotations

import datetime as dt
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogcast.trajectory import (
    DEFAULT_SESSION_GAP,
    TrackPoint,
    load_dataset,
    normalize_points,
    normalized_lines,
    parse_plt_file,
    read_normalized,
    scan_dataset,
    sessions_from_points,
    split_sessions,
    write_normalized,
)

PLT_HEADER = (
    "Geolife trajectory\n"
    "WGS 84\n"
    "Altitude is in Feet\n"
    "Reserved 3\n"
    "0,2,255,My Track,0,0,2,8421376\n"
    "0\n"
)


def write_plt(path, records):
    path.write_text(PLT_HEADER + "".join(records))


def ts(*args):
    return int(dt.datetime(*args, tzinfo=dt.timezone.utc).timestamp())


def make_points(times, user_id="u", lat=39.9, lon=116.4):
    return [
        TrackPoint(user_id=user_id, timestamp=t, lat=lat, lon=lon) for t in times
    ]


class TestParsePlt:
    def test_single_record(self, tmp_path):
        plt = tmp_path / "a.plt"
        write_plt(plt, ["39.906631,116.385564,0,492,39745.0902662037,2008-10-24,02:09:59\n"])
        result = parse_plt_file(plt, "000")
        assert result.skipped == 0
        (point,) = result.points
        assert point.user_id == "000"
        assert point.lat == pytest.approx(39.906631)
        assert point.lon == pytest.approx(116.385564)
        assert point.timestamp == ts(2008, 10, 24, 2, 9, 59)

    def test_header_is_skipped_without_counting(self, tmp_path):
        plt = tmp_path / "a.plt"
        write_plt(plt, [])
        result = parse_plt_file(plt, "000")
        assert result.points == []
        assert result.skipped == 0

    def test_out_of_range_latitude_skipped_and_counted(self, tmp_path):
        plt = tmp_path / "a.plt"
        write_plt(
            plt,
            [
                "91.0,116.4,0,492,39745.0,2008-10-24,02:09:59\n",
                "39.9,116.4,0,492,39745.0,2008-10-24,02:10:01\n",
            ],
        )
        result = parse_plt_file(plt, "000")
        assert len(result.points) == 1
        assert result.skipped == 1

    def test_out_of_range_longitude_skipped(self, tmp_path):
        plt = tmp_path / "a.plt"
        write_plt(plt, ["39.9,180.5,0,492,39745.0,2008-10-24,02:09:59\n"])
        result = parse_plt_file(plt, "000")
        assert result.points == []
        assert result.skipped == 1

    @pytest.mark.parametrize(
        "record",
        [
            "not,a,record\n",
            "39.9,116.4,0,492,39745.0,2008-13-24,02:09:59\n",  # bad month
            "abc,116.4,0,492,39745.0,2008-10-24,02:09:59\n",  # bad float
            "39.9,116.4\n",  # too few fields
        ],
    )
    def test_malformed_record_skipped_and_counted(self, tmp_path, record):
        plt = tmp_path / "a.plt"
        write_plt(plt, [record])
        result = parse_plt_file(plt, "000")
        assert result.points == []
        assert result.skipped == 1

    def test_blank_lines_ignored_without_counting(self, tmp_path):
        plt = tmp_path / "a.plt"
        write_plt(plt, ["\n", "39.9,116.4,0,492,39745.0,2008-10-24,02:09:59\n", "  \n"])
        result = parse_plt_file(plt, "000")
        assert len(result.points) == 1
        assert result.skipped == 0


class TestNormalize:
    def test_sorts_by_timestamp(self):
        pts = make_points([30, 10, 20])
        assert [p.timestamp for p in normalize_points(pts)] == [10, 20, 30]

    def test_duplicate_timestamp_keeps_first(self):
        pts = [
            TrackPoint(user_id="u", timestamp=10, lat=1.0, lon=1.0),
            TrackPoint(user_id="u", timestamp=10, lat=2.0, lon=2.0),
        ]
        out = normalize_points(pts)
        assert len(out) == 1
        assert out[0].lat == 1.0

    def test_stable_for_equal_timestamps_after_shuffle(self):
        pts = [
            TrackPoint(user_id="u", timestamp=5, lat=9.0, lon=9.0),
            TrackPoint(user_id="u", timestamp=10, lat=1.0, lon=1.0),
            TrackPoint(user_id="u", timestamp=10, lat=2.0, lon=2.0),
        ]
        out = normalize_points(pts)
        assert [p.timestamp for p in out] == [5, 10]
        assert out[1].lat == 1.0


class TestSplitSessions:
    def test_gap_over_threshold_splits(self):
        pts = make_points([0, 10, 30, 7230, 7245])
        sessions = split_sessions(pts, gap_threshold=600)
        assert [len(s.points) for s in sessions] == [3, 2]
        assert sessions[0].start == 0 and sessions[0].end == 30
        assert sessions[1].start == 7230 and sessions[1].end == 7245

    def test_gap_exactly_threshold_stays_together(self):
        pts = make_points([0, 600])
        assert len(split_sessions(pts, gap_threshold=600)) == 1

    def test_gap_one_over_threshold_splits(self):
        pts = make_points([0, 601])
        assert len(split_sessions(pts, gap_threshold=600)) == 2

    def test_single_point_session(self):
        (session,) = split_sessions(make_points([42]), gap_threshold=600)
        assert session.start == session.end == 42
        assert session.duration == 0

    def test_empty_input(self):
        assert split_sessions([], gap_threshold=600) == []

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValueError):
            split_sessions(make_points([0]), gap_threshold=0)

    def test_default_gap(self):
        assert DEFAULT_SESSION_GAP == 600

    @given(
        st.lists(st.integers(min_value=0, max_value=100_000), min_size=1, max_size=60),
        st.integers(min_value=1, max_value=3_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_property(self, times, gap):
        pts = normalize_points(make_points(times))
        sessions = split_sessions(pts, gap_threshold=gap)
        # Every point lands in exactly one session, order preserved.
        flattened = [p for s in sessions for p in s.points]
        assert flattened == pts
        for session in sessions:
            assert session.start == session.points[0].timestamp
            assert session.end == session.points[-1].timestamp
            for a, b in zip(session.points, session.points[1:]):
                assert b.timestamp - a.timestamp <= gap
        for left, right in zip(sessions, sessions[1:]):
            assert right.start - left.end > gap


class TestDatasetScan:
    def make_tree(self, root):
        for user, day_records in {
            "000": {
                "file1.plt": ["39.9,116.4,0,1,1.0,2008-10-24,02:00:00\n"],
                "file0.plt": ["39.9,116.4,0,1,1.0,2008-10-24,01:00:00\n"],
            },
            "001": {
                "only.plt": ["40.0,116.5,0,1,1.0,2008-10-25,08:00:00\n"],
            },
        }.items():
            traj = root / user / "Trajectory"
            traj.mkdir(parents=True)
            for name, records in day_records.items():
                write_plt(traj / name, records)

    def test_loads_all_users_merged_sorted(self, tmp_path):
        self.make_tree(tmp_path)
        data = load_dataset(tmp_path)
        assert list(data) == ["000", "001"]
        # The two fixes for user 000 are an hour apart, so they split into
        # two sessions in time order, regardless of file name order.
        assert [s.start for s in data["000"]] == [
            ts(2008, 10, 24, 1, 0, 0),
            ts(2008, 10, 24, 2, 0, 0),
        ]

    def test_user_filter(self, tmp_path):
        self.make_tree(tmp_path)
        data = load_dataset(tmp_path, user_filter=["001"])
        assert list(data) == ["001"]

    def test_unknown_user_in_filter_raises(self, tmp_path):
        self.make_tree(tmp_path)
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path, user_filter=["001", "999"])

    def test_missing_root_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "nope")

    def test_scan_reports_skipped(self, tmp_path):
        traj = tmp_path / "000" / "Trajectory"
        traj.mkdir(parents=True)
        write_plt(traj / "a.plt", ["garbage\n", "39.9,116.4,0,1,1.0,2008-10-24,02:00:00\n"])
        report = scan_dataset(tmp_path)
        assert report.skipped_lines == {"000": 1}
        assert report.point_counts == {"000": 1}

    def test_user_without_points_omitted(self, tmp_path):
        traj = tmp_path / "000" / "Trajectory"
        traj.mkdir(parents=True)
        write_plt(traj / "a.plt", [])
        (tmp_path / "001").mkdir()  # no Trajectory dir at all
        report = scan_dataset(tmp_path)
        assert report.sessions == {}


class TestNormalizedRoundTrip:
    def test_round_trip_exact(self, tmp_path):
        rng = random.Random(7)
        data = {
            f"{i:03d}": normalize_points(
                [
                    TrackPoint(
                        user_id=f"{i:03d}",
                        timestamp=rng.randrange(0, 10**9),
                        lat=rng.uniform(-89.0, 89.0),
                        lon=rng.uniform(-179.0, 179.0),
                    )
                    for _ in range(50)
                ]
            )
            for i in range(3)
        }
        path = tmp_path / "normalized.tsv"
        write_normalized(data, path)
        assert read_normalized(path) == data

    def test_lines_are_sorted_by_user(self):
        data = {
            "001": make_points([5], user_id="001"),
            "000": make_points([9], user_id="000"),
        }
        lines = normalized_lines(data).splitlines()
        assert lines[0].startswith("000\t")
        assert lines[1].startswith("001\t")

    def test_malformed_normalized_raises(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("000\tnot_an_int\t1.0\t2.0\n")
        with pytest.raises(ValueError):
            read_normalized(path)

    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=2**33),
                st.floats(min_value=-90.0, max_value=90.0, allow_nan=False),
                st.floats(min_value=-180.0, max_value=180.0, allow_nan=False),
            ),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, tmp_path_factory, rows):
        pts = normalize_points(
            [
                TrackPoint(user_id="u", timestamp=t, lat=lat, lon=lon)
                for t, lat, lon in rows
            ]
        )
        path = tmp_path_factory.mktemp("norm") / "n.tsv"
        write_normalized({"u": pts}, path)
        assert read_normalized(path) == {"u": pts}


def test_sessions_from_points_matches_split():
    pts = make_points([0, 100, 900, 950])
    result = sessions_from_points({"u": pts}, gap_threshold=600)
    assert result == {"u": split_sessions(pts, gap_threshold=600)}
    assert sessions_from_points({"u": []}) == {}
