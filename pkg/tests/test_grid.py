"""Grid geometry: node centers, nearest-node mapping, visit extraction."""

from __future__ import annotations

import random

import pytest
from conftest import PAIR_GRID

from fogcast.grid import (
    GridNetwork,
    closest_node,
    haversine_m,
    map_to_nodes,
    visits_from_session,
)
from fogcast.trajectory import Session, TrackPoint


def unit_grid(rows, cols):
    return GridNetwork(
        rows=rows,
        cols=cols,
        lat_min=0.0,
        lat_max=1.0,
        lon_min=0.0,
        lon_max=1.0,
        transfer_time=300,
        buffer=0,
    )


def session_at(coords, times, user_id="u"):
    pts = tuple(
        TrackPoint(user_id=user_id, timestamp=t, lat=lat, lon=lon)
        for (lat, lon), t in zip(coords, times)
    )
    return Session(user_id=user_id, points=pts)


class TestGeometry:
    def test_single_cell_center(self):
        grid = unit_grid(1, 1)
        assert grid.node_center(0) == (0.5, 0.5)

    def test_two_by_two_centers(self):
        grid = unit_grid(2, 2)
        centers = [grid.node_center(i) for i in range(4)]
        assert centers == [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]

    def test_row_major_ids(self):
        grid = unit_grid(2, 3)
        # row 1, col 2 -> id 1*3 + 2 = 5
        lat, lon = grid.node_center(1 * 3 + 2)
        assert lat == pytest.approx(0.75)
        assert lon == pytest.approx(2.5 / 3.0)

    def test_node_count(self):
        assert unit_grid(3, 4).node_count == 12

    def test_node_id_out_of_range(self):
        with pytest.raises(ValueError):
            unit_grid(2, 2).node_center(4)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError):
            GridNetwork(
                rows=2,
                cols=2,
                lat_min=1.0,
                lat_max=0.0,
                lon_min=0.0,
                lon_max=1.0,
                transfer_time=300,
                buffer=0,
            )

    def test_invalid_shape_rejected(self):
        with pytest.raises(ValueError):
            unit_grid(0, 3)

    def test_negative_transfer_rejected(self):
        with pytest.raises(ValueError):
            GridNetwork(
                rows=1,
                cols=1,
                lat_min=0.0,
                lat_max=1.0,
                lon_min=0.0,
                lon_max=1.0,
                transfer_time=-1,
                buffer=0,
            )

    def test_defaults(self):
        grid = GridNetwork()
        assert (grid.rows, grid.cols) == (8, 8)
        assert grid.transfer_time == 300
        assert grid.buffer == 0


class TestHaversine:
    def test_zero_distance(self):
        assert haversine_m(39.9, 116.4, 39.9, 116.4) == 0.0

    def test_one_degree_latitude(self):
        # One degree of latitude is about 111.2 km on the sphere in use.
        d = haversine_m(0.0, 0.0, 1.0, 0.0)
        assert d == pytest.approx(111_195, rel=1e-3)

    def test_symmetry(self):
        a = haversine_m(39.9, 116.4, 40.0, 116.5)
        b = haversine_m(40.0, 116.5, 39.9, 116.4)
        assert a == pytest.approx(b, abs=1e-9)


class TestClosestNode:
    def test_point_at_center_maps_to_node(self):
        grid = unit_grid(2, 2)
        for node in range(4):
            lat, lon = grid.node_center(node)
            assert closest_node(grid, lat, lon) == node

    def test_equidistant_tie_goes_to_lowest_id(self):
        # PAIR_GRID centers sit at lon 0.5 and 1.5 on the equator; lon 1.0 is
        # the exact midpoint.
        assert closest_node(PAIR_GRID, 0.5, 1.0) == 0

    def test_outside_box_clamps(self):
        grid = unit_grid(2, 2)
        assert closest_node(grid, 5.0, 5.0) == closest_node(grid, 1.0, 1.0)
        assert closest_node(grid, -5.0, -5.0) == closest_node(grid, 0.0, 0.0)

    def test_matches_brute_force_scan(self):
        grid = unit_grid(4, 4)
        rng = random.Random(1234)
        for _ in range(200):
            lat = rng.uniform(0.0, 1.0)
            lon = rng.uniform(0.0, 1.0)
            best = min(
                range(grid.node_count),
                key=lambda n: (haversine_m(lat, lon, *grid.node_center(n)), n),
            )
            assert closest_node(grid, lat, lon) == best

    def test_map_to_nodes_matches_scalar(self):
        grid = unit_grid(3, 3)
        rng = random.Random(99)
        lats = [rng.uniform(0, 1) for _ in range(50)]
        lons = [rng.uniform(0, 1) for _ in range(50)]
        mapped = map_to_nodes(grid, lats, lons)
        assert list(mapped) == [
            closest_node(grid, lat, lon) for lat, lon in zip(lats, lons)
        ]


class TestVisits:
    def run_compress(self, nodes, times):
        # Place each fix at the center of the requested PAIR_GRID node.
        coords = [PAIR_GRID.node_center(n) for n in nodes]
        return visits_from_session(PAIR_GRID, session_at(coords, times), 0)

    def test_run_compression(self):
        visits = self.run_compress([0, 0, 1], [0, 60, 120])
        assert [(v.node_id, v.arrival, v.departure) for v in visits] == [
            (0, 0, 120),
            (1, 120, 120),
        ]

    def test_alternating_fixes(self):
        visits = self.run_compress([0, 1, 0, 1], [0, 60, 120, 180])
        assert [v.duration for v in visits] == [60, 60, 60, 0]
        assert [v.node_id for v in visits] == [0, 1, 0, 1]

    def test_single_node_session(self):
        visits = self.run_compress([1, 1, 1], [5, 10, 15])
        assert [(v.node_id, v.arrival, v.departure) for v in visits] == [(1, 5, 15)]

    def test_single_fix_session(self):
        visits = self.run_compress([0], [100])
        assert [(v.node_id, v.arrival, v.departure) for v in visits] == [(0, 100, 100)]

    def test_session_index_recorded(self):
        coords = [PAIR_GRID.node_center(0)]
        (visit,) = visits_from_session(PAIR_GRID, session_at(coords, [0]), 7)
        assert visit.session_index == 7

    def test_visits_tile_session(self):
        rng = random.Random(5)
        nodes, times = [], []
        t = 1000
        current = rng.randrange(2)
        for _ in range(40):
            nodes.append(current)
            times.append(t)
            t += rng.randrange(30, 300)
            if rng.random() < 0.3:
                current = 1 - current
        visits = self.run_compress(nodes, times)
        assert visits[0].arrival == times[0]
        assert visits[-1].departure == times[-1]
        for left, right in zip(visits, visits[1:]):
            assert left.departure == right.arrival
            assert left.node_id != right.node_id
            assert left.duration > 0
        assert visits[-1].duration >= 0


def test_sample_dataset_visit_shape(sample_visits):
    assert len(sample_visits) == 10
    for user_id, visits in sample_visits.items():
        assert visits, user_id
        by_session = {}
        for v in visits:
            by_session.setdefault(v.session_index, []).append(v)
        for session_visits in by_session.values():
            for left, right in zip(session_visits, session_visits[1:]):
                assert left.departure == right.arrival
                assert left.node_id != right.node_id
            for v in session_visits[:-1]:
                assert v.duration > 0
