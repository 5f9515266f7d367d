"""Fog-node grid geometry and the GPS-fix to node-visit conversion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .trajectory import Session

EARTH_RADIUS_M = 6371000.0

DEFAULT_LAT_MIN = 39.75
DEFAULT_LAT_MAX = 40.05
DEFAULT_LON_MIN = 116.15
DEFAULT_LON_MAX = 116.65


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class GridNetwork:
    """An evenly spaced rows x cols grid of fog nodes over a lat/lon box.

    Node ids are row-major: ``node_id = row * cols + col`` with row 0 at the
    southern edge and col 0 at the western edge.  Each node sits at the
    center of its cell.
    """

    rows: int = 8
    cols: int = 8
    lat_min: float = DEFAULT_LAT_MIN
    lat_max: float = DEFAULT_LAT_MAX
    lon_min: float = DEFAULT_LON_MIN
    lon_max: float = DEFAULT_LON_MAX
    transfer_time: int = 300  # seconds to copy a replica to a node
    buffer: int = 0  # extra head start subtracted from predicted departure

    def __post_init__(self) -> None:
        problems = []
        if self.rows < 1 or self.cols < 1:
            problems.append(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.lat_min < self.lat_max:
            problems.append(f"lat_min must be < lat_max, got [{self.lat_min}, {self.lat_max}]")
        if not self.lon_min < self.lon_max:
            problems.append(f"lon_min must be < lon_max, got [{self.lon_min}, {self.lon_max}]")
        if self.transfer_time < 0:
            problems.append(f"transfer_time must be >= 0, got {self.transfer_time}")
        if self.buffer < 0:
            problems.append(f"buffer must be >= 0, got {self.buffer}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def node_count(self) -> int:
        return self.rows * self.cols

    def node_center(self, node_id: int) -> tuple[float, float]:
        if not 0 <= node_id < self.node_count:
            raise ValueError(f"node_id out of range: {node_id}")
        row, col = divmod(node_id, self.cols)
        lat = self.lat_min + (row + 0.5) * (self.lat_max - self.lat_min) / self.rows
        lon = self.lon_min + (col + 0.5) * (self.lon_max - self.lon_min) / self.cols
        return lat, lon


@lru_cache(maxsize=None)
def _centers(grid: GridNetwork) -> tuple[np.ndarray, np.ndarray]:
    lats = np.empty(grid.node_count)
    lons = np.empty(grid.node_count)
    for node_id in range(grid.node_count):
        lats[node_id], lons[node_id] = grid.node_center(node_id)
    return lats, lons


def map_to_nodes(grid: GridNetwork, lats: Sequence[float], lons: Sequence[float]) -> np.ndarray:
    """Closest node id for each fix (haversine; ties go to the lowest id).

    Fixes outside the box are clamped to the box edge first, so every fix
    maps to some node.
    """
    lat = np.clip(np.asarray(lats, dtype=float), grid.lat_min, grid.lat_max)
    lon = np.clip(np.asarray(lons, dtype=float), grid.lon_min, grid.lon_max)
    center_lat, center_lon = _centers(grid)

    phi = np.radians(lat)[:, None]
    phi_c = np.radians(center_lat)[None, :]
    dphi = phi_c - phi
    dlam = np.radians(center_lon)[None, :] - np.radians(lon)[:, None]
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi) * np.cos(phi_c) * np.sin(dlam / 2.0) ** 2
    # argmin returns the first minimum, i.e. the lowest node id on a tie
    return np.argmin(a, axis=1)


def closest_node(grid: GridNetwork, lat: float, lon: float) -> int:
    return int(map_to_nodes(grid, [lat], [lon])[0])


@dataclass(frozen=True)
class NodeVisit:
    """A maximal run of same-node fixes within one session.

    The interval is half-open ``[arrival, departure)``.  A visit's departure
    is the next visit's arrival; the last visit of a session ends at the
    session's final fix, so visits tile the session exactly.
    """

    user_id: str
    node_id: int
    arrival: int
    departure: int
    session_index: int

    @property
    def duration(self) -> int:
        return self.departure - self.arrival


def visits_from_session(grid: GridNetwork, session: Session, session_index: int) -> list[NodeVisit]:
    """Compress a session's fixes into consecutive distinct-node visits."""
    points = session.points
    nodes = map_to_nodes(grid, [p.lat for p in points], [p.lon for p in points])
    visits: list[NodeVisit] = []
    run_start = 0
    for i in range(1, len(points) + 1):
        if i < len(points) and nodes[i] == nodes[run_start]:
            continue
        arrival = points[run_start].timestamp
        departure = points[i].timestamp if i < len(points) else points[-1].timestamp
        visits.append(
            NodeVisit(
                user_id=session.user_id,
                node_id=int(nodes[run_start]),
                arrival=arrival,
                departure=departure,
                session_index=session_index,
            )
        )
        run_start = i
    return visits


def visits_by_user(
    grid: GridNetwork, sessions_by_user: dict[str, list[Session]]
) -> dict[str, list[NodeVisit]]:
    out: dict[str, list[NodeVisit]] = {}
    for user_id in sorted(sessions_by_user):
        visits: list[NodeVisit] = []
        for index, session in enumerate(sessions_by_user[user_id]):
            visits.extend(visits_from_session(grid, session, index))
        out[user_id] = visits
    return out


def write_visits(visits: dict[str, list[NodeVisit]], path) -> None:
    """Debug export: one `user_id<TAB>node_id<TAB>arrival<TAB>departure` line per visit."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for user_id in sorted(visits):
            for visit in visits[user_id]:
                handle.write(f"{user_id}\t{visit.node_id}\t{visit.arrival}\t{visit.departure}\n")
