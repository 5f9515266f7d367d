"""GPS trajectory ingestion: PLT parsing, session splitting, normalized IO.

The on-disk input is the GeoLife layout: ``root/<user>/Trajectory/*.plt``,
where each PLT file carries six header lines followed by
``lat,lon,flag,altitude,serial_days,date,time`` records.  Ingestion flattens
that into per-user streams of ``TrackPoint`` sorted by time, which everything
downstream consumes.  The normalized interchange format is a flat TSV of
``user_id  unix_seconds  lat  lon`` lines.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

DEFAULT_SESSION_GAP = 600

_PLT_HEADER_LINES = 6


@dataclass(frozen=True)
class TrackPoint:
    user_id: str
    timestamp: int  # unix seconds, UTC
    lat: float
    lon: float


@dataclass(frozen=True)
class Session:
    """A maximal run of fixes with no inter-fix gap above the threshold."""

    user_id: str
    points: tuple[TrackPoint, ...]

    @property
    def start(self) -> int:
        return self.points[0].timestamp

    @property
    def end(self) -> int:
        return self.points[-1].timestamp

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass
class PltParseResult:
    points: list[TrackPoint]
    skipped: int  # malformed record lines dropped


@dataclass
class IngestReport:
    sessions: dict[str, list[Session]]
    skipped_lines: dict[str, int]
    point_counts: dict[str, int]


def _parse_plt_record(line: str, user_id: str) -> TrackPoint | None:
    fields = line.split(",")
    if len(fields) < 7:
        return None
    try:
        lat = float(fields[0])
        lon = float(fields[1])
        moment = datetime.strptime(
            f"{fields[5].strip()} {fields[6].strip()}", "%Y-%m-%d %H:%M:%S"
        )
    except ValueError:
        return None
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        return None
    timestamp = int(moment.replace(tzinfo=timezone.utc).timestamp())
    return TrackPoint(user_id=user_id, timestamp=timestamp, lat=lat, lon=lon)


def parse_plt_file(path: Path, user_id: str) -> PltParseResult:
    """Parse one PLT file, skipping the header and counting malformed lines."""
    points: list[TrackPoint] = []
    skipped = 0
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle):
            if lineno < _PLT_HEADER_LINES:
                continue
            line = raw.strip()
            if not line:
                continue
            point = _parse_plt_record(line, user_id)
            if point is None:
                skipped += 1
            else:
                points.append(point)
    return PltParseResult(points=points, skipped=skipped)


def normalize_points(points: Iterable[TrackPoint]) -> list[TrackPoint]:
    """Sort by timestamp and drop duplicate timestamps, keeping the first.

    The sort is stable, so for equal timestamps "first" means first in the
    input order (i.e. file order within a user's lexically ordered files).
    """
    ordered = sorted(points, key=lambda p: p.timestamp)
    out: list[TrackPoint] = []
    last_ts: int | None = None
    for point in ordered:
        if point.timestamp == last_ts:
            continue
        out.append(point)
        last_ts = point.timestamp
    return out


def split_sessions(
    points: Sequence[TrackPoint], gap_threshold: int = DEFAULT_SESSION_GAP
) -> list[Session]:
    """Split a sorted point stream wherever consecutive fixes are more than
    ``gap_threshold`` seconds apart."""
    if gap_threshold <= 0:
        raise ValueError(f"gap_threshold must be positive, got {gap_threshold}")
    sessions: list[Session] = []
    current: list[TrackPoint] = []
    for point in points:
        if current and point.timestamp - current[-1].timestamp > gap_threshold:
            sessions.append(Session(user_id=current[0].user_id, points=tuple(current)))
            current = []
        current.append(point)
    if current:
        sessions.append(Session(user_id=current[0].user_id, points=tuple(current)))
    return sessions


def scan_dataset(
    root: Path,
    user_filter: Sequence[str] | None = None,
    gap_threshold: int = DEFAULT_SESSION_GAP,
) -> IngestReport:
    """Walk a GeoLife-layout directory and build per-user session lists.

    Users are processed in sorted order and files in sorted order within each
    user, so repeated runs see identical streams.  Unknown users named in the
    filter are an error; a user directory without a ``Trajectory`` folder or
    without usable points simply yields no entry.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {root}")
    available = sorted(entry.name for entry in root.iterdir() if entry.is_dir())
    if user_filter is not None:
        missing = sorted(set(user_filter) - set(available))
        if missing:
            raise FileNotFoundError(f"unknown users under {root}: {', '.join(missing)}")
        selected = sorted(set(user_filter))
    else:
        selected = available

    report = IngestReport(sessions={}, skipped_lines={}, point_counts={})
    for user_id in selected:
        trajectory_dir = root / user_id / "Trajectory"
        merged: list[TrackPoint] = []
        skipped = 0
        if trajectory_dir.is_dir():
            for plt_path in sorted(trajectory_dir.glob("*.plt")):
                parsed = parse_plt_file(plt_path, user_id)
                merged.extend(parsed.points)
                skipped += parsed.skipped
        points = normalize_points(merged)
        if not points:
            continue
        report.sessions[user_id] = split_sessions(points, gap_threshold)
        report.skipped_lines[user_id] = skipped
        report.point_counts[user_id] = len(points)
    return report


def load_dataset(
    root: Path,
    user_filter: Sequence[str] | None = None,
    gap_threshold: int = DEFAULT_SESSION_GAP,
) -> dict[str, list[Session]]:
    return scan_dataset(root, user_filter, gap_threshold).sessions


def write_normalized(
    points_by_user: Mapping[str, Sequence[TrackPoint]], path: Path
) -> None:
    """Write the flat TSV interchange format (sorted users, sorted times).

    Floats are written with ``repr`` so a read-back is exact.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for user_id in sorted(points_by_user):
            for point in sorted(points_by_user[user_id], key=lambda p: p.timestamp):
                handle.write(
                    f"{user_id}\t{point.timestamp}\t{point.lat!r}\t{point.lon!r}\n"
                )


def normalized_lines(points_by_user: Mapping[str, Sequence[TrackPoint]]) -> str:
    """The exact content `write_normalized` would produce, as one string."""
    rows = []
    for user_id in sorted(points_by_user):
        for point in sorted(points_by_user[user_id], key=lambda p: p.timestamp):
            rows.append(f"{user_id}\t{point.timestamp}\t{point.lat!r}\t{point.lon!r}\n")
    return "".join(rows)


def read_normalized(path: Path) -> dict[str, list[TrackPoint]]:
    """Read the flat TSV format back into per-user sorted point lists."""
    by_user: dict[str, list[TrackPoint]] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated fields")
            user_id, ts_text, lat_text, lon_text = fields
            try:
                point = TrackPoint(
                    user_id=user_id,
                    timestamp=int(ts_text),
                    lat=float(lat_text),
                    lon=float(lon_text),
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            by_user.setdefault(user_id, []).append(point)
    for user_id in by_user:
        by_user[user_id] = normalize_points(by_user[user_id])
    return by_user


def sessions_from_points(
    points_by_user: Mapping[str, Sequence[TrackPoint]],
    gap_threshold: int = DEFAULT_SESSION_GAP,
) -> dict[str, list[Session]]:
    return {
        user_id: split_sessions(points_by_user[user_id], gap_threshold)
        for user_id in sorted(points_by_user)
        if points_by_user[user_id]
    }
