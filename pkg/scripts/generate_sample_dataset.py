#!/usr/bin/env python3
"""Generate the bundled sample dataset: 10 synthetic commuters in PLT format.

Each user cycles twice per day through four personal anchor cells on the
default 8x8 Beijing grid, with stay lengths driven by a per-position base
duration modulated by a five-long multiplier cycle, mild weekend damping,
and multiplicative noise.  The multiplier cycle advances per stay (not per
clock), so the stay-duration series seen in visit order is periodic with
period lcm(4, 5) = 20 — structure a seasonal forecaster can learn but a
per-node average cannot.  Occasional detours swap a scheduled anchor stay
for a short stop at a random other cell, keeping the movement graph noisy.

Output is deterministic: fixed seeds, stdlib RNG only.  Running it twice
produces byte-identical files.
"""
from __future__ import annotations

import math
import random
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
DATASET_DIR = REPO_ROOT / "data" / "sample_geolife"

N_USERS = 10
N_DAYS = 14
START_DAY = datetime(2008, 5, 5, tzinfo=timezone.utc)  # a Monday

ROWS, COLS = 8, 8
LAT_MIN, LAT_MAX = 39.75, 40.05
LON_MIN, LON_MAX = 116.15, 116.65

ANCHORS_PER_USER = 4
SLOTS_PER_DAY = 8  # two passes through the anchors
BASE_DURATIONS = (1500, 5400, 8100, 1950)  # per anchor position, seconds
# advances per stay; cycle length 3 is coprime with the 4 anchor positions,
# so the stay series is periodic with period 12 in visit order while every
# node sees all three multipliers (a per-node average stays biased)
STAY_MULTIPLIERS = (1.8, 0.5, 0.9)
WEEKEND_FACTOR = 0.92
DETOUR_PROB = 0.05
FIX_INTERVAL = 120  # seconds between GPS fixes within a stay

PLT_HEADER = (
    "Geolife trajectory\n"
    "WGS 84\n"
    "Altitude is in Feet\n"
    "Reserved 3\n"
    "0,2,255,My Track,0,0,2,8421376\n"
    "0\n"
)

UNIX_TO_SERIAL_DAYS = 25569  # days between 1899-12-30 and 1970-01-01


def cell_center(cell: int) -> tuple[float, float]:
    row, col = divmod(cell, COLS)
    lat = LAT_MIN + (row + 0.5) * (LAT_MAX - LAT_MIN) / ROWS
    lon = LON_MIN + (col + 0.5) * (LON_MAX - LON_MIN) / COLS
    return lat, lon


def jittered_position(cell: int, rng: random.Random) -> tuple[float, float]:
    # stay within 15% of the cell size from the center so the nearest grid
    # node is always the cell's own
    lat, lon = cell_center(cell)
    lat += (rng.random() - 0.5) * 0.3 * (LAT_MAX - LAT_MIN) / ROWS
    lon += (rng.random() - 0.5) * 0.3 * (LON_MAX - LON_MIN) / COLS
    return lat, lon


def plt_record(ts: int, lat: float, lon: float) -> str:
    serial = UNIX_TO_SERIAL_DAYS + ts / 86400.0
    moment = datetime.fromtimestamp(ts, tz=timezone.utc)
    return (
        f"{lat:.6f},{lon:.6f},0,164,{serial:.10f},"
        f"{moment:%Y-%m-%d},{moment:%H:%M:%S}\n"
    )


def generate_user(user_index: int) -> dict[str, list[str]]:
    """Returns {plt_file_name: [record lines]} for one user."""
    rng = random.Random(9000 + user_index)
    inner_cells = [r * COLS + c for r in range(1, ROWS - 1) for c in range(1, COLS - 1)]
    anchors = rng.sample(inner_cells, ANCHORS_PER_USER)
    user_scale = 0.85 + 0.3 * rng.random()

    files: dict[str, list[str]] = {}
    multiplier_phase = 0
    for day in range(N_DAYS):
        day_start = START_DAY + timedelta(days=day)
        weekend = day_start.weekday() >= 5
        t = int(day_start.timestamp()) + 6 * 3600 + 1800 + rng.randrange(0, 9000)

        # plan the day's stays: (cell, duration) per slot
        stays: list[tuple[int, int]] = []
        prev_cell: int | None = None
        for slot in range(SLOTS_PER_DAY):
            anchor = anchors[slot % ANCHORS_PER_USER]
            base = BASE_DURATIONS[slot % ANCHORS_PER_USER] * user_scale
            multiplier = STAY_MULTIPLIERS[multiplier_phase % len(STAY_MULTIPLIERS)]
            multiplier_phase += 1
            noise = 0.96 + 0.08 * rng.random()
            duration = base * multiplier * noise
            if weekend:
                duration *= WEEKEND_FACTOR
            cell = anchor
            if rng.random() < DETOUR_PROB:
                next_anchor = anchors[(slot + 1) % ANCHORS_PER_USER]
                forbidden = {prev_cell, anchor, next_anchor}
                cell = rng.choice([c for c in inner_cells if c not in forbidden])
                duration *= 0.4 + 0.4 * rng.random()
            stays.append((cell, max(450, int(round(duration)))))
            prev_cell = cell

        records: list[str] = []
        for index, (cell, duration) in enumerate(stays):
            stay_end = t + duration
            fix_t = t
            while fix_t < stay_end - 30:
                lat, lon = jittered_position(cell, rng)
                records.append(plt_record(fix_t, lat, lon))
                fix_t += FIX_INTERVAL + rng.randrange(-15, 16)
            if index == len(stays) - 1:
                lat, lon = jittered_position(cell, rng)
                records.append(plt_record(stay_end, lat, lon))
            t = stay_end

        first_ts = int(day_start.timestamp())
        name = datetime.fromtimestamp(first_ts, tz=timezone.utc).strftime("%Y%m%d%H%M%S")
        files[f"{name}.plt"] = records
    return files


def main() -> int:
    if START_DAY.weekday() != 0:
        print("start day must be a Monday", file=sys.stderr)
        return 1
    total_records = 0
    for user_index in range(N_USERS):
        user_id = f"{user_index:03d}"
        trajectory_dir = DATASET_DIR / user_id / "Trajectory"
        trajectory_dir.mkdir(parents=True, exist_ok=True)
        for name, records in generate_user(user_index).items():
            with open(trajectory_dir / name, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(PLT_HEADER)
                handle.writelines(records)
            total_records += len(records)
        print(f"{user_id}: {N_DAYS} files")
    print(f"total: {total_records} records under {DATASET_DIR}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
