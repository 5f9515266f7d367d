"""Shared fixtures: the bundled dataset, grids, and small trace builders."""

from __future__ import annotations

import pathlib

import pytest

from fogcast.grid import GridNetwork, NodeVisit, visits_by_user
from fogcast.trajectory import load_dataset

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent
SAMPLE_ROOT = REPO_ROOT / "data" / "sample_geolife"
SAMPLE_CONFIG = REPO_ROOT / "data" / "sample_run.toml"

# Grid matching the bundled dataset (and data/sample_run.toml).
SAMPLE_GRID = GridNetwork(
    rows=8,
    cols=8,
    lat_min=39.75,
    lat_max=40.05,
    lon_min=116.15,
    lon_max=116.65,
    transfer_time=300,
    buffer=0,
)

# One-dimensional two-node grid used by hand-built scenarios.  Node 0 covers
# the western half of the box, node 1 the eastern half.
PAIR_GRID = GridNetwork(
    rows=1,
    cols=2,
    lat_min=0.0,
    lat_max=1.0,
    lon_min=0.0,
    lon_max=2.0,
    transfer_time=300,
    buffer=0,
)


def pair_visits(stays, start=0, session_index=0, user_id="u"):
    """Build a visit list on PAIR_GRID from (node_id, duration) pairs.

    Only the final stay may have duration 0.
    """
    visits = []
    t = start
    for node_id, duration in stays:
        visits.append(
            NodeVisit(
                user_id=user_id,
                node_id=node_id,
                arrival=t,
                departure=t + duration,
                session_index=session_index,
            )
        )
        t += duration
    return visits


@pytest.fixture(scope="session")
def sample_sessions():
    assert SAMPLE_ROOT.is_dir(), "bundled dataset missing; run scripts/generate_sample_dataset.py"
    return load_dataset(SAMPLE_ROOT, gap_threshold=600)


@pytest.fixture(scope="session")
def sample_visits(sample_sessions):
    return visits_by_user(SAMPLE_GRID, sample_sessions)
