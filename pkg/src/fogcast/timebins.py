"""Calendar binning helpers shared by the spatial and temporal predictors.

All timestamps are unix seconds and all bins are derived from the UTC
calendar, so two runs over the same data agree regardless of host timezone.
"""
from __future__ import annotations

from datetime import datetime, timezone


def as_utc(timestamp: int) -> datetime:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc)


def hour_of_day(timestamp: int) -> int:
    """Hour 0..23."""
    return as_utc(timestamp).hour


def day_of_week(timestamp: int) -> int:
    """Weekday 0..6 with Monday == 0."""
    return as_utc(timestamp).weekday()


def month_of_year(timestamp: int) -> int:
    """Month 0..11 with January == 0 (zero-based for cyclic arithmetic)."""
    return as_utc(timestamp).month - 1
