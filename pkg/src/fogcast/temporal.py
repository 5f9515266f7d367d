"""Stay-duration predictors.

All predictors speak the same two-method protocol: ``record`` a finished
stay, ``predict_duration`` for a fresh arrival.  A prediction of ``None``
means the predictor has no usable history for that context yet.

Four families are provided:

* ``MeanDuration`` — the running mean of past stays at the node.
* ``PercentileDuration`` — a linear-interpolation percentile of past stays
  at the node, so low percentiles under-commit and high ones over-commit.
* ``BinnedDuration`` — stays bucketed by a cyclic calendar bin (hour of
  day, day of week, or month) per node, with an outward search over
  neighboring bins when the arrival's own bin is empty.
* ``HoltWintersDuration`` — stay series forecast with the seasonal ladder
  from :mod:`fogcast.holtwinters`.  Series can be kept per user, per node,
  or per (node, calendar bin); gaps since the series' last recorded stay
  are bridged by rolling multi-step forecasts forward across the pause.
"""
from __future__ import annotations

import bisect
import statistics
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from . import holtwinters, timebins

DEFAULT_SEASON_LENGTH = 7

BIN_SETS: dict[str, tuple] = {
    "hours": (timebins.hour_of_day, 24),
    "days_of_week": (timebins.day_of_week, 7),
    "months": (timebins.month_of_year, 12),
}

STATISTICS = {
    "mean": lambda values: sum(values) / len(values),
    "median": statistics.median,
}


@dataclass(frozen=True)
class DurationSample:
    """One finished stay: where, when it started, and how long it lasted."""

    node_id: int
    arrival: int
    duration: float

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")

    @property
    def end(self) -> int:
        return self.arrival + int(self.duration)


class DurationPredictor(Protocol):
    def record(self, sample: DurationSample) -> None: ...

    def predict_duration(self, node_id: int, arrival: int, now: int) -> float | None: ...


class MeanDuration:
    def __init__(self) -> None:
        self._sums: dict[int, float] = {}
        self._counts: dict[int, int] = {}

    def record(self, sample: DurationSample) -> None:
        self._sums[sample.node_id] = self._sums.get(sample.node_id, 0.0) + sample.duration
        self._counts[sample.node_id] = self._counts.get(sample.node_id, 0) + 1

    def predict_duration(self, node_id: int, arrival: int, now: int) -> float | None:
        count = self._counts.get(node_id)
        if not count:
            return None
        return self._sums[node_id] / count


def percentile_linear(sorted_values: Sequence[float], k: float) -> float:
    """Linear-interpolation percentile of an ascending sequence.

    The rank is ``k/100 * (n - 1)``; fractional ranks interpolate between
    the two neighboring order statistics.
    """
    if not sorted_values:
        raise ValueError("percentile of empty sequence")
    if not 0.0 <= k <= 100.0:
        raise ValueError(f"percentile must be in [0, 100], got {k}")
    rank = k / 100.0 * (len(sorted_values) - 1)
    low = int(rank)
    frac = rank - low
    if frac == 0.0:
        return float(sorted_values[low])
    return float(sorted_values[low]) + frac * (float(sorted_values[low + 1]) - float(sorted_values[low]))


class PercentileDuration:
    def __init__(self, k: float):
        if not 0.0 <= k <= 100.0:
            raise ValueError(f"percentile must be in [0, 100], got {k}")
        self.k = k
        self._values: dict[int, list[float]] = {}

    def record(self, sample: DurationSample) -> None:
        bisect.insort(self._values.setdefault(sample.node_id, []), sample.duration)

    def predict_duration(self, node_id: int, arrival: int, now: int) -> float | None:
        values = self._values.get(node_id)
        if not values:
            return None
        return percentile_linear(values, self.k)


def cyclic_bin_fallback(
    bins: Mapping[int, Sequence[float]],
    target_bin: int,
    cycle: int,
    statistic: str = "mean",
) -> float | None:
    """Statistic of the closest non-empty bin(s) on a cycle of ``cycle`` bins.

    Distance 0 is the target bin itself.  At each greater distance the two
    bins ``target +- d`` (mod cycle) are considered together; if both are
    non-empty their statistics are averaged.  ``None`` when every bin is
    empty.
    """
    stat = STATISTICS[statistic]
    for distance in range(0, cycle // 2 + 1):
        candidates = sorted({(target_bin - distance) % cycle, (target_bin + distance) % cycle})
        found = [stat(bins[b]) for b in candidates if bins.get(b)]
        if found:
            return sum(found) / len(found)
    return None


class BinnedDuration:
    def __init__(self, bin_set: str, statistic: str = "mean"):
        if bin_set not in BIN_SETS:
            raise ValueError(f"unknown bin set {bin_set!r}; expected one of {sorted(BIN_SETS)}")
        if statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {statistic!r}; expected one of {sorted(STATISTICS)}")
        self.bin_set = bin_set
        self.statistic = statistic
        self._bin_of, self._cycle = BIN_SETS[bin_set]
        self._values: dict[int, dict[int, list[float]]] = {}

    def record(self, sample: DurationSample) -> None:
        node_bins = self._values.setdefault(sample.node_id, {})
        node_bins.setdefault(self._bin_of(sample.arrival), []).append(sample.duration)

    def predict_duration(self, node_id: int, arrival: int, now: int) -> float | None:
        node_bins = self._values.get(node_id)
        if not node_bins:
            return None
        return cyclic_bin_fallback(node_bins, self._bin_of(arrival), self._cycle, self.statistic)


def predict_with_pause(series: Sequence[float], pause: float, m: int) -> float | None:
    """Forecast the next stay when ``pause`` seconds of the series' timeline
    have already elapsed unobserved.

    Successive forecast steps are rolled forward (each clamped to at least
    one second so the walk always advances) until they cover the pause; the
    overshoot past the pause is the predicted remaining stay.
    """
    if pause < 0:
        raise ValueError(f"pause must be >= 0, got {pause}")
    predict = holtwinters.forecaster(series, m)
    if predict is None:
        return None
    elapsed = 0.0
    horizon = 1
    while True:
        elapsed += max(1.0, predict(horizon))
        if elapsed >= pause:
            return elapsed - pause
        horizon += 1


class HoltWintersDuration:
    """Holt-Winters over stay series, split per user, node, or calendar bin.

    ``split="user"`` keeps one series for all of the user's stays;
    ``split="node"`` one per node; ``split="calendar"`` one per
    (node, bin set, bin) for all three calendar bin sets, with the final
    prediction averaging the non-empty per-bin-set forecasts.
    """

    SPLITS = ("user", "node", "calendar")

    def __init__(self, split: str = "user", season_length: int = DEFAULT_SEASON_LENGTH):
        if split not in self.SPLITS:
            raise ValueError(f"unknown split {split!r}; expected one of {self.SPLITS}")
        if season_length < 1:
            raise ValueError(f"season length must be >= 1, got {season_length}")
        self.split = split
        self.season_length = season_length
        self._series: dict[tuple, list[float]] = {}
        self._last_end: dict[tuple, int] = {}

    def _keys(self, node_id: int, timestamp: int) -> list[tuple]:
        if self.split == "user":
            return [()]
        if self.split == "node":
            return [(node_id,)]
        return [
            (node_id, name, bin_of(timestamp))
            for name, (bin_of, _) in sorted(BIN_SETS.items())
        ]

    def record(self, sample: DurationSample) -> None:
        for key in self._keys(sample.node_id, sample.arrival):
            self._series.setdefault(key, []).append(sample.duration)
            self._last_end[key] = sample.end

    def predict_duration(self, node_id: int, arrival: int, now: int) -> float | None:
        forecasts = []
        for key in self._keys(node_id, arrival):
            series = self._series.get(key)
            if not series:
                continue
            pause = max(0, now - self._last_end[key])
            value = predict_with_pause(series, pause, self.season_length)
            if value is not None:
                forecasts.append(value)
        if not forecasts:
            return None
        return sum(forecasts) / len(forecasts)

    def series_for_user(self) -> list[float]:
        """The single all-stays series (only meaningful for the user split)."""
        return list(self._series.get((), []))


@dataclass(frozen=True)
class TemporalSpec:
    """Configuration for one duration predictor."""

    kind: str  # mean | percentile | binned | holt_winters
    percentile: float = 50.0
    bin_set: str = "days_of_week"
    statistic: str = "mean"
    split: str = "user"
    season_length: int = DEFAULT_SEASON_LENGTH

    def label(self) -> str:
        if self.kind == "mean":
            return "mean"
        if self.kind == "percentile":
            text = f"{self.percentile:g}"
            return f"percentile_{text}"
        if self.kind == "binned":
            return f"binned_{self.bin_set}_{self.statistic}"
        return f"holt_winters_{self.split}"


def make_predictor(spec: TemporalSpec) -> DurationPredictor:
    if spec.kind == "mean":
        return MeanDuration()
    if spec.kind == "percentile":
        return PercentileDuration(spec.percentile)
    if spec.kind == "binned":
        return BinnedDuration(spec.bin_set, spec.statistic)
    if spec.kind == "holt_winters":
        return HoltWintersDuration(spec.split, spec.season_length)
    raise ValueError(f"unknown temporal predictor kind {spec.kind!r}")


def one_step_forecasts(series: Sequence[float], m: int) -> list[float | None]:
    """For each index i, the one-step forecast fitted on series[:i].

    Useful for exporting observed-vs-predicted traces of a stay series.
    """
    out: list[float | None] = []
    for i in range(len(series)):
        predict = holtwinters.forecaster(series[:i], m)
        out.append(None if predict is None else predict(1))
    return out
