"""Additive Holt-Winters (triple exponential smoothing) with grid-searched
smoothing factors, plus a trend-only / mean fallback ladder for short series.

The model keeps a level ``l``, a trend ``b``, and one seasonal term per phase
of an ``m``-long season.  Fitting runs the standard additive recursions

    l_t = alpha * (y_t - s_{t-m}) + (1 - alpha) * (l_{t-1} + b_{t-1})
    b_t = beta * (l_t - l_{t-1}) + (1 - beta) * b_{t-1}
    s_t = gamma * (y_t - l_{t-1} - b_{t-1}) + (1 - gamma) * s_{t-m}

over every (alpha, beta, gamma) in a fixed 5x5x5 grid and keeps the combo
with the smallest one-step-ahead squared error, breaking ties toward the
lexicographically smallest triple.

Initialization uses the first two seasons: the trend is the per-step change
between season means, the level is the first season's mean projected to the
end of that season, and the seasonal terms are the detrended residuals of
the first season.  (Anchoring the level mid-season instead leaks half a
season of trend into the seasonals, which never fully washes out of short
series.)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

SMOOTHING_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)


@dataclass(frozen=True)
class HwParams:
    alpha: float
    beta: float
    gamma: float
    m: int  # season length; 1 for trend-only models

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.m < 1:
            raise ValueError(f"season length must be >= 1, got {self.m}")


@dataclass(frozen=True)
class HwState:
    """Smoothed state after consuming ``t`` observations.

    ``seasonals`` is phase-indexed: entry ``j`` is the most recent seasonal
    value for observation indices congruent to ``j`` mod ``m``.  An empty
    tuple means the model has no seasonal component.
    """

    level: float
    trend: float
    seasonals: tuple[float, ...]
    t: int


def forecast(params: HwParams, state: HwState, horizon: int) -> float:
    """Point forecast ``horizon`` steps past the last observation."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    seasonal = 0.0
    if state.seasonals:
        seasonal = state.seasonals[(state.t - 1 + horizon) % params.m]
    return state.level + horizon * state.trend + seasonal


def _grid_combos(n_factors: int) -> np.ndarray:
    """All grid points as an array of shape (5**n_factors, n_factors), in
    lexicographic order so argmin tie-breaks toward the smallest triple."""
    grids = np.meshgrid(*([np.array(SMOOTHING_GRID)] * n_factors), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def fit(series: Sequence[float], m: int) -> tuple[HwParams, HwState]:
    """Grid-search fit of the full seasonal model.  Needs two full seasons."""
    y = np.asarray(series, dtype=float)
    n = y.size
    if m < 2:
        raise ValueError(f"seasonal fit needs season length >= 2, got {m}")
    if n < 2 * m:
        raise ValueError(f"seasonal fit needs >= {2 * m} observations, got {n}")

    first = float(y[:m].mean())
    second = float(y[m : 2 * m].mean())
    trend0 = (second - first) / m
    level0 = first + trend0 * (m - 1) / 2.0
    season0 = y[:m] - (first + (np.arange(m) - (m - 1) / 2.0) * trend0)

    combos = _grid_combos(3)
    alpha, beta, gamma = combos[:, 0], combos[:, 1], combos[:, 2]
    level = np.full(len(combos), level0)
    trend = np.full(len(combos), trend0)
    seasonals = np.tile(season0, (len(combos), 1))
    sse = np.zeros(len(combos))
    for t in range(m, n):
        observed = y[t]
        phase = t % m
        s_old = seasonals[:, phase]
        err = observed - (level + trend + s_old)
        sse += err * err
        new_level = alpha * (observed - s_old) + (1.0 - alpha) * (level + trend)
        new_trend = beta * (new_level - level) + (1.0 - beta) * trend
        seasonals[:, phase] = gamma * (observed - level - trend) + (1.0 - gamma) * s_old
        level, trend = new_level, new_trend

    best = int(np.argmin(sse))
    params = HwParams(alpha=float(alpha[best]), beta=float(beta[best]), gamma=float(gamma[best]), m=m)
    state = HwState(
        level=float(level[best]),
        trend=float(trend[best]),
        seasonals=tuple(float(v) for v in seasonals[best]),
        t=n,
    )
    return params, state


def fit_trend(series: Sequence[float]) -> tuple[HwParams, HwState]:
    """Grid-search fit of the seasonless (level + trend) model.  Needs n >= 2."""
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < 2:
        raise ValueError(f"trend fit needs >= 2 observations, got {n}")

    combos = _grid_combos(2)
    alpha, beta = combos[:, 0], combos[:, 1]
    level = np.full(len(combos), y[0])
    trend = np.full(len(combos), y[1] - y[0])
    sse = np.zeros(len(combos))
    for t in range(1, n):
        observed = y[t]
        err = observed - (level + trend)
        sse += err * err
        new_level = alpha * observed + (1.0 - alpha) * (level + trend)
        new_trend = beta * (new_level - level) + (1.0 - beta) * trend
        level, trend = new_level, new_trend

    best = int(np.argmin(sse))
    params = HwParams(alpha=float(alpha[best]), beta=float(beta[best]), gamma=0.0, m=1)
    state = HwState(level=float(level[best]), trend=float(trend[best]), seasonals=(), t=n)
    return params, state


def forecaster(series: Sequence[float], m: int) -> Callable[[int], float] | None:
    """Best model the data supports, as a ``horizon -> forecast`` callable.

    Ladder: full seasonal fit when two seasons are available, trend-only fit
    from four observations, the plain mean from one, and ``None`` when the
    series is empty.
    """
    n = len(series)
    if n == 0:
        return None
    if m >= 2 and n >= 2 * m:
        params, state = fit(series, m)
    elif n >= 4:
        params, state = fit_trend(series)
    else:
        mean = sum(float(v) for v in series) / n
        return lambda horizon: mean
    return lambda horizon: forecast(params, state, horizon)


def fallback_forecast(series: Sequence[float], horizon: int) -> float | None:
    """One-shot forecast using the sub-seasonal part of the ladder."""
    n = len(series)
    if n == 0:
        return None
    if n >= 4:
        params, state = fit_trend(series)
        return forecast(params, state, horizon)
    return sum(float(v) for v in series) / n
