"""Availability and excess-data metrics over simulation output.

Both metrics are percentages of presence time (the union of a user's visit
intervals).  A second counts as *available* when the node the user is at
holds a complete replica.  A second of *excess* is one replica-second spent
at any node other than the user's current node — transfers count from the
moment they start, since the bytes are already moving.  An in-flight
transfer at the current node is not excess (it is the unavoidable reactive
download), and it is not availability either (the replica is incomplete).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .grid import NodeVisit
from .simulation import LedgerInterval, SimulationResult


def _overlap(a_start: int, a_end: int, b_start: int, b_end: int) -> int:
    return max(0, min(a_end, b_end) - max(a_start, b_start))


@dataclass(frozen=True)
class UserMetrics:
    user_id: str
    presence_s: int
    available_s: int
    excess_s: int

    @property
    def availability_pct(self) -> float:
        return 100.0 * self.available_s / self.presence_s

    @property
    def excess_pct(self) -> float:
        return 100.0 * self.excess_s / self.presence_s


@dataclass(frozen=True)
class MetricsResult:
    users: tuple[UserMetrics, ...]

    def _total(self, attr: str) -> int:
        return sum(getattr(user, attr) for user in self.users)

    @property
    def availability_pct(self) -> float:
        """Presence-weighted aggregate availability."""
        return 100.0 * self._total("available_s") / self._total("presence_s")

    @property
    def excess_pct(self) -> float:
        """Presence-weighted aggregate excess."""
        return 100.0 * self._total("excess_s") / self._total("presence_s")

    @property
    def mean_availability_pct(self) -> float:
        """Unweighted per-user mean (each user counts equally)."""
        return sum(user.availability_pct for user in self.users) / len(self.users)

    @property
    def mean_excess_pct(self) -> float:
        return sum(user.excess_pct for user in self.users) / len(self.users)


def _user_seconds(
    intervals: Sequence[LedgerInterval], visits: Sequence[NodeVisit]
) -> tuple[int, int, int]:
    """(presence, available, excess) seconds for one user's timeline."""
    held_by_node: dict[int, list[tuple[int, int]]] = {}
    any_by_node: dict[int, list[tuple[int, int]]] = {}
    for interval in intervals:
        span = (interval.start, interval.end)
        any_by_node.setdefault(interval.node_id, []).append(span)
        if interval.phase == "held":
            held_by_node.setdefault(interval.node_id, []).append(span)

    sessions: dict[int, tuple[int, int]] = {}
    for visit in visits:
        start, end = sessions.get(visit.session_index, (visit.arrival, visit.departure))
        sessions[visit.session_index] = (min(start, visit.arrival), max(end, visit.departure))

    presence = sum(visit.duration for visit in visits)
    available = 0
    at_current = 0
    for visit in visits:
        for span in held_by_node.get(visit.node_id, ()):
            available += _overlap(visit.arrival, visit.departure, *span)
        for span in any_by_node.get(visit.node_id, ()):
            at_current += _overlap(visit.arrival, visit.departure, *span)

    # replica-seconds overlapping presence, minus those at the current node,
    # is exactly the excess (each presence-second has one current node)
    replica_during_presence = 0
    for node_spans in any_by_node.values():
        for span in node_spans:
            for session_span in sessions.values():
                replica_during_presence += _overlap(*span, *session_span)
    excess = replica_during_presence - at_current
    return presence, available, excess


def compute_metrics(
    intervals: Iterable[LedgerInterval],
    visits_by_user: Mapping[str, Sequence[NodeVisit]],
) -> MetricsResult:
    """Per-user and aggregate metrics.  Users with zero presence are omitted
    rather than counted as 0%."""
    by_user: dict[str, list[LedgerInterval]] = {}
    for interval in intervals:
        by_user.setdefault(interval.user_id, []).append(interval)

    users = []
    for user_id in sorted(visits_by_user):
        presence, available, excess = _user_seconds(
            by_user.get(user_id, []), visits_by_user[user_id]
        )
        if presence == 0:
            continue
        users.append(
            UserMetrics(
                user_id=user_id, presence_s=presence, available_s=available, excess_s=excess
            )
        )
    if not users:
        raise ValueError("no users with positive presence time")
    return MetricsResult(users=tuple(users))


def metrics_for(result: SimulationResult) -> MetricsResult:
    return compute_metrics(result.ledger.history, result.visits_by_user)


def availability(
    intervals: Iterable[LedgerInterval], visits_by_user: Mapping[str, Sequence[NodeVisit]]
) -> float:
    return compute_metrics(intervals, visits_by_user).availability_pct


def excess_data(
    intervals: Iterable[LedgerInterval], visits_by_user: Mapping[str, Sequence[NodeVisit]]
) -> float:
    return compute_metrics(intervals, visits_by_user).excess_pct


def pareto_front(points: Sequence[tuple[str, float, float]]) -> list[str]:
    """Labels of the non-dominated (availability up, excess down) points.

    A point is dominated when some other point is at least as good on both
    axes and strictly better on one.  Duplicated coordinates do not dominate
    each other, so equal points all survive.  The result is sorted by
    availability, then excess, then label.
    """
    front = []
    for label, avail, excess in points:
        dominated = False
        for _, other_avail, other_excess in points:
            if (
                other_avail >= avail
                and other_excess <= excess
                and (other_avail > avail or other_excess < excess)
            ):
                dominated = True
                break
        if not dominated:
            front.append((avail, excess, label))
    return [label for _, _, label in sorted(front)]
