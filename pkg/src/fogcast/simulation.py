"""Discrete-event replay of node-visit streams under replication policies.

The engine walks a merged timeline of user movement events and replication
events.  Simultaneous events process in a fixed kind order — session starts,
then departures, then arrivals, then transfer completions, then scheduled
transfer starts, then session ends — so a same-second node switch always
trains the predictors on the finished stay before the next arrival asks for
a prediction, and a replica finishing as the user arrives counts as present
from that second on.  Within one kind, ties break by user id and then by
creation order, so runs are exactly reproducible.

All timestamps are integer unix seconds and every tracked interval is
half-open ``[from, to)``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

from .grid import GridNetwork, NodeVisit
from .markov import FusedMarkov
from .temporal import DurationPredictor, DurationSample, TemporalSpec, make_predictor

POLICY_KINDS = ("keep_on_closest", "always_on_all", "predictive")


class EventKind(IntEnum):
    SESSION_START = 0
    DEPART = 1
    ARRIVE = 2
    REPLICATION_COMPLETE = 3
    REPLICATION_START = 4
    SESSION_END = 5


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    temporal: TemporalSpec | None = None
    fanout: int = 1  # predicted next nodes replicated to, for the predictive policy

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind == "predictive" and self.temporal is None:
            raise ValueError("predictive policy needs a temporal predictor spec")
        if self.fanout < 1:
            raise ValueError(f"fanout must be >= 1, got {self.fanout}")

    def label(self) -> str:
        if self.kind != "predictive":
            return self.kind
        suffix = f"_k{self.fanout}" if self.fanout != 1 else ""
        return f"predictive_{self.temporal.label()}{suffix}"


@dataclass(frozen=True)
class LedgerInterval:
    """A closed span during which a node was transferring or holding a replica."""

    user_id: str
    node_id: int
    start: int
    end: int
    phase: str  # "transfer" while downloading, "held" once complete


class ReplicaLedger:
    """Replica state per (user, node), emitting history intervals as they close."""

    def __init__(self) -> None:
        self.history: list[LedgerInterval] = []
        self._complete: dict[str, dict[int, int]] = {}  # user -> node -> held-since
        self._inflight: dict[str, dict[int, tuple[int, int]]] = {}  # user -> node -> (since, token)

    def has_replica(self, user_id: str, node_id: int) -> bool:
        return node_id in self._complete.get(user_id, {})

    def is_inflight(self, user_id: str, node_id: int) -> bool:
        return node_id in self._inflight.get(user_id, {})

    def complete_nodes(self, user_id: str) -> list[int]:
        return sorted(self._complete.get(user_id, {}))

    def inflight_nodes(self, user_id: str) -> list[int]:
        return sorted(self._inflight.get(user_id, {}))

    def _emit(self, user_id: str, node_id: int, start: int, end: int, phase: str) -> None:
        if end > start:  # zero-length spans carry no information
            self.history.append(LedgerInterval(user_id, node_id, start, end, phase))

    def start_transfer(self, user_id: str, node_id: int, now: int, token: int) -> None:
        if self.has_replica(user_id, node_id) or self.is_inflight(user_id, node_id):
            raise RuntimeError(f"transfer started twice for user {user_id} node {node_id}")
        self._inflight.setdefault(user_id, {})[node_id] = (now, token)

    def finish_transfer(self, user_id: str, node_id: int, now: int, token: int) -> bool:
        """Returns False for a stale completion (the transfer was cancelled)."""
        entry = self._inflight.get(user_id, {}).get(node_id)
        if entry is None or entry[1] != token:
            return False
        del self._inflight[user_id][node_id]
        self._emit(user_id, node_id, entry[0], now, "transfer")
        self._complete.setdefault(user_id, {})[node_id] = now
        return True

    def cancel_transfer(self, user_id: str, node_id: int, now: int) -> None:
        entry = self._inflight.get(user_id, {}).pop(node_id, None)
        if entry is not None:
            self._emit(user_id, node_id, entry[0], now, "transfer")

    def drop(self, user_id: str, node_id: int, now: int) -> None:
        since = self._complete.get(user_id, {}).pop(node_id, None)
        if since is not None:
            self._emit(user_id, node_id, since, now, "held")

    def open_state(self) -> dict[str, dict[int, str]]:
        """Whatever is still complete or in flight (for end-of-run checks)."""
        out: dict[str, dict[int, str]] = {}
        for user_id, nodes in self._complete.items():
            for node_id in nodes:
                out.setdefault(user_id, {})[node_id] = "held"
        for user_id, nodes in self._inflight.items():
            for node_id in nodes:
                out.setdefault(user_id, {})[node_id] = "transfer"
        return out


@dataclass
class SimulationResult:
    grid: GridNetwork
    policy: PolicySpec
    visits_by_user: dict[str, list[NodeVisit]]
    ledger: ReplicaLedger


class _Policy:
    def __init__(self, engine: "Simulation"):
        self.engine = engine

    def on_session_start(self, user_id: str, now: int) -> None:
        pass

    def on_arrival(self, user_id: str, visit: NodeVisit, now: int) -> None:
        pass

    def on_departure(self, user_id: str, visit: NodeVisit, to_node: int | None, now: int) -> None:
        pass

    def on_transfer_complete(self, user_id: str, node_id: int, now: int) -> None:
        pass

    def on_session_end(self, user_id: str, now: int) -> None:
        pass


class _KeepOnClosest(_Policy):
    """Purely reactive: one replica chasing the user, nothing speculative."""

    def on_arrival(self, user_id: str, visit: NodeVisit, now: int) -> None:
        engine = self.engine
        node = visit.node_id
        for other in engine.ledger.inflight_nodes(user_id):
            if other != node:
                engine.ledger.cancel_transfer(user_id, other, now)
        for other in engine.ledger.complete_nodes(user_id):
            if other != node:
                engine.ledger.drop(user_id, other, now)
        if not engine.ledger.has_replica(user_id, node) and not engine.ledger.is_inflight(user_id, node):
            engine.begin_transfer(user_id, node, now)


class _AlwaysOnAll(_Policy):
    """Replicate to every node at session start; drop everything at the end."""

    def on_session_start(self, user_id: str, now: int) -> None:
        engine = self.engine
        for node in range(engine.grid.node_count):
            if not engine.ledger.has_replica(user_id, node) and not engine.ledger.is_inflight(user_id, node):
                engine.begin_transfer(user_id, node, now)


class _Predictive(_Policy):
    """Reactive guarantee plus just-in-time replication to predicted next nodes.

    Every arrival re-plans: previously scheduled (not yet started) transfers
    are cancelled, the next nodes are re-predicted, and one transfer per
    predicted node is scheduled to finish right as the predicted stay ends.
    Replicas at nodes that are neither current nor predicted are dropped;
    in-flight transfers are left to finish and are checked on completion.
    """

    def __init__(self, engine: "Simulation"):
        super().__init__(engine)
        spec = engine.policy
        self.fanout = spec.fanout
        self._temporal_spec = spec.temporal
        self._markov: dict[str, FusedMarkov] = {}
        self._temporal: dict[str, DurationPredictor] = {}
        self._predicted: dict[str, tuple[int, ...]] = {}

    def markov_for(self, user_id: str) -> FusedMarkov:
        if user_id not in self._markov:
            self._markov[user_id] = FusedMarkov(user_id)
        return self._markov[user_id]

    def temporal_for(self, user_id: str) -> DurationPredictor:
        if user_id not in self._temporal:
            self._temporal[user_id] = make_predictor(self._temporal_spec)
        return self._temporal[user_id]

    def on_arrival(self, user_id: str, visit: NodeVisit, now: int) -> None:
        engine = self.engine
        node = visit.node_id
        engine.cancel_pending_starts(user_id)
        if not engine.ledger.has_replica(user_id, node) and not engine.ledger.is_inflight(user_id, node):
            engine.begin_transfer(user_id, node, now)

        predicted = tuple(
            target for target, _ in self.markov_for(user_id).predict_next(visit, self.fanout)
        )
        self._predicted[user_id] = predicted

        duration = self.temporal_for(user_id).predict_duration(node, visit.arrival, now)
        if duration is None:
            start_at = now  # no estimate yet: replicate ahead immediately
        else:
            head_start = engine.grid.transfer_time + engine.grid.buffer
            start_at = now + max(0, round(duration) - head_start)
        for target in predicted:
            if target == node:
                continue
            if engine.ledger.has_replica(user_id, target) or engine.ledger.is_inflight(user_id, target):
                continue
            engine.schedule_start(user_id, target, start_at)

        for other in engine.ledger.complete_nodes(user_id):
            if other != node and other not in predicted:
                engine.ledger.drop(user_id, other, now)

    def on_departure(self, user_id: str, visit: NodeVisit, to_node: int | None, now: int) -> None:
        if to_node is not None:
            self.markov_for(user_id).observe_transition(visit, to_node)
        if visit.duration > 0:
            self.temporal_for(user_id).record(
                DurationSample(node_id=visit.node_id, arrival=visit.arrival, duration=float(visit.duration))
            )

    def on_transfer_complete(self, user_id: str, node_id: int, now: int) -> None:
        engine = self.engine
        if node_id != engine.current_node.get(user_id) and node_id not in self._predicted.get(user_id, ()):
            engine.ledger.drop(user_id, node_id, now)

    def on_session_end(self, user_id: str, now: int) -> None:
        self._predicted[user_id] = ()


_POLICY_CLASSES = {
    "keep_on_closest": _KeepOnClosest,
    "always_on_all": _AlwaysOnAll,
    "predictive": _Predictive,
}


def _validate_visits(visits_by_user: Mapping[str, Sequence[NodeVisit]]) -> None:
    for user_id, visits in visits_by_user.items():
        previous: NodeVisit | None = None
        for visit in visits:
            if visit.user_id != user_id:
                raise ValueError(f"visit for {visit.user_id!r} filed under {user_id!r}")
            if visit.duration < 0:
                raise ValueError(f"negative-duration visit for {user_id} at {visit.arrival}")
            if previous is not None:
                if visit.session_index < previous.session_index:
                    raise ValueError(f"session indices go backwards for {user_id}")
                if visit.session_index == previous.session_index:
                    if previous.duration == 0:
                        raise ValueError(
                            f"zero-duration visit not last in session for {user_id}"
                        )
                    if previous.departure != visit.arrival:
                        raise ValueError(
                            f"visits do not tile session {visit.session_index} for {user_id}"
                        )
                    if previous.node_id == visit.node_id:
                        raise ValueError(
                            f"consecutive same-node visits for {user_id} at {visit.arrival}"
                        )
                elif visit.arrival <= previous.departure:
                    raise ValueError(f"overlapping sessions for {user_id} at {visit.arrival}")
            previous = visit


class Simulation:
    """One policy replayed over one set of visit streams."""

    def __init__(
        self,
        grid: GridNetwork,
        policy: PolicySpec,
        visits_by_user: Mapping[str, Sequence[NodeVisit]],
    ):
        _validate_visits(visits_by_user)
        self.grid = grid
        self.policy = policy
        self.visits_by_user = {user: list(visits) for user, visits in sorted(visits_by_user.items())}
        self.ledger = ReplicaLedger()
        self.current_node: dict[str, int | None] = {}
        self.in_session: set[str] = set()
        self._pending_starts: dict[str, dict[int, int]] = {}
        self._seq = 0
        self._heap: list[tuple[int, int, str, int, object]] = []
        self._policy_impl: _Policy = _POLICY_CLASSES[policy.kind](self)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _push(self, time: int, kind: EventKind, user_id: str, seq: int, payload: object) -> None:
        heapq.heappush(self._heap, (time, int(kind), user_id, seq, payload))

    def _build_movement_events(self) -> None:
        for user_id, visits in self.visits_by_user.items():
            by_session: dict[int, list[NodeVisit]] = {}
            for visit in visits:
                by_session.setdefault(visit.session_index, []).append(visit)
            for session_index in sorted(by_session):
                session_visits = by_session[session_index]
                session_start = session_visits[0].arrival
                session_end = session_visits[-1].departure
                self._push(session_start, EventKind.SESSION_START, user_id, self._next_seq(), None)
                for position, visit in enumerate(session_visits):
                    if visit.duration == 0:
                        # a trailing instantaneous visit has no own timeline;
                        # the transition into it is still learned below
                        continue
                    self._push(visit.arrival, EventKind.ARRIVE, user_id, self._next_seq(), visit)
                    next_node = (
                        session_visits[position + 1].node_id
                        if position + 1 < len(session_visits)
                        else None
                    )
                    self._push(
                        visit.departure, EventKind.DEPART, user_id, self._next_seq(), (visit, next_node)
                    )
                self._push(session_end, EventKind.SESSION_END, user_id, self._next_seq(), None)

    # -- actions available to policies -------------------------------------

    def begin_transfer(self, user_id: str, node_id: int, now: int) -> None:
        token = self._next_seq()
        self.ledger.start_transfer(user_id, node_id, now, token)
        self._push(
            now + self.grid.transfer_time,
            EventKind.REPLICATION_COMPLETE,
            user_id,
            token,
            (node_id, token),
        )

    def schedule_start(self, user_id: str, node_id: int, at: int) -> None:
        token = self._next_seq()
        self._pending_starts.setdefault(user_id, {})[node_id] = token
        self._push(at, EventKind.REPLICATION_START, user_id, token, (node_id, token))

    def cancel_pending_starts(self, user_id: str) -> None:
        self._pending_starts.pop(user_id, None)  # queued events turn stale

    # -- event handlers -----------------------------------------------------

    def _fire_scheduled(self, user_id: str, node_id: int, now: int, token: int) -> None:
        pending = self._pending_starts.get(user_id, {})
        if pending.get(node_id) != token:
            return  # superseded or cancelled
        del pending[node_id]
        if user_id not in self.in_session:
            return
        if not self.ledger.has_replica(user_id, node_id) and not self.ledger.is_inflight(user_id, node_id):
            self.begin_transfer(user_id, node_id, now)

    def _end_session(self, user_id: str, now: int) -> None:
        self._policy_impl.on_session_end(user_id, now)
        self.cancel_pending_starts(user_id)
        for node_id in self.ledger.inflight_nodes(user_id):
            self.ledger.cancel_transfer(user_id, node_id, now)
        for node_id in self.ledger.complete_nodes(user_id):
            self.ledger.drop(user_id, node_id, now)
        self.current_node[user_id] = None
        self.in_session.discard(user_id)

    def run(self) -> SimulationResult:
        self._build_movement_events()
        policy = self._policy_impl
        while self._heap:
            time, kind, user_id, _seq, payload = heapq.heappop(self._heap)
            if kind == EventKind.SESSION_START:
                self.in_session.add(user_id)
                policy.on_session_start(user_id, time)
            elif kind == EventKind.DEPART:
                visit, to_node = payload
                policy.on_departure(user_id, visit, to_node, time)
            elif kind == EventKind.ARRIVE:
                self.current_node[user_id] = payload.node_id
                policy.on_arrival(user_id, payload, time)
            elif kind == EventKind.REPLICATION_COMPLETE:
                node_id, token = payload
                if self.ledger.finish_transfer(user_id, node_id, time, token):
                    policy.on_transfer_complete(user_id, node_id, time)
            elif kind == EventKind.REPLICATION_START:
                node_id, token = payload
                self._fire_scheduled(user_id, node_id, time, token)
            else:  # SESSION_END
                self._end_session(user_id, time)
        leftover = self.ledger.open_state()
        if leftover:
            raise RuntimeError(f"replicas left open after final session end: {leftover}")
        return SimulationResult(
            grid=self.grid,
            policy=self.policy,
            visits_by_user=self.visits_by_user,
            ledger=self.ledger,
        )


def run_simulation(
    grid: GridNetwork,
    policy: PolicySpec,
    visits_by_user: Mapping[str, Sequence[NodeVisit]],
) -> SimulationResult:
    return Simulation(grid, policy, visits_by_user).run()
