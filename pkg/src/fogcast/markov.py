"""Per-user next-node prediction from fused calendar-sliced Markov models.

Four first-order transition models are trained side by side, each slicing
observations by a different calendar discretization (none, hour of day, day
of week, month).  At prediction time each sub-model contributes its row for
the current (bin, node), falling back to the undiscretized model's row when
its own is empty, and the rows are blended with weights derived from each
sub-model's running top-1 hit rate (Laplace-smoothed, normalized).
"""
from __future__ import annotations

from typing import Callable, Iterator, Mapping

from . import timebins
from .grid import NodeVisit

DISCRETIZERS: tuple[tuple[str, Callable[[int], int]], ...] = (
    ("global", lambda timestamp: 0),
    ("hour_of_day", timebins.hour_of_day),
    ("day_of_week", timebins.day_of_week),
    ("month", timebins.month_of_year),
)


def top_ranked(distribution: Mapping[int, float]) -> int:
    """Highest-scored node; ties go to the lowest node id."""
    return min(distribution.items(), key=lambda item: (-item[1], item[0]))[0]


class TransitionModel:
    """First-order transition counts under one calendar discretization."""

    def __init__(self, name: str, bin_of: Callable[[int], int]):
        self.name = name
        self.bin_of = bin_of
        self.counts: dict[tuple[int, int], dict[int, int]] = {}

    def observe(self, timestamp: int, from_node: int, to_node: int) -> None:
        row = self.counts.setdefault((self.bin_of(timestamp), from_node), {})
        row[to_node] = row.get(to_node, 0) + 1

    def row(self, timestamp: int, from_node: int) -> dict[int, int] | None:
        return self.counts.get((self.bin_of(timestamp), from_node))

    def distribution(self, timestamp: int, from_node: int) -> dict[int, float] | None:
        row = self.row(timestamp, from_node)
        if not row:
            return None
        total = sum(row.values())
        return {node: count / total for node, count in sorted(row.items())}


class FusedMarkov:
    """The fused predictor for one user."""

    def __init__(self, user_id: str):
        self.user_id = user_id
        self.sub_models = [TransitionModel(name, fn) for name, fn in DISCRETIZERS]
        self.hits = [0] * len(self.sub_models)
        self.misses = [0] * len(self.sub_models)

    def _effective_row(self, index: int, timestamp: int, from_node: int) -> dict[int, int] | None:
        """A sub-model's row, borrowing the undiscretized row when empty."""
        row = self.sub_models[index].row(timestamp, from_node)
        if row:
            return row
        return self.sub_models[0].row(timestamp, from_node)

    def weights(self) -> list[float]:
        """Hit-rate weights, Laplace-smoothed so untested models keep mass."""
        raw = [
            (self.hits[i] + 1) / (self.hits[i] + self.misses[i] + 2)
            for i in range(len(self.sub_models))
        ]
        total = sum(raw)
        return [value / total for value in raw]

    def observe_transition(self, from_visit: NodeVisit, to_node: int) -> None:
        """Score each sub-model's pre-update prediction, then learn the move."""
        timestamp = from_visit.arrival
        from_node = from_visit.node_id
        for index in range(len(self.sub_models)):
            row = self._effective_row(index, timestamp, from_node)
            if not row:
                continue  # nothing to score against yet
            if top_ranked(row) == to_node:
                self.hits[index] += 1
            else:
                self.misses[index] += 1
        for model in self.sub_models:
            model.observe(timestamp, from_node, to_node)

    def predict_next(self, current: NodeVisit, k: int = 1) -> list[tuple[int, float]]:
        """Up to ``k`` (node, probability) pairs, highest probability first.

        Probabilities are the weight-blended sub-model rows, renormalized
        over the sub-models that actually contributed, so they always sum
        to 1 over the full candidate set.  Empty history yields [].
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        timestamp = current.arrival
        from_node = current.node_id
        weights = self.weights()
        fused: dict[int, float] = {}
        contributing = 0.0
        for index in range(len(self.sub_models)):
            row = self._effective_row(index, timestamp, from_node)
            if not row:
                continue
            contributing += weights[index]
            total = sum(row.values())
            for node in sorted(row):
                fused[node] = fused.get(node, 0.0) + weights[index] * row[node] / total
        if not fused:
            return []
        ranked = sorted(fused.items(), key=lambda item: (-item[1], item[0]))
        return [(node, score / contributing) for node, score in ranked[:k]]

    def sub_model_accuracy(self) -> dict[str, float]:
        out = {}
        for index, model in enumerate(self.sub_models):
            scored = self.hits[index] + self.misses[index]
            out[model.name] = self.hits[index] / scored if scored else 0.0
        return out

    def dump_rows(self) -> Iterator[tuple[str, int, int, int, int]]:
        """(sub_model, bin, from_node, to_node, count) rows, fully sorted."""
        for model in self.sub_models:
            for (bin_id, from_node), row in sorted(model.counts.items()):
                for to_node in sorted(row):
                    yield model.name, bin_id, from_node, to_node, row[to_node]
