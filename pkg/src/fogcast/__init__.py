"""Fog-network replication simulator with spatio-temporal prediction.

The pipeline: raw GPS trajectories are normalized and split into sessions
(:mod:`fogcast.trajectory`), mapped onto a grid of fog nodes as node visits
(:mod:`fogcast.grid`), replayed under a replication policy by a
discrete-event engine (:mod:`fogcast.simulation`), and scored for replica
availability versus excess data moved (:mod:`fogcast.metrics`).  The
predictive policy combines fused calendar-sliced Markov models for the next
node (:mod:`fogcast.markov`) with pluggable stay-duration predictors
(:mod:`fogcast.temporal`, :mod:`fogcast.holtwinters`).
"""

__version__ = "0.1.0"

from .grid import GridNetwork, NodeVisit, closest_node, haversine_m, visits_by_user
from .markov import FusedMarkov
from .metrics import MetricsResult, compute_metrics, metrics_for, pareto_front
from .simulation import PolicySpec, SimulationResult, run_simulation
from .temporal import DurationSample, TemporalSpec, make_predictor
from .trajectory import Session, TrackPoint, load_dataset, read_normalized, split_sessions

__all__ = [
    "__version__",
    "GridNetwork",
    "NodeVisit",
    "closest_node",
    "haversine_m",
    "visits_by_user",
    "FusedMarkov",
    "MetricsResult",
    "compute_metrics",
    "metrics_for",
    "pareto_front",
    "PolicySpec",
    "SimulationResult",
    "run_simulation",
    "DurationSample",
    "TemporalSpec",
    "make_predictor",
    "Session",
    "TrackPoint",
    "load_dataset",
    "read_normalized",
    "split_sessions",
]
