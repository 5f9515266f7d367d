"""Experiment configuration: TOML loading, validation, and run manifests."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from . import __version__
from .grid import GridNetwork
from .simulation import PolicySpec
from .temporal import BIN_SETS, STATISTICS, TemporalSpec
from .trajectory import DEFAULT_SESSION_GAP

TEMPORAL_KINDS = ("mean", "percentile", "binned", "holt_winters")


class ConfigError(Exception):
    """Invalid configuration; the message lists every problem found."""


@dataclass(frozen=True)
class RunConfig:
    grid: GridNetwork
    policies: tuple[PolicySpec, ...]
    dataset_root: Path | None
    normalized_path: Path | None
    users: tuple[str, ...] | None
    session_gap: int
    user_sample: int
    seed: int
    out_dir: Path
    source_path: Path
    raw: dict


def _problem(problems: list[str], field: str, message: str) -> None:
    problems.append(f"{field}: {message}")


def _take(table: dict, field: str, expected: type, problems: list[str], prefix: str, default):
    if field not in table:
        return default
    value = table[field]
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, expected) or isinstance(value, bool) and expected is not bool:
        _problem(problems, f"{prefix}{field}", f"expected {expected.__name__}, got {type(value).__name__}")
        return default
    return value


def _parse_temporal(table: dict, index: int, problems: list[str]) -> list[TemporalSpec]:
    prefix = f"policies[{index}]."
    kind = table.get("temporal")
    if kind not in TEMPORAL_KINDS:
        _problem(problems, f"{prefix}temporal", f"expected one of {TEMPORAL_KINDS}, got {kind!r}")
        return []

    if kind == "percentile":
        sweep = table.get("sweep")
        percentile = table.get("percentile")
        if sweep is not None and percentile is not None:
            _problem(problems, f"{prefix}sweep", "give either percentile or sweep, not both")
            return []
        if sweep is not None:
            if (
                not isinstance(sweep, list)
                or len(sweep) != 3
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in sweep)
            ):
                _problem(problems, f"{prefix}sweep", "expected [low, high, step] integers")
                return []
            low, high, step = sweep
            if step <= 0 or not 0 <= low <= high <= 100:
                _problem(problems, f"{prefix}sweep", f"need 0 <= low <= high <= 100 and step > 0, got {sweep}")
                return []
            return [TemporalSpec(kind="percentile", percentile=float(k)) for k in range(low, high + 1, step)]
        if percentile is None:
            percentile = 50.0
        if isinstance(percentile, int) and not isinstance(percentile, bool):
            percentile = float(percentile)
        if not isinstance(percentile, float) or not 0.0 <= percentile <= 100.0:
            _problem(problems, f"{prefix}percentile", f"expected a number in [0, 100], got {percentile!r}")
            return []
        return [TemporalSpec(kind="percentile", percentile=percentile)]

    if kind == "binned":
        bin_set = _take(table, "bin_set", str, problems, prefix, "days_of_week")
        statistic = _take(table, "statistic", str, problems, prefix, "mean")
        if bin_set not in BIN_SETS:
            _problem(problems, f"{prefix}bin_set", f"expected one of {sorted(BIN_SETS)}, got {bin_set!r}")
            return []
        if statistic not in STATISTICS:
            _problem(problems, f"{prefix}statistic", f"expected one of {sorted(STATISTICS)}, got {statistic!r}")
            return []
        return [TemporalSpec(kind="binned", bin_set=bin_set, statistic=statistic)]

    if kind == "holt_winters":
        split = _take(table, "split", str, problems, prefix, "user")
        season = _take(table, "season_length", int, problems, prefix, 7)
        if split not in ("user", "node", "calendar"):
            _problem(problems, f"{prefix}split", f"expected user, node, or calendar, got {split!r}")
            return []
        if season < 1:
            _problem(problems, f"{prefix}season_length", f"must be >= 1, got {season}")
            return []
        return [TemporalSpec(kind="holt_winters", split=split, season_length=season)]

    return [TemporalSpec(kind="mean")]


def _parse_policies(tables: Any, problems: list[str]) -> list[PolicySpec]:
    if not isinstance(tables, list) or not tables:
        _problem(problems, "policies", "at least one [[policies]] table is required")
        return []
    policies: list[PolicySpec] = []
    for index, table in enumerate(tables):
        if not isinstance(table, dict):
            _problem(problems, f"policies[{index}]", "expected a table")
            continue
        kind = table.get("kind")
        if kind in ("keep_on_closest", "always_on_all"):
            policies.append(PolicySpec(kind=kind))
            continue
        if kind != "predictive":
            _problem(
                problems,
                f"policies[{index}].kind",
                f"expected keep_on_closest, always_on_all, or predictive, got {kind!r}",
            )
            continue
        fanout = _take(table, "fanout", int, problems, f"policies[{index}].", 1)
        if fanout < 1:
            _problem(problems, f"policies[{index}].fanout", f"must be >= 1, got {fanout}")
            continue
        for temporal in _parse_temporal(table, index, problems):
            policies.append(PolicySpec(kind="predictive", temporal=temporal, fanout=fanout))
    labels = [p.label() for p in policies]
    for label in sorted(set(labels)):
        if labels.count(label) > 1:
            _problem(problems, "policies", f"duplicate variant {label!r}")
    return policies


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    problems: list[str] = []
    base = path.parent

    dataset = raw.get("dataset", {})
    if not isinstance(dataset, dict):
        _problem(problems, "dataset", "expected a table")
        dataset = {}
    root_text = _take(dataset, "root", str, problems, "dataset.", None)
    normalized_text = _take(dataset, "normalized", str, problems, "dataset.", None)
    if (root_text is None) == (normalized_text is None):
        _problem(problems, "dataset", "exactly one of dataset.root or dataset.normalized is required")
    users_raw = dataset.get("users")
    users: tuple[str, ...] | None = None
    if users_raw is not None:
        if not isinstance(users_raw, list) or not all(isinstance(u, str) for u in users_raw):
            _problem(problems, "dataset.users", "expected a list of strings")
        else:
            users = tuple(sorted(set(users_raw)))
    session_gap = _take(dataset, "session_gap", int, problems, "dataset.", DEFAULT_SESSION_GAP)
    if session_gap <= 0:
        _problem(problems, "dataset.session_gap", f"must be positive, got {session_gap}")
    user_sample = _take(dataset, "user_sample", int, problems, "dataset.", 0)
    if user_sample < 0:
        _problem(problems, "dataset.user_sample", f"must be >= 0, got {user_sample}")
    seed = _take(dataset, "seed", int, problems, "dataset.", 0)

    grid_table = raw.get("grid", {})
    if not isinstance(grid_table, dict):
        _problem(problems, "grid", "expected a table")
        grid_table = {}
    grid_kwargs = {}
    for field, expected, default in (
        ("rows", int, 8),
        ("cols", int, 8),
        ("lat_min", float, None),
        ("lat_max", float, None),
        ("lon_min", float, None),
        ("lon_max", float, None),
        ("transfer_time", int, 300),
        ("buffer", int, 0),
    ):
        value = _take(grid_table, field, expected, problems, "grid.", default)
        if value is not None:
            grid_kwargs[field] = value
    grid: GridNetwork | None = None
    try:
        grid = GridNetwork(**grid_kwargs)
    except ValueError as exc:
        _problem(problems, "grid", str(exc))

    policies = _parse_policies(raw.get("policies"), problems)

    output = raw.get("output", {})
    if not isinstance(output, dict):
        _problem(problems, "output", "expected a table")
        output = {}
    out_text = _take(output, "dir", str, problems, "output.", "out")

    if root_text is not None and not (base / root_text).is_dir():
        _problem(problems, "dataset.root", f"directory not found: {base / root_text}")
    if normalized_text is not None and not (base / normalized_text).is_file():
        _problem(problems, "dataset.normalized", f"file not found: {base / normalized_text}")

    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))

    return RunConfig(
        grid=grid,
        policies=tuple(policies),
        dataset_root=(base / root_text) if root_text else None,
        normalized_path=(base / normalized_text) if normalized_text else None,
        users=users,
        session_gap=session_gap,
        user_sample=user_sample,
        seed=seed,
        out_dir=base / out_text,
        source_path=path,
        raw=raw,
    )


def sample_users(all_users: Sequence[str], count: int, seed: int) -> list[str]:
    """Deterministic subset of ``count`` users (all of them when count is 0)."""
    ordered = sorted(all_users)
    if count <= 0 or count >= len(ordered):
        return ordered
    return sorted(random.Random(seed).sample(ordered, count))


def input_digest(normalized_text: str) -> str:
    return hashlib.sha256(normalized_text.encode("utf-8")).hexdigest()


def manifest_payload(config: RunConfig, input_sha256: str, users: Sequence[str]) -> dict:
    """Everything needed to reproduce a run; deliberately no timestamps."""
    grid = config.grid
    return {
        "package_version": __version__,
        "config_file": config.source_path.name,
        "config": config.raw,
        "effective": {
            "grid": {
                "rows": grid.rows,
                "cols": grid.cols,
                "lat_min": grid.lat_min,
                "lat_max": grid.lat_max,
                "lon_min": grid.lon_min,
                "lon_max": grid.lon_max,
                "transfer_time": grid.transfer_time,
                "buffer": grid.buffer,
            },
            "session_gap": config.session_gap,
            "user_sample": config.user_sample,
            "seed": config.seed,
            "users": list(users),
            "variants": [policy.label() for policy in config.policies],
            "policies": [dataclasses.asdict(policy) for policy in config.policies],
        },
        "input_sha256": input_sha256,
    }


def write_manifest(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
