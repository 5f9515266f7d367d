"""Command-line entry points: ingest, simulate, compare."""
from __future__ import annotations

import argparse
import csv
import sys
import time
import traceback
from pathlib import Path
from typing import Sequence

from . import config as config_mod
from . import metrics as metrics_mod
from . import trajectory
from .grid import visits_by_user, write_visits
from .simulation import run_simulation
from .temporal import DEFAULT_SEASON_LENGTH, one_step_forecasts

RESULT_COLUMNS = ("policy", "variant", "availability_pct", "excess_pct")


class CommandError(Exception):
    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


def _split_users(text: str | None) -> list[str] | None:
    if text is None:
        return None
    users = sorted({part.strip() for part in text.split(",") if part.strip()})
    if not users:
        raise CommandError("--users given but no user ids found in it")
    return users


def _log(args: argparse.Namespace, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def cmd_ingest(args: argparse.Namespace) -> int:
    users = _split_users(args.users)
    report = trajectory.scan_dataset(Path(args.root), users, args.gap)
    if not report.sessions:
        raise CommandError(f"no usable trajectories under {args.root}")

    points_by_user = {
        user_id: [p for session in sessions for p in session.points]
        for user_id, sessions in report.sessions.items()
    }
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    trajectory.write_normalized(points_by_user, out_path)

    total_points = 0
    total_sessions = 0
    for user_id in sorted(report.sessions):
        points = report.point_counts[user_id]
        sessions = len(report.sessions[user_id])
        skipped = report.skipped_lines[user_id]
        total_points += points
        total_sessions += sessions
        print(f"{user_id}: {points} points, {sessions} sessions, {skipped} lines skipped")
    print(f"total: {len(report.sessions)} users, {total_points} points, {total_sessions} sessions")
    print(f"wrote {out_path}")
    return 0


def _write_results_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([row[column] for column in RESULT_COLUMNS])


def _write_user_metrics_csv(summary, path: Path) -> None:
    """Per-user rows plus both aggregations (presence-weighted and plain user mean)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("user_id", "presence_s", "availability_pct", "excess_pct"))
        for user in summary.users:
            writer.writerow(
                (user.user_id, user.presence_s, repr(user.availability_pct), repr(user.excess_pct))
            )
        total_presence = sum(user.presence_s for user in summary.users)
        writer.writerow(
            (
                "aggregate_presence_weighted",
                total_presence,
                repr(summary.availability_pct),
                repr(summary.excess_pct),
            )
        )
        writer.writerow(
            (
                "aggregate_user_mean",
                total_presence,
                repr(summary.mean_availability_pct),
                repr(summary.mean_excess_pct),
            )
        )


def _write_ledger_csv(intervals, phase: str, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("user_id", "node_id", "from_unix", "to_unix"))
        for interval in intervals:
            if interval.phase == phase:
                writer.writerow((interval.user_id, interval.node_id, interval.start, interval.end))


def cmd_simulate(args: argparse.Namespace) -> int:
    run_config = config_mod.load_config(Path(args.config))
    out_dir = Path(args.out) if args.out else run_config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    cli_users = _split_users(args.users)
    users = cli_users if cli_users is not None else (
        list(run_config.users) if run_config.users is not None else None
    )

    if run_config.normalized_path is not None:
        if not run_config.normalized_path.is_file():
            raise CommandError(f"normalized dataset not found: {run_config.normalized_path}")
        points_by_user = trajectory.read_normalized(run_config.normalized_path)
        if users is not None:
            missing = sorted(set(users) - set(points_by_user))
            if missing:
                raise CommandError(f"unknown users in dataset: {', '.join(missing)}")
            points_by_user = {u: points_by_user[u] for u in users}
    else:
        report = trajectory.scan_dataset(run_config.dataset_root, users, run_config.session_gap)
        points_by_user = {
            user_id: [p for session in sessions for p in session.points]
            for user_id, sessions in report.sessions.items()
        }
    if not points_by_user:
        raise CommandError("dataset selection is empty")

    selected = config_mod.sample_users(
        sorted(points_by_user), run_config.user_sample, run_config.seed
    )
    points_by_user = {u: points_by_user[u] for u in selected}

    digest = config_mod.input_digest(trajectory.normalized_lines(points_by_user))
    sessions_by_user = trajectory.sessions_from_points(points_by_user, run_config.session_gap)
    visits = visits_by_user(run_config.grid, sessions_by_user)
    _log(args, f"{len(selected)} users, {sum(len(v) for v in visits.values())} visits")
    if args.export_visits:
        write_visits(visits, out_dir / "visits.tsv")

    rows: list[dict] = []
    for policy in run_config.policies:
        label = policy.label()
        started = time.monotonic()
        result = run_simulation(run_config.grid, policy, visits)
        summary = metrics_mod.metrics_for(result)
        _log(args, f"{label}: simulated in {time.monotonic() - started:.1f}s")
        rows.append(
            {
                "policy": policy.kind,
                "variant": label,
                "availability_pct": repr(summary.availability_pct),
                "excess_pct": repr(summary.excess_pct),
                "_policy": policy,
            }
        )
        _write_ledger_csv(result.ledger.history, "held", out_dir / f"ledger_{label}.csv")
        _write_ledger_csv(result.ledger.history, "transfer", out_dir / f"transfers_{label}.csv")
        _write_user_metrics_csv(summary, out_dir / f"metrics_{label}.csv")

    _write_results_csv(rows, out_dir / "results.csv")

    sweep_rows = [
        row for row in rows
        if row["_policy"].kind == "predictive" and row["_policy"].temporal.kind == "percentile"
    ]
    if len(sweep_rows) >= 2:
        with open(out_dir / "sweep_percentile.csv", "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("percentile", "availability_pct", "excess_pct"))
            for row in sweep_rows:
                writer.writerow(
                    (
                        repr(row["_policy"].temporal.percentile),
                        row["availability_pct"],
                        row["excess_pct"],
                    )
                )

    if args.export_durations:
        season = next(
            (
                policy.temporal.season_length
                for policy in run_config.policies
                if policy.kind == "predictive" and policy.temporal.kind == "holt_winters"
            ),
            DEFAULT_SEASON_LENGTH,
        )
        for user_id in sorted(visits):
            stays = [float(v.duration) for v in visits[user_id] if v.duration > 0]
            forecasts = one_step_forecasts(stays, season)
            with open(out_dir / f"durations_{user_id}.csv", "w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(("index", "duration_s", "one_step_forecast_s"))
                for index, (stay, forecast) in enumerate(zip(stays, forecasts)):
                    writer.writerow(
                        (index, repr(stay), "" if forecast is None else repr(forecast))
                    )

    manifest = config_mod.manifest_payload(run_config, digest, selected)
    config_mod.write_manifest(manifest, out_dir / "manifest.json")

    width = max(len(row["variant"]) for row in rows)
    print(f"{'variant'.ljust(width)}  availability%  excess%")
    for row in rows:
        availability = float(row["availability_pct"])
        excess = float(row["excess_pct"])
        print(f"{row['variant'].ljust(width)}  {availability:13.2f}  {excess:.2f}")
    print(f"wrote {out_dir / 'results.csv'}")
    return 0


def _read_results_csv(path: Path) -> list[dict]:
    if not path.is_file():
        raise CommandError(f"results file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [column for column in RESULT_COLUMNS if column not in header]
        if missing:
            raise CommandError(f"{path}: missing columns: {', '.join(missing)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "policy": row["policy"],
                        "variant": row["variant"],
                        "availability_pct": float(row["availability_pct"]),
                        "excess_pct": float(row["excess_pct"]),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise CommandError(f"{path}:{lineno}: bad row: {exc}") from exc
    if not rows:
        raise CommandError(f"{path}: no result rows")
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    merged: list[dict] = []
    for text in args.results:
        path = Path(text)
        for row in _read_results_csv(path):
            row["source"] = path.stem if len(args.results) > 1 else ""
            merged.append(row)

    def label_of(row: dict) -> str:
        return f"{row['source']}:{row['variant']}" if row["source"] else row["variant"]

    labels = [label_of(row) for row in merged]
    if len(set(labels)) != len(labels):
        raise CommandError("duplicate variant labels across inputs; rename files or variants")

    front = set(
        metrics_mod.pareto_front(
            [(label_of(row), row["availability_pct"], row["excess_pct"]) for row in merged]
        )
    )
    for row in merged:
        row["on_front"] = 1 if label_of(row) in front else 0

    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("source", "policy", "variant", "availability_pct", "excess_pct", "on_front"))
            for row in merged:
                writer.writerow(
                    (
                        row["source"],
                        row["policy"],
                        row["variant"],
                        repr(row["availability_pct"]),
                        repr(row["excess_pct"]),
                        row["on_front"],
                    )
                )

    width = max(len(label_of(row)) for row in merged)
    print(f"{'variant'.ljust(width)}  availability%  excess%  front")
    for row in sorted(merged, key=lambda r: (-r["availability_pct"], r["excess_pct"], label_of(r))):
        marker = "*" if row["on_front"] else ""
        print(
            f"{label_of(row).ljust(width)}  {row['availability_pct']:13.2f}  "
            f"{row['excess_pct']:.2f}  {marker}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fogcast",
        description="Fog-network replication simulator with movement-aware prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="parse a GeoLife-layout directory into normalized TSV")
    ingest.add_argument("--root", required=True, help="dataset root (root/<user>/Trajectory/*.plt)")
    ingest.add_argument("--out", required=True, help="normalized TSV output path")
    ingest.add_argument("--users", help="comma-separated user ids to keep")
    ingest.add_argument("--gap", type=int, default=trajectory.DEFAULT_SESSION_GAP,
                        help="session split threshold in seconds (default %(default)s)")
    ingest.add_argument("--verbose", action="store_true")
    ingest.set_defaults(func=cmd_ingest)

    simulate = sub.add_parser("simulate", help="run the configured policy matrix over a dataset")
    simulate.add_argument("--config", required=True, help="TOML run configuration")
    simulate.add_argument("--out", help="output directory (overrides the config)")
    simulate.add_argument("--users", help="comma-separated user ids to keep")
    simulate.add_argument("--export-visits", action="store_true",
                          help="also write the node-visit streams as TSV")
    simulate.add_argument("--export-durations", action="store_true",
                          help="also write per-user stay series with one-step forecasts")
    simulate.add_argument("--verbose", action="store_true")
    simulate.set_defaults(func=cmd_simulate)

    compare = sub.add_parser("compare", help="merge results files and mark the Pareto front")
    compare.add_argument("results", nargs="+", help="results.csv paths")
    compare.add_argument("--out", help="merged CSV output path")
    compare.add_argument("--verbose", action="store_true")
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (config_mod.ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        if getattr(args, "verbose", False):
            traceback.print_exc()
        else:
            print(f"internal error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
