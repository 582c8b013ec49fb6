"""Batch experiment runner and trace replay.

One process executes many runs; every output is a pure function of the
command line (seeds included), so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import RunReport, check_memory_bound, check_time_bound
from .engine import (
    DEFAULT_SAFETY_FACTOR,
    AdversarialStalling,
    Algorithm,
    JsonlTraceWriter,
    MutexPolicy,
    RoundRobin,
    SchedulerPolicy,
    SeededRandom,
    run,
    trace_record_line,
)
from .graph import (
    GraphError,
    InitialPlacement,
    PortLabeledGraph,
    generate,
    graph_from_text,
    graph_to_text,
)

__all__ = ["ExperimentConfig", "run_experiment", "replay", "trace_header", "main"]

GRAPH_CHOICES = ("line", "ring", "complete", "tree", "grid", "gnm")
SCHEDULER_CHOICES = ("round-robin", "random", "adversarial")
MUTEX_CHOICES = ("lowest-label", "earliest-arrival")
PLACEMENT_CHOICES = ("colocated", "random", "distinct")

CSV_COLUMNS = (
    "run_id",
    "algorithm",
    "n",
    "m",
    "k",
    "delta",
    "seed",
    "dispersed",
    "rounds_or_events",
    "max_moves",
    "max_memory_bits",
    "max_stack_depth",
    "mutex_contentions",
)

# CLI graph names to generator family names
_FAMILY = {name: name for name in GRAPH_CHOICES} | {"tree": "random_tree"}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit status 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: Algorithm
    graph_family: str
    n: int
    m: int | None
    k: int
    placement: str
    placement_node: int
    seed: int
    scheduler: str | None
    mutex: MutexPolicy
    reps: int
    out: Path | None
    trace_dir: Path | None
    fmt: str

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"--n must be at least 1, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"--k must satisfy 1 <= k <= n; got k={self.k}, n={self.n}")
        if self.reps < 1:
            raise ConfigError(f"--reps must be at least 1, got {self.reps}")
        if self.graph_family == "gnm" and self.m is None:
            raise ConfigError("--graph gnm requires --m")
        if self.graph_family != "gnm" and self.m is not None:
            raise ConfigError("--m is only meaningful with --graph gnm")
        if self.algorithm.is_sync and self.scheduler is not None:
            raise ConfigError(
                f"--scheduler applies to asynchronous algorithms, not {self.algorithm.value}"
            )
        if self.placement == "colocated" and not 0 <= self.placement_node < self.n:
            raise ConfigError(
                f"colocated placement node {self.placement_node} outside 0..{self.n - 1}"
            )


def _make_placement(config: ExperimentConfig, graph: PortLabeledGraph, rep_seed: int) -> InitialPlacement:
    if config.placement == "colocated":
        return InitialPlacement((config.placement_node,) * config.k)
    rng = random.Random(f"{rep_seed}/placement")
    if config.placement == "random":
        return InitialPlacement(
            tuple(rng.randrange(graph.node_count) for _ in range(config.k))
        )
    return InitialPlacement(tuple(rng.sample(range(graph.node_count), config.k)))


def _make_scheduler(config: ExperimentConfig, rep_seed: int) -> SchedulerPolicy | None:
    if config.algorithm.is_sync:
        return None
    name = config.scheduler or "round-robin"
    if name == "round-robin":
        return RoundRobin()
    if name == "random":
        return SeededRandom(seed=rep_seed)
    return AdversarialStalling()


def _scheduler_dict(policy: SchedulerPolicy | None) -> dict | None:
    if policy is None:
        return None
    if isinstance(policy, RoundRobin):
        return {"kind": "round-robin"}
    if isinstance(policy, SeededRandom):
        return {"kind": "random", "seed": policy.seed, "fairness_bound": policy.fairness_bound}
    return {
        "kind": "adversarial",
        "weights": list(policy.weights) if policy.weights is not None else None,
        "fairness_bound": policy.fairness_bound,
    }


def _scheduler_from_dict(data: dict | None) -> SchedulerPolicy | None:
    if data is None:
        return None
    kind = data.get("kind")
    if kind == "round-robin":
        return RoundRobin()
    if kind == "random":
        return SeededRandom(seed=data["seed"], fairness_bound=data.get("fairness_bound"))
    if kind == "adversarial":
        weights = data.get("weights")
        return AdversarialStalling(
            weights=tuple(weights) if weights is not None else None,
            fairness_bound=data.get("fairness_bound"),
        )
    raise ConfigError(f"unknown scheduler kind {kind!r}")


def _bounds_ok(report: RunReport, graph: PortLabeledGraph, k: int) -> bool:
    if not report.dispersed:
        return False
    if not check_time_bound(report, graph):
        return False
    if not check_memory_bound(report, k, graph.max_degree, graph.edge_count):
        return False
    depth = report.max_stack_depth
    if depth is not None and depth > k - 1:
        return False
    return True


def trace_header(
    run_id: int,
    seed: int,
    algorithm: Algorithm,
    graph: PortLabeledGraph,
    placement: InitialPlacement,
    mutex: MutexPolicy,
    scheduler: SchedulerPolicy | None,
    safety_factor: int = DEFAULT_SAFETY_FACTOR,
) -> dict:
    """First record of a trace file: everything replay needs to re-execute."""
    return {
        "type": "config",
        "run_id": run_id,
        "algorithm": algorithm.value,
        "graph": graph_to_text(graph),
        "placement": list(placement.robot_positions),
        "mutex": mutex.value,
        "scheduler": _scheduler_dict(scheduler),
        "safety_factor": safety_factor,
        "seed": seed,
    }


def run_experiment(config: ExperimentConfig) -> int:
    """Execute all repetitions; returns the process exit status.

    0: every run dispersed and passed every bound check.
    1: some run failed a check (a pointer to it goes to stderr).
    2: the configuration is invalid.
    """
    try:
        config.validate()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    family = _FAMILY[config.graph_family]
    rows = []
    failures: list[tuple[int, str | None]] = []
    summary = {
        "runs": 0,
        "dispersed_runs": 0,
        "dispersion_rate": 0.0,
        "max_rounds_or_events": 0,
        "max_moves": 0,
        "max_memory_bits": 0,
        "max_stack_depth": None,
        "mutex_contentions": 0,
        "bounds_ok": True,
    }
    if config.trace_dir is not None:
        config.trace_dir.mkdir(parents=True, exist_ok=True)

    for rep in range(config.reps):
        rep_seed = config.seed + rep
        try:
            graph = generate(family, config.n, config.m, seed=rep_seed)
            placement = _make_placement(config, graph, rep_seed)
        except GraphError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        scheduler = _make_scheduler(config, rep_seed)

        sink = None
        if config.trace_dir is not None:
            sink = JsonlTraceWriter(config.trace_dir / f"run_{rep:03d}.jsonl")
            sink(
                trace_header(
                    rep, rep_seed, config.algorithm, graph, placement,
                    config.mutex, scheduler,
                )
            )
        try:
            report = run(
                graph,
                placement,
                config.algorithm,
                scheduler_policy=scheduler,
                mutex_policy=config.mutex,
                trace_sink=sink,
            )
        finally:
            if sink is not None:
                sink.close()

        ok = _bounds_ok(report, graph, config.k)
        if not ok:
            failures.append((rep, report.trace_path))
        rows.append((rep, rep_seed, report))

        summary["runs"] += 1
        summary["dispersed_runs"] += 1 if report.dispersed else 0
        summary["max_rounds_or_events"] = max(summary["max_rounds_or_events"], report.duration)
        summary["max_moves"] = max(summary["max_moves"], report.max_moves)
        summary["max_memory_bits"] = max(summary["max_memory_bits"], report.max_memory_bits)
        if report.max_stack_depth is not None:
            prev = summary["max_stack_depth"]
            summary["max_stack_depth"] = (
                report.max_stack_depth if prev is None else max(prev, report.max_stack_depth)
            )
        summary["mutex_contentions"] += report.mutex_contentions
        summary["bounds_ok"] = summary["bounds_ok"] and ok

    summary["dispersion_rate"] = summary["dispersed_runs"] / summary["runs"]

    document = _render(config, rows, summary)
    if config.out is not None:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        config.out.write_text(document, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(document)
    print(json.dumps({"summary": summary}, separators=(",", ":")), file=sys.stderr)

    if failures:
        rep, trace = failures[0]
        where = f" (trace: {trace})" if trace else ""
        print(
            f"error: run {rep} violated dispersion or a bound check{where}",
            file=sys.stderr,
        )
        return 1
    return 0


def _render(config: ExperimentConfig, rows, summary) -> str:
    if config.fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rep, rep_seed, report in rows:
            depth = report.max_stack_depth
            writer.writerow(
                [
                    rep,
                    report.algorithm,
                    report.node_count,
                    report.edge_count,
                    report.robot_count,
                    report.max_degree,
                    rep_seed,
                    "true" if report.dispersed else "false",
                    report.duration,
                    report.max_moves,
                    report.max_memory_bits,
                    "" if depth is None else depth,
                    report.mutex_contentions,
                ]
            )
        return buf.getvalue()
    doc = {
        "summary": summary,
        "runs": [
            {"run_id": rep, "seed": rep_seed, **report.to_dict()}
            for rep, rep_seed, report in rows
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def replay(trace_path: str | Path) -> int:
    """Re-execute a recorded run and assert event-by-event equality.

    0: identical; 1: divergence (first differing event reported);
    2: malformed trace.
    """
    path = Path(trace_path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return 2
    if not lines:
        print("error: empty trace file", file=sys.stderr)
        return 2
    try:
        header = json.loads(lines[0])
        if header.get("type") != "config":
            raise ValueError("first line is not a config record")
        graph = graph_from_text(header["graph"])
        placement = InitialPlacement(tuple(header["placement"]))
        algorithm = Algorithm(header["algorithm"])
        mutex = MutexPolicy(header["mutex"])
        scheduler = _scheduler_from_dict(header.get("scheduler"))
        safety = header.get("safety_factor", DEFAULT_SAFETY_FACTOR)
    except (KeyError, ValueError, GraphError, json.JSONDecodeError) as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        return 2

    recorded = lines[1:]
    replayed: list[str] = []
    run(
        graph,
        placement,
        algorithm,
        scheduler_policy=scheduler,
        mutex_policy=mutex,
        trace_sink=lambda rec: replayed.append(trace_record_line(rec)),
        safety_factor=safety,
    )
    for idx, (old, new) in enumerate(zip(recorded, replayed)):
        if old != new:
            print(f"divergence at event {idx}:", file=sys.stderr)
            print(f"  recorded: {old}", file=sys.stderr)
            print(f"  replayed: {new}", file=sys.stderr)
            return 1
    if len(recorded) != len(replayed):
        print(
            f"divergence: {len(recorded)} recorded vs {len(replayed)} replayed events",
            file=sys.stderr,
        )
        return 1
    print(f"replay OK: {len(replayed)} events identical")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispersim",
        description="Deterministic mobile-robot dispersion experiments on "
        "anonymous port-labeled graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a batch of seeded experiments")
    runp.add_argument(
        "--algorithm",
        required=True,
        choices=[a.value for a in Algorithm],
    )
    runp.add_argument("--graph", required=True, choices=GRAPH_CHOICES)
    runp.add_argument("--n", type=int, required=True, help="node count")
    runp.add_argument("--m", type=int, default=None, help="edge count (gnm only)")
    runp.add_argument("--k", type=int, required=True, help="robot count (k <= n)")
    runp.add_argument(
        "--placement",
        default="colocated",
        help="colocated[:NODE] | random | distinct (default colocated at node 0)",
    )
    runp.add_argument("--seed", type=int, default=0)
    runp.add_argument(
        "--scheduler",
        default=None,
        choices=SCHEDULER_CHOICES,
        help="asynchronous algorithms only (default round-robin)",
    )
    runp.add_argument("--mutex", default="lowest-label", choices=MUTEX_CHOICES)
    runp.add_argument("--reps", type=int, default=1)
    runp.add_argument("--out", type=Path, default=None, help="report file (default stdout)")
    runp.add_argument("--trace", type=Path, default=None, help="directory for JSONL traces")
    runp.add_argument("--format", default="json", choices=("json", "csv"))

    repp = sub.add_parser("replay", help="re-execute a trace and verify it")
    repp.add_argument("trace", type=Path)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    placement = args.placement
    node = 0
    if placement.startswith("colocated"):
        mode, _, suffix = placement.partition(":")
        if mode != "colocated":
            raise ConfigError(f"unknown placement {placement!r}")
        if suffix:
            try:
                node = int(suffix)
            except ValueError:
                raise ConfigError(f"bad colocated node {suffix!r}") from None
        placement = "colocated"
    elif placement not in PLACEMENT_CHOICES:
        raise ConfigError(f"unknown placement {args.placement!r}")
    return ExperimentConfig(
        algorithm=Algorithm(args.algorithm),
        graph_family=args.graph,
        n=args.n,
        m=args.m,
        k=args.k,
        placement=placement,
        placement_node=node,
        seed=args.seed,
        scheduler=args.scheduler,
        mutex=MutexPolicy(args.mutex),
        reps=args.reps,
        out=args.out,
        trace_dir=args.trace,
        fmt=args.format,
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return replay(args.trace)
    try:
        config = _config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
