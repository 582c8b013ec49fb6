"""Execution engines: synchronous rounds and asynchronous discrete events.

Both engines serialize every state mutation through one apply path, so a run
is fully determined by (graph, placement, algorithm, policies, seeds) and its
trace replays bit-exactly.  There is no floating point anywhere here.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, NamedTuple, Sequence

from .agents import (
    HelpingState,
    Mode,
    initial_helping_state,
    initial_independent_state,
    memory_bits_helping,
    memory_bits_independent,
    settle_helping,
    settle_independent,
)
from .algorithms import (
    Dock,
    DockedHandle,
    HelpRecord,
    LocalView,
    Move,
    SimulationInvariantError,
    helping_async_step,
    helping_sync_step,
    independent_step,
    settled_service,
)
from .analysis import RobotStats, RunReport, check_dispersion, sync_round_bound
from .graph import InitialPlacement, PortLabeledGraph

__all__ = [
    "Algorithm",
    "MutexPolicy",
    "RoundRobin",
    "SeededRandom",
    "AdversarialStalling",
    "SchedulerPolicy",
    "Contender",
    "WorldState",
    "arbitrate_mutex",
    "apply_moves_single_lane",
    "run_sync",
    "run_async",
    "run",
    "JsonlTraceWriter",
    "trace_record_line",
    "DEFAULT_SAFETY_FACTOR",
]

DEFAULT_SAFETY_FACTOR = 4


class Algorithm(Enum):
    HELPING_SYNC = "helping-sync"
    HELPING_ASYNC = "helping-async"
    INDEPENDENT_SYNC = "independent-sync"
    INDEPENDENT_ASYNC = "independent-async"

    @property
    def is_sync(self) -> bool:
        return self.value.endswith("-sync")

    @property
    def family(self) -> str:
        return self.value.split("-", 1)[0]


class MutexPolicy(Enum):
    LOWEST_LABEL = "lowest-label"
    EARLIEST_ARRIVAL = "earliest-arrival"


@dataclass(frozen=True, slots=True)
class RoundRobin:
    """Cycle through robot labels, skipping settled robots."""


@dataclass(frozen=True, slots=True)
class SeededRandom:
    """Uniform random choice among unsettled robots, fairness-bounded."""

    seed: int = 0
    fairness_bound: int | None = None


@dataclass(frozen=True, slots=True)
class AdversarialStalling:
    """Stall high-weight robots: always pick the unsettled robot with the
    lowest delay weight (default weight = label), subject to the fairness
    bound."""

    weights: tuple[int, ...] | None = None
    fairness_bound: int | None = None


SchedulerPolicy = RoundRobin | SeededRandom | AdversarialStalling


class Contender(NamedTuple):
    label: int
    entry_port: int
    arrival_index: int


def arbitrate_mutex(contenders: Sequence[Contender], policy: MutexPolicy) -> int:
    """Pick the single docking winner among co-located undocked robots.

    lowest-label ignores arrival data; earliest-arrival compares
    (arrival index, entry port, label) lexicographically.
    """
    if not contenders:
        raise ValueError("mutex arbitration requires at least one contender")
    if policy is MutexPolicy.LOWEST_LABEL:
        return min(c.label for c in contenders)
    best = min(contenders, key=lambda c: (c.arrival_index, c.entry_port, c.label))
    return best.label


def _fairness_bound(explicit: int | None, k: int) -> int:
    return explicit if explicit is not None else 10 * k


class _RoundRobinSelector:
    def __init__(self, k: int) -> None:
        self._k = k
        self._next = 1

    def select(self, unsettled: Sequence[int]) -> int:
        pool = set(unsettled)
        cur = self._next
        for _ in range(self._k):
            if cur in pool:
                self._next = cur % self._k + 1
                return cur
            cur = cur % self._k + 1
        raise SimulationInvariantError("scheduler called with no unsettled robot")


class _FairSelector:
    """Shared fairness enforcement: no robot is passed over more than
    ``bound`` consecutive scheduling decisions."""

    def __init__(self, k: int, bound: int) -> None:
        if bound < k - 1:
            raise ValueError(
                f"fairness bound {bound} is unsatisfiable for {k} robots "
                f"(needs at least k-1 = {k - 1})"
            )
        self._bound = bound
        # staggered starts keep the counters pairwise distinct forever, so at
        # most one robot sits at the bound per decision and none exceeds it
        self._passes = [0] + [label - 1 for label in range(1, k + 1)]

    def _choose(self, unsettled: Sequence[int]) -> int:
        raise NotImplementedError

    def select(self, unsettled: Sequence[int]) -> int:
        starved = [l for l in unsettled if self._passes[l] >= self._bound]
        if starved:
            pick = max(starved, key=lambda l: (self._passes[l], -l))
        else:
            pick = self._choose(unsettled)
        for l in unsettled:
            self._passes[l] += 1
        self._passes[pick] = 0
        return pick


class _SeededRandomSelector(_FairSelector):
    def __init__(self, k: int, seed: int, bound: int) -> None:
        super().__init__(k, bound)
        self._rng = random.Random(seed)

    def _choose(self, unsettled: Sequence[int]) -> int:
        return self._rng.choice(unsettled)


class _AdversarialSelector(_FairSelector):
    def __init__(self, k: int, weights: Sequence[int] | None, bound: int) -> None:
        super().__init__(k, bound)
        if weights is not None and len(weights) != k:
            raise ValueError(f"need one delay weight per robot ({k}), got {len(weights)}")
        self._weights = list(weights) if weights is not None else list(range(1, k + 1))

    def _choose(self, unsettled: Sequence[int]) -> int:
        return min(unsettled, key=lambda l: (self._weights[l - 1], l))


def _make_selector(policy: SchedulerPolicy, k: int):
    if isinstance(policy, RoundRobin):
        return _RoundRobinSelector(k)
    if isinstance(policy, SeededRandom):
        return _SeededRandomSelector(k, policy.seed, _fairness_bound(policy.fairness_bound, k))
    if isinstance(policy, AdversarialStalling):
        return _AdversarialSelector(k, policy.weights, _fairness_bound(policy.fairness_bound, k))
    raise ValueError(f"unknown scheduler policy {policy!r}")


class WorldState:
    """Mutable simulation state confined to a single run.

    Holds robot positions and algorithm states (label i at index i-1), the
    per-node docked registry, arrival bookkeeping for mutex arbitration, and
    the outcome counters the report is built from.
    """

    def __init__(
        self,
        graph: PortLabeledGraph,
        positions: Sequence[int],
        helping: bool,
    ) -> None:
        k = len(positions)
        self.graph = graph
        self.k = k
        self.helping = helping
        self.positions: list[int] = list(positions)
        if helping:
            self.states: list = [initial_helping_state(i + 1, k) for i in range(k)]
        else:
            self.states = [initial_independent_state(i + 1, k) for i in range(k)]
        self.docked: dict[int, int] = {}
        self.unsettled: list[int] = list(range(1, k + 1))
        self.pending_entry: list[int] = [-1] * k
        self.arrival_index: list[int] = [0] * k
        self.next_arrival: list[int] = [1] * graph.node_count
        self.moves: list[int] = [0] * k
        self.settle_time: list[int | None] = [None] * k
        self.active_iterations: list[int] = [0] * k
        self.peak_stack: list[int] = [0] * k
        self.peak_memory: list[int] = [0] * k
        self.mutex_contentions = 0
        for lab in range(1, k + 1):
            self._note_memory(lab)

    @property
    def modes(self) -> list[Mode]:
        return [s.mode for s in self.states]

    def all_settled(self) -> bool:
        return not self.unsettled

    def robots_at(self, node: int, exclude: int | None = None) -> list[int]:
        return [
            l
            for l in self.unsettled
            if self.positions[l - 1] == node and l != exclude
        ]

    def local_view(self, lab: int) -> LocalView:
        node = self.positions[lab - 1]
        docked_lab = self.docked.get(node)
        handle = None
        if docked_lab is not None:
            if self.helping:
                docked_state: HelpingState = self.states[docked_lab - 1]
                handle = DockedHandle(
                    label=docked_lab,
                    visited_self=docked_state.visited[lab],
                    entry_port_self=docked_state.entry_port[lab],
                )
            else:
                handle = DockedHandle(label=docked_lab)
        return LocalView(
            degree=self.graph.degree(node),
            docked=handle,
            co_located=tuple(self.robots_at(node, exclude=lab)),
            entry_port=self.pending_entry[lab - 1],
        )

    def contenders_at(self, node: int) -> list[Contender]:
        return [
            Contender(l, self.pending_entry[l - 1], self.arrival_index[l - 1])
            for l in self.unsettled
            if self.positions[l - 1] == node
        ]

    def apply_state(self, lab: int, state) -> None:
        old = self.states[lab - 1]
        if old.mode is Mode.SETTLED and state.mode is not Mode.SETTLED:
            raise SimulationInvariantError(
                f"robot {lab} attempted to leave the settled mode"
            )
        self.states[lab - 1] = state
        self._note_memory(lab)

    def _note_memory(self, lab: int) -> None:
        state = self.states[lab - 1]
        if self.helping:
            bits = memory_bits_helping(
                state, self.k, self.graph.max_degree, self.graph.edge_count
            )
        else:
            depth = len(state.stack)
            if depth > self.peak_stack[lab - 1]:
                self.peak_stack[lab - 1] = depth
            bits = memory_bits_independent(state, self.k, self.graph.max_degree)
        if bits > self.peak_memory[lab - 1]:
            self.peak_memory[lab - 1] = bits

    def dock(self, lab: int, node: int, when: int) -> None:
        if node in self.docked:
            raise SimulationInvariantError(
                f"robot {lab} docked at node {node} already held by robot "
                f"{self.docked[node]}"
            )
        self.docked[node] = lab
        self.settle_time[lab - 1] = when
        self.unsettled.remove(lab)

    def settle_in_absentia(self, lab: int, node: int, when: int) -> None:
        """Dock a parked mutex winner during another robot's event: its own
        loop body ran just far enough to refresh the entry port and break."""
        state = self.states[lab - 1]
        if state.round > 0:
            entry = self.pending_entry[lab - 1]
            if self.helping:
                state = replace(state, port_entered=entry, parent_ptr=entry, seen=False)
            else:
                state = replace(state, port_entered=entry)
        state = replace(state, round=state.round + 1)
        settled = settle_helping(state) if self.helping else settle_independent(state)
        self.apply_state(lab, settled)
        self.active_iterations[lab - 1] += 1
        self.dock(lab, node, when)

    def apply_help_record(self, record: HelpRecord) -> None:
        target = self.states[record.docked_label - 1]
        _, _, updated = settled_service(
            target, record.visitor_label, record.entry_port
        )
        self.states[record.docked_label - 1] = updated

    def move_robot(self, lab: int, port: int) -> None:
        src = self.positions[lab - 1]
        dest, entry = self.graph.traverse(src, port)
        self.positions[lab - 1] = dest
        self.pending_entry[lab - 1] = entry
        self.arrival_index[lab - 1] = self.next_arrival[dest]
        self.next_arrival[dest] += 1
        self.moves[lab - 1] += 1


def apply_moves_single_lane(
    world: WorldState, moves: Sequence[tuple[int, int]]
) -> dict[int, list[int]]:
    """Apply one synchronous round's moves with single-lane arrival ordering.

    Robots crossing the same edge in the same direction enter in ascending
    label order; each destination node then orders all its arrivals by
    (entry port, within-edge order) and assigns arrival indices 0, 1, ...
    Returns the per-node arrival order (labels) for auditing.
    """
    arrivals: dict[int, list[tuple[int, int]]] = {}
    for lab, port in moves:
        src = world.positions[lab - 1]
        dest, entry = world.graph.traverse(src, port)
        arrivals.setdefault(dest, []).append((entry, lab))
    order: dict[int, list[int]] = {}
    for dest, incoming in arrivals.items():
        incoming.sort()
        order[dest] = [lab for _, lab in incoming]
        for idx, (entry, lab) in enumerate(incoming):
            world.positions[lab - 1] = dest
            world.pending_entry[lab - 1] = entry
            world.arrival_index[lab - 1] = idx
            world.moves[lab - 1] += 1
    return order


class JsonlTraceWriter:
    """Writes trace records as compact JSON Lines, one record per line."""

    def __init__(self, path) -> None:
        self.path = str(path)
        self._fh = open(path, "w", encoding="utf-8", newline="\n")

    def __call__(self, record: dict) -> None:
        self._fh.write(trace_record_line(record) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "JsonlTraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def trace_record_line(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


def _action_dict(action) -> dict:
    if isinstance(action, Move):
        return {"type": "move", "port": action.port}
    if isinstance(action, Dock):
        return {"type": "dock"}
    return {"type": "stay"}


def _trace_record(
    event: int,
    rnd: int | None,
    robot: int,
    node: int,
    mode_before: Mode,
    mode_after: Mode,
    action,
    mutex: tuple[list[int], int] | None,
    effects: Sequence[HelpRecord],
) -> dict:
    record: dict = {"event": event}
    if rnd is not None:
        record["round"] = rnd
    record["robot"] = robot
    record["node"] = node
    record["mode_before"] = mode_before.value
    record["mode_after"] = mode_after.value
    record["action"] = _action_dict(action)
    record["mutex"] = (
        None if mutex is None else {"contenders": mutex[0], "winner": mutex[1]}
    )
    record["help"] = [
        [e.docked_label, e.visitor_label, e.entry_port] for e in effects
    ]
    return record


def _coerce_placement(
    graph: PortLabeledGraph, placement
) -> tuple[int, ...]:
    if isinstance(placement, InitialPlacement):
        placement.validate(graph)
        return placement.robot_positions
    coerced = InitialPlacement(tuple(int(v) for v in placement))
    coerced.validate(graph)
    return coerced.robot_positions


def _build_report(
    world: WorldState,
    algorithm: Algorithm,
    rounds_elapsed: int | None,
    events_elapsed: int | None,
    trace_path: str | None,
) -> RunReport:
    robots = tuple(
        RobotStats(
            label=lab,
            moves=world.moves[lab - 1],
            settle_time=world.settle_time[lab - 1],
            active_iterations=world.active_iterations[lab - 1],
            peak_memory_bits=world.peak_memory[lab - 1],
            peak_stack_depth=None if world.helping else world.peak_stack[lab - 1],
        )
        for lab in range(1, world.k + 1)
    )
    return RunReport(
        algorithm=algorithm.value,
        dispersed=check_dispersion(world),
        rounds_elapsed=rounds_elapsed,
        events_elapsed=events_elapsed,
        node_count=world.graph.node_count,
        edge_count=world.graph.edge_count,
        max_degree=world.graph.max_degree,
        robot_count=world.k,
        robots=robots,
        final_positions=tuple(world.positions),
        final_modes=tuple(m.value for m in world.modes),
        mutex_contentions=world.mutex_contentions,
        trace_path=trace_path,
    )


def run_sync(
    graph: PortLabeledGraph,
    placement,
    algorithm: Algorithm | str = Algorithm.HELPING_SYNC,
    mutex_policy: MutexPolicy = MutexPolicy.LOWEST_LABEL,
    trace_sink: Callable[[dict], None] | None = None,
) -> RunReport:
    """Synchronous engine: rounds 0..4m-2(n-1), one loop body per robot per
    round, computed from the pre-round snapshot.

    Within a round: mutex winners are arbitrated per free node first, every
    unsettled robot's step is computed against the round-start world, docks
    and help records are applied, then all moves land with single-lane
    arrival ordering.  Stops early once every robot settled (the world is
    static afterwards).
    """
    algorithm = Algorithm(algorithm)
    if not algorithm.is_sync:
        raise ValueError(f"{algorithm.value} requires the asynchronous engine")
    positions = _coerce_placement(graph, placement)
    helping = algorithm.family == "helping"
    step = helping_sync_step if helping else independent_step
    world = WorldState(graph, positions, helping)
    bound = sync_round_bound(graph)

    event_no = 0
    rounds_elapsed = 0
    for rnd in range(bound + 1):
        if world.all_settled():
            break
        rounds_elapsed = rnd

        groups: dict[int, list[int]] = {}
        for lab in world.unsettled:
            groups.setdefault(world.positions[lab - 1], []).append(lab)
        winners: dict[int, tuple[list[int], int]] = {}
        for node, labs in groups.items():
            if node in world.docked:
                continue
            winner = arbitrate_mutex(world.contenders_at(node), mutex_policy)
            winners[node] = (labs, winner)
            if len(labs) > 1:
                world.mutex_contentions += 1

        results = []
        for lab in list(world.unsettled):
            node = world.positions[lab - 1]
            view = world.local_view(lab)
            mutex = winners.get(node)
            before = world.states[lab - 1].mode
            if helping:
                state, action, effects = step(world.states[lab - 1], view, mutex[1] if mutex else None)
            else:
                state, action = step(world.states[lab - 1], view, mutex[1] if mutex else None)
                effects = ()
            results.append((lab, node, before, state, action, effects, mutex))

        moves: list[tuple[int, int]] = []
        for lab, node, before, state, action, effects, mutex in results:
            world.apply_state(lab, state)
            world.active_iterations[lab - 1] += 1
            if isinstance(action, Dock):
                world.dock(lab, node, rnd)
            elif isinstance(action, Move):
                moves.append((lab, action.port))
        for lab, node, before, state, action, effects, mutex in results:
            for record in effects:
                world.apply_help_record(record)
        apply_moves_single_lane(world, moves)

        if trace_sink is not None:
            for lab, node, before, state, action, effects, mutex in results:
                trace_sink(
                    _trace_record(
                        event_no, rnd, lab, node, before, state.mode,
                        action, mutex, effects,
                    )
                )
                event_no += 1
        else:
            event_no += len(results)

    trace_path = getattr(trace_sink, "path", None)
    return _build_report(world, algorithm, rounds_elapsed, None, trace_path)


def run_async(
    graph: PortLabeledGraph,
    placement,
    algorithm: Algorithm | str = Algorithm.INDEPENDENT_ASYNC,
    scheduler_policy: SchedulerPolicy = RoundRobin(),
    mutex_policy: MutexPolicy = MutexPolicy.LOWEST_LABEL,
    trace_sink: Callable[[dict], None] | None = None,
    safety_factor: int = DEFAULT_SAFETY_FACTOR,
) -> RunReport:
    """Asynchronous discrete-event engine.

    The scheduler picks an unsettled robot; that robot executes one atomic
    loop-body iteration.  At a free node the mutex is arbitrated among all
    undocked robots parked there; a winner other than the acting robot is
    settled within the same event, before the acting robot's help records
    land.  Runs until all robots settle or the safety cap
    safety_factor * k * (4m - 2(n-1) + 1) is exceeded (which marks the run
    not dispersed: correct runs never reach it).
    """
    algorithm = Algorithm(algorithm)
    if algorithm.is_sync:
        raise ValueError(f"{algorithm.value} requires the synchronous engine")
    positions = _coerce_placement(graph, placement)
    helping = algorithm.family == "helping"
    step = helping_async_step if helping else independent_step
    world = WorldState(graph, positions, helping)
    k = world.k
    cap = safety_factor * k * (sync_round_bound(graph) + 1)
    selector = _make_selector(scheduler_policy, k)

    event = 0
    while not world.all_settled():
        if event >= cap:
            break
        lab = selector.select(world.unsettled)
        node = world.positions[lab - 1]
        view = world.local_view(lab)
        mutex: tuple[list[int], int] | None = None
        if view.docked is None:
            contenders = world.contenders_at(node)
            winner = arbitrate_mutex(contenders, mutex_policy)
            mutex = (sorted(c.label for c in contenders), winner)
            if len(contenders) > 1:
                world.mutex_contentions += 1

        before = world.states[lab - 1].mode
        if helping:
            state, action, effects = step(world.states[lab - 1], view, mutex[1] if mutex else None)
        else:
            state, action = step(world.states[lab - 1], view, mutex[1] if mutex else None)
            effects = ()

        if mutex is not None and mutex[1] != lab:
            world.settle_in_absentia(mutex[1], node, event)
        world.apply_state(lab, state)
        world.active_iterations[lab - 1] += 1
        if isinstance(action, Dock):
            world.dock(lab, node, event)
        for record in effects:
            world.apply_help_record(record)
        if isinstance(action, Move):
            world.move_robot(lab, action.port)

        if trace_sink is not None:
            trace_sink(
                _trace_record(
                    event, None, lab, node, before, state.mode,
                    action, mutex, effects,
                )
            )
        event += 1

    trace_path = getattr(trace_sink, "path", None)
    return _build_report(world, algorithm, None, event, trace_path)


def run(
    graph: PortLabeledGraph,
    placement,
    algorithm: Algorithm | str,
    scheduler_policy: SchedulerPolicy | None = None,
    mutex_policy: MutexPolicy = MutexPolicy.LOWEST_LABEL,
    trace_sink: Callable[[dict], None] | None = None,
    safety_factor: int = DEFAULT_SAFETY_FACTOR,
) -> RunReport:
    """Dispatch to the engine the algorithm belongs to."""
    algorithm = Algorithm(algorithm)
    if algorithm.is_sync:
        if scheduler_policy is not None:
            raise ValueError("scheduler policies apply to asynchronous algorithms only")
        return run_sync(graph, placement, algorithm, mutex_policy, trace_sink)
    return run_async(
        graph,
        placement,
        algorithm,
        scheduler_policy if scheduler_policy is not None else RoundRobin(),
        mutex_policy,
        trace_sink,
        safety_factor,
    )
