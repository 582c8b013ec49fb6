"""Pure step functions for the three dispersion algorithms.

Each function consumes (robot state, local node view, mutex winner) and
returns the successor state plus an action; helping-family steps also return
the record updates to apply at the serving docked robot.  Steps never mutate
anything: the engine owns all state application, which keeps runs replayable
from a single mutation point.

A step sees only the local view: node degree, the docked robot's handle (its
label and the viewer's own slots in its arrays), co-located undocked labels,
and the viewer's entry port.  Node identity is unreachable from here.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .agents import (
    HelpingState,
    IndependentState,
    Mode,
    settle_helping,
    settle_independent,
)

__all__ = [
    "SimulationInvariantError",
    "DockedHandle",
    "LocalView",
    "Move",
    "Dock",
    "Stay",
    "Action",
    "DOCK",
    "STAY",
    "HelpRecord",
    "helping_sync_step",
    "helping_async_step",
    "independent_step",
    "settled_service",
]


class SimulationInvariantError(RuntimeError):
    """A run reached a state the model forbids; indicates a transcription bug."""


@dataclass(frozen=True, slots=True)
class DockedHandle:
    """What a docked robot communicates to the viewing robot.

    ``visited_self`` / ``entry_port_self`` are the viewer's own slots in the
    docked robot's arrays (helping family; independent visitors only use the
    label).
    """

    label: int
    visited_self: bool = False
    entry_port_self: int = -1


@dataclass(frozen=True, slots=True)
class LocalView:
    degree: int
    docked: DockedHandle | None
    co_located: tuple[int, ...]
    entry_port: int


@dataclass(frozen=True, slots=True)
class Move:
    port: int


@dataclass(frozen=True, slots=True)
class Dock:
    pass


@dataclass(frozen=True, slots=True)
class Stay:
    pass


Action = Move | Dock | Stay

DOCK = Dock()
STAY = Stay()


@dataclass(frozen=True, slots=True)
class HelpRecord:
    """First-visit record to apply at a docked robot: set
    visited[visitor] = 1 and entry_port[visitor] = entry_port."""

    docked_label: int
    visitor_label: int
    entry_port: int


def settled_service(
    docked: HelpingState, visitor_label: int, visitor_port: int
) -> tuple[bool, int, HelpingState]:
    """One docked-robot service exchange with a visitor.

    Returns the pre-update (visited[j], entry_port[j]) pair the visitor
    receives, plus the docked robot's successor state: a first visit stores
    visited[j] = 1 and entry_port[j] = visitor_port, a repeat visit changes
    nothing.
    """
    if docked.mode is not Mode.SETTLED or docked.visited is None:
        raise SimulationInvariantError(
            f"robot {docked.label} is not settled and cannot serve visitors"
        )
    was_visited = docked.visited[visitor_label]
    old_port = docked.entry_port[visitor_label]
    if was_visited:
        return True, old_port, docked
    visited = list(docked.visited)
    entry_port = list(docked.entry_port)
    visited[visitor_label] = True
    entry_port[visitor_label] = visitor_port
    updated = replace(docked, visited=tuple(visited), entry_port=tuple(entry_port))
    return False, old_port, updated


def _advance(port: int, degree: int) -> int:
    return (port + 1) % degree


def helping_sync_step(
    state: HelpingState, view: LocalView, mutex_winner: int | None
) -> tuple[HelpingState, Action, tuple[HelpRecord, ...]]:
    """One synchronous loop-body iteration of the helping algorithm.

    A settled robot's helper block is realized through its visitors' steps
    (the engine applies their HelpRecords via ``settled_service``), so the
    settled case is a no-op here.  ``mutex_winner`` must be the node's
    arbitration result when the node is free, None otherwise.  The winner's
    recording of robots co-located at docking time is realized by the losers'
    HelpRecords, emitted in this same round.
    """
    if state.mode is Mode.SETTLED:
        return state, STAY, ()

    pe = state.port_entered
    pp = state.parent_ptr
    seen = state.seen
    if state.round > 0:
        pe = pp = view.entry_port
        seen = False
    nxt = state.round + 1

    if state.mode is Mode.EXPLORE:
        effects: tuple[HelpRecord, ...] = ()
        if view.docked is not None:
            # node claimed in an earlier round: read own slots at the dock
            seen = view.docked.visited_self
            pp = view.docked.entry_port_self
            if seen:
                new = replace(
                    state,
                    mode=Mode.BACKTRACK,
                    port_entered=pe,
                    parent_ptr=pp,
                    seen=True,
                    round=nxt,
                )
                return new, Move(pe), ()
            pp = pe
            effects = (HelpRecord(view.docked.label, state.label, pe),)
        else:
            if mutex_winner is None:
                raise SimulationInvariantError(
                    f"robot {state.label} at a free node without arbitration"
                )
            if mutex_winner == state.label:
                new = replace(
                    state, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
                )
                return settle_helping(new), DOCK, ()
            # loser: the winner records this robot's current entry port
            effects = (HelpRecord(mutex_winner, state.label, pe),)
        pe = _advance(pe, view.degree)
        mode = Mode.BACKTRACK if pe == pp else Mode.EXPLORE
        new = replace(
            state, mode=mode, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
        )
        return new, Move(pe), effects

    # backtrack: the target node always holds a docked robot
    if view.docked is None:
        raise SimulationInvariantError(
            f"robot {state.label} backtracked into a node with no docked robot"
        )
    seen = view.docked.visited_self
    pp = view.docked.entry_port_self
    pe = _advance(pe, view.degree)
    mode = Mode.EXPLORE if pe != pp else Mode.BACKTRACK
    new = replace(
        state, mode=mode, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
    )
    return new, Move(pe), ()


def helping_async_step(
    state: HelpingState, view: LocalView, mutex_winner: int | None
) -> tuple[HelpingState, Action, tuple[HelpRecord, ...]]:
    """One asynchronous loop-body iteration of the helping algorithm.

    Differences from the synchronous body: docking breaks out immediately
    after initializing the arrays (co-located robots are served later as
    ordinary visitors), and a mutex loser exchanges with the fresh winner --
    whose arrays are necessarily blank -- so it always records a first visit
    there.  The winner may be a robot other than the acting one; the engine
    settles it within the same event, before applying this step's records.
    """
    if state.mode is Mode.SETTLED:
        raise SimulationInvariantError(
            f"settled robot {state.label} has no active iterations"
        )

    pe = state.port_entered
    pp = state.parent_ptr
    seen = state.seen
    if state.round > 0:
        pe = pp = view.entry_port
        seen = False
    nxt = state.round + 1

    if state.mode is Mode.EXPLORE:
        effects: tuple[HelpRecord, ...] = ()
        if view.docked is not None:
            seen = view.docked.visited_self
            pp = view.docked.entry_port_self
            if seen:
                new = replace(
                    state,
                    mode=Mode.BACKTRACK,
                    port_entered=pe,
                    parent_ptr=pp,
                    seen=True,
                    round=nxt,
                )
                return new, Move(pe), ()
            pp = pe
            effects = (HelpRecord(view.docked.label, state.label, pe),)
        else:
            if mutex_winner is None:
                raise SimulationInvariantError(
                    f"robot {state.label} at a free node without arbitration"
                )
            if mutex_winner == state.label:
                new = replace(
                    state, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
                )
                return settle_helping(new), DOCK, ()
            # loser: the fresh winner's arrays are blank, so this is a first
            # visit; record it there and keep exploring
            seen = False
            pp = pe
            effects = (HelpRecord(mutex_winner, state.label, pe),)
        pe = _advance(pe, view.degree)
        mode = Mode.BACKTRACK if pe == pp else Mode.EXPLORE
        new = replace(
            state, mode=mode, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
        )
        return new, Move(pe), effects

    if view.docked is None:
        raise SimulationInvariantError(
            f"robot {state.label} backtracked into a node with no docked robot"
        )
    seen = view.docked.visited_self
    pp = view.docked.entry_port_self
    pe = _advance(pe, view.degree)
    mode = Mode.EXPLORE if pe != pp else Mode.BACKTRACK
    new = replace(
        state, mode=mode, port_entered=pe, parent_ptr=pp, seen=seen, round=nxt
    )
    return new, Move(pe), ()


def independent_step(
    state: IndependentState, view: LocalView, mutex_winner: int | None
) -> tuple[IndependentState, Action]:
    """One loop-body iteration of the independent algorithm.

    The robot keeps its own visited array (indexed by docked-robot labels)
    and a stack of entry ports; the stack top is the parent pointer of the
    current node.  Docked robots only relay their labels, so there are no
    help records.
    """
    if state.mode is Mode.SETTLED:
        raise SimulationInvariantError(
            f"settled robot {state.label} has no active iterations"
        )

    pe = state.port_entered
    if state.round > 0:
        pe = view.entry_port
    nxt = state.round + 1
    visited = state.visited
    stack = state.stack

    if state.mode is Mode.EXPLORE:
        if view.docked is not None and visited[view.docked.label]:
            # revisited node: bounce straight back the way we came
            new = replace(state, mode=Mode.BACKTRACK, port_entered=pe, round=nxt)
            return new, Move(pe)
        if view.docked is not None:
            marked = view.docked.label
        else:
            if mutex_winner is None:
                raise SimulationInvariantError(
                    f"robot {state.label} at a free node without arbitration"
                )
            if mutex_winner == state.label:
                new = settle_independent(
                    replace(state, port_entered=pe, round=nxt)
                )
                return new, DOCK
            marked = mutex_winner
        # first visit: mark the docked (or freshly docking) robot, remember
        # the entry port as this node's parent pointer, take the next port
        lst = list(visited)
        lst[marked] = True
        visited = tuple(lst)
        stack = stack + (pe,)
        pe = _advance(pe, view.degree)
        mode = Mode.EXPLORE
        if pe == stack[-1]:
            mode = Mode.BACKTRACK
            stack = stack[:-1]
        new = replace(
            state,
            mode=mode,
            port_entered=pe,
            round=nxt,
            visited=visited,
            stack=stack,
        )
        return new, Move(pe)

    # backtrack
    if view.docked is None:
        raise SimulationInvariantError(
            f"robot {state.label} backtracked into a node with no docked robot"
        )
    if not stack:
        raise SimulationInvariantError(
            f"robot {state.label} backtracking with an empty stack"
        )
    pe = _advance(pe, view.degree)
    mode = Mode.EXPLORE
    if pe == stack[-1]:
        mode = Mode.BACKTRACK
        stack = stack[:-1]
    new = replace(
        state, mode=mode, port_entered=pe, round=nxt, stack=stack
    )
    return new, Move(pe)
