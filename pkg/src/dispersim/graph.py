"""Port-labeled anonymous undirected graphs: construction, generators, I/O.

A port-labeled graph assigns each node a local numbering 0..degree-1 of its
incident edges.  The two port numbers of one edge are independent: leaving
node ``v`` through port ``p`` arrives at some neighbor ``u`` through ``u``'s
own port for that edge.  Nodes carry indices for simulation bookkeeping only;
nothing in the robot-visible API depends on them.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "GraphError",
    "PortLabeledGraph",
    "InitialPlacement",
    "build_graph",
    "generate",
    "diameter",
    "relabel_nodes",
    "graph_to_text",
    "graph_from_text",
    "write_graph",
    "read_graph",
]

GRAPH_FAMILIES = ("line", "ring", "complete", "random_tree", "grid", "gnm")

DEFAULT_GNM_RETRIES = 1000


class GraphError(ValueError):
    """Invalid graph input: structure, ports, or generator parameters."""


@dataclass(frozen=True, slots=True)
class PortLabeledGraph:
    """Immutable connected simple graph with per-node port tables.

    ``ports[v][p]`` is the pair ``(neighbor, entry_port)`` reached by leaving
    ``v`` through port ``p``; ``entry_port`` is the neighbor's own port for
    the same edge.
    """

    node_count: int
    edge_count: int
    ports: tuple[tuple[tuple[int, int], ...], ...]

    def degree(self, v: int) -> int:
        return len(self.ports[v])

    def traverse(self, v: int, p: int) -> tuple[int, int]:
        """Follow port ``p`` out of ``v``; returns (neighbor, entry port)."""
        table = self.ports[v]
        if not 0 <= p < len(table):
            raise GraphError(f"port {p} out of range at node {v} (degree {len(table)})")
        return table[p]

    @property
    def max_degree(self) -> int:
        if self.node_count == 0:
            return 0
        return max(len(t) for t in self.ports)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return tuple(u for u, _ in self.ports[v])

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edge list as (u, v) pairs with u < v, sorted."""
        out = set()
        for v, table in enumerate(self.ports):
            for u, _ in table:
                out.add((min(u, v), max(u, v)))
        return sorted(out)

    def validate(self) -> None:
        """Check every structural invariant; raises GraphError on failure."""
        if self.node_count < 1:
            raise GraphError("graph must have at least one node")
        if len(self.ports) != self.node_count:
            raise GraphError("port table count does not match node count")
        degree_sum = 0
        for v, table in enumerate(self.ports):
            degree_sum += len(table)
            for p, (u, q) in enumerate(table):
                if not 0 <= u < self.node_count:
                    raise GraphError(f"node {v} port {p} points at invalid node {u}")
                if u == v:
                    raise GraphError(f"self-loop at node {v} (port {p})")
                back = self.ports[u]
                if not 0 <= q < len(back) or back[q] != (v, p):
                    raise GraphError(
                        f"port involution broken: {v} --{p}--> {u} "
                        f"but node {u} port {q} does not return via port {p}"
                    )
            if len({u for u, _ in table}) != len(table):
                raise GraphError(f"multi-edge at node {v}")
        if degree_sum != 2 * self.edge_count:
            raise GraphError(
                f"degree sum {degree_sum} does not equal 2*m = {2 * self.edge_count}"
            )
        if not self._connected():
            raise GraphError("graph is not connected")

    def _connected(self) -> bool:
        if self.node_count <= 1:
            return True
        seen = [False] * self.node_count
        seen[0] = True
        queue = deque([0])
        count = 1
        while queue:
            v = queue.popleft()
            for u, _ in self.ports[v]:
                if not seen[u]:
                    seen[u] = True
                    count += 1
                    queue.append(u)
        return count == self.node_count


@dataclass(frozen=True, slots=True)
class InitialPlacement:
    """Start nodes for robots: entry i is the position of robot label i+1."""

    robot_positions: tuple[int, ...]

    @property
    def robot_count(self) -> int:
        return len(self.robot_positions)

    def validate(self, graph: PortLabeledGraph) -> None:
        k = len(self.robot_positions)
        if not 1 <= k <= graph.node_count:
            raise GraphError(
                f"robot count {k} must satisfy 1 <= k <= n = {graph.node_count}"
            )
        for i, v in enumerate(self.robot_positions):
            if not 0 <= v < graph.node_count:
                raise GraphError(f"robot {i + 1} placed at invalid node {v}")


def _check_edges(
    edges: Sequence[tuple[int, int]], node_count: int | None
) -> tuple[int, list[tuple[int, int]]]:
    seen: set[tuple[int, int]] = set()
    cleaned: list[tuple[int, int]] = []
    max_node = -1
    for u, v in edges:
        if u == v:
            raise GraphError(f"self-loop on node {u}")
        if u < 0 or v < 0:
            raise GraphError(f"negative node index in edge ({u},{v})")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u},{v})")
        seen.add(key)
        cleaned.append((u, v))
        max_node = max(max_node, u, v)
    n = max_node + 1 if node_count is None else node_count
    if n < 1:
        raise GraphError("graph must have at least one node")
    if max_node >= n:
        raise GraphError(f"edge endpoint {max_node} exceeds node count {n}")
    return n, cleaned


def build_graph(
    edges: Sequence[tuple[int, int]],
    ports: str | Mapping[int, Sequence[int]] = "canonical",
    seed: int | None = None,
    node_count: int | None = None,
) -> PortLabeledGraph:
    """Build a port-labeled graph from a simple connected undirected edge list.

    Port assignment:

    * ``"canonical"``: each node's ports follow edge-list order, so the j-th
      edge incident to ``v`` in the given list gets port j at ``v``.
    * ``"random"``: reproducible shuffle. Starting from the canonical
      adjacency lists, a single ``random.Random(seed)`` shuffles each node's
      list in ascending node order; the shuffled position of a neighbor is
      its port.
    * explicit mapping ``{node: [neighbors in port order]}``: listed nodes
      use the given order (must be a permutation of that node's neighbors);
      unlisted nodes stay canonical.

    Rejects self-loops, duplicate edges, disconnected inputs, and malformed
    permutations with a diagnostic naming the offending node or edge.
    """
    n, cleaned = _check_edges(edges, node_count)
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v in cleaned:
        adjacency[u].append(v)
        adjacency[v].append(u)

    if ports == "random":
        rng = random.Random(seed)
        for v in range(n):
            rng.shuffle(adjacency[v])
    elif isinstance(ports, Mapping):
        for v, order in ports.items():
            if not 0 <= v < n:
                raise GraphError(f"port permutation given for unknown node {v}")
            if sorted(order) != sorted(adjacency[v]):
                raise GraphError(
                    f"port permutation for node {v} is not a permutation "
                    f"of its neighbors {sorted(adjacency[v])}"
                )
            adjacency[v] = list(order)
    elif ports != "canonical":
        raise GraphError(f"unknown port assignment {ports!r}")

    position = [
        {u: p for p, u in enumerate(adjacency[v])} for v in range(n)
    ]
    tables = tuple(
        tuple((u, position[u][v]) for u in adjacency[v]) for v in range(n)
    )
    graph = PortLabeledGraph(node_count=n, edge_count=len(cleaned), ports=tables)
    graph.validate()
    return graph


def _grid_dimensions(n: int) -> tuple[int, int]:
    rows = 1
    d = 1
    while d * d <= n:
        if n % d == 0:
            rows = d
        d += 1
    return rows, n // rows


def _gnm_edges(n: int, m: int, rng: random.Random, retries: int) -> list[tuple[int, int]]:
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    for _ in range(retries):
        chosen = rng.sample(pairs, m)
        if _edges_connected(n, chosen):
            return chosen
    raise GraphError(
        f"could not sample a connected graph with n={n}, m={m} "
        f"within {retries} retries"
    )


def _edges_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            components -= 1
    return components == 1


def generate(
    family: str,
    n: int,
    m: int | None = None,
    seed: int | None = None,
    ports: str = "canonical",
    gnm_retries: int = DEFAULT_GNM_RETRIES,
) -> PortLabeledGraph:
    """Generate a connected graph of a named family, deterministic per seed.

    Families: line, ring (n >= 3), complete, random_tree, grid (rows x cols
    with rows the largest divisor of n at most sqrt(n)), gnm (requires
    n-1 <= m <= n(n-1)/2; rejection-samples edge sets until connected).
    """
    if n < 1:
        raise GraphError(f"family {family!r} needs n >= 1, got {n}")
    rng = random.Random(seed)
    if family == "line":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif family == "ring":
        if n < 3:
            raise GraphError(f"ring needs n >= 3, got {n}")
        edges = [(i, (i + 1) % n) for i in range(n)]
    elif family == "complete":
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    elif family == "random_tree":
        # random recursive tree: node v >= 1 attaches to a uniform earlier node
        edges = [(rng.randrange(v), v) for v in range(1, n)]
    elif family == "grid":
        rows, cols = _grid_dimensions(n)
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
    elif family == "gnm":
        if m is None:
            raise GraphError("gnm requires an edge count m")
        if not n - 1 <= m <= n * (n - 1) // 2:
            raise GraphError(
                f"gnm needs n-1 <= m <= n(n-1)/2; got n={n}, m={m}"
            )
        edges = _gnm_edges(n, m, rng, gnm_retries)
    else:
        raise GraphError(f"unknown graph family {family!r}")
    if m is not None and family != "gnm" and m != len(edges):
        raise GraphError(f"family {family!r} with n={n} has m={len(edges)}, not {m}")
    return build_graph(edges, ports=ports, seed=seed, node_count=n)


def diameter(g: PortLabeledGraph) -> int:
    """Exact diameter via all-pairs BFS (0 for a single-node graph)."""
    best = 0
    for start in range(g.node_count):
        dist = [-1] * g.node_count
        dist[start] = 0
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u, _ in g.ports[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        best = max(best, max(dist))
    return best


def relabel_nodes(g: PortLabeledGraph, permutation: Sequence[int]) -> PortLabeledGraph:
    """Apply a node permutation, preserving every port number.

    ``permutation[v]`` is the new index of old node ``v``.  Used to audit
    that algorithms never read node identity.
    """
    if sorted(permutation) != list(range(g.node_count)):
        raise GraphError("relabeling must be a permutation of all nodes")
    tables: list[tuple[tuple[int, int], ...]] = [()] * g.node_count
    for v in range(g.node_count):
        tables[permutation[v]] = tuple((permutation[u], q) for u, q in g.ports[v])
    out = PortLabeledGraph(g.node_count, g.edge_count, tuple(tables))
    out.validate()
    return out


def graph_to_text(g: PortLabeledGraph) -> str:
    """Serialize: `n m`, then m edge lines `u v`, then per-node port lines.

    Port lines read `v: p->neighbor ...` with ports ascending; they make the
    port assignment explicit so a round trip is exact.
    """
    lines = [f"{g.node_count} {g.edge_count}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    for v in range(g.node_count):
        entries = " ".join(f"{p}->{u}" for p, (u, _) in enumerate(g.ports[v]))
        lines.append(f"{v}: {entries}" if entries else f"{v}:")
    return "\n".join(lines) + "\n"


def graph_from_text(text: str) -> PortLabeledGraph:
    """Parse the `graph_to_text` format; a missing port block means canonical."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GraphError("empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise GraphError(f"header must be 'n m', got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise GraphError(f"bad header {lines[0]!r}") from exc
    if len(lines) < 1 + m:
        raise GraphError(f"expected {m} edge lines, found {len(lines) - 1}")
    edges = []
    for ln in lines[1 : 1 + m]:
        parts = ln.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    port_spec: dict[int, list[int]] = {}
    for ln in lines[1 + m :]:
        if ":" not in ln:
            raise GraphError(f"bad port line {ln!r}")
        node_part, _, rest = ln.partition(":")
        v = int(node_part)
        order = []
        for token in rest.split():
            p_str, sep, u_str = token.partition("->")
            if sep != "->":
                raise GraphError(f"bad port entry {token!r} on node {v}")
            if int(p_str) != len(order):
                raise GraphError(f"ports for node {v} must be listed in order")
            order.append(int(u_str))
        port_spec[v] = order
    ports: str | dict[int, list[int]] = port_spec if port_spec else "canonical"
    return build_graph(edges, ports=ports, node_count=n)


def write_graph(g: PortLabeledGraph, path: str | Path) -> None:
    Path(path).write_text(graph_to_text(g), encoding="utf-8", newline="\n")


def read_graph(path: str | Path) -> PortLabeledGraph:
    return graph_from_text(Path(path).read_text(encoding="utf-8"))
