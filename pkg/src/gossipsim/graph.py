"""Static undirected communication networks.

Nodes are 0-indexed. Edges are unordered pairs stored in canonical
(min, max) form, so symmetry is structural and duplicates collapse.
Graphs are immutable after construction and safe to share between
concurrent runs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "EdgeListParseError",
    "build_path",
    "build_ring",
    "build_complete",
    "parse_edge_list",
    "serialize_edge_list",
    "is_connected",
    "neighbors",
    "random_connected_graph",
]


class GraphError(ValueError):
    """Invalid graph construction or query."""


class EdgeListParseError(GraphError):
    """Malformed edge-list text; carries the 1-based offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes 0..n-1 with canonical (min, max) edges."""

    n: int
    edges: frozenset[tuple[int, int]]
    label: str = "custom"

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise GraphError(f"node count must be a positive integer, got {self.n!r}")
        canon = set()
        for e in self.edges:
            i, j = e
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge {e} out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))

    def adjacency(self) -> list[set[int]]:
        """Neighbor sets per node (excluding the node itself)."""
        adj: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def degree(self, i: int) -> int:
        return len(neighbors(self, i))


def build_path(n: int, label: str = "path") -> Graph:
    """Path 0-1-2-...-(n-1); requires n >= 2."""
    if n < 2:
        raise GraphError(f"path needs n >= 2, got {n}")
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)), label=label)


def build_ring(n: int, label: str = "ring") -> Graph:
    """Cycle over n nodes (path plus the closing edge); requires n >= 3."""
    if n < 3:
        raise GraphError(f"ring needs n >= 3, got {n}")
    edges = set((i, i + 1) for i in range(n - 1))
    edges.add((0, n - 1))
    return Graph(n, frozenset(edges), label=label)


def build_complete(n: int, label: str = "complete") -> Graph:
    """All n(n-1)/2 pairs; requires n >= 2."""
    if n < 2:
        raise GraphError(f"complete graph needs n >= 2, got {n}")
    return Graph(
        n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)), label=label
    )


def parse_edge_list(text: str, label: str = "file") -> Graph:
    """Parse the edge-list text format.

    Lines starting with '#' are comments; blank lines are ignored. The
    first data line is the node count, each following data line is
    "i j" with whitespace-separated decimal indices. Duplicate edges
    collapse to one.
    """
    n = None
    edges = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if n is None:
            if len(tokens) != 1:
                raise EdgeListParseError(
                    f"expected a single node count, got {line!r}", line_no
                )
            try:
                n = int(tokens[0])
            except ValueError:
                raise EdgeListParseError(f"node count is not an integer: {tokens[0]!r}", line_no)
            if n < 1:
                raise EdgeListParseError(f"node count must be positive, got {n}", line_no)
            continue
        if len(tokens) != 2:
            raise EdgeListParseError(f"expected 'i j', got {line!r}", line_no)
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer endpoint in {line!r}", line_no)
        if i == j:
            raise EdgeListParseError(f"self-loop at node {i}", line_no)
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListParseError(f"endpoint out of range [0, {n}) in {line!r}", line_no)
        edges.add((min(i, j), max(i, j)))
    if n is None:
        raise EdgeListParseError("no node-count line found", 1)
    return Graph(n, frozenset(edges), label=label)


def serialize_edge_list(g: Graph) -> str:
    """Inverse of parse_edge_list: node count line then sorted edge lines."""
    lines = [str(g.n)]
    lines.extend(f"{i} {j}" for i, j in sorted(g.edges))
    return "\n".join(lines) + "\n"


def is_connected(g: Graph) -> bool:
    """True iff the graph has a single connected component."""
    if g.n == 1:
        return True
    adj = g.adjacency()
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == g.n


def neighbors(g: Graph, i: int) -> set[int]:
    """Neighbor set of node i, excluding i itself."""
    if not (0 <= i < g.n):
        raise GraphError(f"node index {i} out of range for n={g.n}")
    return {j if u == i else u for u, j in g.edges if u == i or j == i}


def random_connected_graph(n: int, extra_edge_prob: float, rng: np.random.Generator) -> Graph:
    """Random spanning tree plus independent extra edges; always connected."""
    if n < 2:
        raise GraphError(f"random graph needs n >= 2, got {n}")
    order = rng.permutation(n)
    edges = set()
    for idx in range(1, n):
        parent = order[int(rng.integers(0, idx))]
        child = order[idx]
        edges.add((min(parent, child), max(parent, child)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return Graph(n, frozenset(edges), label="random")
