"""Interference graphs: construction, closed neighbourhoods, structural checks.

Nodes are the integers ``0..n-1``. Graphs are immutable once built and are
always connected; disconnected inputs are rejected.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ConnectivityError


@dataclass(frozen=True)
class InterferenceGraph:
    """Undirected connected interference graph.

    ``adjacency[i]`` is the sorted tuple of neighbours of ``i``;
    ``closed_neighborhoods[i]`` additionally contains ``i`` itself.
    """

    node_count: int
    adjacency: tuple[tuple[int, ...], ...]
    closed_neighborhoods: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.node_count < 1:
            raise ConfigError(f"node_count must be positive, got {self.node_count}")
        if len(self.adjacency) != self.node_count:
            raise ConfigError("adjacency length does not match node_count")
        for i, nbrs in enumerate(self.adjacency):
            if i in nbrs:
                raise ConfigError(f"self-loop at node {i}")
            for j in nbrs:
                if i not in self.adjacency[j]:
                    raise ConfigError(f"asymmetric adjacency between {i} and {j}")
        closed = tuple(tuple(sorted((*nbrs, i))) for i, nbrs in enumerate(self.adjacency))
        object.__setattr__(self, "closed_neighborhoods", closed)
        if not _is_connected(self.adjacency):
            raise ConnectivityError("interference graph must be connected")

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @cached_property
    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for i, nbrs in enumerate(self.adjacency):
            a[i, list(nbrs)] = 1.0
        return a

    @cached_property
    def padded_neighbors(self) -> np.ndarray:
        """Neighbour index matrix padded with ``node_count`` (a sentinel slot)."""
        width = max(1, int(self.degrees.max()))
        out = np.full((self.node_count, width), self.node_count, dtype=np.int64)
        for i, nbrs in enumerate(self.adjacency):
            out[i, : len(nbrs)] = nbrs
        return out

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, nbrs in enumerate(self.adjacency) for j in nbrs if i < j]

    def is_independent_set(self, nodes: Iterable[int]) -> bool:
        chosen = set(nodes)
        return all(not (chosen & set(self.adjacency[i])) for i in chosen)


def _is_connected(adjacency: Sequence[Sequence[int]]) -> bool:
    n = len(adjacency)
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adjacency[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def build_from_edges(n: int, edges: Iterable[Sequence[int]]) -> InterferenceGraph:
    """Build a graph from an edge list; duplicates are merged."""
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for edge in edges:
        if len(edge) != 2:
            raise ConfigError(f"edge must be a pair, got {edge!r}")
        i, j = int(edge[0]), int(edge[1])
        if not (0 <= i < n and 0 <= j < n):
            raise ConfigError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j:
            raise ConfigError(f"self-loop at node {i}")
        nbrs[i].add(j)
        nbrs[j].add(i)
    return InterferenceGraph(n, tuple(tuple(sorted(s)) for s in nbrs))


def build_circle(n: int) -> InterferenceGraph:
    if n < 3:
        raise ConfigError(f"circle needs n >= 3, got {n}")
    return build_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def build_torus(rows: int, cols: int) -> InterferenceGraph:
    """4-regular wrap-around grid; node ``(r, c)`` has index ``r * cols + c``."""
    if rows < 3 or cols < 3:
        raise ConfigError(f"torus needs rows, cols >= 3, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            edges.append((i, r * cols + (c + 1) % cols))
            edges.append((i, ((r + 1) % rows) * cols + c))
    return build_from_edges(rows * cols, edges)


def build_random_regular(n: int, degree: int, seed: int, max_tries: int = 1000) -> InterferenceGraph:
    """Uniform-ish random ``degree``-regular connected graph via the pairing model.

    Pairings containing self-loops or multi-edges are rejected whole, as are
    disconnected outcomes.
    """
    if not 1 <= degree < n:
        raise ConfigError(f"need 1 <= degree < n, got degree={degree}, n={n}")
    if (n * degree) % 2:
        raise ConfigError("n * degree must be even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(max_tries):
        perm = rng.permutation(stubs).reshape(-1, 2)
        a, b = perm.min(axis=1), perm.max(axis=1)
        if np.any(a == b):
            continue
        pairs = set(zip(a.tolist(), b.tolist()))
        if len(pairs) != len(a):
            continue
        try:
            return build_from_edges(n, pairs)
        except ConnectivityError:
            continue
    raise ConfigError(f"no simple connected {degree}-regular graph on {n} nodes after {max_tries} tries")


def regularity_degree(g: InterferenceGraph) -> int | None:
    """Common node degree ``m - 1``, or ``None`` when degrees differ."""
    deg = g.degrees
    return int(deg[0]) if np.all(deg == deg[0]) else None


def neighborhood_size(g: InterferenceGraph) -> int:
    """Closed-neighbourhood size ``m`` of a regular graph."""
    d = regularity_degree(g)
    if d is None:
        raise ConfigError("graph is not regular")
    return d + 1


def is_circle(g: InterferenceGraph) -> bool:
    """True when ``g`` is the cycle ``0-1-...-(n-1)-0`` in index order."""
    n = g.node_count
    return n >= 3 and all(
        g.adjacency[i] == tuple(sorted({(i - 1) % n, (i + 1) % n})) for i in range(n)
    )


def graph_from_spec(spec: dict) -> InterferenceGraph:
    """Build a graph from its JSON description (``kind`` plus parameters)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"graph spec must be an object with a 'kind' field, got {spec!r}")
    kind = spec["kind"]
    allowed = {
        "circle": {"kind", "n"},
        "torus": {"kind", "rows", "cols"},
        "edges": {"kind", "n", "edges"},
        "random_regular": {"kind", "n", "degree", "seed"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown graph kind {kind!r}")
    missing = allowed[kind] - spec.keys()
    extra = spec.keys() - allowed[kind]
    if missing or extra:
        raise ConfigError(f"graph spec {kind!r}: missing {sorted(missing)}, unknown {sorted(extra)}")
    for key in allowed[kind] - {"kind", "edges"}:
        if not isinstance(spec[key], int) or isinstance(spec[key], bool):
            raise ConfigError(f"graph spec field {key!r} must be an integer")
    if kind == "circle":
        return build_circle(spec["n"])
    if kind == "torus":
        return build_torus(spec["rows"], spec["cols"])
    if kind == "edges":
        return build_from_edges(spec["n"], spec["edges"])
    return build_random_regular(spec["n"], spec["degree"], spec["seed"])
