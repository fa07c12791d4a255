"""Nominal graphs and time-varying edge sequences.

A dynamic network is described by a connected *nominal* graph and a
sequence of per-round edge sets ``E[k]``.  Rounds are grouped into fixed
windows of ``window`` consecutive rounds; every window's union has to
reproduce the nominal edge set (joint connectivity).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Edge = tuple[int, int]


class GraphNotConnected(ValueError):
    """Raised when an operation needs a connected graph."""


def canonical_edge(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError(f"self-loop ({u}, {v}) is not a valid edge")
    return (u, v) if u < v else (v, u)


def _edge_set(edges: Iterable[Sequence[int]], node_count: int) -> frozenset[Edge]:
    out = set()
    for e in edges:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u}, {v}) references a node outside 0..{node_count - 1}")
        out.add(canonical_edge(u, v))
    return frozenset(out)


@dataclass(frozen=True)
class NominalGraph:
    node_count: int
    edges: frozenset[Edge]

    def __init__(self, node_count: int, edges: Iterable[Sequence[int]] = ()):
        if node_count < 1:
            raise ValueError("node_count must be positive")
        object.__setattr__(self, "node_count", int(node_count))
        object.__setattr__(self, "edges", _edge_set(edges, node_count))

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def degree(self, node: int) -> int:
        return sum(1 for e in self.edges if node in e)

    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency()), default=0)

    def is_connected(self) -> bool:
        return len(_bfs_distances(self.adjacency(), 0)) == self.node_count


def _bfs_distances(adj: list[list[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def diameter(g: NominalGraph) -> int:
    """Longest shortest-path length over all node pairs (BFS from every node)."""
    adj = g.adjacency()
    best = 0
    for s in range(g.node_count):
        dist = _bfs_distances(adj, s)
        if len(dist) != g.node_count:
            raise GraphNotConnected(f"graph is not connected: node {s} reaches {len(dist)} of {g.node_count}")
        best = max(best, max(dist.values()))
    return best


def union_graph(edge_sets: Iterable[Iterable[Sequence[int]]], node_count: int) -> NominalGraph:
    edges: set[Edge] = set()
    for es in edge_sets:
        edges |= _edge_set(es, node_count)
    return NominalGraph(node_count, edges)


# ---------------------------------------------------------------------------
# nominal graph generators


def path_graph(n: int) -> NominalGraph:
    return NominalGraph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> NominalGraph:
    if n < 3:
        return path_graph(n)
    return NominalGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> NominalGraph:
    return NominalGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def star_graph(n: int) -> NominalGraph:
    return NominalGraph(n, [(0, i) for i in range(1, n)])


def random_graph_with_diameter(
    n: int,
    target_diameter: int,
    seed: int,
    edge_prob: float | None = None,
    max_attempts: int = 20000,
) -> NominalGraph:
    """Sample G(n, p) graphs until one is connected with the requested diameter.

    When ``edge_prob`` is not given, ``p`` is nudged after every rejected
    sample: up when the graph is disconnected or too wide, down when it is
    too dense.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    if target_diameter < 1 or target_diameter > n - 1:
        raise ValueError(f"diameter {target_diameter} impossible for {n} nodes")
    rng = np.random.default_rng(seed)
    adaptive = edge_prob is None
    p = edge_prob if edge_prob is not None else min(1.0, 2.0 * np.log(n) / n)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(max_attempts):
        mask = rng.random(len(pairs)) < p
        g = NominalGraph(n, [e for e, keep in zip(pairs, mask) if keep])
        if not g.is_connected():
            d = None
        else:
            d = diameter(g)
            if d == target_diameter:
                return g
        if adaptive:
            if d is None or d > target_diameter:
                p = min(1.0, p * 1.03)
            else:
                p = max(1.0 / n, p * 0.97)
    raise RuntimeError(f"no connected graph with diameter {target_diameter} found in {max_attempts} samples")


# ---------------------------------------------------------------------------
# dynamic sequences


@dataclass
class ConnectivityCheck:
    ok: bool
    windows_checked: int
    violating_window: int | None = None
    missing_edges: frozenset[Edge] = frozenset()
    extra_edges: frozenset[Edge] = frozenset()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


class DynamicGraphSequence:
    """Per-round edge sets over a nominal graph, grouped in windows of ``window`` rounds.

    Either holds an explicit list of edge sets or generates each window on
    demand from ``(seed, window index)``, so arbitrarily long runs do not
    need the sequence materialized up front.  ``rounds`` is ``None`` for an
    unbounded generated sequence.
    """

    def __init__(
        self,
        nominal: NominalGraph,
        window: int,
        per_round_edges: Sequence[Iterable[Sequence[int]]] | None = None,
        *,
        rounds: int | None = None,
        extra_activation_prob: float = 0.0,
        seed: int | None = None,
    ):
        if window < 1:
            raise ValueError("window length must be >= 1")
        self.nominal = nominal
        self.window = int(window)
        self.extra_activation_prob = float(extra_activation_prob)
        self.seed = seed
        if per_round_edges is not None:
            self._explicit: list[frozenset[Edge]] | None = [
                _edge_set(es, nominal.node_count) for es in per_round_edges
            ]
            self.rounds: int | None = len(self._explicit)
        else:
            if seed is None:
                raise ValueError("a generated sequence needs a seed")
            self._explicit = None
            self.rounds = rounds
        self._sorted_nominal = sorted(nominal.edges)
        self._window_cache: dict[int, list[frozenset[Edge]]] = {}
        self._adj_cache: dict[int, list[tuple[int, ...]]] = {}

    @property
    def boundary_instants(self) -> range:
        if self.rounds is None:
            raise ValueError("unbounded sequence has infinitely many windows")
        return range(0, self.rounds, self.window)

    def window_count(self) -> int:
        if self.rounds is None:
            raise ValueError("unbounded sequence has infinitely many windows")
        return -(-self.rounds // self.window)

    def _check_round(self, k: int) -> None:
        if k < 0 or (self.rounds is not None and k >= self.rounds):
            raise IndexError(f"round {k} outside sequence of {self.rounds} rounds")

    def _generate_window(self, m: int) -> list[frozenset[Edge]]:
        cached = self._window_cache.get(m)
        if cached is not None:
            return cached
        rng = np.random.default_rng([self.seed, m])
        l, edges = self.window, self._sorted_nominal
        slots = rng.integers(0, l, size=len(edges))
        extras = rng.random((len(edges), l)) < self.extra_activation_prob
        rounds: list[set[Edge]] = [set() for _ in range(l)]
        for i, e in enumerate(edges):
            rounds[slots[i]].add(e)
            for r in np.flatnonzero(extras[i]):
                rounds[r].add(e)
        out = [frozenset(r) for r in rounds]
        if len(self._window_cache) > 64:
            self._window_cache.clear()
        self._window_cache[m] = out
        return out

    def edges(self, k: int) -> frozenset[Edge]:
        self._check_round(k)
        if self._explicit is not None:
            return self._explicit[k]
        return self._generate_window(k // self.window)[k % self.window]

    def adjacency(self, k: int) -> list[tuple[int, ...]]:
        """Sorted neighbor tuples of every node at round ``k``."""
        adj = self._adj_cache.get(k)
        if adj is None:
            lists: list[list[int]] = [[] for _ in range(self.nominal.node_count)]
            for u, v in self.edges(k):
                lists[u].append(v)
                lists[v].append(u)
            adj = [tuple(sorted(a)) for a in lists]
            if len(self._adj_cache) > 256:
                self._adj_cache.clear()
            self._adj_cache[k] = adj
        return adj

    def window_edges(self, m: int) -> list[frozenset[Edge]]:
        start = m * self.window
        stop = start + self.window
        if self.rounds is not None:
            stop = min(stop, self.rounds)
        return [self.edges(k) for k in range(start, stop)]


def neighbors(seq: DynamicGraphSequence, node: int, k: int) -> frozenset[int]:
    if not 0 <= node < seq.nominal.node_count:
        raise IndexError(f"node {node} out of range")
    return frozenset(seq.adjacency(k)[node])


def generate_sequence(
    nominal: NominalGraph,
    l: int,
    rounds: int | None,
    extra_activation_prob: float,
    seed: int,
) -> DynamicGraphSequence:
    """Random sequence whose every window of ``l`` rounds unions to ``nominal``.

    Each nominal edge gets one guaranteed round, drawn uniformly inside each
    window, and is otherwise active independently with probability
    ``extra_activation_prob`` per round.
    """
    if not 0.0 <= extra_activation_prob <= 1.0:
        raise ValueError("extra_activation_prob must lie in [0, 1]")
    if not nominal.is_connected():
        raise GraphNotConnected("nominal graph must be connected")
    return DynamicGraphSequence(
        nominal, l, rounds=rounds, extra_activation_prob=extra_activation_prob, seed=seed
    )


def verify_jointly_connected(seq: DynamicGraphSequence, windows: int | None = None) -> ConnectivityCheck:
    """Check that every window's union equals the (connected) nominal edge set.

    For unbounded sequences ``windows`` says how many leading windows to
    inspect.  A trailing partial window of a finite sequence is ignored
    unless the sequence is shorter than one window.
    """
    if not seq.nominal.is_connected():
        return ConnectivityCheck(False, 0, reason="nominal graph is not connected")
    if windows is None:
        if seq.rounds is None:
            raise ValueError("pass `windows` for an unbounded sequence")
        windows = max(1, seq.rounds // seq.window)
    nominal = seq.nominal.edges
    for m in range(windows):
        union: set[Edge] = set()
        for es in seq.window_edges(m):
            union |= es
        if union != nominal:
            return ConnectivityCheck(
                False,
                m + 1,
                violating_window=m,
                missing_edges=frozenset(nominal - union),
                extra_edges=frozenset(union - nominal),
                reason=f"window {m} (rounds {m * seq.window}..{(m + 1) * seq.window - 1}) union differs from nominal",
            )
    return ConnectivityCheck(True, windows)
