"""Undirected simple graphs and the twelve structural control attributes.

Everything here is pure and deterministic: graphs are immutable, attribute
extraction is a total function on valid graphs, and the random generators are
fully determined by their seed.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ATTRIBUTE_NAMES",
    "AttributeVector",
    "CliqueEnumerationLimit",
    "Graph",
    "average_clustering",
    "average_closeness",
    "barabasi_albert",
    "bfs_canonical_order",
    "compute_attributes",
    "count_local_bridges",
    "count_maximal_cliques",
    "diameter",
    "edge_connectivity",
    "erdos_renyi",
    "graph_diameter",
    "is_isomorphic",
    "node_connectivity",
    "parse_edge_list",
    "read_edge_list",
    "relabel",
    "transitivity",
    "treewidth_min_degree",
]

# Canonical attribute ordering used for vectors, normalization and files.
ATTRIBUTE_NAMES = (
    "nodes",
    "edges",
    "local_bridges",
    "density",
    "edge_connectivity",
    "node_connectivity",
    "max_cliques",
    "diameter",
    "treewidth_min_degree",
    "closeness_centrality",
    "clustering_coefficient",
    "transitivity",
)


class CliqueEnumerationLimit(RuntimeError):
    """Raised when maximal-clique enumeration exceeds its safety cap."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes 0..num_nodes-1.

    Edges are stored as a frozenset of (u, v) pairs with u < v. Construction
    validates the representation: no self loops, no out-of-range endpoints.
    """

    num_nodes: int
    edges: frozenset

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError(f"graph needs at least one node, got {self.num_nodes}")
        if not isinstance(self.edges, frozenset):
            object.__setattr__(self, "edges", frozenset(self.edges))
        for u, v in self.edges:
            if not (0 <= u < v < self.num_nodes):
                raise ValueError(f"invalid edge ({u}, {v}) for {self.num_nodes} nodes")

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph, normalizing each pair to (min, max) and deduplicating."""
        norm = set()
        for u, v in edges:
            if u == v:
                raise ValueError(f"self loop at node {u}")
            norm.add((u, v) if u < v else (v, u))
        return cls(num_nodes, frozenset(norm))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adj(self) -> tuple:
        """Neighbor sets, indexed by node."""
        nbrs = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    @cached_property
    def adj_bits(self) -> tuple:
        """Neighbor sets as integer bitmasks (bit v set iff v is a neighbor)."""
        bits = [0] * self.num_nodes
        for u, v in self.edges:
            bits[u] |= 1 << v
            bits[v] |= 1 << u
        return tuple(bits)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    @cached_property
    def degree_sequence(self) -> tuple:
        """Degrees sorted descending."""
        return tuple(sorted((len(s) for s in self.adj), reverse=True))

    def has_edge(self, u: int, v: int) -> bool:
        return ((u, v) if u < v else (v, u)) in self.edges

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a


@dataclass(frozen=True)
class AttributeVector:
    """The twelve structural control attributes of a graph."""

    nodes: int
    edges: int
    local_bridges: int
    density: float
    edge_connectivity: int
    node_connectivity: int
    max_cliques: int
    diameter: int
    treewidth_min_degree: int
    closeness_centrality: float
    clustering_coefficient: float
    transitivity: float

    def __post_init__(self):
        for name in ATTRIBUTE_NAMES:
            if getattr(self, name) < 0:
                raise ValueError(f"attribute {name} must be >= 0")
        for name in ("clustering_coefficient", "transitivity"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"attribute {name} must lie in [0, 1]")

    def to_array(self) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in ATTRIBUTE_NAMES], dtype=np.float64)

    def to_mapping(self) -> dict:
        return {n: getattr(self, n) for n in ATTRIBUTE_NAMES}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "AttributeVector":
        unknown = set(mapping) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown attribute names: {sorted(unknown)}")
        missing = set(ATTRIBUTE_NAMES) - set(mapping)
        if missing:
            raise ValueError(f"missing attribute names: {sorted(missing)}")
        return cls(**{k: mapping[k] for k in ATTRIBUTE_NAMES})


# ---------------------------------------------------------------------------
# BFS plumbing (bitmask based; graphs are capped at a few dozen nodes)
# ---------------------------------------------------------------------------


def _bfs_distances(g: Graph, src: int) -> list:
    """Hop distances from src; -1 where unreachable."""
    adj = g.adj_bits
    dist = [-1] * g.num_nodes
    dist[src] = 0
    visited = frontier = 1 << src
    d = 0
    while frontier:
        d += 1
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= adj[low.bit_length() - 1]
            f ^= low
        nxt &= ~visited
        visited |= nxt
        f = nxt
        while f:
            low = f & -f
            dist[low.bit_length() - 1] = d
            f ^= low
        frontier = nxt
    return dist


def _component_mask(g: Graph, src: int) -> int:
    """Bitmask of the connected component containing src."""
    adj = g.adj_bits
    visited = frontier = 1 << src
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= adj[low.bit_length() - 1]
            f ^= low
        frontier = nxt & ~visited
        visited |= frontier
    return visited


def is_connected(g: Graph) -> bool:
    full = (1 << g.num_nodes) - 1
    return _component_mask(g, 0) == full


def _components(g: Graph) -> list:
    """Connected components as bitmasks."""
    remaining = (1 << g.num_nodes) - 1
    comps = []
    while remaining:
        src = (remaining & -remaining).bit_length() - 1
        comp = _component_mask(g, src)
        comps.append(comp)
        remaining &= ~comp
    return comps


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


# ---------------------------------------------------------------------------
# Attribute extractors
# ---------------------------------------------------------------------------


def count_local_bridges(g: Graph) -> int:
    """Edges whose endpoints share no neighbor, i.e. edges in no triangle."""
    adj = g.adj_bits
    return sum(1 for u, v in g.edges if adj[u] & adj[v] == 0)


def graph_density(g: Graph) -> float:
    """Edge fraction e / (v * (v - 1)); zero for a single node."""
    n = g.num_nodes
    if n < 2:
        return 0.0
    return g.num_edges / (n * (n - 1))


def _max_flow(adj_caps: dict, s: int, t: int, cutoff: int) -> int:
    """Edmonds-Karp on an integer-capacity digraph; stops early at cutoff."""
    flow = 0
    while flow < cutoff:
        # BFS for an augmenting path
        parent = {s: None}
        q = deque([s])
        while q and t not in parent:
            u = q.popleft()
            for v, cap in adj_caps[u].items():
                if cap > 0 and v not in parent:
                    parent[v] = u
                    q.append(v)
        if t not in parent:
            break
        # trace back, find bottleneck
        path = []
        v = t
        while parent[v] is not None:
            u = parent[v]
            path.append((u, v))
            v = u
        aug = min(adj_caps[u][v] for u, v in path)
        for u, v in path:
            adj_caps[u][v] -= aug
            adj_caps[v][u] = adj_caps[v].get(u, 0) + aug
        flow += aug
    return flow


def _edge_flow_network(g: Graph) -> dict:
    caps = {v: {} for v in range(g.num_nodes)}
    for u, v in g.edges:
        caps[u][v] = 1
        caps[v][u] = 1
    return caps


def edge_connectivity(g: Graph) -> int:
    """Minimum number of edges whose removal disconnects the graph.

    Exact, via unit-capacity max-flow from a fixed source to every other
    node. Zero for disconnected graphs and for the single-node graph.
    """
    n = g.num_nodes
    if n == 1 or not is_connected(g):
        return 0
    best = min(len(s) for s in g.adj)  # upper bound: isolate a min-degree node
    for t in range(1, n):
        if best == 0:
            break
        caps = _edge_flow_network(g)
        best = min(best, _max_flow(caps, 0, t, best))
    return best


def node_connectivity(g: Graph) -> int:
    """Minimum number of nodes whose removal disconnects the graph.

    Exact, via node-split max-flow over the Even-Tarjan pair set. Complete
    graphs give n - 1 by convention; disconnected graphs give 0.
    """
    n = g.num_nodes
    if n == 1 or not is_connected(g):
        return 0
    if g.num_edges == n * (n - 1) // 2:
        return n - 1

    inf = n + 1

    def vertex_flow(s: int, t: int, cutoff: int) -> int:
        # split v into v_in = 2v, v_out = 2v+1
        caps = {i: {} for i in range(2 * n)}
        for v in range(n):
            caps[2 * v][2 * v + 1] = inf if v in (s, t) else 1
            caps[2 * v + 1][2 * v] = 0
        for u, v in g.edges:
            caps[2 * u + 1][2 * v] = inf
            caps[2 * v + 1][2 * u] = inf
        return _max_flow(caps, 2 * s + 1, 2 * t, cutoff)

    # Even-Tarjan: flows from a min-degree vertex to all non-neighbors, plus
    # flows between non-adjacent pairs of its neighbors, cover some min cut.
    v1 = min(range(n), key=lambda v: (len(g.adj[v]), v))
    best = len(g.adj[v1])
    for t in range(n):
        if t != v1 and t not in g.adj[v1]:
            best = min(best, vertex_flow(v1, t, best))
    nbrs = sorted(g.adj[v1])
    for i, s in enumerate(nbrs):
        for t in nbrs[i + 1 :]:
            if t not in g.adj[s]:
                best = min(best, vertex_flow(s, t, best))
    return best


def count_maximal_cliques(g: Graph, cap: int = 10**6) -> int:
    """Number of maximal cliques, via Bron-Kerbosch with pivoting.

    Raises CliqueEnumerationLimit if more than `cap` cliques are found.
    """
    adj = g.adj_bits
    count = 0
    full = (1 << g.num_nodes) - 1

    def expand(p: int, x: int):
        nonlocal count
        if p == 0 and x == 0:
            count += 1
            if count > cap:
                raise CliqueEnumerationLimit(f"more than {cap} maximal cliques")
            return
        # pivot: vertex of P|X with most neighbors inside P
        pivot, best = -1, -1
        for u in _bits(p | x):
            k = bin(adj[u] & p).count("1")
            if k > best:
                pivot, best = u, k
        for v in _bits(p & ~adj[pivot]):
            bit = 1 << v
            expand(p & adj[v], x & adj[v])
            p &= ~bit
            x |= bit

    expand(full, 0)
    return count


def graph_diameter(g: Graph) -> int:
    """Longest shortest path; for disconnected graphs, the max over components."""
    best = 0
    for v in range(g.num_nodes):
        best = max(best, max(_bfs_distances(g, v)))
    return best


diameter = graph_diameter


def treewidth_min_degree(g: Graph) -> int:
    """Width of the min-degree elimination ordering (treewidth upper bound).

    Repeatedly eliminates a minimum-degree vertex (ties broken toward the
    lowest id), turning its neighborhood into a clique; the width is the
    largest degree seen at elimination time. Tie-breaking makes this the
    one attribute whose value can shift under node relabeling.
    """
    adj = {v: set(g.adj[v]) for v in range(g.num_nodes)}
    width = 0
    while adj:
        v = min(adj, key=lambda u: (len(adj[u]), u))
        nbrs = adj.pop(v)
        width = max(width, len(nbrs))
        for u in nbrs:
            adj[u].discard(v)
        for u in nbrs:
            for w in nbrs:
                if u < w:
                    adj[u].add(w)
                    adj[w].add(u)
    return width


def average_closeness(g: Graph) -> float:
    """Mean reciprocal closeness: per node, (reachable - 1) / sum of distances
    within its component; isolated nodes contribute zero.

    Averaged with an exactly-rounded sum so the value is independent of
    node labeling.
    """
    n = g.num_nodes
    values = []
    for v in range(n):
        dist = _bfs_distances(g, v)
        reached = [d for d in dist if d > 0]
        if reached:
            values.append(len(reached) / sum(reached))
    return math.fsum(values) / n


def average_clustering(g: Graph) -> float:
    """Mean over nodes of the fraction of connected neighbor pairs."""
    adj = g.adj_bits
    n = g.num_nodes
    values = []
    for v in range(n):
        nb = adj[v]
        k = bin(nb).count("1")
        if k < 2:
            continue
        links = sum(bin(adj[u] & nb).count("1") for u in _bits(nb)) // 2
        values.append(2.0 * links / (k * (k - 1)))
    return math.fsum(values) / n


def transitivity(g: Graph) -> float:
    """3 * triangles / triads, where a triad is a length-two path."""
    adj = g.adj_bits
    tri3 = 0  # 3 * triangle count: each triangle seen once per corner
    triads = 0
    for v in range(g.num_nodes):
        nb = adj[v]
        k = bin(nb).count("1")
        triads += k * (k - 1) // 2
        tri3 += sum(bin(adj[u] & nb).count("1") for u in _bits(nb)) // 2
    if triads == 0:
        return 0.0
    return tri3 / triads


def compute_attributes(g: Graph) -> AttributeVector:
    """Extract all twelve control attributes of a graph (deterministic)."""
    return AttributeVector(
        nodes=g.num_nodes,
        edges=g.num_edges,
        local_bridges=count_local_bridges(g),
        density=graph_density(g),
        edge_connectivity=edge_connectivity(g),
        node_connectivity=node_connectivity(g),
        max_cliques=count_maximal_cliques(g),
        diameter=graph_diameter(g),
        treewidth_min_degree=treewidth_min_degree(g),
        closeness_centrality=average_closeness(g),
        clustering_coefficient=average_clustering(g),
        transitivity=transitivity(g),
    )


# ---------------------------------------------------------------------------
# Canonical ordering, relabeling, generators, isomorphism
# ---------------------------------------------------------------------------


def bfs_canonical_order(g: Graph) -> list:
    """BFS traversal order rooted at the max-degree node (lowest id on ties).

    Neighbors are visited in ascending id. Nodes unreachable from the root
    are handled per component, each rooted at its own max-degree node, with
    components appended in ascending order of their root ids.
    """
    roots = []
    for comp in _components(g):
        members = list(_bits(comp))
        root = min(members, key=lambda v: (-len(g.adj[v]), v))
        roots.append(root)
    order = []
    seen = set()
    for root in sorted(roots):
        q = deque([root])
        seen.add(root)
        while q:
            v = q.popleft()
            order.append(v)
            for u in sorted(g.adj[v]):
                if u not in seen:
                    seen.add(u)
                    q.append(u)
    return order


def relabel(g: Graph, order: Sequence[int]) -> Graph:
    """Apply a node permutation: the node at order[i] becomes node i."""
    if sorted(order) != list(range(g.num_nodes)):
        raise ValueError("order must be a permutation of all node ids")
    pos = {v: i for i, v in enumerate(order)}
    return Graph.from_edges(g.num_nodes, ((pos[u], pos[v]) for u, v in g.edges))


def barabasi_albert(n: int, m: int, seed: int) -> Graph:
    """Preferential-attachment graph: m initial isolated nodes, then each new
    node attaches to m distinct existing nodes sampled proportionally to
    degree (uniformly while all degrees are zero). Edge count is m * (n - m).
    """
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    degrees = [0] * n
    edges = []
    for new in range(m, n):
        targets = set()
        while len(targets) < m:
            pool = [v for v in range(new) if v not in targets]
            weights = np.array([degrees[v] for v in pool], dtype=np.float64)
            if weights.sum() == 0:
                pick = pool[int(rng.integers(len(pool)))]
            else:
                pick = pool[int(rng.choice(len(pool), p=weights / weights.sum()))]
            targets.add(pick)
        for t in targets:
            edges.append((t, new))
            degrees[t] += 1
            degrees[new] += 1
    return Graph.from_edges(n, edges)


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """Each unordered pair is an edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    rng = np.random.default_rng(seed)
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def _neighbor_degree_key(g: Graph, v: int) -> tuple:
    return tuple(sorted(len(g.adj[u]) for u in g.adj[v]))


def is_isomorphic(a: Graph, b: Graph) -> bool:
    """Exact isomorphism test: degree-based prefilter, then backtracking."""
    if a.num_nodes != b.num_nodes or a.num_edges != b.num_edges:
        return False
    if a.degree_sequence != b.degree_sequence:
        return False
    n = a.num_nodes
    keys_a = [(_neighbor_degree_key(a, v), len(a.adj[v])) for v in range(n)]
    keys_b = [(_neighbor_degree_key(b, v), len(b.adj[v])) for v in range(n)]
    if sorted(keys_a) != sorted(keys_b):
        return False

    # assign high-degree, tightly-constrained nodes first
    order = sorted(range(n), key=lambda v: (-len(a.adj[v]), v))
    candidates = [[u for u in range(n) if keys_b[u] == keys_a[v]] for v in range(n)]
    mapping = [-1] * n
    used = [False] * n

    def backtrack(i: int) -> bool:
        if i == n:
            return True
        v = order[i]
        for u in candidates[v]:
            if used[u]:
                continue
            ok = True
            for w in a.adj[v]:
                mw = mapping[w]
                if mw != -1 and mw not in b.adj[u]:
                    ok = False
                    break
            if ok:
                # non-edges must map to non-edges; check assigned non-neighbors
                for j in range(i):
                    w = order[j]
                    if w not in a.adj[v] and mapping[w] in b.adj[u]:
                        ok = False
                        break
            if ok:
                mapping[v] = u
                used[u] = True
                if backtrack(i + 1):
                    return True
                mapping[v] = -1
                used[u] = False
        return False

    return backtrack(0)


# ---------------------------------------------------------------------------
# Edge-list ingestion
# ---------------------------------------------------------------------------


def parse_edge_list(text: str) -> Graph:
    """Parse "u v" lines (whitespace separated, 0-based ids, '#' comments)."""
    edges = []
    max_id = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {line!r}")
        u, v = int(parts[0]), int(parts[1])
        if u < 0 or v < 0:
            raise ValueError(f"line {lineno}: negative node id")
        max_id = max(max_id, u, v)
        edges.append((u, v))
    return Graph.from_edges(max_id + 1, edges)


def read_edge_list(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh.read())
