"""Egocentric betweenness centrality and private top-k node selection.

Undirected simple graphs under edge-level privacy: two graphs are neighbors
when they differ in one edge flip.  The ego betweenness of a node c sums,
over pairs of its neighbors, the fraction of shortest paths between them
(inside the subgraph induced by c and its neighborhood) that pass through c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

from .core import (
    BudgetAccountant,
    InvalidInputError,
    SearchBudgetError,
    SelectionProblem,
    SensitivityFunction,
)
from . import mechanisms
from .sensitivity import NeighborEnumerator, bound_sensitivity


class EdgeGraph:
    """Immutable undirected graph with stable node order and bitset adjacency."""

    __slots__ = ("nodes", "_index", "_adj", "_edges", "_max_degree_bound")

    def __init__(
        self,
        nodes: Sequence[Hashable],
        edges: Iterable[tuple],
        max_degree_bound: int | None = None,
    ):
        self.nodes = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise InvalidInputError("duplicate node identifiers")
        self._index = {v: i for i, v in enumerate(self.nodes)}
        adj = [0] * len(self.nodes)
        edge_set = set()
        for u, v in edges:
            if u == v:
                raise InvalidInputError(f"self-loop at {u!r}")
            iu, iv = self._index[u], self._index[v]
            adj[iu] |= 1 << iv
            adj[iv] |= 1 << iu
            edge_set.add((min(iu, iv), max(iu, iv)))
        self._adj = tuple(adj)
        self._edges = frozenset(edge_set)
        self._max_degree_bound = max_degree_bound

    # -- basic accessors ---------------------------------------------------

    def __contains__(self, node) -> bool:
        return node in self._index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EdgeGraph)
            and self.nodes == other.nodes
            and self._edges == other._edges
        )

    def __hash__(self):
        return hash((self.nodes, self._edges))

    def num_nodes(self) -> int:
        return len(self.nodes)

    def num_edges(self) -> int:
        return len(self._edges)

    def edges(self) -> list[tuple]:
        return [(self.nodes[i], self.nodes[j]) for i, j in sorted(self._edges)]

    def degree(self, node) -> int:
        return self._adj[self._index[node]].bit_count()

    def has_edge(self, u, v) -> bool:
        return bool(self._adj[self._index[u]] >> self._index[v] & 1)

    def max_degree(self) -> int:
        """Configured public max-degree bound, or the observed maximum."""
        if self._max_degree_bound is not None:
            return self._max_degree_bound
        return max((a.bit_count() for a in self._adj), default=0)

    def flip_edge(self, u, v) -> "EdgeGraph":
        """Graph at edge distance one: (u, v) removed if present, else added."""
        if u == v:
            raise InvalidInputError("cannot flip a self-loop")
        iu, iv = self._index[u], self._index[v]
        pair = (min(iu, iv), max(iu, iv))
        edge_set = set(self._edges)
        if pair in edge_set:
            edge_set.remove(pair)
        else:
            edge_set.add(pair)
        adj = [0] * len(self.nodes)
        for i, j in edge_set:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        out = EdgeGraph.__new__(EdgeGraph)
        EdgeGraph._init_raw(out, self.nodes, self._index, tuple(adj),
                            frozenset(edge_set), self._max_degree_bound)
        return out

    @staticmethod
    def _init_raw(obj, nodes, index, adj, edges, bound):
        obj.nodes = nodes
        obj._index = index
        obj._adj = adj
        obj._edges = edges
        obj._max_degree_bound = bound

    def node_pairs(self) -> int:
        """Number of unordered node pairs; the maximum edge-flip distance."""
        m = len(self.nodes)
        return m * (m - 1) // 2


def ebc(graph: EdgeGraph, c) -> float:
    """Ego betweenness of ``c`` via neighbor-set intersections.

    Adjacent neighbor pairs contribute nothing (their unique shortest path
    is the direct edge).  A non-adjacent pair's shortest paths inside the
    ego subgraph all have length two, one per common neighbor there, and
    exactly one of those (the one through c) counts.
    """
    if c not in graph:
        raise InvalidInputError(f"unknown node {c!r}")
    ci = graph._index[c]
    adj = graph._adj
    nbr_mask = adj[ci]
    ego_mask = nbr_mask | (1 << ci)
    members = [i for i in range(len(graph.nodes)) if nbr_mask >> i & 1]
    total = 0.0
    for a in range(len(members)):
        ia = members[a]
        for b in range(a + 1, len(members)):
            ib = members[b]
            if adj[ia] >> ib & 1:
                continue
            q = (adj[ia] & adj[ib] & ego_mask).bit_count()
            total += 1.0 / q
    return total


def ebc_oracle(graph: EdgeGraph, c, max_neighborhood: int = 64) -> float:
    """Independent EBC evaluation by explicit geodesic counting.

    Runs BFS with path counting on the induced ego subgraph and sums
    p_uv / q_uv over neighbor pairs, where q counts all geodesics between
    u and v and p those passing through c.
    """
    if c not in graph:
        raise InvalidInputError(f"unknown node {c!r}")
    neighbors = [v for v in graph.nodes if v != c and graph.has_edge(c, v)]
    if len(neighbors) > max_neighborhood:
        raise SearchBudgetError(
            f"neighborhood of {c!r} exceeds oracle cap {max_neighborhood}"
        )
    members = neighbors + [c]
    member_ix = {v: i for i, v in enumerate(members)}
    adj = [
        [w for w in members if w != v and graph.has_edge(v, w)] for v in members
    ]

    def bfs(src_ix):
        dist = [math.inf] * len(members)
        paths = [0] * len(members)
        dist[src_ix] = 0
        paths[src_ix] = 1
        frontier = [src_ix]
        while frontier:
            nxt = []
            for v in frontier:
                for w in adj[member_ix[members[v]]]:
                    wi = member_ix[w]
                    if dist[wi] == math.inf:
                        dist[wi] = dist[v] + 1
                        paths[wi] = paths[v]
                        nxt.append(wi)
                    elif dist[wi] == dist[v] + 1:
                        paths[wi] += paths[v]
            frontier = nxt
        return dist, paths

    tables = [bfs(i) for i in range(len(members))]
    c_ix = member_ix[c]
    total = 0.0
    for a in range(len(neighbors)):
        dist_a, paths_a = tables[a]
        for b in range(a + 1, len(neighbors)):
            q = paths_a[b]
            if q == 0:
                continue
            dist_c, paths_c = tables[c_ix]
            if dist_a[c_ix] + dist_c[b] == dist_a[b]:
                p = paths_a[c_ix] * paths_c[b]
            else:
                p = 0
            total += p / q
    return total


def ebc_scores(graph: EdgeGraph) -> dict:
    return {v: ebc(graph, v) for v in graph.nodes}


def global_sensitivity_ebc(graph: EdgeGraph) -> float:
    """Worst-case EBC change from one edge flip:
    ``max(D * (D - 1) / 4, D)`` with D the (public) max degree."""
    d = graph.max_degree()
    return max(d * (d - 1) / 4.0, float(d))


def delta_ebc_value(graph: EdgeGraph, t: int, v) -> float:
    """Degree-based sensitivity bound ``max((d+t)(d+t-1)/4, d+t)``."""
    d = graph.degree(v) + t
    return max(d * (d - 1) / 4.0, float(d))


def delta_ebc(graph: EdgeGraph | None = None) -> SensitivityFunction:
    """The degree-based EBC sensitivity function (admissible, unbounded,
    no declared monotonicity; correlation with EBC is checked empirically)."""
    return SensitivityFunction(
        eval=lambda g, t, v: delta_ebc_value(g, t, v),
        declared_admissible=True,
        declared_bounded=False,
        monotonicity="none",
        name="delta_ebc",
    )


def flat_delta_ebc() -> SensitivityFunction:
    """Flattened (node-independent) variant of the degree-based bound."""
    return SensitivityFunction(
        eval=lambda g, t, v: max(
            (g.max_degree() + t) * (g.max_degree() + t - 1) / 4.0,
            float(g.max_degree() + t),
        ),
        declared_admissible=True,
        declared_bounded=False,
        monotonicity="flat",
        name="flat_delta_ebc",
    )


def edge_flip_enumerator() -> NeighborEnumerator:
    """All graphs one edge flip away; the natural edge-privacy neighborhood."""

    def neighbors(g: EdgeGraph):
        for a in range(len(g.nodes)):
            for b in range(a + 1, len(g.nodes)):
                yield g.flip_edge(g.nodes[a], g.nodes[b])

    return NeighborEnumerator(neighbors=neighbors, key=lambda g: g._edges)


def ebc_utility() -> Callable[[EdgeGraph, Hashable], float]:
    """EBC as a utility function with per-graph score memoization, so brute
    searches touching many neighbor graphs stay affordable."""
    cache: dict[EdgeGraph, dict] = {}

    def utility(g: EdgeGraph, v) -> float:
        scores = cache.get(g)
        if scores is None:
            scores = {}
            cache[g] = scores
        value = scores.get(v)
        if value is None:
            value = ebc(g, v)
            scores[v] = value
        return value

    return utility


def ebc_problem(
    graph: EdgeGraph,
    candidates: Sequence | None = None,
    global_sensitivity: float | None = None,
) -> SelectionProblem:
    """Selection problem 'which node has the top EBC score'.

    The database size is the number of unordered node pairs, the largest
    possible edge-flip distance between graphs on the same vertex set.
    """
    return SelectionProblem(
        database=graph,
        candidates=tuple(candidates if candidates is not None else graph.nodes),
        utility=ebc_utility(),
        global_sensitivity=(
            global_sensitivity
            if global_sensitivity is not None
            else global_sensitivity_ebc(graph)
        ),
        database_size=max(graph.node_pairs(), 1),
    )


@dataclass(frozen=True)
class TopKResult:
    chosen: tuple
    per_iteration_epsilon: float
    accountant_scope: Hashable


def priv_topk(
    graph: EdgeGraph,
    epsilon: float,
    k: int,
    mechanism: str,
    rng,
    accountant: BudgetAccountant | None = None,
    delta: SensitivityFunction | None = None,
    global_sensitivity: float | None = None,
    scope: Hashable = "priv_topk",
) -> TopKResult:
    """Pick k nodes by EBC with k sequential mechanism calls at eps/k each.

    Every iteration selects over the not-yet-chosen nodes, so the result is
    duplicate free.  The default sensitivity function is the bounded
    degree-based delta for the shifted mechanism and its flattened version
    for plain local dampening; callers may substitute their own.
    """
    if not (epsilon > 0):
        raise InvalidInputError("epsilon must be positive")
    if k < 1 or k > graph.num_nodes():
        raise InvalidInputError("k must be in [1, number of nodes]")
    if mechanism not in mechanisms.MECHANISMS:
        raise InvalidInputError(f"unknown mechanism {mechanism!r}")
    base = ebc_problem(graph, global_sensitivity=global_sensitivity)
    if delta is None and mechanism in ("ld", "sld"):
        raw = delta_ebc() if mechanism == "sld" else flat_delta_ebc()
        delta = bound_sensitivity(raw, base.global_sensitivity, base.database_size)
    if accountant is None:
        accountant = BudgetAccountant()
    accountant.open_scope(scope, "sequential")
    eps_i = epsilon / k
    chosen: list = []
    iter_rngs = rng.spawn(k)
    for j in range(k):
        remaining = tuple(v for v in base.candidates if v not in chosen)
        problem = SelectionProblem(
            database=graph,
            candidates=remaining,
            utility=base.utility,
            global_sensitivity=base.global_sensitivity,
            database_size=base.database_size,
        )
        picked, _ = mechanisms.select(
            mechanism, problem, eps_i, iter_rngs[j], delta=delta
        )
        accountant.account(scope, eps_i)
        chosen.append(picked)
    return TopKResult(
        chosen=tuple(chosen),
        per_iteration_epsilon=eps_i,
        accountant_scope=scope,
    )


def true_topk(graph: EdgeGraph, k: int) -> tuple:
    """Exact EBC top-k with deterministic tie-break by node order."""
    scores = ebc_scores(graph)
    order = sorted(
        range(len(graph.nodes)), key=lambda i: (-scores[graph.nodes[i]], i)
    )
    return tuple(graph.nodes[i] for i in order[:k])


def topk_accuracy(result: TopKResult, graph: EdgeGraph, k: int) -> float:
    """Fraction of the retrieved top-k that is in the exact top-k."""
    truth = set(true_topk(graph, k))
    return len(truth.intersection(result.chosen)) / k


def parse_edge_list(lines: Iterable[str]) -> tuple[EdgeGraph, dict]:
    """Parse whitespace-separated "u v" lines into a graph.

    Lines starting with '#' are comments.  Duplicate undirected edges and
    self-loops are dropped and counted in the ingestion report.
    """
    nodes: list = []
    seen_nodes = set()
    edges: list[tuple] = []
    seen_edges = set()
    report = {"edges_kept": 0, "duplicates_dropped": 0, "self_loops_dropped": 0,
              "comment_lines": 0}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            report["comment_lines"] += 1
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(
                f"line {line_no}: expected 'u v', got {raw.rstrip()!r}"
            )
        u, v = parts
        for w in (u, v):
            if w not in seen_nodes:
                seen_nodes.add(w)
                nodes.append(w)
        if u == v:
            report["self_loops_dropped"] += 1
            continue
        key = (min(u, v), max(u, v))
        if key in seen_edges:
            report["duplicates_dropped"] += 1
            continue
        seen_edges.add(key)
        edges.append((u, v))
    report["edges_kept"] = len(edges)
    return EdgeGraph(nodes, edges), report


def load_edge_list(path) -> tuple[EdgeGraph, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh)
