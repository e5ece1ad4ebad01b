"""Best-first k-flexible-aggregate search over the metric tree.

The traversal keeps a priority queue of routing entries keyed by their
sphere-bound aggregate distance and a running top-k of objects. Children of a
popped node are filtered twice: first by a bound computed purely from stored
parent distances (zero oracle calls), then by the sphere bound (one oracle
call per query object). Both bounds never exceed the true aggregate distance
of any object below the entry, so nothing that belongs in the top-k is ever
dropped; the kth result distance only shrinks, and every comparison is
inclusive, so ties are explored rather than cut.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from roadfann.agg import AggregateKind, flexible_agg, flexible_agg_rows, subset_size
from roadfann._kernels import INF64
from roadfann.mtree import MetricTree, Node
from roadfann.oracle import DistanceOracle

INF = int(INF64)


@dataclass
class QuerySpec:
    """Query vertices, flexibility, result count, aggregate, POI membership.

    poi_filter restricts which tree objects are eligible results: None means
    every object, a set holds eligible vertex ids, a bool array is indexed by
    vertex id.
    """

    Q: np.ndarray
    phi: float
    k: int = 1
    kind: AggregateKind = AggregateKind.MAX
    poi_filter: set | np.ndarray | None = None

    def __post_init__(self) -> None:
        self.Q = np.asarray(self.Q, dtype=np.int64)
        if self.Q.shape[0] == 0:
            raise ValueError("query set is empty")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def m_queries(self) -> int:
        return int(self.Q.shape[0])

    @property
    def m(self) -> int:
        return subset_size(self.phi, self.m_queries)


@dataclass
class Candidate:
    oid: int
    g_phi: int
    subset: list[int]


@dataclass
class ResultSet:
    items: list[Candidate]
    k: int

    @property
    def kth_bound(self) -> int:
        return self.items[self.k - 1].g_phi if len(self.items) >= self.k else INF

    def g_values(self) -> list[int]:
        return [c.g_phi for c in self.items]

    def oids(self) -> list[int]:
        return [c.oid for c in self.items]


@dataclass
class SearchStats:
    node_accesses: int = 0
    oracle_calls: int = 0
    heap_pushes: int = 0
    entries_pruned_cheap: int = 0
    entries_pruned_sphere: int = 0
    children_examined: int = 0
    objects_examined: int = 0
    objects_pruned_cheap: int = 0
    objects_full_eval: int = 0
    popped_stale: int = 0
    wall_time: float = 0.0
    # populated only when record_prunes=True
    prunes: list | None = field(default=None, repr=False)
    bound_trace: list | None = field(default=None, repr=False)


@dataclass
class PruneRecord:
    """Replay record for no-false-drop audits."""

    kind: str  # "entry-cheap" | "entry-sphere" | "object-cheap" | "pop-stale"
    node: Node | None
    entry_index: int
    oid: int
    bound_at_prune: int


def pop_skip_check(key_g_phi: int, bound: int) -> bool:
    """True when a popped entry can be discarded: its key exceeds the bound.

    Keys are lower bounds and the bound only shrinks after a push, so a
    popped key above the current bound can no longer lead to a result; ties
    are kept.
    """
    return key_g_phi > bound


class _TopK:
    """k best (g_phi, oid) pairs, ordered ascending, distinct oids."""

    def __init__(self, k: int) -> None:
        self.k = k
        self.items: list[tuple[int, int, np.ndarray]] = []
        self._oids: set[int] = set()

    @property
    def bound(self) -> int:
        return self.items[-1][0] if len(self.items) == self.k else INF

    def offer(self, g: int, oid: int, dvec: np.ndarray) -> None:
        if oid in self._oids:
            return
        if len(self.items) < self.k:
            self.items.append((g, oid, dvec))
            self.items.sort(key=lambda t: (t[0], t[1]))
            self._oids.add(oid)
            return
        last = self.items[-1]
        if (g, oid) < (last[0], last[1]):
            self._oids.discard(last[1])
            self.items[-1] = (g, oid, dvec)
            self.items.sort(key=lambda t: (t[0], t[1]))
            self._oids.add(oid)


def _filter_mask(oids: np.ndarray, poi_filter) -> np.ndarray | None:
    if poi_filter is None:
        return None
    if isinstance(poi_filter, np.ndarray):
        return poi_filter[oids]
    return np.array([int(o) in poi_filter for o in oids], dtype=bool)


def _count_pois(tree: MetricTree, poi_filter) -> int:
    if poi_filter is None:
        return tree.distinct_object_count or tree.object_count
    parts = []
    for node in tree.nodes():
        if node.is_leaf:
            mask = _filter_mask(node.oids, poi_filter)
            parts.append(node.oids[mask])
    if not parts:
        return 0
    return int(np.unique(np.concatenate(parts)).shape[0])


def fann_search(
    tree: MetricTree,
    oracle: DistanceOracle,
    qs: QuerySpec,
    skip_stale: bool = True,
    record_prunes: bool = False,
) -> tuple[ResultSet, SearchStats]:
    """Exact top-k flexible-aggregate nearest neighbors over the tree's POIs.

    Returns results ordered by (g_phi, oid) plus traversal statistics. With
    record_prunes=True the stats gain `prunes` (every discarded entry/object
    with the bound at that moment) and `bound_trace` for audits.
    """
    available = _count_pois(tree, qs.poi_filter)
    if available < qs.k:
        raise ValueError(f"only {available} POIs available but k={qs.k}")

    Q = qs.Q
    m = qs.m
    kind = qs.kind
    stats = SearchStats()
    calls_before = oracle.call_counter
    t0 = time.perf_counter()
    ctx = oracle.query_context(Q)
    topk = _TopK(qs.k)
    prunes: list[PruneRecord] = []
    bound_trace: list[int] = []
    counter = 0
    heap: list = []

    def process_leaf(node: Node, parent_to_q: np.ndarray) -> None:
        oids = node.oids
        pdists = node.pdists
        mask = _filter_mask(oids, qs.poi_filter)
        if mask is not None:
            oids = oids[mask]
            pdists = pdists[mask]
        if oids.shape[0] == 0:
            return
        stats.objects_examined += int(oids.shape[0])
        cheap = np.abs(parent_to_q[None, :] - pdists[:, None])
        cheap_vals = flexible_agg_rows(cheap, kind, m)
        bound = topk.bound
        pass_mask = cheap_vals <= bound
        for i in np.flatnonzero(~pass_mask):
            stats.objects_pruned_cheap += 1
            if record_prunes:
                prunes.append(
                    PruneRecord("object-cheap", node, int(i), int(oids[i]), bound)
                )
        survivors = np.flatnonzero(pass_mask)
        if survivors.shape[0] == 0:
            return
        dmat = ctx.dists_from_many(oids[survivors])
        g_vals = flexible_agg_rows(dmat, kind, m)
        stats.objects_full_eval += int(survivors.shape[0])
        for row, i in enumerate(survivors):
            topk.offer(int(g_vals[row]), int(oids[i]), dmat[row])
            if record_prunes:
                bound_trace.append(topk.bound)

    def process_children(node: Node, parent_to_q: np.ndarray | None) -> None:
        entries = node.routing_entries
        stats.children_examined += len(entries)
        if parent_to_q is None:
            survivors = np.arange(len(entries))
        else:
            cheap = np.maximum(
                np.abs(parent_to_q[None, :] - node.pdists[:, None])
                - node.radii[:, None],
                0,
            )
            cheap_vals = flexible_agg_rows(cheap, kind, m)
            bound = topk.bound
            pass_mask = cheap_vals <= bound
            for i in np.flatnonzero(~pass_mask):
                stats.entries_pruned_cheap += 1
                if record_prunes:
                    prunes.append(
                        PruneRecord("entry-cheap", node, int(i), int(node.oids[i]), bound)
                    )
            survivors = np.flatnonzero(pass_mask)
        if survivors.shape[0] == 0:
            return
        dmat = ctx.dists_from_many(node.oids[survivors])
        sphere = np.maximum(dmat - node.radii[survivors][:, None], 0)
        g_vals = flexible_agg_rows(sphere, kind, m)
        bound = topk.bound
        nonlocal counter
        for row, i in enumerate(survivors):
            e = entries[int(i)]
            g = int(g_vals[row])
            if g > bound:
                stats.entries_pruned_sphere += 1
                if record_prunes:
                    prunes.append(
                        PruneRecord("entry-sphere", node, int(i), e.routing_oid, bound)
                    )
                continue
            counter += 1
            heapq.heappush(
                heap, (g, e.child.level, e.routing_oid, counter, e, dmat[row])
            )
            stats.heap_pushes += 1

    tree.node_access_counter += 1
    stats.node_accesses += 1
    root = tree.root
    if root.is_leaf:
        parent_to_q = ctx.dists_from(root.parent_oid)
        process_leaf(root, parent_to_q)
    else:
        process_children(root, None)

    while heap:
        g, _, _, _, entry, dvec = heapq.heappop(heap)
        if skip_stale and pop_skip_check(g, topk.bound):
            stats.popped_stale += 1
            if record_prunes:
                prunes.append(
                    PruneRecord("pop-stale", None, -1, entry.routing_oid, topk.bound)
                )
            continue
        node = entry.child
        tree.node_access_counter += 1
        stats.node_accesses += 1
        # dvec is D(entry.routing_oid, q_i) from push time; the child node's
        # central object is exactly entry.routing_oid, so it is reused here
        if node.is_leaf:
            process_leaf(node, dvec)
        else:
            process_children(node, dvec)

    items = []
    for g, oid, dvec in topk.items:
        value, subset = flexible_agg(dvec, kind, m)
        items.append(Candidate(oid=oid, g_phi=g, subset=subset))
        assert value == g
    stats.oracle_calls = oracle.call_counter - calls_before
    stats.wall_time = time.perf_counter() - t0
    if record_prunes:
        stats.prunes = prunes
        stats.bound_trace = bound_trace
    return ResultSet(items=items, k=qs.k), stats
