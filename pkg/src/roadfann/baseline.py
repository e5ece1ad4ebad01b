"""Ground-truth brute force and the Euclidean-restriction competitor.

brute_force_fann scans every POI with oracle distances (and, for small query
sets, the subset-enumeration aggregate) — the independent referee for the
tree engines. ier_fann_search is the classic incremental-Euclidean-
restriction pattern: best-first over an STR-packed rectangle tree keyed by
floored scaled Euclidean bounds, refining one candidate object at a time with
true network distances until the bound closes the heap.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from roadfann.agg import AggregateKind, flexible_agg, flexible_agg_bruteforce, flexible_agg_rows
from roadfann.fann import (
    INF,
    Candidate,
    QuerySpec,
    ResultSet,
    SearchStats,
    _TopK,
    _filter_mask,
)
from roadfann.oracle import DistanceOracle
from roadfann.roadnet import RoadNetwork

BRUTE_FORCE_GUARD = 100_000
ENUM_QUERY_LIMIT = 12
_CHUNK = 2048


def brute_force_fann(
    pois: np.ndarray, oracle: DistanceOracle, qs: QuerySpec
) -> ResultSet:
    """Exact top-k by scanning every POI; subset enumeration when M <= 12."""
    pois = np.unique(np.asarray(pois, dtype=np.int64))
    mask = _filter_mask(pois, qs.poi_filter)
    if mask is not None:
        pois = pois[mask]
    if pois.shape[0] > BRUTE_FORCE_GUARD:
        raise ValueError(f"brute-force guard: {pois.shape[0]} POIs > {BRUTE_FORCE_GUARD}")
    if pois.shape[0] < qs.k:
        raise ValueError(f"only {pois.shape[0]} POIs available but k={qs.k}")
    m = qs.m
    use_enum = qs.m_queries <= ENUM_QUERY_LIMIT
    ctx = oracle.query_context(qs.Q)
    best: list[tuple[int, int, np.ndarray]] = []
    for lo in range(0, pois.shape[0], _CHUNK):
        chunk = pois[lo : lo + _CHUNK]
        dmat = ctx.dists_from_many(chunk)
        if use_enum:
            g_vals = np.array(
                [flexible_agg_bruteforce(dmat[i], qs.kind, m) for i in range(chunk.shape[0])],
                dtype=np.int64,
            )
        else:
            g_vals = flexible_agg_rows(dmat, qs.kind, m)
        for i in range(chunk.shape[0]):
            best.append((int(g_vals[i]), int(chunk[i]), dmat[i]))
    best.sort(key=lambda t: (t[0], t[1]))
    items = []
    for g, oid, dvec in best[: qs.k]:
        _, subset = flexible_agg(dvec, qs.kind, m)
        items.append(Candidate(oid=oid, g_phi=g, subset=subset))
    return ResultSet(items=items, k=qs.k)


@dataclass
class RectNode:
    level: int
    mbr: tuple[int, int, int, int]
    children: list["RectNode"] = field(default_factory=list)
    child_mbrs: np.ndarray | None = None
    oids: np.ndarray | None = None
    ox: np.ndarray | None = None
    oy: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.level == 0


@dataclass
class RectTree:
    root: RectNode
    capacity: int
    height: int
    object_count: int
    distinct_object_count: int = 0
    node_access_counter: int = 0

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children)


def _mbr_of(xs: np.ndarray, ys: np.ndarray) -> tuple[int, int, int, int]:
    return (int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))


def _str_pack(items: list, keys_x: np.ndarray, keys_y: np.ndarray, capacity: int) -> list[list]:
    """Sort-tile-recursive grouping of items into runs of <= capacity."""
    n = len(items)
    leaf_count = -(-n // capacity)
    slabs = max(1, math.isqrt(leaf_count) + (0 if math.isqrt(leaf_count) ** 2 == leaf_count else 1))
    order = np.lexsort((keys_y, keys_x))
    per_slab = -(-n // slabs)
    groups = []
    for s in range(0, n, per_slab):
        slab = order[s : s + per_slab]
        slab = slab[np.argsort(keys_y[slab], kind="stable")]
        for t in range(0, slab.shape[0], capacity):
            groups.append([items[i] for i in slab[t : t + capacity]])
    return groups


def str_bulk_load(
    oids: np.ndarray, xs: np.ndarray, ys: np.ndarray, capacity: int = 64
) -> RectTree:
    """STR-packed rectangle tree over POI coordinates; deterministic."""
    if capacity < 2:
        raise ValueError("capacity must be >= 2")
    oids = np.asarray(oids, dtype=np.int64)
    if oids.shape[0] == 0:
        raise ValueError("empty POI set")
    order = np.argsort(oids, kind="stable")
    oids, xs, ys = oids[order], np.asarray(xs)[order], np.asarray(ys)[order]

    groups = _str_pack(list(range(oids.shape[0])), xs.astype(np.float64), ys.astype(np.float64), capacity)
    level_nodes: list[RectNode] = []
    for grp in groups:
        idx = np.array(grp, dtype=np.int64)
        node = RectNode(
            level=0,
            mbr=_mbr_of(xs[idx], ys[idx]),
            oids=oids[idx],
            ox=xs[idx].astype(np.int64),
            oy=ys[idx].astype(np.int64),
        )
        level_nodes.append(node)

    level = 1
    while len(level_nodes) > capacity:
        cx = np.array([(n.mbr[0] + n.mbr[2]) / 2 for n in level_nodes])
        cy = np.array([(n.mbr[1] + n.mbr[3]) / 2 for n in level_nodes])
        groups = _str_pack(level_nodes, cx, cy, capacity)
        next_level = []
        for grp in groups:
            mbrs = np.array([c.mbr for c in grp], dtype=np.int64)
            mbr = (
                int(mbrs[:, 0].min()),
                int(mbrs[:, 1].min()),
                int(mbrs[:, 2].max()),
                int(mbrs[:, 3].max()),
            )
            next_level.append(
                RectNode(level=level, mbr=mbr, children=list(grp), child_mbrs=mbrs)
            )
        level_nodes = next_level
        level += 1

    if len(level_nodes) == 1:
        root = level_nodes[0]
    else:
        mbrs = np.array([c.mbr for c in level_nodes], dtype=np.int64)
        mbr = (
            int(mbrs[:, 0].min()),
            int(mbrs[:, 1].min()),
            int(mbrs[:, 2].max()),
            int(mbrs[:, 3].max()),
        )
        root = RectNode(level=level, mbr=mbr, children=level_nodes, child_mbrs=mbrs)
    tree = RectTree(
        root=root,
        capacity=capacity,
        height=root.level + 1,
        object_count=int(oids.shape[0]),
        distinct_object_count=int(np.unique(oids).shape[0]),
    )
    return tree


def _mbr_mindists_int(
    mbrs: np.ndarray, qx: np.ndarray, qy: np.ndarray, scale: float
) -> np.ndarray:
    """Floored scaled Euclidean mindist matrix (n_mbrs, n_queries)."""
    dx = np.maximum(
        np.maximum(mbrs[:, 0][:, None] - qx[None, :], qx[None, :] - mbrs[:, 2][:, None]),
        0,
    ).astype(np.float64)
    dy = np.maximum(
        np.maximum(mbrs[:, 1][:, None] - qy[None, :], qy[None, :] - mbrs[:, 3][:, None]),
        0,
    ).astype(np.float64)
    return np.floor(np.hypot(dx, dy) * scale).astype(np.int64)


def _point_dists_int(
    px: np.ndarray, py: np.ndarray, qx: np.ndarray, qy: np.ndarray, scale: float
) -> np.ndarray:
    dx = (px[:, None] - qx[None, :]).astype(np.float64)
    dy = (py[:, None] - qy[None, :]).astype(np.float64)
    return np.floor(np.hypot(dx, dy) * scale).astype(np.int64)


def ier_fann_search(
    rt: RectTree,
    g: RoadNetwork,
    oracle: DistanceOracle,
    qs: QuerySpec,
) -> tuple[ResultSet, SearchStats]:
    """Exact top-k via Euclidean lower bounds with one-at-a-time refinement.

    Heap keys are flexible aggregates of floored scaled Euclidean distances —
    valid lower bounds of the network aggregate — so the first moment the
    smallest key exceeds the kth refined distance, everything unseen is
    beaten and the search stops.
    """
    if qs.poi_filter is None:
        available = rt.distinct_object_count or rt.object_count
    else:
        parts = []
        for node in rt.nodes():
            if node.is_leaf:
                mask = _filter_mask(node.oids, qs.poi_filter)
                parts.append(node.oids[mask])
        available = int(np.unique(np.concatenate(parts)).shape[0]) if parts else 0
    if available < qs.k:
        raise ValueError(f"only {available} POIs available but k={qs.k}")

    Q = qs.Q
    m = qs.m
    kind = qs.kind
    qx = g.xs[Q].astype(np.int64)
    qy = g.ys[Q].astype(np.int64)
    scale = g.euclid_scale
    stats = SearchStats()
    calls_before = oracle.call_counter
    t0 = time.perf_counter()
    ctx = oracle.query_context(Q)
    topk = _TopK(qs.k)
    counter = 0
    heap: list = []

    def push_node_children(node: RectNode) -> None:
        nonlocal counter
        bound = topk.bound
        if node.is_leaf:
            oids = node.oids
            px, py = node.ox, node.oy
            mask = _filter_mask(oids, qs.poi_filter)
            if mask is not None:
                oids, px, py = oids[mask], px[mask], py[mask]
            if oids.shape[0] == 0:
                return
            stats.objects_examined += int(oids.shape[0])
            keys = flexible_agg_rows(_point_dists_int(px, py, qx, qy, scale), kind, m)
            for i in range(oids.shape[0]):
                key = int(keys[i])
                if key > bound:
                    stats.objects_pruned_cheap += 1
                    continue
                counter += 1
                heapq.heappush(heap, (key, 0, int(oids[i]), counter, None))
                stats.heap_pushes += 1
        else:
            stats.children_examined += len(node.children)
            keys = flexible_agg_rows(_mbr_mindists_int(node.child_mbrs, qx, qy, scale), kind, m)
            for i, child in enumerate(node.children):
                key = int(keys[i])
                if key > bound:
                    stats.entries_pruned_cheap += 1
                    continue
                counter += 1
                heapq.heappush(heap, (key, 1, i, counter, child))
                stats.heap_pushes += 1

    rt.node_access_counter += 1
    stats.node_accesses += 1
    push_node_children(rt.root)

    while heap:
        key, type_rank, ident, _, payload = heapq.heappop(heap)
        if key > topk.bound:
            stats.popped_stale += 1
            break
        if type_rank == 0:
            dvec = ctx.dists_from(ident)
            gval, _ = flexible_agg(dvec, kind, m)
            stats.objects_full_eval += 1
            topk.offer(int(gval), ident, dvec)
        else:
            rt.node_access_counter += 1
            stats.node_accesses += 1
            push_node_children(payload)

    items = []
    for gval, oid, dvec in topk.items:
        _, subset = flexible_agg(dvec, kind, m)
        items.append(Candidate(oid=oid, g_phi=gval, subset=subset))
    stats.oracle_calls = oracle.call_counter - calls_before
    stats.wall_time = time.perf_counter() - t0
    return ResultSet(items=items, k=qs.k), stats


def audit_euclid_bound_soundness(
    rt: RectTree,
    g: RoadNetwork,
    oracle: DistanceOracle,
    qs: QuerySpec,
    sample: int = 200,
    seed: int = 0,
) -> list[str]:
    """Sampled check: node Euclidean aggregate <= true aggregate of any POI in it."""
    rng = np.random.default_rng(seed)
    qx = g.xs[qs.Q].astype(np.int64)
    qy = g.ys[qs.Q].astype(np.int64)
    m = qs.m
    problems = []
    nodes = [n for n in rt.nodes()]
    for _ in range(sample):
        node = nodes[int(rng.integers(len(nodes)))]
        mbr = np.array([node.mbr], dtype=np.int64)
        node_key = int(flexible_agg_rows(_mbr_mindists_int(mbr, qx, qy, g.euclid_scale), qs.kind, m)[0])
        # any POI inside the node must aggregate at least as high
        leaf = node
        while not leaf.is_leaf:
            leaf = leaf.children[int(rng.integers(len(leaf.children)))]
        i = int(rng.integers(leaf.oids.shape[0]))
        oid = int(leaf.oids[i])
        dvec = oracle.one_to_many(oid, qs.Q)
        true_g, _ = flexible_agg(dvec, qs.kind, m)
        if node_key > true_g:
            problems.append(f"node bound {node_key} > true g {true_g} for POI {oid}")
    return problems
