"""Metric tree over a POI set under the network distance.

Nodes carry spherical regions (central object + covering radius). Leaf
entries store their distance to the leaf's central object; routing entries
store the child's central object, its covering radius over the whole subtree,
and the distance to the owning node's central object. Those stored distances
are what make the search's zero-oracle-cost lower bounds possible.

Construction is a deterministic bulk load: recursive farthest-point
partitioning into capacity-bounded groups, then levels assembled bottom-up so
all leaves sit at equal depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from roadfann.oracle import DistanceOracle


@dataclass
class LeafEntry:
    oid: int
    parent_dist: int


@dataclass
class RoutingEntry:
    routing_oid: int
    radius: int
    parent_dist: int
    child: "Node"


@dataclass
class Node:
    level: int
    parent_oid: int | None
    leaf_entries: list[LeafEntry] = field(default_factory=list)
    routing_entries: list[RoutingEntry] = field(default_factory=list)
    # array mirrors of the entry lists, built once after construction
    oids: np.ndarray | None = None
    pdists: np.ndarray | None = None
    radii: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return self.level == 0

    def finalize(self) -> None:
        if self.is_leaf:
            self.oids = np.array([e.oid for e in self.leaf_entries], dtype=np.int64)
            self.pdists = np.array(
                [e.parent_dist for e in self.leaf_entries], dtype=np.int64
            )
        else:
            self.oids = np.array(
                [e.routing_oid for e in self.routing_entries], dtype=np.int64
            )
            self.pdists = np.array(
                [e.parent_dist for e in self.routing_entries], dtype=np.int64
            )
            self.radii = np.array(
                [e.radius for e in self.routing_entries], dtype=np.int64
            )


@dataclass
class MetricTree:
    root: Node
    capacity: int
    height: int
    object_count: int
    distinct_object_count: int = 0
    node_access_counter: int = 0

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.extend(e.child for e in node.routing_entries)

    def subtree_objects(self, node: Node) -> np.ndarray:
        if node.is_leaf:
            return node.oids
        parts = [self.subtree_objects(e.child) for e in node.routing_entries]
        return np.concatenate(parts)


def select_parent_leaf(objects: Sequence[int], oracle: DistanceOracle) -> int:
    """Central object: minimizes the max distance to the others; ties by id."""
    ids = np.asarray(objects, dtype=np.int64)
    if ids.shape[0] == 0:
        raise ValueError("empty object list")
    if ids.shape[0] == 1:
        return int(ids[0])
    mat = oracle.pairwise(ids)
    worst = mat.max(axis=1)
    best = worst.min()
    return int(ids[worst == best].min())


def select_parent_nonleaf(entries: Sequence[RoutingEntry], oracle: DistanceOracle) -> int:
    """Central routing object under sphere-padded distances; ties by id."""
    if len(entries) == 0:
        raise ValueError("empty entry list")
    if len(entries) == 1:
        return int(entries[0].routing_oid)
    ids = np.array([e.routing_oid for e in entries], dtype=np.int64)
    radii = np.array([e.radius for e in entries], dtype=np.int64)
    mat = oracle.pairwise(ids) + radii[:, None] + radii[None, :]
    worst = mat.max(axis=1)
    best = worst.min()
    return int(ids[worst == best].min())


def mindist_sphere(e: RoutingEntry, q: int, oracle: DistanceOracle) -> int:
    """Distance from q to the entry's sphere: max(D(center, q) - radius, 0)."""
    return max(oracle.dist(e.routing_oid, q) - e.radius, 0)


def lowerbound_cheap_nonleaf(e_child: RoutingEntry, parent_to_q: int) -> int:
    """Sphere bound from stored distances only: no oracle calls.

    |D(parent, q) - D(parent, center)| - radius, clamped at 0 so SUM
    aggregation stays sound.
    """
    return max(abs(parent_to_q - e_child.parent_dist) - e_child.radius, 0)


def lowerbound_cheap_leaf(entry: LeafEntry, parent_to_q: int) -> int:
    """Object bound from stored distances only: |D(parent, q) - D(parent, p)|."""
    return abs(parent_to_q - entry.parent_dist)


def _farthest_point_groups(
    ids: np.ndarray,
    positions: np.ndarray,
    oracle: DistanceOracle,
    k: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Split positions into <= k groups by nearest-farthest-point-seed assignment."""
    pts = ids[positions]
    n = pts.shape[0]
    first = int(rng.integers(n))
    seed_rows = np.empty((k, n), dtype=np.int64)
    seed_rows[0] = oracle.one_to_many(int(pts[first]), pts)
    dmin = seed_rows[0].copy()
    for s in range(1, k):
        far = dmin.max()
        cand = np.flatnonzero(dmin == far)
        nxt = int(cand[np.argmin(pts[cand])])
        seed_rows[s] = oracle.one_to_many(int(pts[nxt]), pts)
        np.minimum(dmin, seed_rows[s], out=dmin)
    assign = np.argmin(seed_rows, axis=0)
    return [positions[assign == s] for s in range(k) if (assign == s).any()]


def _partition(
    ids: np.ndarray,
    positions: np.ndarray,
    capacity: int,
    oracle: DistanceOracle,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Capacity-bounded groups of positions via recursive farthest-point splits."""
    if positions.shape[0] <= capacity:
        return [positions]
    k = min(capacity, -(-positions.shape[0] // capacity))
    groups = _farthest_point_groups(ids, positions, oracle, k, rng)
    if len(groups) == 1:
        # coincident objects: no metric progress possible, chunk positionally
        groups = np.array_split(positions, -(-positions.shape[0] // capacity))
    out: list[np.ndarray] = []
    for grp in groups:
        if grp.shape[0] <= capacity:
            out.append(grp)
        else:
            out.extend(_partition(ids, grp, capacity, oracle, rng))
    return out


def bulk_load(
    P: Sequence[int],
    oracle: DistanceOracle,
    capacity: int = 64,
    seed: int = 0,
) -> MetricTree:
    """Build a metric tree whose leaf entries are exactly P.

    Deterministic given the seed. Central objects are picked by the min-max
    rules, covering radii are tight over the full subtree, and every stored
    parent distance is an oracle distance.
    """
    if capacity < 2:
        raise ValueError("capacity must be >= 2")
    ids = np.asarray(list(P), dtype=np.int64)
    if ids.shape[0] == 0:
        raise ValueError("empty POI set")
    rng = np.random.default_rng(seed)

    groups = _partition(ids, np.arange(ids.shape[0]), capacity, oracle, rng)
    # (node, its subtree objects, its covering radius around parent_oid)
    level_nodes: list[tuple[Node, np.ndarray, int]] = []
    for pos in groups:
        grp = ids[pos]
        center = select_parent_leaf(grp, oracle)
        pd = oracle.one_to_many(center, grp)
        node = Node(
            level=0,
            parent_oid=center,
            leaf_entries=[
                LeafEntry(oid=int(o), parent_dist=int(d)) for o, d in zip(grp, pd)
            ],
        )
        level_nodes.append((node, grp, int(pd.max())))

    level = 1
    while len(level_nodes) > capacity:
        centers = np.array([n.parent_oid for n, _, _ in level_nodes], dtype=np.int64)
        groups_idx = _partition(
            centers, np.arange(centers.shape[0]), capacity, oracle, rng
        )
        next_level: list[tuple[Node, np.ndarray, int]] = []
        for gi in groups_idx:
            children = [level_nodes[i] for i in gi]
            entries = [
                RoutingEntry(
                    routing_oid=int(node.parent_oid),
                    radius=int(radius),
                    parent_dist=0,
                    child=node,
                )
                for node, _, radius in children
            ]
            center = select_parent_nonleaf(entries, oracle)
            roids = np.array([e.routing_oid for e in entries], dtype=np.int64)
            pd = oracle.one_to_many(center, roids)
            for e, d in zip(entries, pd):
                e.parent_dist = int(d)
            subtree = np.concatenate([objs for _, objs, _ in children])
            radius = int(oracle.one_to_many(center, subtree).max())
            node = Node(level=level, parent_oid=center, routing_entries=entries)
            next_level.append((node, subtree, radius))
        level_nodes = next_level
        level += 1

    if len(level_nodes) == 1:
        root = level_nodes[0][0]
    else:
        entries = [
            RoutingEntry(
                routing_oid=int(node.parent_oid),
                radius=int(radius),
                parent_dist=0,
                child=node,
            )
            for node, _, radius in level_nodes
        ]
        root = Node(level=level, parent_oid=None, routing_entries=entries)

    tree = MetricTree(
        root=root,
        capacity=capacity,
        height=root.level + 1,
        object_count=int(ids.shape[0]),
        distinct_object_count=int(np.unique(ids).shape[0]),
    )
    for node in tree.nodes():
        node.finalize()
    return tree


def audit_covering_radii(tree: MetricTree, oracle: DistanceOracle) -> list[str]:
    """Every subtree object must lie within its routing entry's radius."""
    problems = []
    for node in tree.nodes():
        if node.is_leaf:
            continue
        for e in node.routing_entries:
            objs = tree.subtree_objects(e.child)
            d = oracle.one_to_many(e.routing_oid, objs)
            worst = int(d.max())
            if worst > e.radius:
                problems.append(
                    f"entry {e.routing_oid} level {node.level}: object at {worst} > radius {e.radius}"
                )
    return problems


def audit_parent_dists(tree: MetricTree, oracle: DistanceOracle) -> list[str]:
    """Every stored parent_dist must equal the oracle distance."""
    problems = []
    for node in tree.nodes():
        if node.parent_oid is None:
            continue
        if node.is_leaf:
            for e in node.leaf_entries:
                true = oracle.dist(node.parent_oid, e.oid)
                if true != e.parent_dist:
                    problems.append(
                        f"leaf entry {e.oid}: stored {e.parent_dist} != {true}"
                    )
        else:
            for e in node.routing_entries:
                true = oracle.dist(node.parent_oid, e.routing_oid)
                if true != e.parent_dist:
                    problems.append(
                        f"routing entry {e.routing_oid}: stored {e.parent_dist} != {true}"
                    )
    return problems


def audit_referencing_entries(tree: MetricTree) -> list[str]:
    """Each child node's central object must be its referencing routing_oid."""
    problems = []
    for node in tree.nodes():
        if node.is_leaf:
            continue
        for e in node.routing_entries:
            if e.child.parent_oid != e.routing_oid:
                problems.append(
                    f"child parent_oid {e.child.parent_oid} != routing_oid {e.routing_oid}"
                )
    return problems


def audit_equal_leaf_depth(tree: MetricTree) -> list[str]:
    depths = set()

    def walk(node: Node, depth: int) -> None:
        if node.is_leaf:
            depths.add(depth)
        else:
            for e in node.routing_entries:
                walk(e.child, depth + 1)

    walk(tree.root, 0)
    return [] if len(depths) <= 1 else [f"leaf depths differ: {sorted(depths)}"]
