"""Exact shortest-path distance oracles: reference Dijkstra and 2-hop labels.

Every network distance the index and search engines consume flows through a
DistanceOracle, whose call_counter is the cost-accounting basis (batch calls
count one per answered pair). The hub-label oracle answers from a pruned
landmark labeling; the Dijkstra oracle is the independent reference the
labels are audited against.
"""

from __future__ import annotations

import heapq
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from roadfann import _kernels
from roadfann._kernels import INF64
from roadfann.roadnet import RoadNetwork

LABEL_MAGIC = b"RFHL"
LABEL_VERSION = 1
DEFAULT_MAX_ENTRIES = 60_000_000
ORDER_POLICIES = ("degree", "tree")


class LabelBudgetError(RuntimeError):
    """Label construction exceeded its entry budget."""


class LabelFileError(ValueError):
    """Label file rejected: bad magic/version or graph checksum mismatch."""


class DistanceOracle:
    """Exact distance function with query accounting.

    dist() answers one pair and bumps call_counter by one; the batch forms
    bump it by the number of answered pairs. Counters are exact once queries
    have quiesced (single increments under the GIL).
    """

    name = "abstract"

    def __init__(self) -> None:
        self.call_counter = 0

    def dist(self, u: int, v: int) -> int:
        raise NotImplementedError

    def one_to_many(self, u: int, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(targets.shape[0])
        return np.array([self._dist_impl(u, int(t)) for t in targets], dtype=np.int64)

    def pairwise(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        k = ids.shape[0]
        self.call_counter += k * k
        out = np.empty((k, k), dtype=np.int64)
        for i in range(k):
            for j in range(k):
                out[i, j] = self._dist_impl(int(ids[i]), int(ids[j]))
        return out

    def many_to_many(self, us: np.ndarray, targets: np.ndarray) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(us.shape[0]) * int(targets.shape[0])
        out = np.empty((us.shape[0], targets.shape[0]), dtype=np.int64)
        for i in range(us.shape[0]):
            for j in range(targets.shape[0]):
                out[i, j] = self._dist_impl(int(us[i]), int(targets[j]))
        return out

    def query_context(self, q_ids: np.ndarray) -> "QueryContext":
        """Accelerator for repeated one/many -> fixed-query-set distances."""
        return QueryContext(self, q_ids)

    def _dist_impl(self, u: int, v: int) -> int:
        raise NotImplementedError

    def reset_counter(self) -> None:
        self.call_counter = 0


class QueryContext:
    """Distances from arbitrary sources to one fixed query set.

    Same answers and call accounting as one_to_many/many_to_many against the
    query ids; subclasses may precompute per-query-set structures.
    """

    def __init__(self, oracle: "DistanceOracle", q_ids: np.ndarray) -> None:
        self.oracle = oracle
        self.q_ids = np.asarray(q_ids, dtype=np.int64)

    def dists_from(self, u: int) -> np.ndarray:
        return self.oracle.one_to_many(u, self.q_ids)

    def dists_from_many(self, us: np.ndarray) -> np.ndarray:
        return self.oracle.many_to_many(us, self.q_ids)


def dijkstra_dist(g: RoadNetwork, u: int, v: int) -> int:
    """Early-exit textbook Dijkstra; the obviously-correct reference."""
    if u == v:
        return 0
    indptr, adj, w = g.csr()
    dist = {u: 0}
    heap = [(0, u)]
    while heap:
        d, x = heapq.heappop(heap)
        if d > dist.get(x, -1):
            continue
        if x == v:
            return d
        for i in range(indptr[x], indptr[x + 1]):
            y = int(adj[i])
            nd = d + int(w[i])
            if nd < dist.get(y, INF64):
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    raise ValueError(f"no path between {u} and {v} (graph not connected?)")


class DijkstraOracle(DistanceOracle):
    name = "dijkstra"

    def __init__(self, g: RoadNetwork) -> None:
        super().__init__()
        self.g = g

    def dist(self, u: int, v: int) -> int:
        self.call_counter += 1
        return dijkstra_dist(self.g, u, v)

    def _dist_impl(self, u: int, v: int) -> int:
        return dijkstra_dist(self.g, u, v)

    def sssp(self, source: int) -> np.ndarray:
        """Full distance array from source; does not count as dist() calls."""
        indptr, adj, w = self.g.csr()
        dist, _ = _kernels.sssp(indptr, adj, w, source)
        return dist

    def one_to_many(self, u: int, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(targets.shape[0])
        return self.sssp(u)[targets]

    def pairwise(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        k = ids.shape[0]
        self.call_counter += k * k
        out = np.empty((k, k), dtype=np.int64)
        for i in range(k):
            out[i] = self.sssp(int(ids[i]))[ids]
        return out

    def many_to_many(self, us: np.ndarray, targets: np.ndarray) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(us.shape[0]) * int(targets.shape[0])
        out = np.empty((us.shape[0], targets.shape[0]), dtype=np.int64)
        for i in range(us.shape[0]):
            out[i] = self.sssp(int(us[i]))[targets]
        return out


@dataclass
class HubLabeling:
    """2-hop cover labels: per-vertex (hub, distance) lists sorted by hub id."""

    indptr: np.ndarray
    hubs: np.ndarray
    dists: np.ndarray
    graph_checksum: str
    order_policy: str

    @property
    def n(self) -> int:
        return int(self.indptr.shape[0] - 1)

    @property
    def total_entries(self) -> int:
        return int(self.indptr[-1])

    @property
    def mean_label_size(self) -> float:
        return self.total_entries / max(self.n, 1)

    def label(self, v: int) -> list[tuple[int, int]]:
        lo, hi = int(self.indptr[v]), int(self.indptr[v + 1])
        return [(int(self.hubs[i]), int(self.dists[i])) for i in range(lo, hi)]


def vertex_order(g: RoadNetwork, policy: str = "degree", seed: int = 0) -> np.ndarray:
    """Hub processing order. 'degree': descending degree, ties by id.

    'tree': descending sampled shortest-path-tree score (then degree, id);
    much smaller labels on road-like graphs, same exactness.
    """
    deg = g.degree()
    ids = np.arange(g.n)
    if policy == "degree":
        return np.lexsort((ids, -deg)).astype(np.int64)
    if policy == "tree":
        rng = np.random.default_rng(seed)
        k = min(32, g.n)
        sources = rng.choice(g.n, size=k, replace=False).astype(np.int64)
        indptr, adj, w = g.csr()
        score = _kernels.tree_score(indptr, adj, w, sources)
        return np.lexsort((ids, -deg, -score)).astype(np.int64)
    raise ValueError(f"unknown order policy {policy!r} (expected one of {ORDER_POLICIES})")


def build_labels(
    g: RoadNetwork,
    order: str | np.ndarray = "degree",
    seed: int = 0,
    max_entries: int = DEFAULT_MAX_ENTRIES,
) -> HubLabeling:
    """Build pruned-landmark labels satisfying the 2-hop cover property."""
    if isinstance(order, str):
        policy = order
        order_arr = vertex_order(g, order, seed)
    else:
        policy = "custom"
        order_arr = np.asarray(order, dtype=np.int64)
    indptr, adj, w = g.csr()
    lab_indptr, lab_hubs, lab_dists, ok = _kernels.build_pll(
        indptr, adj, w, order_arr, max_entries
    )
    if not ok:
        raise LabelBudgetError(
            f"label entry budget {max_entries} exceeded; "
            "raise max_entries or fall back to the Dijkstra oracle"
        )
    return HubLabeling(
        indptr=lab_indptr,
        hubs=lab_hubs,
        dists=lab_dists,
        graph_checksum=g.checksum(),
        order_policy=policy,
    )


def label_dist(labels: HubLabeling, u: int, v: int) -> int:
    """Min over common hubs of the summed hub distances."""
    d = _kernels.hl_query(labels.indptr, labels.hubs, labels.dists, u, v)
    if d >= INF64:
        raise ValueError(f"no common hub for ({u}, {v}); labels incomplete?")
    return int(d)


class HubLabelOracle(DistanceOracle):
    name = "hub-labels"

    def __init__(self, labels: HubLabeling) -> None:
        super().__init__()
        self.labels = labels
        self._local = threading.local()

    def _scratch(self) -> np.ndarray:
        t = getattr(self._local, "t", None)
        if t is None:
            t = np.full(self.labels.n, INF64, dtype=np.int64)
            self._local.t = t
        return t

    def dist(self, u: int, v: int) -> int:
        self.call_counter += 1
        return label_dist(self.labels, u, v)

    def _dist_impl(self, u: int, v: int) -> int:
        return label_dist(self.labels, u, v)

    def one_to_many(self, u: int, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(targets.shape[0])
        out = np.empty(targets.shape[0], dtype=np.int64)
        lab = self.labels
        _kernels.hl_one_to_many(lab.indptr, lab.hubs, lab.dists, u, targets, self._scratch(), out)
        return out

    def pairwise(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        self.call_counter += int(ids.shape[0]) ** 2
        lab = self.labels
        return _kernels.hl_pairwise(lab.indptr, lab.hubs, lab.dists, ids, self._scratch())

    def many_to_many(self, us: np.ndarray, targets: np.ndarray) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(us.shape[0]) * int(targets.shape[0])
        out = np.empty((us.shape[0], targets.shape[0]), dtype=np.int64)
        lab = self.labels
        _kernels.hl_many_to_many(
            lab.indptr, lab.hubs, lab.dists, us, targets, self._scratch(), out
        )
        return out

    def query_context(self, q_ids: np.ndarray) -> "HubQueryContext":
        return HubQueryContext(self, q_ids)


class HubQueryContext(QueryContext):
    """Inverted hub index over the query labels: hub -> (query pos, dist).

    A source's distances to all queries then cost only its label's hub
    intersections with the query set, not a scan of every query label.
    """

    def __init__(self, oracle: HubLabelOracle, q_ids: np.ndarray) -> None:
        super().__init__(oracle, q_ids)
        lab = oracle.labels
        segs = [
            (int(lab.indptr[q]), int(lab.indptr[q + 1])) for q in self.q_ids
        ]
        hubs = np.concatenate([lab.hubs[lo:hi] for lo, hi in segs])
        dists = np.concatenate([lab.dists[lo:hi] for lo, hi in segs])
        qpos = np.concatenate(
            [np.full(hi - lo, j, dtype=np.int32) for j, (lo, hi) in enumerate(segs)]
        )
        order = np.argsort(hubs, kind="stable")
        hubs = hubs[order]
        self._inv_q = qpos[order]
        self._inv_d = dists[order]
        counts = np.bincount(hubs, minlength=lab.n)
        self._inv_indptr = np.concatenate(
            [[0], np.cumsum(counts)]
        ).astype(np.int64)

    def dists_from_many(self, us: np.ndarray) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        self.oracle.call_counter += int(us.shape[0]) * int(self.q_ids.shape[0])
        out = np.empty((us.shape[0], self.q_ids.shape[0]), dtype=np.int64)
        lab = self.oracle.labels
        _kernels.hl_query_context_dists(
            lab.indptr,
            lab.hubs,
            lab.dists,
            self._inv_indptr,
            self._inv_q,
            self._inv_d,
            us,
            self.q_ids,
            out,
        )
        return out

    def dists_from(self, u: int) -> np.ndarray:
        return self.dists_from_many(np.array([u], dtype=np.int64))[0]


def save_labels(labels: HubLabeling, path: str | Path) -> None:
    """Versioned little-endian binary: magic, version, checksum, arrays."""
    path = Path(path)
    checksum = bytes.fromhex(labels.graph_checksum)
    policy = labels.order_policy.encode()
    with open(path, "wb") as f:
        f.write(LABEL_MAGIC)
        f.write(struct.pack("<I", LABEL_VERSION))
        f.write(struct.pack("<I", len(checksum)))
        f.write(checksum)
        f.write(struct.pack("<I", len(policy)))
        f.write(policy)
        f.write(struct.pack("<QQ", labels.n, labels.total_entries))
        f.write(labels.indptr.astype("<i8").tobytes())
        f.write(labels.hubs.astype("<i4").tobytes())
        f.write(labels.dists.astype("<i8").tobytes())


def load_labels(path: str | Path, g: RoadNetwork) -> HubLabeling:
    """Load labels, rejecting files whose graph checksum does not match g."""
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(4) != LABEL_MAGIC:
            raise LabelFileError(f"{path}: not a label file (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != LABEL_VERSION:
            raise LabelFileError(f"{path}: unsupported version {version}")
        (clen,) = struct.unpack("<I", f.read(4))
        checksum = f.read(clen).hex()
        if checksum != g.checksum():
            raise LabelFileError(
                f"{path}: graph checksum mismatch (file {checksum[:12]}…, graph {g.checksum()[:12]}…)"
            )
        (plen,) = struct.unpack("<I", f.read(4))
        policy = f.read(plen).decode()
        n, total = struct.unpack("<QQ", f.read(16))
        indptr = np.frombuffer(f.read(8 * (n + 1)), dtype="<i8").astype(np.int64)
        hubs = np.frombuffer(f.read(4 * total), dtype="<i4").astype(np.int32)
        dists = np.frombuffer(f.read(8 * total), dtype="<i8").astype(np.int64)
    return HubLabeling(
        indptr=indptr,
        hubs=hubs,
        dists=dists,
        graph_checksum=checksum,
        order_policy=policy,
    )
