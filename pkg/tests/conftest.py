"""Shared builders for the test suite: small deterministic road-like graphs."""

import math

import numpy as np
import pytest

from roadfann.oracle import DistanceOracle
from roadfann.roadnet import RoadNetwork


def line_graph(weights):
    """Path graph 0-1-...-k with the given edge weights, on the x axis."""
    n = len(weights) + 1
    xs = np.cumsum([0] + list(weights)).astype(np.int64)
    ys = np.zeros(n, dtype=np.int64)
    edges = np.array([[i, i + 1, w] for i, w in enumerate(weights)], dtype=np.int64)
    return RoadNetwork(xs=xs, ys=ys, edges=edges)


def random_connected_graph(n, seed=0, extra_edges=None, zero_weight_frac=0.0, span=10000):
    """Connected graph with integer coordinates and detour-noised weights.

    Weights are ceil(euclid * detour) with detour >= 1, so the Euclidean
    distance under unit scale is a sound per-edge lower bound; a spanning tree
    over a random vertex order guarantees connectivity.
    """
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, span, size=n).astype(np.int64)
    ys = rng.integers(0, span, size=n).astype(np.int64)
    perm = rng.permutation(n)
    pairs = set()
    for i in range(1, n):
        a = int(perm[i])
        b = int(perm[rng.integers(0, i)])
        pairs.add((min(a, b), max(a, b)))
    if extra_edges is None:
        extra_edges = n
    while len(pairs) < n - 1 + extra_edges:
        a, b = rng.integers(0, n, size=2)
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    edges = []
    for a, b in sorted(pairs):
        euclid = math.hypot(float(xs[a] - xs[b]), float(ys[a] - ys[b]))
        detour = 1.0 + 0.6 * rng.random()
        w = int(math.ceil(euclid * detour))
        if zero_weight_frac > 0 and rng.random() < zero_weight_frac:
            w = 0
        edges.append((a, b, w))
    return RoadNetwork(
        xs=xs, ys=ys, edges=np.array(edges, dtype=np.int64).reshape(-1, 3)
    )


class MatrixOracle(DistanceOracle):
    """Distance oracle backed by a precomputed all-pairs matrix (tests only)."""

    name = "matrix"

    def __init__(self, mat):
        super().__init__()
        self.mat = np.asarray(mat, dtype=np.int64)

    def dist(self, u, v):
        self.call_counter += 1
        return int(self.mat[u, v])

    def _dist_impl(self, u, v):
        return int(self.mat[u, v])

    def one_to_many(self, u, targets):
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(targets.shape[0])
        return self.mat[u, targets]

    def pairwise(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        self.call_counter += int(ids.shape[0]) ** 2
        return self.mat[np.ix_(ids, ids)]

    def many_to_many(self, us, targets):
        us = np.asarray(us, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        self.call_counter += int(us.shape[0]) * int(targets.shape[0])
        return self.mat[np.ix_(us, targets)]


def apsp_matrix(g):
    """All-pairs distances via repeated SSSP (small graphs only)."""
    from roadfann import _kernels

    indptr, adj, w = g.csr()
    out = np.empty((g.n, g.n), dtype=np.int64)
    for s in range(g.n):
        dist, _ = _kernels.sssp(indptr, adj, w, s)
        out[s] = dist
    return out


@pytest.fixture(scope="session")
def warm_kernels():
    """Touch every numba kernel once so JIT time lands outside timed tests."""
    from roadfann import _kernels
    from roadfann.oracle import HubLabelOracle, build_labels

    g = random_connected_graph(30, seed=99)
    labels = build_labels(g, order="tree")
    oracle = HubLabelOracle(labels)
    oracle.pairwise(np.arange(5, dtype=np.int64))
    oracle.one_to_many(0, np.arange(10, dtype=np.int64))
    indptr, adj, w = g.csr()
    _kernels.sssp(indptr, adj, w, 0)
    return True
