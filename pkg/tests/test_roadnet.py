import math

import numpy as np
import pytest

from roadfann.roadnet import (
    DimacsParseError,
    RoadNetwork,
    ValidationError,
    is_connected,
    parse_dimacs,
    preprocess,
    write_dimacs,
)


def build(coords, edges, arcs=0):
    xs = np.array([c[0] for c in coords], dtype=np.int64)
    ys = np.array([c[1] for c in coords], dtype=np.int64)
    e = np.array(sorted((min(u, v), max(u, v), w) for u, v, w in edges), dtype=np.int64)
    e = e.reshape(-1, 3)
    return RoadNetwork(xs=xs, ys=ys, edges=e, source_arc_count=arcs)


GR3 = """c tiny graph
p sp 3 4
a 1 2 2
a 2 1 2
a 2 3 3
a 3 2 3
"""

CO3 = """p aux sp co 3
v 1 0 0
v 2 10 0
v 3 10 10
"""


def test_parse_collapses_symmetric_arcs():
    g = parse_dimacs(GR3.splitlines(), CO3.splitlines())
    assert g.n == 3
    assert g.m == 2
    assert g.source_arc_count == 4
    assert g.edges.tolist() == [[0, 1, 2], [1, 2, 3]]


def test_parse_out_of_range_arc_rejected():
    gr = "p sp 3 1\na 1 5 7\n"
    with pytest.raises(ValidationError):
        parse_dimacs(gr.splitlines(), CO3.splitlines())


def test_parse_missing_coordinate_rejected():
    co = "v 1 0 0\nv 2 1 1\n"
    gr = "p sp 3 1\na 1 3 4\n"
    with pytest.raises(ValidationError):
        parse_dimacs(gr.splitlines(), co.splitlines())


def test_parse_malformed_line_reports_lineno():
    gr = "p sp 2 1\na 1 two 3\n"
    with pytest.raises(DimacsParseError, match="line 2"):
        parse_dimacs(gr.splitlines(), CO3.splitlines())


def test_parallel_edges_keep_minimum_weight():
    gr = "p sp 2 3\na 1 2 9\na 2 1 4\na 1 2 6\n"
    co = "v 1 0 0\nv 2 3 0\n"
    g = parse_dimacs(gr.splitlines(), co.splitlines())
    assert g.edges.tolist() == [[0, 1, 4]]


def test_preprocess_keeps_largest_component_tie_by_lowest_id():
    # two disjoint triangles, all weights 1: the one containing vertex 0 wins
    coords = [(i, 0) for i in range(6)]
    edges = [(0, 1, 1), (1, 2, 1), (0, 2, 1), (3, 4, 1), (4, 5, 1), (3, 5, 1)]
    g = preprocess(build(coords, edges))
    assert g.n == 3
    assert g.remap.tolist() == [0, 1, 2]
    assert g.m == 3


def test_preprocess_removes_self_loop_keeps_vertex():
    coords = [(0, 0), (1, 0), (2, 0)]
    edges = [(0, 1, 1), (1, 2, 1), (2, 2, 5)]
    g = preprocess(build(coords, edges))
    assert g.n == 3
    assert g.m == 2
    assert (g.edges[:, 0] != g.edges[:, 1]).all()


def test_preprocess_idempotent_on_connected_graph():
    coords = [(0, 0), (1, 0), (2, 0)]
    edges = [(0, 1, 1), (1, 2, 1)]
    g = build(coords, edges)
    p = preprocess(g)
    assert p.n == g.n
    assert p.edges.tolist() == g.edges.tolist()
    assert p.remap.tolist() == [0, 1, 2]
    again = preprocess(p)
    assert again.edges.tolist() == p.edges.tolist()
    assert again.remap.tolist() == p.remap.tolist()


def test_preprocess_empty_graph_errors():
    g = RoadNetwork(
        xs=np.empty(0, dtype=np.int64),
        ys=np.empty(0, dtype=np.int64),
        edges=np.empty((0, 3), dtype=np.int64),
    )
    with pytest.raises(ValidationError):
        preprocess(g)


def test_connectivity_and_edge_symmetry_after_preprocess():
    rng = np.random.default_rng(42)
    n = 60
    coords = [(int(rng.integers(0, 1000)), int(rng.integers(0, 1000))) for _ in range(n)]
    edges = set()
    for _ in range(80):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v), int(rng.integers(1, 100))))
    g = preprocess(build(coords, list(edges)))
    assert is_connected(g)
    indptr, adj, w = g.csr()
    pairs = set()
    for u in range(g.n):
        for i in range(indptr[u], indptr[u + 1]):
            pairs.add((u, int(adj[i]), int(w[i])))
    for u, v, wt in pairs:
        assert (v, u, wt) in pairs


def test_euclidean_lb_identity_and_345():
    coords = [(0, 0), (3, 4)]
    g = build(coords, [(0, 1, 5)])
    assert g.euclid_scale == pytest.approx(1.0)
    assert g.euclidean_lb(0, 0) == 0.0
    assert g.euclidean_lb(0, 1) == 5.0
    assert g.euclidean_lb_int(0, 1) == 5


def test_euclid_scale_is_min_ratio_and_edge_sound():
    coords = [(0, 0), (10, 0), (10, 10)]
    g = build(coords, [(0, 1, 20), (1, 2, 15)])
    assert g.euclid_scale == pytest.approx(1.5)
    for u, v, w in g.edges:
        assert math.floor(g.euclidean_lb(int(u), int(v))) <= int(w)


def test_roundtrip_write_parse_identical():
    gr = "p sp 4 6\na 1 2 7\na 2 1 7\na 2 3 1\na 3 2 1\na 3 4 2\na 4 3 2\n"
    co = "p aux sp co 4\nv 1 0 0\nv 2 5 0\nv 3 5 5\nv 4 0 5\n"
    g = parse_dimacs(gr.splitlines(), co.splitlines())
    gr2, co2 = write_dimacs(g)
    g2 = parse_dimacs(gr2.splitlines(), co2.splitlines())
    assert g2.xs.tolist() == g.xs.tolist()
    assert g2.ys.tolist() == g.ys.tolist()
    assert g2.edges.tolist() == g.edges.tolist()
    assert g2.checksum() == g.checksum()


def test_checksum_changes_with_content():
    g1 = build([(0, 0), (1, 0)], [(0, 1, 3)])
    g2 = build([(0, 0), (1, 0)], [(0, 1, 4)])
    assert g1.checksum() != g2.checksum()
