"""Deterministic synthetic road networks for scale testing.

Jittered-grid street graphs with the structural features that shape real
road-network distance fields: tiered low-detour highway shortcuts, and
rivers that block crossings except at periodic bridges (the main source of
Euclidean-vs-network divergence in physical road graphs). Connected by
construction, average degree close to the DIMACS physical-distance graphs,
and every weight >= the straight-line distance so Euclidean lower bounds
stay sound. Used by the benchmark harness as a stand-in when the real
DIMACS files are not on disk.
"""

from __future__ import annotations

import math

import numpy as np

from roadfann.roadnet import RoadNetwork

GRID_SPACING = 1000
JITTER = 300
# physical-distance weights: individual road segments are nearly straight;
# the Euclidean-vs-network gap comes from topology (Manhattan travel, rivers)
STREET_DETOUR = (1.02, 1.12)
# (stride, detour) per highway tier: arterials, highways, interstates --
# axis-aligned, so diagonal travel keeps the Manhattan path factor
HIGHWAY_TIERS = ((8, 1.05), (32, 1.03), (128, 1.02))
# rivers run between rows r, r+1 where r % RIVER_ROW_STRIDE == RIVER_ROW_PHASE
# (and between columns likewise); bridges pierce them every BRIDGE_STRIDE,
# funneling long paths: long-range detour grows the way real maps behave.
# BRIDGE_STRIDE < min river stride so every river-bounded island holds a
# bridge in both axes: connectivity by construction.
RIVER_ROW_STRIDE, RIVER_ROW_PHASE = 37, 20
RIVER_COL_STRIDE, RIVER_COL_PHASE = 41, 26
BRIDGE_STRIDE, BRIDGE_PHASE = 24, 4
# mandatory vertical streets every SKELETON_STRIDE columns keep every
# river-bounded island internally connected by construction
SKELETON_STRIDE = 8
# vertex density varies like real maps: bands of DENSITY_BAND grid cells are
# stretched by a sampled factor (1 = urban core, larger = rural)
DENSITY_BAND = 32
DENSITY_FACTORS = (1, 1, 2, 4)


def synthetic_road_network(
    n_vertices: int,
    n_undirected_edges: int,
    seed: int = 0,
) -> RoadNetwork:
    """Build a connected road-like graph with exactly the requested sizes.

    Layout: a sqrt(n) x sqrt(n) jittered grid trimmed to n_vertices. The
    mandatory skeleton (horizontal streets, vertical streets on every
    bridge column) stays connected across rivers; remaining vertical
    streets are sampled to hit the edge target; tiered highway shortcuts
    honor river crossings like every other edge.
    """
    n = int(n_vertices)
    cols = int(math.ceil(math.sqrt(n)))
    rows = int(math.ceil(n / cols))
    rng = np.random.default_rng(seed)

    ids = np.arange(n, dtype=np.int64)
    r = ids // cols
    c = ids % cols
    # separable density warp: per-band stretch factors expand rural space
    col_bands = -(-cols // DENSITY_BAND)
    row_bands = -(-rows // DENSITY_BAND)
    col_factor = rng.choice(DENSITY_FACTORS, size=col_bands)
    row_factor = rng.choice(DENSITY_FACTORS, size=row_bands)
    col_width = np.repeat(col_factor, DENSITY_BAND)[:cols] * GRID_SPACING
    row_height = np.repeat(row_factor, DENSITY_BAND)[:rows] * GRID_SPACING
    col_x = np.concatenate([[0], np.cumsum(col_width)])[:-1]
    row_y = np.concatenate([[0], np.cumsum(row_height)])[:-1]
    xs = col_x[c] + rng.integers(-JITTER, JITTER + 1, size=n)
    ys = row_y[r] + rng.integers(-JITTER, JITTER + 1, size=n)

    def euclid(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        dx = (xs[u] - xs[v]).astype(np.float64)
        dy = (ys[u] - ys[v]).astype(np.float64)
        return np.hypot(dx, dy)

    def _river_in(lo: np.ndarray, hi: np.ndarray, stride: int, phase: int) -> np.ndarray:
        """True where some index in [lo, hi-1] hits the river lattice."""
        first = -((-(lo - phase)) // stride)  # ceil((lo - phase) / stride)
        last = (hi - 1 - phase) // stride
        return last >= first

    def row_river_between(r_lo: np.ndarray, r_hi: np.ndarray) -> np.ndarray:
        return _river_in(r_lo, r_hi, RIVER_ROW_STRIDE, RIVER_ROW_PHASE)

    def col_river_between(c_lo: np.ndarray, c_hi: np.ndarray) -> np.ndarray:
        return _river_in(c_lo, c_hi, RIVER_COL_STRIDE, RIVER_COL_PHASE)

    def crossing_allowed(u_fixed: np.ndarray) -> np.ndarray:
        """Bridges pierce rivers where the perpendicular index is periodic."""
        return u_fixed % BRIDGE_STRIDE == BRIDGE_PHASE

    # horizontal streets (r, c)-(r, c+1): blocked by column rivers off bridge rows
    right_u = ids[(c < cols - 1) & (ids + 1 < n)]
    rr, rc = right_u // cols, right_u % cols
    right_block = col_river_between(rc, rc + 1) & ~crossing_allowed(rr)
    right_u = right_u[~right_block]
    right_v = right_u + 1

    # vertical streets (r, c)-(r+1, c): blocked by row rivers off bridge columns
    down_all = ids[ids + cols < n]
    dr, dc = down_all // cols, down_all % cols
    crosses_river = row_river_between(dr, dr + 1)
    down_block = crosses_river & ~crossing_allowed(dc)
    keep = ~down_block
    down_all = down_all[keep]
    dc = down_all % cols
    # skeleton columns and every surviving river bridge are mandatory:
    # islands stay internally connected and every river stays crossable
    mandatory_mask = (dc % SKELETON_STRIDE == 0) | crosses_river[keep]
    mandatory_down = down_all[mandatory_mask]
    optional_down = down_all[~mandatory_mask]

    backbone_u = np.concatenate([right_u, mandatory_down])
    backbone_v = np.concatenate([right_v, mandatory_down + cols])

    # tiered highways along every stride-th row and column, river-aware
    hw_u_parts, hw_v_parts, hw_d_parts = [], [], []
    for s, tier_detour in HIGHWAY_TIERS:
        hu = ids[(r % s == 0) & (c % s == 0) & (c + s < cols) & (ids + s < n)]
        hr, hc = hu // cols, hu % cols
        keep = ~(col_river_between(hc, hc + s) & ~crossing_allowed(hr))
        hu = hu[keep]
        hw_u_parts.append(hu)
        hw_v_parts.append(hu + s)
        hw_d_parts.append(np.full(hu.shape[0], tier_detour))

        vu = ids[(r % s == 0) & (c % s == 0) & (ids + s * cols < n)]
        vr, vc = vu // cols, vu % cols
        keep = ~(row_river_between(vr, vr + s) & ~crossing_allowed(vc))
        vu = vu[keep]
        hw_u_parts.append(vu)
        hw_v_parts.append(vu + s * cols)
        hw_d_parts.append(np.full(vu.shape[0], tier_detour))
    hw_u = np.concatenate(hw_u_parts)
    hw_v = np.concatenate(hw_v_parts)
    hw_detour = np.concatenate(hw_d_parts)

    base = backbone_u.shape[0] + hw_u.shape[0]
    need = n_undirected_edges - base
    if need < 0:
        raise ValueError(
            f"edge target {n_undirected_edges} below skeleton+highways ({base})"
        )
    if need > optional_down.shape[0]:
        raise ValueError(
            f"edge target {n_undirected_edges} exceeds grid capacity "
            f"({base + optional_down.shape[0]})"
        )
    pick = rng.choice(optional_down.shape[0], size=need, replace=False)
    eu = np.concatenate([backbone_u, optional_down[pick]])
    ev = np.concatenate([backbone_v, optional_down[pick] + cols])
    detour = rng.uniform(STREET_DETOUR[0], STREET_DETOUR[1], size=eu.shape[0])
    ew = np.ceil(euclid(eu, ev) * detour).astype(np.int64)
    hw_w = np.ceil(euclid(hw_u, hw_v) * hw_detour).astype(np.int64)

    u = np.concatenate([eu, hw_u])
    v = np.concatenate([ev, hw_v])
    w = np.concatenate([ew, hw_w])
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    edges = np.stack([lo, hi, w], axis=1)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]

    return RoadNetwork(
        xs=xs.astype(np.int64),
        ys=ys.astype(np.int64),
        edges=edges,
        source_arc_count=2 * edges.shape[0],
    )
