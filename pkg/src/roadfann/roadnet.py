"""Road-network graphs: DIMACS parsing, preprocessing, Euclidean lower bounds.

Graphs are undirected with non-negative integer weights and planar integer
coordinates. After preprocess() a network is connected, self-loop free and
immutable by convention; all indexing is dense 0-based.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

class DimacsParseError(ValueError):
    """Malformed DIMACS input; message carries the offending line number."""


class ValidationError(ValueError):
    """Structurally invalid graph (bad ids, missing coordinates, empty)."""


@dataclass(frozen=True)
class Vertex:
    id: int
    x: int
    y: int


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    w: int


@dataclass
class RoadNetwork:
    """Vertices with coordinates plus undirected weighted edges.

    `edges` is an (m, 3) int64 array of (u, v, w) with u <= v, sorted; the CSR
    adjacency is derived once and cached. `remap[new_id]` is the 0-based dense
    id the vertex had when first parsed, for auditability across preprocess.
    """

    xs: np.ndarray
    ys: np.ndarray
    edges: np.ndarray
    remap: np.ndarray | None = None
    source_arc_count: int = 0
    _csr: tuple[np.ndarray, np.ndarray, np.ndarray] | None = field(
        default=None, repr=False, compare=False
    )
    _euclid_scale: float | None = field(default=None, repr=False, compare=False)
    _checksum: str | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def vertices(self) -> Iterator[Vertex]:
        for i in range(self.n):
            yield Vertex(i, int(self.xs[i]), int(self.ys[i]))

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(indptr int64[n+1], neighbors int32[2m], weights int64[2m])."""
        if self._csr is None:
            e = self.edges
            loops = e[:, 0] == e[:, 1]
            ee = e[~loops]
            src = np.concatenate([ee[:, 0], ee[:, 1]])
            dst = np.concatenate([ee[:, 1], ee[:, 0]])
            w = np.concatenate([ee[:, 2], ee[:, 2]])
            order = np.lexsort((dst, src))
            src, dst, w = src[order], dst[order], w[order]
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._csr = (indptr, dst.astype(np.int32), w.astype(np.int64))
        return self._csr

    def neighbors(self, u: int) -> list[tuple[int, int]]:
        indptr, adj, w = self.csr()
        lo, hi = indptr[u], indptr[u + 1]
        return [(int(adj[i]), int(w[i])) for i in range(lo, hi)]

    def degree(self) -> np.ndarray:
        indptr, _, _ = self.csr()
        return np.diff(indptr)

    @property
    def euclid_scale(self) -> float:
        """Largest s with s * euclid(u, v) <= w for every non-loop edge."""
        if self._euclid_scale is None:
            e = self.edges
            mask = e[:, 0] != e[:, 1]
            dx = (self.xs[e[mask, 0]] - self.xs[e[mask, 1]]).astype(np.float64)
            dy = (self.ys[e[mask, 0]] - self.ys[e[mask, 1]]).astype(np.float64)
            euclid = np.hypot(dx, dy)
            pos = euclid > 0
            if not pos.any():
                scale = 1.0
            else:
                scale = float(np.min(e[mask, 2][pos] / euclid[pos]))
            self._euclid_scale = max(scale, 0.0)
        return self._euclid_scale

    def euclidean_lb(self, u: int, v: int) -> float:
        """euclid_scale-weighted straight-line distance; <= D(u,v) once audited.

        Engines must compare through euclidean_lb_int: flooring bounds the
        float rounding of the raw product, since any integer <= x + delta with
        delta < 1 is <= every integer >= x.
        """
        dx = float(self.xs[u] - self.xs[v])
        dy = float(self.ys[u] - self.ys[v])
        return self.euclid_scale * math.hypot(dx, dy)

    def euclidean_lb_int(self, u: int, v: int) -> int:
        """Floored Euclidean lower bound, safe against integer network distances."""
        return int(math.floor(self.euclidean_lb(u, v)))

    def checksum(self) -> str:
        """Stable content hash binding derived artifacts to this exact graph."""
        if self._checksum is None:
            h = hashlib.sha256()
            h.update(np.int64(self.n).tobytes())
            h.update(np.ascontiguousarray(self.xs, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(self.ys, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(self.edges, dtype=np.int64).tobytes())
            self._checksum = h.hexdigest()
        return self._checksum


def _canonical_edges(raw: dict[tuple[int, int], int]) -> np.ndarray:
    if not raw:
        return np.empty((0, 3), dtype=np.int64)
    arr = np.array([(u, v, w) for (u, v), w in raw.items()], dtype=np.int64)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    return arr[order]


def parse_dimacs(gr_stream: Iterable[str], co_stream: Iterable[str]) -> RoadNetwork:
    """Parse DIMACS shortest-path `.gr` arcs and `.co` coordinates.

    1-based ids are remapped to dense 0-based ids; arcs listed in both
    directions collapse to one undirected edge; parallel edges keep the
    minimum weight. Self-loops are retained for preprocess() to strip.
    """
    declared_n: int | None = None
    coords: dict[int, tuple[int, int]] = {}
    for lineno, line in enumerate(co_stream, start=1):
        s = line.strip()
        if not s or s[0] == "c":
            continue
        parts = s.split()
        if parts[0] == "p":
            continue
        if parts[0] == "v":
            try:
                vid, x, y = int(parts[1]), int(parts[2]), int(parts[3])
            except (IndexError, ValueError):
                raise DimacsParseError(f"coordinate line {lineno}: malformed {s!r}") from None
            coords[vid] = (x, y)
        else:
            raise DimacsParseError(f"coordinate line {lineno}: unknown record {parts[0]!r}")
    if not coords:
        raise ValidationError("no coordinates parsed")

    arcs: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(gr_stream, start=1):
        s = line.strip()
        if not s or s[0] == "c":
            continue
        parts = s.split()
        if parts[0] == "p":
            try:
                declared_n = int(parts[2])
            except (IndexError, ValueError):
                raise DimacsParseError(f"graph line {lineno}: malformed header {s!r}") from None
            continue
        if parts[0] == "a":
            try:
                u, v, w = int(parts[1]), int(parts[2]), int(parts[3])
            except (IndexError, ValueError):
                raise DimacsParseError(f"graph line {lineno}: malformed arc {s!r}") from None
            if w < 0:
                raise DimacsParseError(f"graph line {lineno}: negative weight {w}")
            if declared_n is not None and not (1 <= u <= declared_n and 1 <= v <= declared_n):
                raise ValidationError(
                    f"graph line {lineno}: arc ({u},{v}) outside declared range 1..{declared_n}"
                )
            arcs.append((u, v, w))
        else:
            raise DimacsParseError(f"graph line {lineno}: unknown record {parts[0]!r}")

    ids = sorted(coords)
    id_of = {src: i for i, src in enumerate(ids)}
    xs = np.array([coords[i][0] for i in ids], dtype=np.int64)
    ys = np.array([coords[i][1] for i in ids], dtype=np.int64)

    merged: dict[tuple[int, int], int] = {}
    for u, v, w in arcs:
        if u not in id_of or v not in id_of:
            missing = u if u not in id_of else v
            raise ValidationError(f"arc endpoint {missing} has no coordinate")
        a, b = id_of[u], id_of[v]
        key = (a, b) if a <= b else (b, a)
        prev = merged.get(key)
        if prev is None or w < prev:
            merged[key] = w

    return RoadNetwork(
        xs=xs,
        ys=ys,
        edges=_canonical_edges(merged),
        remap=None,
        source_arc_count=len(arcs),
    )


def _components(n: int, edges: np.ndarray) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v, _ in edges:
        if u != v:
            adj[u].append(int(v))
            adj[v].append(int(u))
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        dq = deque([start])
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    dq.append(v)
        comps.append(comp)
    return comps


def preprocess(g: RoadNetwork) -> RoadNetwork:
    """Strip self-loops, keep the largest connected component, re-densify ids.

    Component ties break toward the smallest contained original id. The
    result's remap composes with the input's, always pointing back to the ids
    of the first parse.
    """
    if g.n == 0:
        raise ValidationError("empty graph")
    loops = g.edges[:, 0] == g.edges[:, 1]
    edges = g.edges[~loops]
    origin = g.remap if g.remap is not None else np.arange(g.n, dtype=np.int64)
    comps = _components(g.n, edges)
    best = max(comps, key=lambda c: (len(c), -int(origin[min(c)])))
    keep = np.array(sorted(best), dtype=np.int64)
    new_of = np.full(g.n, -1, dtype=np.int64)
    new_of[keep] = np.arange(keep.shape[0])
    mask = new_of[edges[:, 0]] >= 0
    kept = edges[mask]
    remapped = {
        (int(new_of[u]), int(new_of[v])): int(w) for u, v, w in kept
    }
    return RoadNetwork(
        xs=g.xs[keep].copy(),
        ys=g.ys[keep].copy(),
        edges=_canonical_edges(remapped),
        remap=origin[keep].copy(),
        source_arc_count=g.source_arc_count,
    )


def induced_subgraph(g: RoadNetwork, keep: np.ndarray) -> RoadNetwork:
    """Subgraph on the given vertex ids, re-densified, remap composed."""
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    origin = g.remap if g.remap is not None else np.arange(g.n, dtype=np.int64)
    new_of = np.full(g.n, -1, dtype=np.int64)
    new_of[keep] = np.arange(keep.shape[0])
    e = g.edges
    mask = (new_of[e[:, 0]] >= 0) & (new_of[e[:, 1]] >= 0)
    kept = e[mask]
    remapped = {
        (int(new_of[u]), int(new_of[v])): int(w) for u, v, w in kept
    }
    return RoadNetwork(
        xs=g.xs[keep].copy(),
        ys=g.ys[keep].copy(),
        edges=_canonical_edges(remapped),
        remap=origin[keep].copy(),
        source_arc_count=g.source_arc_count,
    )


def is_connected(g: RoadNetwork) -> bool:
    if g.n == 0:
        return False
    indptr, adj, _ = g.csr()
    seen = np.zeros(g.n, dtype=bool)
    seen[0] = True
    dq = deque([0])
    count = 1
    while dq:
        u = dq.popleft()
        for i in range(indptr[u], indptr[u + 1]):
            v = int(adj[i])
            if not seen[v]:
                seen[v] = True
                count += 1
                dq.append(v)
    return count == g.n


def write_dimacs(g: RoadNetwork) -> tuple[str, str]:
    """Canonical DIMACS text (arcs in both directions, sorted); round-trips."""
    arcs = []
    for u, v, w in g.edges:
        arcs.append((int(u) + 1, int(v) + 1, int(w)))
        if u != v:
            arcs.append((int(v) + 1, int(u) + 1, int(w)))
    arcs.sort()
    gr_lines = [f"p sp {g.n} {len(arcs)}"]
    gr_lines += [f"a {u} {v} {w}" for u, v, w in arcs]
    co_lines = [f"p aux sp co {g.n}"]
    co_lines += [f"v {i + 1} {int(g.xs[i])} {int(g.ys[i])}" for i in range(g.n)]
    return "\n".join(gr_lines) + "\n", "\n".join(co_lines) + "\n"
