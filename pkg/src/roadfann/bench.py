"""Benchmark harness: datasets, workloads, verification battery, sweeps.

Datasets are the 9th DIMACS Implementation Challenge road networks when the
files are on disk under the data directory; otherwise a deterministic
synthetic stand-in with the same vertex/arc counts is generated so the full
pipeline stays runnable. All derived artifacts (preprocessed graphs, labels,
metric trees) are cached on disk keyed by the graph checksum.
"""

from __future__ import annotations

import gzip
import io
import json
import math
import pickle
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from roadfann import __version__
from roadfann.agg import AggregateKind
from roadfann.baseline import (
    RectTree,
    audit_euclid_bound_soundness,
    brute_force_fann,
    ier_fann_search,
    str_bulk_load,
)
from roadfann.fann import QuerySpec, fann_search
from roadfann.mtree import (
    MetricTree,
    audit_covering_radii,
    audit_equal_leaf_depth,
    audit_parent_dists,
    audit_referencing_entries,
    bulk_load,
)
from roadfann.oracle import (
    DijkstraOracle,
    DistanceOracle,
    HubLabelOracle,
    build_labels,
    dijkstra_dist,
    load_labels,
    save_labels,
)
from roadfann.roadnet import (
    RoadNetwork,
    induced_subgraph,
    parse_dimacs,
    preprocess,
    write_dimacs,
)
from roadfann.synth import synthetic_road_network

DATA_DIR_ENV = "ROADFANN_DATA_DIR"
TREE_CACHE_VERSION = 1

# DIMACS challenge datasets: name -> (vertices, arcs in the .gr file)
DATASETS = {
    "NY": (264_346, 733_846),
    "COL": (435_666, 1_057_066),
    "NW": (1_207_945, 2_840_208),
    "LKS": (2_758_119, 6_885_658),
    "W": (6_262_104, 15_248_146),
}


class EngineDisagreement(RuntimeError):
    def __init__(self, message: str, bundle_path: Path | None = None):
        super().__init__(message)
        self.bundle_path = bundle_path


@dataclass
class ExperimentGrid:
    """The experiment grid: five sweeps, one parameter varying per sweep."""

    datasets: list[str] = field(default_factory=lambda: list(DATASETS))
    m_values: list[int] = field(default_factory=lambda: [64, 128, 256, 512, 1024])
    k_values: list[int] = field(default_factory=lambda: [1, 5, 10, 15, 20])
    phi_values: list[float] = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.8, 1.0])
    c_values: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.10, 0.15, 0.20])
    default_dataset: str = "NW"
    default_m: int = 256
    default_k: int = 1
    default_phi: float = 0.5
    default_c: float = 0.10
    kinds: tuple[AggregateKind, ...] = (AggregateKind.MAX, AggregateKind.SUM)
    trials: int = 100
    seed: int = 0

    def cells(self, vary: str) -> list[tuple[int, int, float, float]]:
        """(M, k, phi, C) tuples with one parameter swept, others default."""
        base = (self.default_m, self.default_k, self.default_phi, self.default_c)
        if vary == "none":
            return [base]
        if vary == "m":
            return [(m, base[1], base[2], base[3]) for m in self.m_values]
        if vary == "k":
            return [(base[0], k, base[2], base[3]) for k in self.k_values]
        if vary == "phi":
            return [(base[0], base[1], p, base[3]) for p in self.phi_values]
        if vary == "c":
            return [(base[0], base[1], base[2], c) for c in self.c_values]
        raise ValueError(f"unknown sweep parameter {vary!r}")


def data_dir(override: str | None = None) -> Path:
    import os

    if override:
        return Path(override)
    return Path(os.environ.get(DATA_DIR_ENV, "roadfann-data"))


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="ascii")
    return open(path, "r", encoding="ascii")


def _find_dimacs_files(name: str, root: Path) -> tuple[Path, Path] | None:
    for stem in (f"USA-road-d.{name}", name):
        for ext in ("", ".gz"):
            gr = root / f"{stem}.gr{ext}"
            co = root / f"{stem}.co{ext}"
            if gr.exists() and co.exists():
                return gr, co
    return None


def load_dataset(
    name: str,
    root: Path | None = None,
    allow_synthetic: bool = True,
) -> tuple[RoadNetwork, dict]:
    """Resolve a dataset id to a preprocessed network plus metadata.

    Real DIMACS files win when present; otherwise a deterministic synthetic
    stand-in with the same vertex/arc budget is generated. Preprocessed
    graphs are cached as .npz keyed by dataset id and source.
    """
    root = root if root is not None else data_dir()
    root.mkdir(parents=True, exist_ok=True)
    found = _find_dimacs_files(name, root)
    if found:
        source = "dimacs"
    elif name in DATASETS and allow_synthetic:
        source = "synthetic"
    else:
        raise FileNotFoundError(
            f"dataset {name!r}: no DIMACS files under {root} and no synthetic fallback"
        )

    cache = root / "artifacts" / f"{name}.{source}.graph.npz"
    if cache.exists():
        z = np.load(cache)
        g = RoadNetwork(
            xs=z["xs"],
            ys=z["ys"],
            edges=z["edges"],
            remap=z["remap"],
            source_arc_count=int(z["arcs"]),
        )
        meta = json.loads(str(z["meta"]))
        return g, meta

    if source == "dimacs":
        gr_path, co_path = found
        with _open_text(gr_path) as gr, _open_text(co_path) as co:
            raw = parse_dimacs(gr, co)
    else:
        n, arcs = DATASETS[name]
        raw = synthetic_road_network(n, arcs // 2, seed=zlib.crc32(name.encode()) & 0xFFFF)
    g = preprocess(raw)
    meta = {
        "dataset": name,
        "dataset_source": source,
        "raw_vertices": raw.n,
        "raw_arcs": raw.source_arc_count,
        "vertices": g.n,
        "edges": g.m,
        "weight_variant": "distance",
        "checksum": g.checksum(),
    }
    cache.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        cache,
        xs=g.xs,
        ys=g.ys,
        edges=g.edges,
        remap=g.remap if g.remap is not None else np.arange(g.n, dtype=np.int64),
        arcs=np.int64(g.source_arc_count),
        meta=json.dumps(meta),
    )
    return g, meta


@dataclass
class Bundle:
    """Everything one dataset needs to answer queries: graph, oracle, indexes."""

    g: RoadNetwork
    oracle: DistanceOracle
    mtree: MetricTree
    rtree: RectTree
    pois: np.ndarray
    meta: dict


def build_bundle(
    name: str,
    root: Path | None = None,
    capacity: int = 64,
    seed: int = 0,
    oracle_kind: str = "hub",
    order: str = "tree",
    poi_ratio: float = 1.0,
    use_cache: bool = True,
    allow_synthetic: bool = True,
) -> Bundle:
    root = root if root is not None else data_dir()
    g, meta = load_dataset(name, root, allow_synthetic=allow_synthetic)
    art = root / "artifacts"
    art.mkdir(parents=True, exist_ok=True)

    if oracle_kind == "hub":
        label_path = art / f"{meta['dataset']}.{meta['dataset_source']}.{order}.labels"
        labels = None
        if use_cache and label_path.exists():
            try:
                labels = load_labels(label_path, g)
            except Exception:
                labels = None
        if labels is None:
            labels = build_labels(g, order=order, seed=seed)
            save_labels(labels, label_path)
        oracle: DistanceOracle = HubLabelOracle(labels)
        oracle_id = f"hub-labels(order={labels.order_policy},mean_size={labels.mean_label_size:.1f})"
    elif oracle_kind == "dijkstra":
        oracle = DijkstraOracle(g)
        oracle_id = "dijkstra"
    else:
        raise ValueError(f"unknown oracle kind {oracle_kind!r}")

    if poi_ratio >= 1.0:
        pois = np.arange(g.n, dtype=np.int64)
        poi_tag = "all"
    else:
        rng = np.random.default_rng(seed)
        count = max(1, int(round(poi_ratio * g.n)))
        pois = np.sort(rng.choice(g.n, size=count, replace=False)).astype(np.int64)
        poi_tag = f"ratio={poi_ratio}"

    tree_key = f"{meta['checksum'][:16]}.{oracle_kind}.{capacity}.{seed}.{poi_tag}"
    tree_path = art / f"mtree.{tree_key}.pkl"
    mtree = None
    if use_cache and tree_path.exists():
        with open(tree_path, "rb") as fh:
            payload = pickle.load(fh)
        if (
            payload.get("version") == TREE_CACHE_VERSION
            and payload.get("checksum") == g.checksum()
            and payload.get("oracle_kind") == oracle_kind
        ):
            mtree = payload["tree"]
    if mtree is None:
        mtree = bulk_load(pois, oracle, capacity=capacity, seed=seed)
        with open(tree_path, "wb") as fh:
            pickle.dump(
                {
                    "version": TREE_CACHE_VERSION,
                    "checksum": g.checksum(),
                    "oracle_kind": oracle_kind,
                    "capacity": capacity,
                    "seed": seed,
                    "tree": mtree,
                },
                fh,
                protocol=pickle.HIGHEST_PROTOCOL,
            )
    rtree = str_bulk_load(pois, g.xs[pois], g.ys[pois], capacity=capacity)

    meta = dict(meta)
    meta.update(
        {
            "oracle": oracle_id,
            "capacity": capacity,
            "seed": seed,
            "pois": poi_tag,
            "version": __version__,
        }
    )
    oracle.reset_counter()
    return Bundle(g=g, oracle=oracle, mtree=mtree, rtree=rtree, pois=pois, meta=meta)


def gen_queries(g: RoadNetwork, m_queries: int, coverage: float, seed: int) -> np.ndarray:
    """Sample M distinct vertices inside a random square region.

    The square is centered on a uniformly random vertex and sized so its area
    is `coverage` times the bounding-box area of all vertices, clipped to that
    box. Centers with fewer than M vertices inside are resampled (<= 100
    attempts).
    """
    if not (0.0 < coverage <= 1.0):
        raise ValueError(f"coverage must be in (0, 1], got {coverage}")
    rng = np.random.default_rng(seed)
    x0, x1 = int(g.xs.min()), int(g.xs.max())
    y0, y1 = int(g.ys.min()), int(g.ys.max())
    area = float(x1 - x0) * float(y1 - y0)
    side = math.sqrt(coverage * area)
    for _ in range(100):
        c = int(rng.integers(g.n))
        cx, cy = float(g.xs[c]), float(g.ys[c])
        lo_x = max(cx - side / 2, x0)
        hi_x = min(cx + side / 2, x1)
        lo_y = max(cy - side / 2, y0)
        hi_y = min(cy + side / 2, y1)
        inside = np.flatnonzero(
            (g.xs >= lo_x) & (g.xs <= hi_x) & (g.ys >= lo_y) & (g.ys <= hi_y)
        )
        if inside.shape[0] >= m_queries:
            pick = rng.choice(inside.shape[0], size=m_queries, replace=False)
            return np.sort(inside[pick]).astype(np.int64)
    raise ValueError(
        f"no region with {m_queries} vertices found at coverage {coverage} after 100 attempts"
    )


def trial_seed(base_seed: int, m: int, k: int, phi: float, c: float, trial: int) -> int:
    """Stable per-trial seed derived from the cell parameters."""
    key = f"{base_seed}|{m}|{k}|{phi}|{c}|{trial}".encode()
    return zlib.crc32(key)


CSV_COLUMNS = [
    "M",
    "k",
    "phi",
    "C",
    "kind",
    "engine",
    "trial",
    "g_phi_top",
    "node_accesses",
    "oracle_calls",
    "heap_pushes",
    "wall_time",
]


def _csv_header(meta: dict, grid: ExperimentGrid, vary: str) -> list[str]:
    lines = [f"# roadfann-sweep v1 vary={vary} trials={grid.trials} base_seed={grid.seed}"]
    pairs = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    lines.append(f"# {pairs}")
    lines.append(",".join(CSV_COLUMNS))
    return lines


def _write_repro_bundle(
    root: Path, bundle: Bundle, qs: QuerySpec, cell, kind, trial, seed, got, want
) -> Path:
    """Dump enough to replay a disagreement: params, query set, graph slice."""
    out = root / "artifacts" / f"disagreement.{int(time.time())}.json"
    Q = qs.Q
    pad = 2 * (int(bundle.g.xs.max() - bundle.g.xs.min()) // 100 + 1)
    lo_x, hi_x = int(bundle.g.xs[Q].min()) - pad, int(bundle.g.xs[Q].max()) + pad
    lo_y, hi_y = int(bundle.g.ys[Q].min()) - pad, int(bundle.g.ys[Q].max()) + pad
    keep = np.flatnonzero(
        (bundle.g.xs >= lo_x)
        & (bundle.g.xs <= hi_x)
        & (bundle.g.ys >= lo_y)
        & (bundle.g.ys <= hi_y)
    )
    if keep.shape[0] > 50_000:
        keep = keep[:50_000]
    sub = induced_subgraph(bundle.g, keep)
    gr_text, co_text = write_dimacs(sub)
    payload = {
        "meta": bundle.meta,
        "cell": {"M": cell[0], "k": cell[1], "phi": cell[2], "C": cell[3]},
        "kind": kind.value,
        "trial": trial,
        "trial_seed": seed,
        "query_vertices": [int(q) for q in Q],
        "fann_g": got,
        "ier_g": want,
        "graph_slice_gr": gr_text,
        "graph_slice_co": co_text,
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=1))
    return out


def run_cell(
    bundle: Bundle,
    m: int,
    k: int,
    phi: float,
    c: float,
    kind: AggregateKind,
    trials: int,
    base_seed: int,
    engines: tuple[str, ...] = ("fann", "ier"),
    root: Path | None = None,
) -> list[dict]:
    """Run one grid cell; returns per-trial rows. Aborts on engine mismatch."""
    rows = []
    for trial in range(trials):
        seed = trial_seed(base_seed, m, k, phi, c, trial)
        Q = gen_queries(bundle.g, m, c, seed)
        qs = QuerySpec(Q=Q, phi=phi, k=k, kind=kind)
        results = {}
        for engine in engines:
            if engine == "fann":
                res, stats = fann_search(bundle.mtree, bundle.oracle, qs)
            elif engine == "ier":
                res, stats = ier_fann_search(bundle.rtree, bundle.g, bundle.oracle, qs)
            else:
                raise ValueError(f"unknown engine {engine!r}")
            results[engine] = res
            rows.append(
                {
                    "M": m,
                    "k": k,
                    "phi": phi,
                    "C": c,
                    "kind": kind.value,
                    "engine": engine,
                    "trial": trial,
                    "g_phi_top": res.items[0].g_phi,
                    "node_accesses": stats.node_accesses,
                    "oracle_calls": stats.oracle_calls,
                    "heap_pushes": stats.heap_pushes,
                    "wall_time": f"{stats.wall_time:.6f}",
                }
            )
        if len(engines) == 2:
            got = sorted(results["fann"].g_values())
            want = sorted(results["ier"].g_values())
            if got != want:
                path = _write_repro_bundle(
                    root if root is not None else data_dir(),
                    bundle,
                    qs,
                    (m, k, phi, c),
                    kind,
                    trial,
                    seed,
                    got,
                    want,
                )
                raise EngineDisagreement(
                    f"engines disagree on cell M={m} k={k} phi={phi} C={c} "
                    f"kind={kind.value} trial={trial}: fann={got} ier={want} "
                    f"(repro bundle: {path})",
                    bundle_path=path,
                )
    return rows


def _mean_rows(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (r["M"], r["k"], r["phi"], r["C"], r["kind"], r["engine"])
        groups.setdefault(key, []).append(r)
    out = []
    for key, grp in sorted(groups.items(), key=lambda kv: str(kv[0])):
        mean = {
            "M": key[0],
            "k": key[1],
            "phi": key[2],
            "C": key[3],
            "kind": key[4],
            "engine": key[5],
            "trial": "mean",
            "g_phi_top": f"{np.mean([r['g_phi_top'] for r in grp]):.3f}",
            "node_accesses": f"{np.mean([r['node_accesses'] for r in grp]):.3f}",
            "oracle_calls": f"{np.mean([r['oracle_calls'] for r in grp]):.3f}",
            "heap_pushes": f"{np.mean([r['heap_pushes'] for r in grp]):.3f}",
            "wall_time": f"{np.mean([float(r['wall_time']) for r in grp]):.6f}",
        }
        out.append(mean)
    return out


def run_sweep(
    bundle: Bundle,
    grid: ExperimentGrid,
    vary: str,
    engines: tuple[str, ...] = ("fann", "ier"),
    kinds: tuple[AggregateKind, ...] | None = None,
    root: Path | None = None,
) -> tuple[list[dict], list[str]]:
    """Run a one-parameter sweep; returns (rows incl. means, csv lines)."""
    kinds = kinds if kinds is not None else grid.kinds
    rows: list[dict] = []
    for cell in grid.cells(vary):
        m, k, phi, c = cell
        for kind in kinds:
            rows.extend(
                run_cell(
                    bundle, m, k, phi, c, kind, grid.trials, grid.seed, engines, root
                )
            )
    all_rows = rows + _mean_rows(rows)
    lines = _csv_header(bundle.meta, grid, vary)
    for r in all_rows:
        lines.append(",".join(str(r[c]) for c in CSV_COLUMNS))
    return all_rows, lines


@dataclass
class AuditResult:
    name: str
    ok: bool
    detail: str = ""


def verify_bundle(
    bundle: Bundle,
    samples: int = 2000,
    seed: int = 0,
    full_tree_audit: bool | None = None,
) -> list[AuditResult]:
    """The verification battery; every audit independent of the search path."""
    g = bundle.g
    oracle = bundle.oracle
    rng = np.random.default_rng(seed)
    results: list[AuditResult] = []

    def check(name: str, problems: list[str]) -> None:
        results.append(
            AuditResult(name, not problems, "; ".join(problems[:5]))
        )

    # metric axioms on sampled pairs/triples
    probs = []
    for _ in range(min(samples, 500)):
        a, b, c = (int(x) for x in rng.integers(0, g.n, size=3))
        dab = oracle.dist(a, b)
        if oracle.dist(a, a) != 0:
            probs.append(f"identity fails at {a}")
        if dab != oracle.dist(b, a):
            probs.append(f"symmetry fails at ({a},{b})")
        if oracle.dist(a, c) > dab + oracle.dist(b, c):
            probs.append(f"triangle fails at ({a},{b},{c})")
    check("metric-axioms", probs)

    # oracle vs Dijkstra ground truth (sampled sources, batched targets)
    probs = []
    from roadfann import _kernels

    indptr, adj, w = g.csr()
    n_sources = max(1, min(20, samples // 100))
    for _ in range(n_sources):
        s = int(rng.integers(g.n))
        dist, _ = _kernels.sssp(indptr, adj, w, s)
        targets = rng.integers(0, g.n, size=min(50, g.n)).astype(np.int64)
        got = oracle.one_to_many(s, targets)
        if not np.array_equal(got, dist[targets]):
            bad = targets[got != dist[targets]][:3]
            probs.append(f"oracle != dijkstra from {s} at targets {bad.tolist()}")
    check("oracle-vs-dijkstra", probs)

    # tree structure audits
    if full_tree_audit is None:
        full_tree_audit = bundle.mtree.object_count <= 10_000
    if full_tree_audit:
        check("covering-radii", audit_covering_radii(bundle.mtree, oracle))
        check("parent-dists", audit_parent_dists(bundle.mtree, oracle))
    else:
        probs = []
        nodes = [n for n in bundle.mtree.nodes() if not n.is_leaf]
        for _ in range(min(200, samples)):
            node = nodes[int(rng.integers(len(nodes)))]
            i = int(rng.integers(len(node.routing_entries)))
            e = node.routing_entries[i]
            objs = bundle.mtree.subtree_objects(e.child)
            if objs.shape[0] > 500:
                objs = objs[rng.integers(0, objs.shape[0], size=500)]
            worst = int(oracle.one_to_many(e.routing_oid, objs).max())
            if worst > e.radius:
                probs.append(f"radius violated at entry {e.routing_oid}")
            if node.parent_oid is not None:
                true = oracle.dist(node.parent_oid, e.routing_oid)
                if true != e.parent_dist:
                    probs.append(f"parent_dist wrong at entry {e.routing_oid}")
        check("covering-radii+parent-dists(sampled)", probs)
    check("referencing-entries", audit_referencing_entries(bundle.mtree))
    check("equal-leaf-depth", audit_equal_leaf_depth(bundle.mtree))

    # euclidean scale soundness: full per-edge audit plus sampled pairs
    probs = []
    e = g.edges
    nonloop = e[:, 0] != e[:, 1]
    dx = (g.xs[e[nonloop, 0]] - g.xs[e[nonloop, 1]]).astype(np.float64)
    dy = (g.ys[e[nonloop, 0]] - g.ys[e[nonloop, 1]]).astype(np.float64)
    lbs = np.floor(np.hypot(dx, dy) * g.euclid_scale).astype(np.int64)
    bad = np.flatnonzero(lbs > e[nonloop, 2])
    if bad.shape[0]:
        probs.append(f"{bad.shape[0]} edges with floored euclid bound > weight")
    for _ in range(min(samples, 500)):
        u, v = int(rng.integers(g.n)), int(rng.integers(g.n))
        if math.floor(g.euclidean_lb(u, v)) > oracle.dist(u, v):
            probs.append(f"euclid bound > network distance for ({u},{v})")
    check("euclid-scale-soundness", probs)

    # rectangle tree euclidean aggregate bound
    m_q = min(8, g.n)
    Q = rng.choice(g.n, size=m_q, replace=False)
    qs = QuerySpec(Q=Q, phi=0.5, k=1, kind=AggregateKind.SUM)
    check(
        "rtree-euclid-aggregate-bound",
        audit_euclid_bound_soundness(bundle.rtree, g, oracle, qs, sample=200, seed=seed),
    )

    # small-instance differential exactness, independent of this dataset
    probs = []
    sg = synthetic_road_network(400, 560, seed=seed + 1)
    sor = DijkstraOracle(sg)
    spois = np.sort(rng.choice(sg.n, size=150, replace=False))
    stree = bulk_load(spois, sor, capacity=8, seed=0)
    srt = str_bulk_load(spois, sg.xs[spois], sg.ys[spois], capacity=8)
    for kind in (AggregateKind.MAX, AggregateKind.SUM):
        for phi in (0.5, 1.0):
            sq = rng.choice(sg.n, size=6, replace=False)
            sqs = QuerySpec(Q=sq, phi=phi, k=3, kind=kind)
            want = brute_force_fann(spois, sor, sqs).g_values()
            got_f, _ = fann_search(stree, sor, sqs)
            got_i, _ = ier_fann_search(srt, sg, sor, sqs)
            if got_f.g_values() != want or got_i.g_values() != want:
                probs.append(f"differential mismatch at kind={kind.value} phi={phi}")
    check("small-instance-differential", probs)

    return results
