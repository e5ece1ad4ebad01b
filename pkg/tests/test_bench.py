import gzip
import json
import math

import numpy as np
import pytest

from roadfann.agg import AggregateKind
from roadfann.bench import (
    DATASETS,
    Bundle,
    ExperimentGrid,
    build_bundle,
    gen_queries,
    load_dataset,
    run_cell,
    run_sweep,
    trial_seed,
    verify_bundle,
)
from roadfann.cli import main as cli_main
from roadfann.roadnet import write_dimacs
from roadfann.synth import synthetic_road_network

from conftest import random_connected_graph


@pytest.fixture(scope="module")
def tiny_bundle(tmp_path_factory):
    # a small synthetic dataset exercised through the real bundle path
    root = tmp_path_factory.mktemp("data")
    g = synthetic_road_network(900, 1250, seed=3)
    gr, co = write_dimacs(g)
    (root / "TINY.gr").write_text(gr)
    (root / "TINY.co").write_text(co)
    return build_bundle("TINY", root=root, capacity=16, seed=0), root


def test_gen_queries_geometry_and_determinism():
    g = synthetic_road_network(2000, 2800, seed=1)
    for c in (0.05, 0.10, 1.0):
        Q = gen_queries(g, 32, c, seed=7)
        assert Q.shape[0] == 32
        assert len(set(Q.tolist())) == 32
        x0, x1 = int(g.xs.min()), int(g.xs.max())
        y0, y1 = int(g.ys.min()), int(g.ys.max())
        side = math.sqrt(c * float(x1 - x0) * float(y1 - y0))
        assert int(g.xs[Q].max() - g.xs[Q].min()) <= side + 1
        assert int(g.ys[Q].max() - g.ys[Q].min()) <= side + 1
    assert np.array_equal(gen_queries(g, 16, 0.1, 5), gen_queries(g, 16, 0.1, 5))
    assert not np.array_equal(gen_queries(g, 16, 0.1, 5), gen_queries(g, 16, 0.1, 6))


def test_gen_queries_single_vertex_and_errors():
    g = synthetic_road_network(500, 700, seed=2)
    assert gen_queries(g, 1, 0.05, 3).shape[0] == 1
    with pytest.raises(ValueError, match="coverage"):
        gen_queries(g, 4, 0.0, 1)
    with pytest.raises(ValueError, match="100 attempts"):
        gen_queries(g, g.n + 10, 0.01, 1)


def test_load_dataset_synthetic_fallback_and_cache(tmp_path):
    grid_sizes = DATASETS["NY"]
    g, meta = load_dataset("NY", tmp_path)
    assert meta["dataset_source"] == "synthetic"
    assert meta["raw_vertices"] == grid_sizes[0]
    assert meta["raw_arcs"] == grid_sizes[1]
    # second load comes from the npz cache and is identical
    g2, meta2 = load_dataset("NY", tmp_path)
    assert meta2 == meta
    assert g2.checksum() == g.checksum()


def test_load_dataset_real_files_preferred(tmp_path):
    g = synthetic_road_network(300, 420, seed=9)
    gr, co = write_dimacs(g)
    with gzip.open(tmp_path / "USA-road-d.XX.gr.gz", "wt") as f:
        f.write(gr)
    with gzip.open(tmp_path / "USA-road-d.XX.co.gz", "wt") as f:
        f.write(co)
    loaded, meta = load_dataset("XX", tmp_path)
    assert meta["dataset_source"] == "dimacs"
    assert loaded.n == g.n
    with pytest.raises(FileNotFoundError):
        load_dataset("NOPE", tmp_path)


def test_bundle_build_and_caches(tiny_bundle):
    bundle, root = tiny_bundle
    assert bundle.mtree.object_count == bundle.g.n
    assert bundle.rtree.object_count == bundle.g.n
    assert (root / "artifacts").exists()
    labels = list((root / "artifacts").glob("*.labels"))
    trees = list((root / "artifacts").glob("mtree.*.pkl"))
    assert labels and trees
    # rebuilding hits the caches and produces an identical tree shape
    again = build_bundle("TINY", root=root, capacity=16, seed=0)
    s1 = [(n.level, n.parent_oid) for n in bundle.mtree.nodes()]
    s2 = [(n.level, n.parent_oid) for n in again.mtree.nodes()]
    assert s1 == s2


def test_run_cell_rows_and_agreement(tiny_bundle):
    bundle, root = tiny_bundle
    rows = run_cell(bundle, m=8, k=2, phi=0.5, c=0.2, kind=AggregateKind.MAX,
                    trials=3, base_seed=11, root=root)
    assert len(rows) == 6  # trials x engines
    fann_rows = [r for r in rows if r["engine"] == "fann"]
    ier_rows = [r for r in rows if r["engine"] == "ier"]
    for fr, ir in zip(fann_rows, ier_rows):
        assert fr["g_phi_top"] == ir["g_phi_top"]


def test_sweep_csv_deterministic_except_wall_time(tiny_bundle):
    bundle, root = tiny_bundle
    grid = ExperimentGrid(trials=2, seed=5, default_m=6, default_k=1, default_c=0.3)
    _, lines1 = run_sweep(bundle, grid, "none", root=root)
    _, lines2 = run_sweep(bundle, grid, "none", root=root)

    def strip_wall(ls):
        return [",".join(l.split(",")[:-1]) for l in ls]

    assert strip_wall(lines1) == strip_wall(lines2)
    # header carries the required metadata
    head = "\n".join(lines1[:2])
    assert "oracle=" in head and "weight_variant=distance" in head and "seed=" in head
    # row count: header(3) + trials*engines*kinds + mean rows(engines*kinds)
    assert len(lines1) == 3 + 2 * 2 * 2 + 2 * 2


def test_sweep_row_count_toy_grid(tiny_bundle):
    bundle, root = tiny_bundle
    grid = ExperimentGrid(trials=2, seed=1, default_m=6, default_c=0.3,
                          phi_values=[0.5, 1.0])
    rows, _ = run_sweep(bundle, grid, "phi", root=root)
    trial_rows = [r for r in rows if r["trial"] != "mean"]
    # cells(2) x kinds(2) x engines(2) x trials(2)
    assert len(trial_rows) == 2 * 2 * 2 * 2


def test_trial_seed_stable():
    assert trial_seed(1, 256, 1, 0.5, 0.1, 0) == trial_seed(1, 256, 1, 0.5, 0.1, 0)
    assert trial_seed(1, 256, 1, 0.5, 0.1, 0) != trial_seed(1, 256, 1, 0.5, 0.1, 1)
    assert trial_seed(2, 256, 1, 0.5, 0.1, 0) != trial_seed(1, 256, 1, 0.5, 0.1, 0)


def test_verify_bundle_passes_and_detects_planted_fault(tiny_bundle):
    bundle, root = tiny_bundle
    results = verify_bundle(bundle, samples=400, seed=2)
    assert all(r.ok for r in results), [r for r in results if not r.ok]
    node = next(n for n in bundle.mtree.nodes() if not n.is_leaf)
    saved = node.routing_entries[0].radius
    node.routing_entries[0].radius = -1
    results = verify_bundle(bundle, samples=400, seed=2)
    assert any(not r.ok and "radii" in r.name for r in results)
    node.routing_entries[0].radius = saved


def test_cli_ingest_and_query_smoke(tmp_path, capsys):
    g = synthetic_road_network(600, 840, seed=4)
    gr, co = write_dimacs(g)
    (tmp_path / "T2.gr").write_text(gr)
    (tmp_path / "T2.co").write_text(co)
    rc = cli_main(["ingest", "--dataset", "T2", "--data-dir", str(tmp_path)])
    assert rc == 0
    meta = json.loads(capsys.readouterr().out)
    assert meta["dataset_source"] == "dimacs"

    rc = cli_main([
        "query", "--dataset", "T2", "--data-dir", str(tmp_path),
        "--capacity", "16", "--m", "6", "--k", "2", "--phi", "0.5",
        "--coverage", "0.4", "--agg", "max",
    ])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    fann = out["engines"]["fann-max"]
    ier = out["engines"]["ier-max"]
    assert [c["g_phi"] for c in fann["results"]] == [c["g_phi"] for c in ier["results"]]
    assert fann["stats"]["node_accesses"] >= 1

    rc = cli_main(["verify", "--dataset", "T2", "--data-dir", str(tmp_path), "--capacity", "16"])
    assert rc == 0

    rc = cli_main([
        "sweep", "--dataset", "T2", "--data-dir", str(tmp_path), "--capacity", "16",
        "--vary", "none", "--trials", "2", "--m", "5", "--coverage", "0.4",
        "--agg", "sum", "--out", str(tmp_path / "out.csv"),
    ])
    assert rc == 0
    assert (tmp_path / "out.csv").exists()


def test_cli_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        cli_main(["sweep", "--vary", "bogus"])
    assert exc.value.code == 1


def test_cli_build_commands(tmp_path, capsys):
    g = synthetic_road_network(400, 560, seed=6)
    gr, co = write_dimacs(g)
    (tmp_path / "T3.gr").write_text(gr)
    (tmp_path / "T3.co").write_text(co)
    for cmd in ("build-labels", "build-mtree", "build-rtree"):
        rc = cli_main([cmd, "--dataset", "T3", "--data-dir", str(tmp_path), "--capacity", "16"])
        assert rc == 0
        json.loads(capsys.readouterr().out)
