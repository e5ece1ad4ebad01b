"""Command-line harness: ingest, build, verify, query, sweep.

Exit codes: 0 ok, 1 usage error, 2 verification failure, 3 engine
disagreement. Dataset files are looked up under --data-dir (or
$ROADFANN_DATA_DIR); known dataset ids fall back to deterministic synthetic
stand-ins when the DIMACS files are absent.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from roadfann.agg import AggregateKind
from roadfann.baseline import ier_fann_search, str_bulk_load
from roadfann.bench import (
    DATASETS,
    Bundle,
    EngineDisagreement,
    ExperimentGrid,
    build_bundle,
    data_dir,
    gen_queries,
    load_dataset,
    run_sweep,
    trial_seed,
    verify_bundle,
)
from roadfann.fann import QuerySpec, fann_search
from roadfann.oracle import build_labels, save_labels


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", default="NY", help=f"dataset id ({', '.join(DATASETS)}) or file stem")
    p.add_argument("--data-dir", default=None, help="data directory (default $ROADFANN_DATA_DIR or ./roadfann-data)")
    p.add_argument("--capacity", type=int, default=64, help="node capacity for both trees")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p.add_argument("--order", default="tree", choices=["tree", "degree"], help="hub ordering policy")
    p.add_argument("--oracle", default="hub", choices=["hub", "dijkstra"], help="distance oracle")
    p.add_argument("--poi-ratio", type=float, default=1.0, help="POI sampling ratio (1.0 = every vertex)")


def _kinds(arg: str) -> tuple[AggregateKind, ...]:
    if arg == "both":
        return (AggregateKind.MAX, AggregateKind.SUM)
    return (AggregateKind.parse(arg),)


def _bundle_from_args(args) -> Bundle:
    return build_bundle(
        args.dataset,
        root=data_dir(args.data_dir),
        capacity=args.capacity,
        seed=args.seed,
        oracle_kind=args.oracle,
        order=args.order,
        poi_ratio=args.poi_ratio,
    )


def cmd_ingest(args) -> int:
    g, meta = load_dataset(args.dataset, data_dir(args.data_dir))
    print(json.dumps(meta, indent=1))
    return 0


def cmd_build_labels(args) -> int:
    root = data_dir(args.data_dir)
    g, meta = load_dataset(args.dataset, root)
    labels = build_labels(g, order=args.order, seed=args.seed)
    path = root / "artifacts" / f"{meta['dataset']}.{meta['dataset_source']}.{args.order}.labels"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_labels(labels, path)
    print(
        json.dumps(
            {
                "labels": str(path),
                "vertices": labels.n,
                "entries": labels.total_entries,
                "mean_label_size": round(labels.mean_label_size, 2),
                "order_policy": labels.order_policy,
            },
            indent=1,
        )
    )
    return 0


def cmd_build_mtree(args) -> int:
    bundle = _bundle_from_args(args)
    t = bundle.mtree
    print(
        json.dumps(
            {
                "height": t.height,
                "objects": t.object_count,
                "capacity": t.capacity,
                "nodes": sum(1 for _ in t.nodes()),
            },
            indent=1,
        )
    )
    return 0


def cmd_build_rtree(args) -> int:
    root = data_dir(args.data_dir)
    g, meta = load_dataset(args.dataset, root)
    if args.poi_ratio >= 1.0:
        pois = np.arange(g.n, dtype=np.int64)
    else:
        rng = np.random.default_rng(args.seed)
        pois = np.sort(rng.choice(g.n, size=max(1, int(args.poi_ratio * g.n)), replace=False))
    rt = str_bulk_load(pois, g.xs[pois], g.ys[pois], capacity=args.capacity)
    print(
        json.dumps(
            {
                "height": rt.height,
                "objects": rt.object_count,
                "capacity": rt.capacity,
                "nodes": sum(1 for _ in rt.nodes()),
            },
            indent=1,
        )
    )
    return 0


def cmd_verify(args) -> int:
    bundle = _bundle_from_args(args)
    results = verify_bundle(bundle, seed=args.seed)
    ok = True
    for r in results:
        status = "ok" if r.ok else "FAIL"
        line = f"[{status}] {r.name}"
        if r.detail:
            line += f": {r.detail}"
        print(line)
        ok = ok and r.ok
    return 0 if ok else 2


def cmd_query(args) -> int:
    bundle = _bundle_from_args(args)
    seed = trial_seed(args.seed, args.m, args.k, args.phi, args.coverage, 0)
    Q = gen_queries(bundle.g, args.m, args.coverage, seed)
    out = {"meta": bundle.meta, "params": {
        "M": args.m, "k": args.k, "phi": args.phi, "C": args.coverage,
        "agg": args.agg, "seed": args.seed,
    }, "query_vertices": Q.tolist(), "engines": {}}
    engines = ("fann", "ier") if args.engine == "both" else (args.engine,)
    for kind in _kinds(args.agg):
        for engine in engines:
            qs = QuerySpec(Q=Q, phi=args.phi, k=args.k, kind=kind)
            if engine == "fann":
                res, stats = fann_search(bundle.mtree, bundle.oracle, qs)
            else:
                res, stats = ier_fann_search(bundle.rtree, bundle.g, bundle.oracle, qs)
            out["engines"][f"{engine}-{kind.value}"] = {
                "results": [dataclasses.asdict(c) for c in res.items],
                "stats": {
                    k: v
                    for k, v in dataclasses.asdict(stats).items()
                    if v is not None and k not in ("prunes", "bound_trace")
                },
            }
    print(json.dumps(out, indent=1))
    return 0


def cmd_sweep(args) -> int:
    bundle = _bundle_from_args(args)
    grid = ExperimentGrid(trials=args.trials, seed=args.seed)
    if args.m:
        grid.default_m = args.m
    if args.k:
        grid.default_k = args.k
    if args.phi:
        grid.default_phi = args.phi
    if args.coverage:
        grid.default_c = args.coverage
    engines = ("fann", "ier") if args.engine == "both" else (args.engine,)
    try:
        rows, lines = run_sweep(
            bundle,
            grid,
            args.vary,
            engines=engines,
            kinds=_kinds(args.agg),
            root=data_dir(args.data_dir),
        )
    except EngineDisagreement as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = _Parser(prog="roadfann", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse + preprocess a dataset (cached)")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-labels", help="build and persist hub labels")
    _add_common(p)
    p.set_defaults(func=cmd_build_labels)

    p = sub.add_parser("build-mtree", help="bulk-load the metric tree (cached)")
    _add_common(p)
    p.set_defaults(func=cmd_build_mtree)

    p = sub.add_parser("build-rtree", help="bulk-load the rectangle tree")
    _add_common(p)
    p.set_defaults(func=cmd_build_rtree)

    p = sub.add_parser("verify", help="run the audit battery")
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("query", help="run one query, print JSON")
    _add_common(p)
    p.add_argument("--m", type=int, default=256, help="query set size M")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--coverage", type=float, default=0.10)
    p.add_argument("--agg", default="both", choices=["max", "sum", "both"])
    p.add_argument("--engine", default="both", choices=["fann", "ier", "both"])
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("sweep", help="run an experiment sweep, emit CSV")
    _add_common(p)
    p.add_argument("--vary", default="none", choices=["none", "m", "k", "phi", "c"])
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--phi", type=float, default=None)
    p.add_argument("--coverage", type=float, default=None)
    p.add_argument("--agg", default="both", choices=["max", "sum", "both"])
    p.add_argument("--engine", default="both", choices=["fann", "ier", "both"])
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
