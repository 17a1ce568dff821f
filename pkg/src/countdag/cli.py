"""Command-line surface: simulate, discover, diagnose, eval, bench.

Exit codes: 0 success, 2 argument error, 3 data/parse error, 4 internal
numerical error.  All vertex indices in files and arguments are 0-based;
generated CSV columns carry 1-based display names X1..Xn.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .evaluation import (
    BENCH_HEADER,
    EvalReport,
    directed_edge_metrics,
    evaluate_oriented,
    run_benchmark,
)
from .graph import Dag
from .path_cumulants import TestConfig, lambda_profile
from .cumulants import cumulant_slices
from .simulator import CountDataset, DataFormatError, SimConfig, random_dag, sample
from .structure_learning import OrientedGraph, SearchConfig, Skeleton, discover

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _range_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'lo,hi', got {text!r}"
        ) from None
    return lo, hi


def _value_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--samples", type=int, default=30000, help="rows to draw")
    p.add_argument("--nodes", type=int, default=10, help="number of variables")
    p.add_argument("--indegree", type=float, default=3.0, help="expected indegree")
    p.add_argument("--alpha-range", type=_range_pair, default=(0.1, 0.5),
                   metavar="LO,HI", help="edge coefficient range")
    p.add_argument("--mu-range", type=_range_pair, default=(1.0, 3.0),
                   metavar="LO,HI", help="noise mean range")


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-order", type=int, default=4, metavar="K",
                   help="highest path-summary order tested")
    p.add_argument("--resamples", type=int, default=200, metavar="N",
                   help="bootstrap resamples per pair")
    p.add_argument("--alpha-level", type=float, default=0.05, metavar="P",
                   help="significance level of the zero tests")
    p.add_argument("--threshold", type=float, default=0.1, metavar="TAU",
                   help="magnitude fallback threshold relative to the order-1 value")
    p.add_argument("--no-fallback", action="store_true",
                   help="disable the magnitude fallback when the tests are inconclusive")


def _test_config(args) -> TestConfig:
    return TestConfig(
        max_order=args.max_order,
        num_resamples=args.resamples,
        significance=args.alpha_level,
        threshold=args.threshold,
        threshold_fallback=not args.no_fallback,
    )


def _sim_config(args, seed: int) -> SimConfig:
    return SimConfig(
        sample_size=args.samples,
        num_vertices=args.nodes,
        expected_indegree=args.indegree,
        alpha_range=tuple(args.alpha_range),
        mu_range=tuple(args.mu_range),
        rng_seed=seed,
    )


def _write_json(path: Path, doc) -> None:
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_graph_json(path: Path) -> tuple[int, set, set]:
    """(num_vertices, directed edge set, undirected pair set) from a graph file."""
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        n = int(doc["num_vertices"])
        directed = {(int(e["from"]), int(e["to"])) for e in doc.get("edges", [])}
        undirected = {(int(a), int(b)) for a, b in doc.get("undirected", [])}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: malformed graph document: {exc}") from exc
    return n, directed, undirected


def _oriented_json(oriented: OrientedGraph) -> dict:
    return {
        "num_vertices": oriented.num_vertices,
        "edges": [
            {
                "from": i,
                "to": j,
                "decided_at_k": rec.decided_at_k,
                "p_forward": rec.p_forward,
                "p_backward": rec.p_backward,
                "method": rec.method,
            }
            for (i, j), rec in sorted(oriented.directed.items())
        ],
        "undirected": [list(p) for p in sorted(oriented.undirected)],
    }


def cmd_simulate(args) -> int:
    cfg = _sim_config(args, args.seed)
    rng = np.random.default_rng(cfg.rng_seed)
    truth, mus = random_dag(cfg, rng)
    data = sample(truth, mus, cfg.sample_size, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        data.to_csv(out / "data.csv")
    except OSError as exc:
        raise OSError(f"cannot write {out / 'data.csv'}: {exc}") from exc
    doc = truth.to_json_dict(mus)
    doc["seed"] = args.seed
    _write_json(out / "truth.json", doc)
    print(f"wrote {out / 'data.csv'} ({cfg.sample_size} rows, {cfg.num_vertices} columns)")
    print(f"wrote {out / 'truth.json'} ({truth.num_edges} edges)")
    return EXIT_OK


def cmd_discover(args) -> int:
    data = CountDataset.from_csv(args.data)
    t0 = time.perf_counter()
    result = discover(
        data,
        SearchConfig(),
        _test_config(args),
        np.random.default_rng(args.seed),
    )
    dt = time.perf_counter() - t0
    doc = _oriented_json(result.oriented)
    doc["fit"] = result.scored.dag.to_json_dict(result.scored.params.mu)
    for e in doc["fit"]["edges"]:
        e["alpha"] = result.scored.params.alpha[(e["from"], e["to"])]
    doc["fit"]["loglik"] = result.scored.loglik
    doc["fit"]["penalized"] = result.scored.penalized
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "graph.json", doc)
    n_dir = len(result.oriented.directed)
    n_und = len(result.oriented.undirected)
    print(f"wrote {out / 'graph.json'}")
    print(f"edges: {n_dir} directed, {n_und} undirected; runtime {dt:.1f}s")
    return EXIT_OK


def _profile_json(profile) -> dict:
    return {
        "pair": list(profile.pair),
        "lambda": [float(v) for v in profile.lambdas],
        "p_values": [float(v) for v in profile.p_values],
        "is_zero": list(profile.is_zero),
    }


def _slices_json(slices) -> dict:
    return {
        "pair": list(slices.pair),
        "orders": {str(n): slices.order(n) for n in range(2, slices.max_order + 1)},
    }


def cmd_diagnose(args) -> int:
    data = CountDataset.from_csv(args.data)
    for c in (args.i, args.j):
        if not (0 <= c < data.num_columns):
            raise ValueError(f"column index {c} out of range [0, {data.num_columns})")
    cfg = _test_config(args)
    rng = np.random.default_rng(args.seed)
    fwd = lambda_profile(data, args.i, args.j, cfg, rng)
    bwd = lambda_profile(data, args.j, args.i, cfg, rng)
    nonzero_fwd = [k for k in range(1, cfg.max_order + 1) if not fwd.is_zero[k - 1]]
    zero_bwd = [k for k in range(1, cfg.max_order + 1) if bwd.is_zero[k - 1]]
    doc = {
        "forward": _profile_json(fwd),
        "backward": _profile_json(bwd),
        "slices": {
            "forward": _slices_json(cumulant_slices(data, args.i, args.j, cfg.max_order + 1)),
            "backward": _slices_json(cumulant_slices(data, args.j, args.i, cfg.max_order + 1)),
        },
        "summary": {
            "highest_nonzero_k_forward": max(nonzero_fwd) if nonzero_fwd else None,
            "lowest_zero_k_backward": min(zero_bwd) if zero_bwd else None,
        },
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        _write_json(Path(args.out), doc)
    print(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    n_pred, pred_dir, pred_und = _read_graph_json(Path(args.predicted))
    n_true, true_dir, true_und = _read_graph_json(Path(args.truth))
    if n_pred != n_true:
        raise ValueError(f"vertex counts differ: predicted {n_pred}, truth {n_true}")
    if true_und:
        raise ValueError("truth graph must be fully directed")
    metrics = directed_edge_metrics(pred_dir, pred_und, true_dir)
    report = {
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f1": metrics.f1,
        "shd": metrics.shd,
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _sim_config(args, args.seed)
    rows = run_benchmark(
        sweep=args.sweep,
        values=args.values,
        sim_cfg=cfg,
        repeats=args.repeats,
        base_seed=args.seed,
        search_cfg=SearchConfig(),
        test_cfg=_test_config(args),
        with_true_skeleton=args.with_true_skeleton,
    )
    lines = [",".join(BENCH_HEADER)]
    lines += [",".join(r.csv_fields()) for r in rows]
    text = "\n".join(lines)
    if args.out:
        out = Path(args.out)
        if out.suffix:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text + "\n")
        else:
            out.mkdir(parents=True, exist_ok=True)
            (out / "bench.csv").write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="countdag",
        description="Causal discovery for count data with branching structure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a benchmark dataset and its ground truth")
    _add_sim_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("discover", help="learn a causal graph from a dataset")
    p.add_argument("data", help="CSV of non-negative integer counts")
    _add_test_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("diagnose", help="path summaries of one ordered pair, both ways")
    p.add_argument("data", help="CSV of non-negative integer counts")
    p.add_argument("i", type=int, help="source column (0-based)")
    p.add_argument("j", type=int, help="target column (0-based)")
    _add_test_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="also write the JSON report here")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser(
        "eval",
        help="compare a predicted graph against ground truth "
        "(SHD counts missing/extra adjacencies, reversals, and "
        "undirected-where-directed, one point each)",
    )
    p.add_argument("predicted", help="graph JSON written by discover")
    p.add_argument("truth", help="ground-truth graph JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="repeated simulate/discover/eval sweeps")
    p.add_argument("--sweep", required=True, choices=["samples", "nodes", "indegree"])
    p.add_argument("--values", required=True, type=_value_list, metavar="V1,V2,...")
    _add_sim_flags(p)
    _add_test_flags(p)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--with-true-skeleton", action="store_true",
                   help="orient the true skeleton instead of searching for one")
    p.add_argument("--out", default=None, help="write the CSV table here")
    p.set_defaults(func=cmd_bench)

    # desk-scale bench defaults: 5 nodes, indegree 2, 10 repeats
    sub.choices["bench"].set_defaults(nodes=5, indegree=2.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
