"""Directed-edge metrics and the repeated simulate/discover/eval loop.

SHD counts, per unordered vertex pair: a missing adjacency, an extra
adjacency, a reversed direction, or an undirected prediction where the truth
is directed -- one point each.  Precision with zero predicted directed edges
is 0 by convention so that aggregation stays finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .graph import Dag
from .path_cumulants import TestConfig
from .simulator import CountDataset, SimConfig, random_dag, sample
from .structure_learning import (
    DiscoveryResult,
    OrientedGraph,
    SearchConfig,
    Skeleton,
    discover,
    orient_edges,
)


@dataclass(frozen=True)
class GraphMetrics:
    precision: float
    recall: float
    f1: float
    shd: int


@dataclass(frozen=True)
class EvalReport:
    """Directed-edge precision/recall/F1 and SHD, possibly averaged over seeds."""

    precision: float
    recall: float
    f1: float
    shd: float
    per_seed: tuple[GraphMetrics, ...] = ()

    @classmethod
    def from_runs(cls, runs: Sequence[GraphMetrics]) -> "EvalReport":
        if not runs:
            raise ValueError("no runs to aggregate")
        return cls(
            precision=float(np.mean([r.precision for r in runs])),
            recall=float(np.mean([r.recall for r in runs])),
            f1=float(np.mean([r.f1 for r in runs])),
            shd=float(np.mean([r.shd for r in runs])),
            per_seed=tuple(runs),
        )

    def std(self, name: str) -> float:
        vals = [getattr(r, name) for r in self.per_seed]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1))


def directed_edge_metrics(
    predicted_directed: Iterable[tuple[int, int]],
    predicted_undirected: Iterable[tuple[int, int]],
    true_edges: Iterable[tuple[int, int]],
) -> GraphMetrics:
    pred = {(int(a), int(b)) for a, b in predicted_directed}
    und = {(min(int(a), int(b)), max(int(a), int(b))) for a, b in predicted_undirected}
    truth = {(int(a), int(b)) for a, b in true_edges}

    tp = len(pred & truth)
    precision = tp / len(pred) if pred else 0.0
    recall = tp / len(truth) if truth else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    pairs = {(min(a, b), max(a, b)) for a, b in pred | truth} | und
    shd = 0
    for a, b in pairs:
        t_adj = (a, b) in truth or (b, a) in truth
        p_adj = (a, b) in pred or (b, a) in pred or (a, b) in und
        if t_adj != p_adj:
            shd += 1  # missing or extra adjacency
        elif t_adj:
            if (a, b) in und:
                shd += 1  # should have been directed
            elif ((a, b) in truth) != ((a, b) in pred):
                shd += 1  # reversed
    return GraphMetrics(precision, recall, f1, shd)


def evaluate_oriented(oriented: OrientedGraph, truth: Dag) -> GraphMetrics:
    if oriented.num_vertices != truth.num_vertices:
        raise ValueError("vertex counts differ")
    return directed_edge_metrics(
        oriented.directed_edges(), oriented.undirected, truth.edge_set()
    )


@dataclass(frozen=True)
class BenchRow:
    sweep_value: float
    report: EvalReport

    def csv_fields(self) -> list[str]:
        r = self.report
        return [
            f"{self.sweep_value:g}",
            f"{r.f1:.6f}", f"{r.std('f1'):.6f}",
            f"{r.precision:.6f}", f"{r.std('precision'):.6f}",
            f"{r.recall:.6f}", f"{r.std('recall'):.6f}",
            f"{r.shd:.6f}", f"{r.std('shd'):.6f}",
        ]


BENCH_HEADER = [
    "sweep_value",
    "f1_mean", "f1_std",
    "precision_mean", "precision_std",
    "recall_mean", "recall_std",
    "shd_mean", "shd_std",
]


def run_single(
    sim_cfg: SimConfig,
    seed: int,
    search_cfg: SearchConfig | None = None,
    test_cfg: TestConfig | None = None,
    with_true_skeleton: bool = False,
) -> GraphMetrics:
    """One simulate -> discover -> evaluate round for a fixed seed."""
    rng = np.random.default_rng(seed)
    truth, mus = random_dag(sim_cfg, rng)
    data = sample(truth, mus, sim_cfg.sample_size, rng)
    if with_true_skeleton:
        oriented = orient_edges(data, Skeleton.from_dag(truth), test_cfg, rng)
    else:
        oriented = discover(data, search_cfg, test_cfg, rng).oriented
    return evaluate_oriented(oriented, truth)


def run_repeats(
    sim_cfg: SimConfig,
    repeats: int,
    base_seed: int,
    search_cfg: SearchConfig | None = None,
    test_cfg: TestConfig | None = None,
    with_true_skeleton: bool = False,
) -> EvalReport:
    runs = [
        run_single(sim_cfg, base_seed + t, search_cfg, test_cfg, with_true_skeleton)
        for t in range(repeats)
    ]
    return EvalReport.from_runs(runs)


def run_benchmark(
    sweep: str,
    values: Sequence[float],
    sim_cfg: SimConfig,
    repeats: int,
    base_seed: int,
    search_cfg: SearchConfig | None = None,
    test_cfg: TestConfig | None = None,
    with_true_skeleton: bool = False,
) -> list[BenchRow]:
    """Sweep exactly one of {samples, nodes, indegree}, repeating each point."""
    fields = {
        "samples": "sample_size",
        "nodes": "num_vertices",
        "indegree": "expected_indegree",
    }
    if sweep not in fields:
        raise ValueError(f"sweep must be one of {sorted(fields)}, got {sweep!r}")
    rows = []
    for v in values:
        cast = int(v) if sweep in ("samples", "nodes") else float(v)
        cfg = replace(sim_cfg, **{fields[sweep]: cast})
        report = run_repeats(
            cfg, repeats, base_seed, search_cfg, test_cfg, with_true_skeleton
        )
        rows.append(BenchRow(float(cast), report))
    return rows
