"""Causal discovery for count data whose dependence runs through binomial
thinning with Poisson innovations: simulation, joint-cumulant estimation,
path-summary recovery, a generating-function likelihood, and score-based
structure search with cumulant-based orientation."""

from .graph import Dag, DirectedPath
from .simulator import CountDataset, SimConfig, binomial_thin, random_dag, reverse_pair, sample
from .cumulants import CumulantSlices, cumulant_slices, joint_cumulant, set_partitions
from .path_cumulants import (
    LambdaProfile,
    SurjectionTable,
    TestConfig,
    bootstrap_zero_test,
    lambda_profile,
    solve_lambda,
    surjection_count,
)
from .likelihood import (
    ModelParams,
    ScoredGraph,
    conditional_pmf_direct,
    conditional_pmf_fft,
    fit_parameters,
    node_log_likelihood,
    penalized_score,
)
from .structure_learning import (
    OrientedGraph,
    SearchConfig,
    Skeleton,
    discover,
    learn_skeleton,
    neighbors,
    orient_edges,
)
from .evaluation import EvalReport, GraphMetrics, directed_edge_metrics, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "DirectedPath",
    "CountDataset",
    "SimConfig",
    "binomial_thin",
    "random_dag",
    "reverse_pair",
    "sample",
    "CumulantSlices",
    "cumulant_slices",
    "joint_cumulant",
    "set_partitions",
    "LambdaProfile",
    "SurjectionTable",
    "TestConfig",
    "bootstrap_zero_test",
    "lambda_profile",
    "solve_lambda",
    "surjection_count",
    "ModelParams",
    "ScoredGraph",
    "conditional_pmf_direct",
    "conditional_pmf_fft",
    "fit_parameters",
    "node_log_likelihood",
    "penalized_score",
    "OrientedGraph",
    "SearchConfig",
    "Skeleton",
    "discover",
    "learn_skeleton",
    "neighbors",
    "orient_edges",
    "EvalReport",
    "GraphMetrics",
    "directed_edge_metrics",
    "run_benchmark",
]
