"""Soft-label estimation from few noisy annotations by spreading each
annotation through a neighborhood-graph heat kernel, with confidence
intervals, reference baselines, an experiment harness, and a live
annotation service."""

from .baselines import (AnnotationLog, gkr_estimate, histogram_estimate,
                        knn_estimate, log_from_events)
from .data import (DatasetError, EmbeddedDataset, dataset_from_arrays,
                   load_dataset, save_dataset)
from .graph import (GraphError, NeighborGraph, NormalizedOperator,
                    build_epsilon_graph, build_knn_graph,
                    graph_from_adjacency, normalize, save_edge_list)
from .intervals import (ConfidenceInterval, ci_report, hoeffding_ci,
                        save_ci_report, wilson_ci)
from .rates import (HARNESS_RANGE, RateSchedule, consistency_experiment,
                    rate_schedule, verify_decay)
from .session import (ESTIMATE_FLOOR, AnnotationEvent, AnnotationSession,
                      SoftLabelEstimate, run_budget, save_estimates)
from .solver import (HeatKernelSolver, PropagationVector, SolverConfig,
                     SolverError, dense_heat_kernel, neumann_partial_sum,
                     spread_seed)
from .synth import (RNG_ALGORITHM, FeedbackOracle, draw_events, kl_divergence,
                    make_sine_1d, make_two_moons, oracle_for, rmse,
                    save_experiment_records)

__version__ = "0.1.0"

__all__ = [
    "AnnotationEvent", "AnnotationLog", "AnnotationSession",
    "ConfidenceInterval", "DatasetError", "ESTIMATE_FLOOR", "EmbeddedDataset",
    "FeedbackOracle", "GraphError", "HARNESS_RANGE", "HeatKernelSolver",
    "NeighborGraph",
    "NormalizedOperator", "PropagationVector", "RNG_ALGORITHM", "RateSchedule",
    "SoftLabelEstimate", "SolverConfig", "SolverError", "build_epsilon_graph",
    "build_knn_graph", "ci_report", "consistency_experiment",
    "dataset_from_arrays", "dense_heat_kernel", "draw_events", "gkr_estimate",
    "graph_from_adjacency", "histogram_estimate", "hoeffding_ci",
    "kl_divergence", "knn_estimate", "load_dataset", "log_from_events",
    "make_sine_1d",
    "make_two_moons", "neumann_partial_sum", "normalize", "oracle_for",
    "rate_schedule", "rmse", "run_budget", "save_ci_report", "save_dataset",
    "save_edge_list", "save_estimates", "save_experiment_records",
    "spread_seed", "verify_decay", "wilson_ci",
]
