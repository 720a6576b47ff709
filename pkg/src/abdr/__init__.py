"""Convex subspace clustering by adaptive block diagonal representation."""

from .dataset import (DataMatrix, LabeledDataset, gen_example1, gen_example2,
                      gen_example3, gen_subspaces, load_csv, normalize_columns)
from .graph import (Edge, WeightedGraph, build_graph, build_incidence,
                    build_knn_edges, col_diffs, compute_weights,
                    largest_singular_value, row_diffs)
from .metrics import clustering_error, off_block_mass
from .solver import (DivergenceError, SolveTrace, SolverConfig, SolverState,
                     block_soft_threshold, choose_alpha, objective,
                     reference_solve, solve_abdr)
from .spectral import (affinity, cluster_pipeline, estimate_block_count,
                       spectral_cluster)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix", "LabeledDataset", "gen_example1", "gen_example2",
    "gen_example3", "gen_subspaces", "load_csv", "normalize_columns",
    "Edge", "WeightedGraph", "build_graph", "build_incidence",
    "build_knn_edges", "col_diffs", "compute_weights",
    "largest_singular_value", "row_diffs",
    "clustering_error", "off_block_mass",
    "DivergenceError", "SolveTrace", "SolverConfig", "SolverState",
    "block_soft_threshold", "choose_alpha", "objective", "reference_solve",
    "solve_abdr",
    "affinity", "cluster_pipeline", "estimate_block_count", "spectral_cluster",
    "__version__",
]
