"""Solvers for graph-total-variation-regularized problems.

Core pieces: weighted graphs and partitions (:mod:`gtvcut.graph`), a
min-cut engine with part-restricted parallel solves (:mod:`gtvcut.maxflow`),
pluggable fidelity functionals (:mod:`gtvcut.functionals`), a first-order
primal-dual solver (:mod:`gtvcut.pdsolver`) and the cut-based working-set
driver (:mod:`gtvcut.cutpursuit`).  The ``gtvcut`` command exposes
instance generation, solving and benchmarking.
"""

from .graph import (Graph, Partition, ReducedGraph, balance_decompose,
                    build_graph, build_graph_arrays, build_reduced_graph,
                    constant_connected_components)
from .maxflow import (CutResult, FlowNetwork, brute_force_mincut,
                      build_binary_cut_network, labeling_energy, solve_mincut,
                      solve_mincut_restricted)
from .functionals import (KLSimplex, QuadraticFidelity, WeightedLassoNonneg,
                          eval_objective, project_simplex_rows, total_variation)
from .pdsolver import SolverDivergenceError, kkt_residual
from .pdsolver import solve as solve_baseline
from .cutpursuit import (PcpConfig, SolverTrace, SplitProblem,
                         choose_directions, default_direction_mode, run,
                         solve_multilabel_split, split_component)

__version__ = "0.1.0"

__all__ = [
    "Graph", "Partition", "ReducedGraph", "build_graph", "build_graph_arrays",
    "build_reduced_graph", "constant_connected_components", "balance_decompose",
    "FlowNetwork", "CutResult", "build_binary_cut_network", "solve_mincut",
    "solve_mincut_restricted", "brute_force_mincut", "labeling_energy",
    "QuadraticFidelity", "WeightedLassoNonneg", "KLSimplex", "eval_objective",
    "total_variation", "project_simplex_rows",
    "solve_baseline", "kkt_residual", "SolverDivergenceError",
    "PcpConfig", "SolverTrace", "SplitProblem", "run", "choose_directions",
    "split_component", "solve_multilabel_split", "default_direction_mode",
]
