"""Workload balancing for the cut-based refinement step.

Early iterations hand each worker one constant region to split, so a
single huge region serializes the whole phase.  Capping region size with
BFS-grown balancing parts (border capacities zeroed) lets several workers
share one region; the refinement afterwards joins the direction labels
across part borders, so the partition quality barely changes.

The timing comparison below only shows real gains with 4+ hardware
threads; the solution itself is identical for any thread count.

Run:  python demos/balanced_parallel_split.py [grid-side]
"""

import os
import sys
import time

import numpy as np

import gtvcut as g


def make_instance(side, seed=31):
    rng = np.random.default_rng(seed)
    truth = np.zeros((side, side))
    truth[:, side // 2:] = 5.0
    truth[side // 3:, : side // 4] = 9.0
    y = truth.ravel() + 0.3 * rng.standard_normal(side * side)
    ids = np.arange(side * side).reshape(side, side)
    eu = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ev = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    graph = g.build_graph_arrays(eu, ev, np.full(len(eu), 0.5), side * side)
    return graph, g.QuadraticFidelity(y)


def main():
    side = int(sys.argv[1]) if len(sys.argv) > 1 else 256
    graph, functional = make_instance(side)
    print(f"{side}x{side} grid, {graph.num_edges} edges, "
          f"{os.cpu_count()} hardware threads")

    # the balancing cap comes from worker_count; threads sets the pool size
    results = {}
    for threads in (1, 4):
        cfg = g.PcpConfig(reduced_tol=1e-6, balance=True, worker_count=4,
                          threads=threads)
        t0 = time.perf_counter()
        x, partition, trace = g.run(graph, functional, cfg)
        total = time.perf_counter() - t0
        results[threads] = x
        print(f"threads={threads}: split phase {trace.total_split_seconds:.2f}s, "
              f"total {total:.2f}s, {partition.num_components} regions, "
              f"objective {trace.objective[-1]:.3f}")
    print("solutions identical across thread counts:",
          np.array_equal(results[1], results[4]))

    # balancing on vs off: same instance, nearly the same objective
    x_off, _, tr_off = g.run(graph, functional, g.PcpConfig(reduced_tol=1e-6))
    f_on = g.eval_objective(functional, graph, results[1])
    f_off = g.eval_objective(functional, graph, x_off)
    print(f"objective, balancing on: {f_on:.4f}  off: {f_off:.4f}  "
          f"relative gap {abs(f_on - f_off) / abs(f_off):.2e}")


if __name__ == "__main__":
    main()
