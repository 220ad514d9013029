"""Spatial regularization of noisy class probabilities on a grid.

Each vertex carries a probability vector over classes (think: per-point
classifier scores).  The smoothed Kullback-Leibler fidelity keeps the
regularized distribution close to the scores while the graph total
variation encourages spatially coherent labelings; rows stay on the
probability simplex throughout.

Run:  python demos/label_smoothing.py
"""

import numpy as np

import gtvcut as g


def make_instance(rows=40, cols=30, classes=4, noise=0.45, seed=3):
    rng = np.random.default_rng(seed)
    n = rows * cols
    region = np.zeros((rows, cols), dtype=int)
    region[: rows // 2, cols // 3:] = 1
    region[rows // 2:, : 2 * cols // 3] = 2
    region[rows // 2:, 2 * cols // 3:] = 3
    labels = region.ravel()
    scores = np.zeros((n, classes))
    scores[np.arange(n), labels] = 1.0
    scores += noise * rng.standard_normal((n, classes))
    y = g.project_simplex_rows(scores)
    ids = np.arange(n).reshape(rows, cols)
    eu = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ev = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    graph = g.build_graph_arrays(eu, ev, np.full(len(eu), 0.25), n)
    return graph, labels, y


def main():
    graph, labels, y = make_instance()
    functional = g.KLSimplex(y, beta=0.1)
    cfg = g.PcpConfig(reduced_tol=1e-7, direction_mode="multidim")
    x, partition, trace = g.run(graph, functional, cfg)

    print(f"outer iterations: {trace.num_rows()}, "
          f"regions: {partition.num_components}")
    print(f"objective: {g.eval_objective(functional, graph, x):.4f} "
          f"(unregularized scores: {g.eval_objective(functional, graph, y):.4f})")
    print(f"rows stay on the simplex: "
          f"{np.abs(x.sum(axis=1) - 1).max():.1e} from unit sum, "
          f"min coordinate {x.min():.1e}")

    acc_before = (y.argmax(axis=1) == labels).mean()
    acc_after = (x.argmax(axis=1) == labels).mean()
    print(f"argmax accuracy: scores {acc_before:.3f} -> regularized {acc_after:.3f}")


if __name__ == "__main__":
    main()
