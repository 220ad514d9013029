"""Shared instance builders and independent oracles for the test suite."""

import itertools

import numpy as np

import gtvcut as g


def chain_graph(n, weight=1.0):
    ids = np.arange(n - 1, dtype=np.int64)
    return g.build_graph_arrays(ids, ids + 1, np.full(n - 1, weight), n)


def grid_graph(rows, cols, weight=1.0):
    ids = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    eu = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ev = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    return g.build_graph_arrays(eu, ev, np.full(len(eu), weight), rows * cols)


def quadrant_truth(rows, cols, levels):
    """Four constant blocks (one per quadrant)."""
    t = np.empty((rows, cols))
    r2, c2 = rows // 2, cols // 2
    t[:r2, :c2] = levels[0]
    t[:r2, c2:] = levels[1]
    t[r2:, :c2] = levels[2]
    t[r2:, c2:] = levels[3]
    return t.ravel()


def random_network(rng, max_nodes=12, max_cap=10):
    """Random flow network with integer-valued capacities (exact arithmetic)."""
    n = int(rng.integers(1, max_nodes + 1))
    a = rng.integers(0, max_cap + 1, size=n).astype(float)
    b = rng.integers(0, max_cap + 1, size=n).astype(float)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < 0.4
    eu = np.array([p[0] for p, k in zip(pairs, keep) if k], dtype=np.int64)
    ev = np.array([p[1] for p, k in zip(pairs, keep) if k], dtype=np.int64)
    caps = rng.integers(0, max_cap + 1, size=len(eu)).astype(float)
    return g.FlowNetwork(a, b, eu, ev, caps)


def network_energy_tables(net):
    """Unary/pairwise tables whose minimum energy equals the min cut.

    A node on the source side pays its sink capacity, so label 0 costs
    ``b_v`` and label 1 costs ``a_v``.
    """
    unary = np.stack([net.sink_cap, net.source_cap], axis=1)
    return unary, net.edge_u, net.edge_v, net.edge_cap


def random_connected_partition(graph, rng, max_labels=4):
    labels = rng.integers(0, max_labels, size=graph.num_vertices)
    return g.Partition.from_labels(graph, labels)


def fd_gradient(functional, x, step=1e-6):
    """Central finite differences of the smooth part."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += step
        xm = x.copy()
        xm[idx] -= step
        out[idx] = (functional.eval_smooth(xp) - functional.eval_smooth(xm)) / (2 * step)
        it.iternext()
    return out


def simplex_projection_oracle(t):
    """Exhaustive active-set projection onto the simplex (small K only).

    Tries every support set: on the support the projection is a uniform
    shift, off it the shifted values must be nonpositive.
    """
    t = np.asarray(t, dtype=np.float64)
    k = len(t)
    best = None
    best_d = np.inf
    for size in range(1, k + 1):
        for support in itertools.combinations(range(k), size):
            s = list(support)
            tau = (t[s].sum() - 1.0) / size
            x = np.zeros(k)
            x[s] = t[s] - tau
            if np.any(x[s] < -1e-12):
                continue
            off = [j for j in range(k) if j not in support]
            if off and np.any(t[off] - tau > 1e-12):
                continue
            d = ((x - t) ** 2).sum()
            if d < best_d:
                best_d = d
                best = x
    return best


def exhaustive_multilabel_minimum(unary, eu, ev, w, dist):
    """Minimum labeling energy by full enumeration (tiny instances only)."""
    m, nc = unary.shape
    best = np.inf
    for assign in itertools.product(range(nc), repeat=m):
        lb = np.array(assign)
        val = unary[np.arange(m), lb].sum()
        if len(eu):
            val += (w * dist[lb[eu], lb[ev]]).sum()
        if val < best:
            best = val
    return best
