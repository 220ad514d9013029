"""Working-set driver: alternate reduced-problem solves with cut-based refinement.

Starting from one component per connected piece of the graph, each outer
iteration (a) solves the problem restricted to partition-constant signals,
(b) searches, independently and in parallel over the components, for a
steepest-descent direction assignment from a finite candidate set via
min cuts, and (c) replaces every component by the maximal constant
connected components of its direction labels.  Oversized components can
be decomposed into BFS-grown balancing parts for the split step only;
border edges between parts are then ignored by the cuts.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import pdsolver
from .functionals import (KLSimplex, QuadraticFidelity, WeightedLassoNonneg,
                          eval_objective, vertex_matrix)
from .graph import (Partition, _group_by_component, balance_decompose,
                    build_reduced_graph, constant_connected_components,
                    labeled_component_ids)
from .maxflow import FlowNetwork, _dinic_ranges, _solve_part, solve_mincut

__all__ = ["PcpConfig", "SolverTrace", "SplitProblem", "run",
           "choose_directions", "split_component", "solve_multilabel_split",
           "default_direction_mode"]

DIRECTION_MODES = ("two_label", "three_label", "multidim")


@dataclass
class PcpConfig:
    """Driver configuration.

    ``worker_count`` enters the balancing cap ``ceil(factor * V / workers)``
    and sets the default thread pool size; ``threads`` overrides the actual
    pool size without affecting the cap (results are identical for any
    ``threads``).
    """
    outer_tol: float = 0.0
    max_outer_iter: int = 1000
    reduced_tol: float = 1e-6
    reduced_max_iter: int = 20000
    balance: bool = False
    balance_cap_factor: float = 1.0
    worker_count: int = 1
    threads: int = None
    direction_mode: str = "two_label"
    max_sweeps: int = 5
    record_sweeps: bool = False

    def __post_init__(self):
        if self.outer_tol < 0:
            raise ValueError("outer_tol must be >= 0")
        if self.reduced_tol <= 0:
            raise ValueError("reduced_tol must be positive")
        if self.max_outer_iter < 1 or self.reduced_max_iter < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.balance_cap_factor <= 0:
            raise ValueError("balance_cap_factor must be positive")
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.threads is None:
            self.threads = self.worker_count
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.direction_mode not in DIRECTION_MODES:
            raise ValueError(f"direction_mode must be one of {DIRECTION_MODES}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")

    def cap(self, num_vertices):
        return max(1, int(np.ceil(self.balance_cap_factor * num_vertices
                                  / self.worker_count)))


@dataclass
class SolverTrace:
    """Per-outer-iteration record of a driver run."""
    time_s: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    components: list = field(default_factory=list)
    split_value: list = field(default_factory=list)
    balanced: list = field(default_factory=list)
    split_seconds: list = field(default_factory=list)
    sweep_values: list = field(default_factory=list)
    stop_reason: str = ""

    @property
    def total_split_seconds(self):
        return float(sum(self.split_seconds))

    def num_rows(self):
        return len(self.objective)

    def write_csv(self, stream):
        stream.write("iter,time_s,objective,components,balanced\n")
        for i in range(len(self.objective)):
            stream.write(f"{i + 1},{self.time_s[i]:.6f},{self.objective[i]:.17g},"
                         f"{self.components[i]},{int(self.balanced[i])}\n")


@dataclass
class SplitProblem:
    """Steepest-direction search data for one component.

    Candidate directions are shared by all vertices of the component;
    edges are the component-internal ones, with endpoints re-indexed to
    local ids.  ``parts`` optionally lists balancing parts as local index
    arrays covering the component.
    """
    vertices: np.ndarray
    candidates: np.ndarray
    unary: np.ndarray
    edge_local_u: np.ndarray
    edge_local_v: np.ndarray
    edge_weight: np.ndarray
    parts: list = None
    init_label: int = 0
    max_sweeps: int = 5
    sweep_values: list = None

    def __post_init__(self):
        c = self.candidates
        diff = c[:, None, :] - c[None, :, :]
        self.dist = np.sqrt((diff ** 2).sum(axis=2))

    @property
    def size(self):
        return len(self.vertices)

    def part_list(self):
        if self.parts is None:
            return [np.arange(self.size, dtype=np.int64)]
        return self.parts


def default_direction_mode(functional):
    """Mode matching the structure of the fidelity."""
    if isinstance(functional, KLSimplex):
        return "multidim"
    if isinstance(functional, WeightedLassoNonneg):
        return "three_label"
    if isinstance(functional, QuadraticFidelity):
        return "two_label"
    return "two_label" if functional.dim == 1 else "multidim"


def choose_directions(functional, x, component, mode):
    """Candidate direction set shared by all vertices of the component."""
    x = vertex_matrix(x, functional.num_vertices, functional.dim)
    component = np.asarray(component, dtype=np.int64)
    if mode == "two_label":
        if functional.dim != 1:
            raise ValueError("two_label directions require scalar variables")
        return np.array([[-1.0], [1.0]])
    if mode == "three_label":
        if functional.dim != 1:
            raise ValueError("three_label directions require scalar variables")
        return np.array([[-1.0], [0.0], [1.0]])
    if mode != "multidim":
        raise ValueError(f"unknown direction mode {mode!r}")
    dim = functional.dim
    xbar = x[component[0]]
    cands = [np.zeros(dim)]
    zero_grad = np.zeros((1, dim))
    for k in range(dim):
        d = -xbar.copy()
        d[k] += 1.0
        norm = np.sqrt((d * d).sum())
        if norm <= 1e-12:
            continue  # shift toward an already-reached corner degenerates to 0
        d /= norm
        delta = functional.directional_unary(xbar[None, :], d[None, :],
                                             grad=zero_grad,
                                             vertices=component[:1])
        if np.isfinite(delta[0]):
            cands.append(d)
    out = []
    for d in cands:
        if not any(np.array_equal(d, e) for e in out):
            out.append(d)
    return np.array(out)


def _zero_candidate_index(candidates):
    norms = (candidates ** 2).sum(axis=1)
    zero = np.flatnonzero(norms == 0.0)
    return int(zero[0]) if len(zero) else 0


def _split_energy(sp, labels):
    """Full-capacity energy of a direction labeling over the component."""
    val = float(sp.unary[np.arange(sp.size), labels].sum())
    if len(sp.edge_local_u):
        val += float(sp.edge_weight
                     @ sp.dist[labels[sp.edge_local_u], labels[sp.edge_local_v]])
    return val


def _prepare_binary_network(sp):
    """Shared two-candidate cut network over the whole component.

    Restriction to balancing parts happens during the search itself (arcs
    toward other parts are skipped), so no per-part subnetwork is copied.
    """
    c0 = sp.unary[:, 0]
    c1 = sp.unary[:, 1]
    m = np.minimum(c0, c1)
    if np.any(np.isinf(m)):
        v = int(np.flatnonzero(np.isinf(m))[0])
        raise ValueError(f"both candidate directions infeasible at vertex {v}")
    caps = sp.edge_weight * sp.dist[0, 1]
    net = FlowNetwork(c1 - m, c0 - m, sp.edge_local_u, sp.edge_local_v, caps)
    part_arr = np.zeros(sp.size, dtype=np.int64)
    for p, idx in enumerate(sp.part_list()):
        part_arr[idx] = p
    sp._net = net
    sp._res = net.fresh_residuals()
    sp._part_arr = part_arr
    sp._labels8 = np.empty(sp.size, dtype=np.int8)


def _binary_part_job(sp, p):
    _solve_part(sp._net, sp._res, sp._part_arr, p, sp._labels8)
    return None


def _expansion_part_job(sp, part_idx):
    """Iterated expansion moves on one balancing part (all sweeps).

    Proposal cuts are exact; a move is accepted only when it strictly
    decreases the part energy, so the value never increases across moves.
    """
    m = len(part_idx)
    unary = sp.unary[part_idx]
    nc = len(sp.candidates)
    # part-internal edges, re-indexed to part-local ids
    if len(sp.edge_local_u):
        loc = np.full(sp.size, -1, dtype=np.int64)
        loc[part_idx] = np.arange(m)
        plu = loc[sp.edge_local_u]
        plv = loc[sp.edge_local_v]
        keep = (plu >= 0) & (plv >= 0)
        plu, plv, pw = plu[keep], plv[keep], sp.edge_weight[keep]
    else:
        plu = plv = np.empty(0, dtype=np.int64)
        pw = np.empty(0)
    labels = np.full(m, sp.init_label, dtype=np.int64)
    idx = np.arange(m)

    def energy(lb):
        val = float(unary[idx, lb].sum())
        if len(plu):
            val += float(pw @ sp.dist[lb[plu], lb[plv]])
        return val

    cur = energy(labels)
    sweeps = []
    for _ in range(sp.max_sweeps):
        changed = False
        for a in range(nc):
            keep_cost = unary[idx, labels]
            switch_cost = unary[:, a]
            base = np.minimum(keep_cost, switch_cost)
            src = switch_cost - base
            snk = keep_cost - base
            if len(plu):
                same = labels[plu] == labels[plv]
                d_same = sp.dist[labels[plu[same]], a] * pw[same]
                eu2 = [plu[same]]
                ev2 = [plv[same]]
                cap2 = [d_same]
                db = ~same
                naux = int(db.sum())
                if naux:
                    aux = m + np.arange(naux)
                    eu2 += [plu[db], aux]
                    ev2 += [aux, plv[db]]
                    cap2 += [sp.dist[labels[plu[db]], a] * pw[db],
                             sp.dist[a, labels[plv[db]]] * pw[db]]
                    src = np.concatenate([src, np.zeros(naux)])
                    snk = np.concatenate([snk,
                                          sp.dist[labels[plu[db]], labels[plv[db]]] * pw[db]])
                eu2 = np.concatenate(eu2)
                ev2 = np.concatenate(ev2)
                cap2 = np.concatenate(cap2)
            else:
                eu2 = ev2 = np.empty(0, dtype=np.int64)
                cap2 = np.empty(0)
            cut = solve_mincut(FlowNetwork(src, snk, eu2, ev2, cap2))
            proposal = np.where(cut.labeling[:m] == 1, a, labels)
            new = energy(proposal)
            if new < cur:
                labels = proposal
                cur = new
                changed = True
            sweeps.append(cur)
        if not changed:
            break
    return labels, sweeps


def solve_multilabel_split(split):
    """Best direction label per vertex of the component.

    Two candidates are resolved by one exact min cut; three or more by
    iterated expansion moves swept in candidate order.  Per-part energy
    curves are left in ``split.sweep_values``.
    """
    nc = len(split.candidates)
    if nc < 2:
        raise ValueError("need at least two candidate directions")
    labels = np.zeros(split.size, dtype=np.int64)
    if nc == 2:
        _prepare_binary_network(split)
        for p in range(len(split.part_list())):
            _binary_part_job(split, p)
        labels = split._labels8.astype(np.int64)
        split.sweep_values = [[_split_energy(split, labels)]]
    else:
        split.sweep_values = [None] * len(split.part_list())
        for p, part_idx in enumerate(split.part_list()):
            part_labels, sweeps = _expansion_part_job(split, part_idx)
            labels[part_idx] = part_labels
            split.sweep_values[p] = sweeps
    return labels


def _boundary_terms(graph, x, internal_mask):
    """Directional-derivative contribution of edges leaving each component.

    Edges whose endpoints hold distinct values are differentiable in the
    TV term and add a linear unary ``w <unit(x_v - x_u), d_v>`` at each
    endpoint; edges whose endpoints are equal but belong to distinct
    components add the separable upper bound ``w ||d_v||``.
    """
    nv, dim = x.shape
    lin = np.zeros((nv, dim))
    eq = np.zeros(nv)
    cross = np.flatnonzero(~internal_mask)
    if len(cross) == 0:
        return lin, eq
    eu = graph.edge_u[cross]
    ev = graph.edge_v[cross]
    w = graph.edge_weight[cross]
    diff = x[eu] - x[ev]
    norm = np.sqrt((diff ** 2).sum(axis=1))
    sep = norm > 0.0
    if np.any(sep):
        unit = w[sep, None] * diff[sep] / norm[sep, None]
        for k in range(dim):
            lin[:, k] += np.bincount(eu[sep], weights=unit[:, k], minlength=nv)
            lin[:, k] -= np.bincount(ev[sep], weights=unit[:, k], minlength=nv)
    tied = ~sep
    if np.any(tied):
        eq += np.bincount(eu[tied], weights=w[tied], minlength=nv)
        eq += np.bincount(ev[tied], weights=w[tied], minlength=nv)
    return lin, eq


def _build_split_problem(functional, x, grad, vertices, candidates,
                         edge_local_u, edge_local_v, edge_weight,
                         parts_local, max_sweeps, tv_lin=None, tv_eq=None):
    m = len(vertices)
    nc = len(candidates)
    unary = np.empty((m, nc))
    xu = x[vertices]
    gu = grad[vertices]
    for j in range(nc):
        d = np.broadcast_to(candidates[j], (m, functional.dim))
        unary[:, j] = functional.directional_unary(xu, d, grad=gu, vertices=vertices)
        if tv_lin is not None:
            unary[:, j] += tv_lin @ candidates[j]
        if tv_eq is not None:
            unary[:, j] += tv_eq * np.sqrt((candidates[j] ** 2).sum())
    return SplitProblem(vertices=vertices, candidates=candidates, unary=unary,
                        edge_local_u=edge_local_u, edge_local_v=edge_local_v,
                        edge_weight=edge_weight, parts=parts_local,
                        init_label=_zero_candidate_index(candidates),
                        max_sweeps=max_sweeps)


def split_component(graph, functional, x, component, directions, parts=None,
                    max_sweeps=5):
    """Refine one component by the constant connected components of its
    best direction labeling; returns ``[component]`` when no direction
    assignment achieves a negative value."""
    x = vertex_matrix(x, functional.num_vertices, functional.dim)
    component = np.asarray(component, dtype=np.int64)
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if directions.shape[0] == 0:
        raise ValueError("candidate direction set must be nonempty")
    if directions.shape[0] == 1 or len(component) == 1:
        return [component]
    grad = functional.gradient_smooth(x)
    member = np.zeros(graph.num_vertices, dtype=bool)
    member[component] = True
    in_comp = member[graph.edge_u] & member[graph.edge_v]
    eidx = np.flatnonzero(in_comp)
    tv_lin, tv_eq = _boundary_terms(graph, x, in_comp)
    loc = np.empty(graph.num_vertices, dtype=np.int64)
    loc[component] = np.arange(len(component))
    parts_local = None
    if parts is not None:
        parts_local = [loc[np.asarray(p, dtype=np.int64)] for p in parts]
    sp = _build_split_problem(functional, x, grad, component, directions,
                              loc[graph.edge_u[eidx]], loc[graph.edge_v[eidx]],
                              graph.edge_weight[eidx], parts_local, max_sweeps,
                              tv_lin=tv_lin[component], tv_eq=tv_eq[component])
    labels = solve_multilabel_split(sp)
    if _split_energy(sp, labels) >= 0.0:
        return [component]
    full = np.zeros(graph.num_vertices, dtype=np.int64)
    full[component] = labels
    return constant_connected_components(graph, component, full)


def run(graph, functional, config=None):
    """Execute the driver; returns ``(x, partition, trace)``.

    Stops when the partition no longer changes, when the relative
    objective decrease falls below ``outer_tol`` (if positive) or at
    ``max_outer_iter``.  Output is deterministic for a fixed config,
    independent of the actual thread count.
    """
    if config is None:
        config = PcpConfig()
    nv = graph.num_vertices
    if functional.num_vertices != nv:
        raise ValueError("graph and functional disagree on the vertex count")
    dim = functional.dim
    partition = Partition.trivial(graph)
    xi = np.zeros((partition.num_components, dim))
    trace = SolverTrace()
    cap = config.cap(nv)
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    t0 = time.perf_counter()
    trace.stop_reason = "max_outer_iter"
    prev_obj = None
    try:
        for it in range(1, config.max_outer_iter + 1):
            reduced = build_reduced_graph(graph, partition)
            rfun = functional.reduce(partition)
            xi, _ = pdsolver.solve(reduced, rfun, init=xi,
                                   tol=config.reduced_tol,
                                   max_iter=config.reduced_max_iter)
            x = xi[partition.component_of]
            objective = eval_objective(functional, graph, x)
            t_obj = time.perf_counter() - t0

            ts0 = time.perf_counter()
            splits, balanced = _prepare_splits(graph, functional, x, partition,
                                               config, cap)
            jobs = _make_split_jobs(splits)
            _run_split_jobs(jobs, pool)
            labels_global = np.zeros(nv, dtype=np.int64)
            split_value = 0.0
            for sp in splits:
                value = _split_energy(sp, sp._labels)
                if value < 0.0:
                    labels_global[sp.vertices] = sp._labels
                    split_value += value
                if config.record_sweeps:
                    trace.sweep_values.extend(s for s in sp.sweep_values if s)
            split_seconds = time.perf_counter() - ts0

            trace.time_s.append(t_obj)
            trace.objective.append(objective)
            trace.components.append(partition.num_components)
            trace.split_value.append(split_value)
            trace.balanced.append(balanced)
            trace.split_seconds.append(split_seconds)

            if config.outer_tol > 0 and prev_obj is not None:
                if prev_obj - objective <= config.outer_tol * max(abs(prev_obj), 1e-12):
                    trace.stop_reason = "outer_tol"
                    break
            prev_obj = objective

            kmax = max(len(sp.candidates) for sp in splits) + 1 if splits else 2
            codes = partition.component_of * kmax + labels_global
            member = np.ones(nv, dtype=np.bool_)
            new_comp, count = labeled_component_ids(graph, member, codes)
            if count == partition.num_components:
                trace.stop_reason = "converged"
                break
            components = _group_by_component(new_comp, count)
            parents = np.array([partition.component_of[c[0]] for c in components])
            xi = xi[parents]
            partition = Partition(new_comp, components)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return x, partition, trace


def _prepare_splits(graph, functional, x, partition, config, cap):
    """SplitProblem per component of size >= 2 (label slots preallocated)."""
    grad = functional.gradient_smooth(x)
    comp_of = partition.component_of
    ncomp = partition.num_components
    # group internal edges by component
    ca = comp_of[graph.edge_u]
    internal = ca == comp_of[graph.edge_v]
    int_idx = np.flatnonzero(internal)
    order = np.argsort(ca[int_idx], kind="stable")
    int_idx = int_idx[order]
    bounds = np.searchsorted(ca[int_idx], np.arange(ncomp + 1))
    tv_lin, tv_eq = _boundary_terms(graph, x, internal)
    loc = np.empty(graph.num_vertices, dtype=np.int64)
    splits = []
    balanced = False
    for cid, verts in enumerate(partition.components):
        if len(verts) < 2:
            continue
        cands = choose_directions(functional, x, verts, config.direction_mode)
        if len(cands) < 2:
            continue
        loc[verts] = np.arange(len(verts))
        eids = int_idx[bounds[cid]:bounds[cid + 1]]
        parts_local = None
        if config.balance and len(verts) > cap:
            parts_global = balance_decompose(graph, verts, cap)
            parts_local = [loc[p] for p in parts_global]
            balanced = True
        sp = _build_split_problem(functional, x, grad, verts, cands,
                                  loc[graph.edge_u[eids]], loc[graph.edge_v[eids]],
                                  graph.edge_weight[eids], parts_local,
                                  config.max_sweeps,
                                  tv_lin=tv_lin[verts], tv_eq=tv_eq[verts])
        sp._labels = np.zeros(sp.size, dtype=np.int64)
        sp.sweep_values = [None] * len(sp.part_list())
        if len(cands) == 2 and parts_local is not None:
            _prepare_binary_network(sp)
        splits.append(sp)
    return splits, balanced


def _split_part_job(sp, p):
    """Solve one (component, part) search; writes only its own label slots."""
    nc = len(sp.candidates)
    part_idx = sp.part_list()[p]
    if nc == 2:
        if sp.parts is None:
            # single part: build and solve locally inside the worker
            _prepare_binary_network(sp)
        _binary_part_job(sp, p)
        sp._labels[part_idx] = sp._labels8[part_idx]
        sp.sweep_values[p] = []
    else:
        labels, sweeps = _expansion_part_job(sp, part_idx)
        sp._labels[part_idx] = labels
        sp.sweep_values[p] = sweeps


#: target vertex count when packing small two-candidate cuts into one network
_BATCH_VERTEX_BUDGET = 4096


def _batched_binary_job(group):
    """One cut network for several disjoint two-candidate components.

    Components never interact (no arcs between them) and are solved one
    node range at a time inside a single kernel call, so flows, residuals
    and source-reachability match the per-component solves exactly.
    """
    sizes = [sp.size for sp in group]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    c0 = np.concatenate([sp.unary[:, 0] for sp in group])
    c1 = np.concatenate([sp.unary[:, 1] for sp in group])
    base = np.minimum(c0, c1)
    if np.any(np.isinf(base)):
        raise ValueError("both candidate directions infeasible at some vertex")
    eu = np.concatenate([sp.edge_local_u + offsets[i] for i, sp in enumerate(group)])
    ev = np.concatenate([sp.edge_local_v + offsets[i] for i, sp in enumerate(group)])
    caps = np.concatenate([sp.edge_weight * sp.dist[0, 1] for sp in group])
    net = FlowNetwork(c1 - base, c0 - base, eu, ev, caps)
    labels = np.empty(net.num_nodes, dtype=np.int8)
    _dinic_ranges(net._indptr, net._csr_arcs, net._arc_to, net.fresh_residuals(),
                  offsets, net.num_nodes, net._eps, labels)
    for i, sp in enumerate(group):
        sp._labels[:] = labels[offsets[i]:offsets[i + 1]]
        sp.sweep_values[0] = []


def _make_split_jobs(splits):
    """Flatten the split phase into independent callables.

    Small single-part two-candidate components are packed together to
    amortize network construction; everything else runs per
    (component, part).  Packing is by component order, so the job list and
    all outputs are independent of the thread count.
    """
    jobs = []
    batch = []
    batch_size = 0
    for sp in splits:
        if len(sp.candidates) == 2 and sp.parts is None and sp.size < _BATCH_VERTEX_BUDGET:
            batch.append(sp)
            batch_size += sp.size
            if batch_size >= _BATCH_VERTEX_BUDGET:
                group = batch
                jobs.append((_batched_binary_job, (group,)))
                batch = []
                batch_size = 0
        else:
            for p in range(len(sp.part_list())):
                jobs.append((_split_part_job, (sp, p)))
    if batch:
        jobs.append((_batched_binary_job, (batch,)))
    return jobs


def _run_split_jobs(jobs, pool):
    if pool is None or len(jobs) <= 1:
        for fn, args in jobs:
            fn(*args)
        return
    futures = [pool.submit(fn, *args) for fn, args in jobs]
    for f in futures:
        f.result()
