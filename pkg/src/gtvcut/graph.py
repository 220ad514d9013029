"""Weighted undirected graphs, vertex partitions and component utilities.

The graph is stored in compressed adjacency form: one edge record per
undirected edge (endpoints ordered ``u < v``) plus a CSR adjacency that
lists, for every vertex, its neighbors in ascending id order together
with the id of the connecting edge.  Everything is immutable after
construction, so a single Graph can be shared freely between worker
threads.
"""

import numpy as np
from numba import njit


class Graph:
    """Immutable weighted undirected graph.

    Use :func:`build_graph` to construct one; the constructor expects
    already-validated arrays.
    """

    __slots__ = ("num_vertices", "num_edges", "edge_u", "edge_v", "edge_weight",
                 "adj_indptr", "adj_vertex", "adj_edge")

    def __init__(self, num_vertices, edge_u, edge_v, edge_weight,
                 adj_indptr, adj_vertex, adj_edge):
        self.num_vertices = int(num_vertices)
        self.num_edges = len(edge_u)
        self.edge_u = edge_u
        self.edge_v = edge_v
        self.edge_weight = edge_weight
        self.adj_indptr = adj_indptr
        self.adj_vertex = adj_vertex
        self.adj_edge = adj_edge

    def degree(self, v):
        return int(self.adj_indptr[v + 1] - self.adj_indptr[v])

    def neighbors(self, v):
        """Neighbor ids of ``v`` in ascending order."""
        return self.adj_vertex[self.adj_indptr[v]:self.adj_indptr[v + 1]]

    def incident_edges(self, v):
        return self.adj_edge[self.adj_indptr[v]:self.adj_indptr[v + 1]]

    @property
    def degrees(self):
        return np.diff(self.adj_indptr)

    def __repr__(self):
        return f"Graph(num_vertices={self.num_vertices}, num_edges={self.num_edges})"


def build_graph(edge_list, num_vertices):
    """Build a :class:`Graph` from an iterable of ``(u, v, w)`` triples.

    Duplicate edges (in either orientation) are merged by summing their
    weights.  Self-loops, out-of-range vertex ids and negative weights
    are rejected.
    """
    num_vertices = int(num_vertices)
    if num_vertices < 0:
        raise ValueError("num_vertices must be nonnegative")
    edges = list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list
    if len(edges) == 0:
        eu = np.empty(0, dtype=np.int64)
        ev = np.empty(0, dtype=np.int64)
        ew = np.empty(0, dtype=np.float64)
    else:
        arr = np.asarray(edges, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("edge_list entries must be (u, v, w) triples")
        eu = arr[:, 0].astype(np.int64)
        ev = arr[:, 1].astype(np.int64)
        ew = arr[:, 2].astype(np.float64)
    return _assemble(num_vertices, eu, ev, ew)


def build_graph_arrays(edge_u, edge_v, edge_weight, num_vertices):
    """Array-based variant of :func:`build_graph` (same merge/validation rules)."""
    eu = np.asarray(edge_u, dtype=np.int64).copy()
    ev = np.asarray(edge_v, dtype=np.int64).copy()
    ew = np.asarray(edge_weight, dtype=np.float64).copy()
    if not (len(eu) == len(ev) == len(ew)):
        raise ValueError("edge arrays must have equal length")
    return _assemble(int(num_vertices), eu, ev, ew)


def _assemble(num_vertices, eu, ev, ew):
    if len(eu):
        if eu.min() < 0 or ev.min() < 0 or eu.max() >= num_vertices or ev.max() >= num_vertices:
            bad = np.flatnonzero((eu < 0) | (ev < 0) | (eu >= num_vertices) | (ev >= num_vertices))[0]
            raise ValueError(f"vertex id out of range in edge {bad}: "
                             f"({eu[bad]}, {ev[bad]}) with {num_vertices} vertices")
        if np.any(eu == ev):
            bad = np.flatnonzero(eu == ev)[0]
            raise ValueError(f"self-loop at vertex {eu[bad]} (edge {bad})")
        if np.any(ew < 0):
            bad = np.flatnonzero(ew < 0)[0]
            raise ValueError(f"negative weight {ew[bad]} on edge {bad}")
        lo = np.minimum(eu, ev)
        hi = np.maximum(eu, ev)
        order = np.lexsort((hi, lo))
        lo, hi, ew = lo[order], hi[order], ew[order]
        # merge duplicates by weight summation
        new_edge = np.empty(len(lo), dtype=bool)
        new_edge[0] = True
        new_edge[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        starts = np.flatnonzero(new_edge)
        eu = lo[starts]
        ev = hi[starts]
        ew = np.add.reduceat(ew, starts)
    # adjacency in ascending neighbor order
    ends = np.concatenate([eu, ev])
    other = np.concatenate([ev, eu])
    eid = np.concatenate([np.arange(len(eu)), np.arange(len(eu))])
    order = np.lexsort((other, ends))
    adj_vertex = other[order].astype(np.int64)
    adj_edge = eid[order].astype(np.int64)
    counts = np.bincount(ends, minlength=num_vertices)
    adj_indptr = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=adj_indptr[1:])
    for a in (eu, ev, ew, adj_vertex, adj_edge, adj_indptr):
        a.setflags(write=False)
    return Graph(num_vertices, eu, ev, ew, adj_indptr, adj_vertex, adj_edge)


@njit(cache=True)
def _labeled_components_kernel(adj_indptr, adj_vertex, member, codes, comp):
    """BFS labeling of maximal same-code connected sets within ``member``.

    Seeds are taken in ascending vertex order; the BFS queue is FIFO and
    neighbors are visited in adjacency (ascending id) order, which makes
    the component numbering deterministic.
    """
    n = member.shape[0]
    queue = np.empty(n, dtype=np.int64)
    cid = 0
    for seed in range(n):
        if not member[seed] or comp[seed] >= 0:
            continue
        comp[seed] = cid
        queue[0] = seed
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            cu = codes[u]
            for k in range(adj_indptr[u], adj_indptr[u + 1]):
                w = adj_vertex[k]
                if member[w] and comp[w] < 0 and codes[w] == cu:
                    comp[w] = cid
                    queue[tail] = w
                    tail += 1
        cid += 1
    return cid


def labeled_component_ids(graph, member, codes):
    """Component id per vertex (-1 outside ``member``) and component count.

    Components are maximal connected sets of member vertices sharing the
    same integer code.
    """
    comp = np.full(graph.num_vertices, -1, dtype=np.int64)
    count = _labeled_components_kernel(graph.adj_indptr, graph.adj_vertex,
                                       member, codes, comp)
    return comp, count


def _group_by_component(comp, count):
    members = np.flatnonzero(comp >= 0)
    order = members[np.argsort(comp[members], kind="stable")]
    boundaries = np.searchsorted(comp[order], np.arange(count + 1))
    return [order[boundaries[i]:boundaries[i + 1]] for i in range(count)]


def constant_connected_components(graph, subset, labels):
    """Maximal label-constant connected components of ``subset``.

    ``subset`` is a collection of vertex ids; ``labels`` is a per-vertex
    array of discrete values (entries outside the subset are ignored).
    Returns a list of ascending-sorted vertex id arrays; the union equals
    the subset.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        return []
    member = np.zeros(graph.num_vertices, dtype=np.bool_)
    member[subset] = True
    labels = np.asarray(labels)
    if labels.shape[0] != graph.num_vertices:
        raise ValueError("labels must be defined per vertex")
    # map arbitrary discrete values onto integer codes
    if labels.dtype.kind in "iu":
        codes = labels.astype(np.int64)
    else:
        _, codes = np.unique(labels, return_inverse=True)
        codes = codes.astype(np.int64)
    comp, count = labeled_component_ids(graph, member, codes)
    return _group_by_component(comp, count)


class Partition:
    """Assignment of vertices to connected constant components."""

    __slots__ = ("component_of", "components")

    def __init__(self, component_of, components):
        self.component_of = component_of
        self.components = components

    @property
    def num_components(self):
        return len(self.components)

    @classmethod
    def from_labels(cls, graph, labels):
        """Partition into maximal connected sets of equal label."""
        labels = np.asarray(labels)
        if labels.dtype.kind in "iu":
            codes = labels.astype(np.int64)
        else:
            _, codes = np.unique(labels, return_inverse=True)
            codes = codes.astype(np.int64)
        member = np.ones(graph.num_vertices, dtype=np.bool_)
        comp, count = labeled_component_ids(graph, member, codes)
        return cls(comp, _group_by_component(comp, count))

    @classmethod
    def trivial(cls, graph):
        """Coarsest valid partition: the connected components of the graph."""
        return cls.from_labels(graph, np.zeros(graph.num_vertices, dtype=np.int64))

    @classmethod
    def singletons(cls, graph):
        comp = np.arange(graph.num_vertices, dtype=np.int64)
        return cls(comp, [np.array([v], dtype=np.int64) for v in range(graph.num_vertices)])

    def validate(self, graph):
        """Raise if the components are not a disjoint connected cover."""
        seen = np.zeros(graph.num_vertices, dtype=np.int64)
        for cid, verts in enumerate(self.components):
            if len(verts) == 0:
                raise ValueError(f"component {cid} is empty")
            seen[verts] += 1
            if not np.all(self.component_of[verts] == cid):
                raise ValueError(f"component_of inconsistent for component {cid}")
            pieces = constant_connected_components(
                graph, verts, np.zeros(graph.num_vertices, dtype=np.int64))
            if len(pieces) != 1:
                raise ValueError(f"component {cid} is not connected")
        if not np.all(seen == 1):
            raise ValueError("components do not form a disjoint cover")


class ReducedGraph:
    """Adjacency between the components of a partition.

    Exposes the same ``num_vertices``/``edge_*`` surface as :class:`Graph`
    so solvers can run on either.
    """

    __slots__ = ("num_components", "edge_u", "edge_v", "edge_weight", "component_sizes")

    def __init__(self, num_components, edge_u, edge_v, edge_weight, component_sizes):
        self.num_components = int(num_components)
        self.edge_u = edge_u
        self.edge_v = edge_v
        self.edge_weight = edge_weight
        self.component_sizes = component_sizes

    @property
    def num_vertices(self):
        return self.num_components

    @property
    def num_edges(self):
        return len(self.edge_u)

    def __repr__(self):
        return (f"ReducedGraph(num_components={self.num_components}, "
                f"num_edges={self.num_edges})")


def build_reduced_graph(graph, partition):
    """Aggregate crossing-edge weight between every pair of components."""
    comp = partition.component_of
    ca = comp[graph.edge_u]
    cb = comp[graph.edge_v]
    cross = ca != cb
    lo = np.minimum(ca[cross], cb[cross])
    hi = np.maximum(ca[cross], cb[cross])
    w = graph.edge_weight[cross]
    sizes = np.array([len(c) for c in partition.components], dtype=np.int64)
    if len(lo) == 0:
        empty_i = np.empty(0, dtype=np.int64)
        return ReducedGraph(partition.num_components, empty_i, empty_i.copy(),
                            np.empty(0, dtype=np.float64), sizes)
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    new_pair = np.empty(len(lo), dtype=bool)
    new_pair[0] = True
    new_pair[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    starts = np.flatnonzero(new_pair)
    red_u = lo[starts]
    red_v = hi[starts]
    red_w = np.add.reduceat(w, starts)
    return ReducedGraph(partition.num_components, red_u, red_v, red_w, sizes)


@njit(cache=True)
def _balance_kernel(adj_indptr, adj_vertex, member, cap, part):
    """Greedy BFS growth of size-capped parts over the member set.

    Each part grows from the lowest-id unassigned member until the member
    set is exhausted or the cap is reached; FIFO queue, neighbors in
    adjacency order.
    """
    n = member.shape[0]
    queue = np.empty(n, dtype=np.int64)
    pid = 0
    for seed in range(n):
        if not member[seed] or part[seed] >= 0:
            continue
        part[seed] = pid
        count = 1
        queue[0] = seed
        head, tail = 0, 1
        while head < tail and count < cap:
            u = queue[head]
            head += 1
            for k in range(adj_indptr[u], adj_indptr[u + 1]):
                w = adj_vertex[k]
                if member[w] and part[w] < 0:
                    part[w] = pid
                    count += 1
                    queue[tail] = w
                    tail += 1
                    if count >= cap:
                        break
        pid += 1
    return pid


def balance_decompose(graph, component, cap):
    """Cover ``component`` with connected BFS-grown parts of at most ``cap`` vertices.

    Purely sequential and deterministic given the vertex ordering; returns
    a list of ascending-sorted vertex id arrays.
    """
    cap = int(cap)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    component = np.asarray(component, dtype=np.int64)
    if component.size == 0:
        return []
    member = np.zeros(graph.num_vertices, dtype=np.bool_)
    member[component] = True
    part = np.full(graph.num_vertices, -1, dtype=np.int64)
    count = _balance_kernel(graph.adj_indptr, graph.adj_vertex, member, cap, part)
    return _group_by_component(part, count)
