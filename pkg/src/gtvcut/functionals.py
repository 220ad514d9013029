"""Problem definitions: a smooth fidelity plus a vertex-separable nonsmooth part.

Every functional works on per-vertex variables of fixed dimension ``dim``
stored as a ``(num_vertices, dim)`` float array, and exposes

* ``eval_smooth`` / ``gradient_smooth`` / ``smooth_gradient_lipschitz``
* ``eval_nonsmooth`` / ``prox_nonsmooth``
* ``directional_unary`` -- one-sided directional derivative of the
  vertex-separable fidelity terms (extended real, +inf on infeasible
  directions)
* ``reduce`` -- sufficient statistics for the same problem expressed on
  the components of a partition (one variable per component).

Three concrete problems are provided: squared distance to observations,
weighted one-sided lasso with nonnegativity behind a dense linear
operator, and a smoothed Kullback-Leibler fidelity over the probability
simplex.
"""

import numpy as np

__all__ = [
    "Functional", "QuadraticFidelity", "WeightedLassoNonneg", "KLSimplex",
    "ReducedQuadratic", "eval_objective", "total_variation",
    "project_simplex_rows", "vertex_matrix",
]

#: feasibility slack used by indicator evaluations
FEAS_TOL = 1e-9
#: entries this close to zero count as active nonnegativity constraints
ZERO_TOL = 1e-12


def vertex_matrix(x, num_vertices, dim):
    """Canonicalize ``x`` to a ``(num_vertices, dim)`` float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if dim == 1 and x.shape[0] == num_vertices:
            return x.reshape(num_vertices, 1)
        raise ValueError(f"expected ({num_vertices}, {dim}) array, got shape {x.shape}")
    if x.shape != (num_vertices, dim):
        raise ValueError(f"expected ({num_vertices}, {dim}) array, got shape {x.shape}")
    return x


def project_simplex_rows(t):
    """Exact Euclidean projection of each row onto the probability simplex."""
    t = np.asarray(t, dtype=np.float64)
    one_d = t.ndim == 1
    if one_d:
        t = t[None, :]
    u = np.sort(t, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1) - 1.0
    j = np.arange(1, t.shape[1] + 1)
    cond = u - css / j > 0
    rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(t.shape[0]), rho] / (rho + 1)
    out = np.maximum(t - tau[:, None], 0.0)
    return out[0] if one_d else out


def _component_sums(component_of, values, num_components):
    """Per-component column sums, accumulated in vertex order."""
    values = np.atleast_2d(values.T).T
    out = np.empty((num_components, values.shape[1]))
    for k in range(values.shape[1]):
        out[:, k] = np.bincount(component_of, weights=values[:, k],
                                minlength=num_components)
    return out


class Functional:
    """Interface shared by the concrete problems and their reductions."""

    dim = 1
    num_vertices = 0

    def eval_smooth(self, x):
        raise NotImplementedError

    def gradient_smooth(self, x):
        raise NotImplementedError

    def smooth_gradient_lipschitz(self):
        raise NotImplementedError

    def eval_nonsmooth(self, x):
        raise NotImplementedError

    def prox_nonsmooth(self, t, step):
        raise NotImplementedError

    def directional_unary(self, x, d, grad=None, vertices=None):
        raise NotImplementedError

    def reduce(self, partition):
        raise NotImplementedError

    def eval_fidelity(self, x):
        return self.eval_smooth(x) + self.eval_nonsmooth(x)

    def _rows(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if self.dim == 1 else x.reshape(1, -1)
        return x


class QuadraticFidelity(Functional):
    """Squared distance to per-vertex observations: sum_v ||x_v - y_v||^2."""

    def __init__(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        self.y = y
        self.num_vertices = y.shape[0]
        self.dim = y.shape[1]

    def eval_smooth(self, x):
        return float(((self._rows(x) - self.y) ** 2).sum())

    def gradient_smooth(self, x):
        return 2.0 * (self._rows(x) - self.y)

    def smooth_gradient_lipschitz(self):
        return 2.0

    def eval_nonsmooth(self, x):
        return 0.0

    def prox_nonsmooth(self, t, step):
        return self._rows(t).copy()

    def directional_unary(self, x, d, grad=None, vertices=None):
        d = self._rows(d)
        if grad is None:
            if vertices is not None:
                raise ValueError("precomputed grad required with a vertex subset")
            grad = self.gradient_smooth(x)
        return (grad * d).sum(axis=1)

    def reduce(self, partition):
        comp = partition.component_of
        c = partition.num_components
        sizes = np.bincount(comp, minlength=c).astype(np.float64)
        sum_y = _component_sums(comp, self.y, c)
        sum_y2 = np.bincount(comp, weights=(self.y ** 2).sum(axis=1), minlength=c)
        return ReducedQuadratic(sizes, sum_y, sum_y2)


class ReducedQuadratic(Functional):
    """Quadratic fidelity restricted to partition-constant signals.

    Carries per-component (size, sum of observations, sum of squared
    observations) so evaluation needs one variable per component:
    ``sum_U (|U| ||xi_U||^2 - 2 <xi_U, sum_y_U> + sum_y2_U)``.
    """

    def __init__(self, sizes, sum_y, sum_y2):
        self.sizes = np.asarray(sizes, dtype=np.float64)
        self.sum_y = np.asarray(sum_y, dtype=np.float64)
        self.sum_y2 = np.asarray(sum_y2, dtype=np.float64)
        self.num_vertices = len(self.sizes)
        self.dim = self.sum_y.shape[1]

    def eval_smooth(self, x):
        x = self._rows(x)
        return float((self.sizes * (x ** 2).sum(axis=1)).sum()
                     - 2.0 * (x * self.sum_y).sum() + self.sum_y2.sum())

    def gradient_smooth(self, x):
        return 2.0 * (self.sizes[:, None] * self._rows(x) - self.sum_y)

    def smooth_gradient_lipschitz(self):
        return 2.0 * float(self.sizes.max()) if len(self.sizes) else 2.0

    def smooth_gradient_lipschitz_diag(self):
        return 2.0 * self.sizes

    def eval_nonsmooth(self, x):
        return 0.0

    def prox_nonsmooth(self, t, step):
        return self._rows(t).copy()

    def directional_unary(self, x, d, grad=None, vertices=None):
        d = self._rows(d)
        if grad is None:
            grad = self.gradient_smooth(x)
        return (grad * d).sum(axis=1)


class WeightedLassoNonneg(Functional):
    """0.5 ||y - phi x||^2 + sum_v (lambda_v |x_v| + indicator(x_v >= 0)).

    ``phi`` is a dense (num_observations, num_vertices) operator.
    """

    def __init__(self, y, phi, lam):
        self.y = np.asarray(y, dtype=np.float64).ravel()
        self.phi = np.asarray(phi, dtype=np.float64)
        self.lam = np.asarray(lam, dtype=np.float64).ravel()
        if self.phi.ndim != 2:
            raise ValueError("phi must be a 2-D operator")
        if self.phi.shape[0] != len(self.y):
            raise ValueError("phi row count must match observation length")
        if self.phi.shape[1] != len(self.lam):
            raise ValueError("lambda must have one entry per vertex")
        if np.any(self.lam < 0):
            raise ValueError("lambda weights must be nonnegative")
        self.num_vertices = self.phi.shape[1]
        self.dim = 1
        self._lipschitz = 1.05 * _squared_operator_norm(self.phi)
        self._lipschitz_diag = None

    def eval_smooth(self, x):
        r = self.phi @ self._rows(x)[:, 0] - self.y
        return 0.5 * float(r @ r)

    def gradient_smooth(self, x):
        r = self.phi @ self._rows(x)[:, 0] - self.y
        return (self.phi.T @ r).reshape(-1, 1)

    def smooth_gradient_lipschitz(self):
        return self._lipschitz

    def smooth_gradient_lipschitz_diag(self):
        if self._lipschitz_diag is None:
            # Gershgorin row bound on the (dense) normal operator
            self._lipschitz_diag = np.abs(self.phi.T @ self.phi).sum(axis=1)
        return self._lipschitz_diag

    def eval_nonsmooth(self, x):
        xv = self._rows(x)[:, 0]
        if xv.min(initial=0.0) < -FEAS_TOL:
            return np.inf
        return float(self.lam @ np.abs(xv))

    def prox_nonsmooth(self, t, step):
        tv = self._rows(t)[:, 0]
        return np.maximum(0.0, tv - step * self.lam).reshape(-1, 1)

    def directional_unary(self, x, d, grad=None, vertices=None):
        x = self._rows(x)[:, 0]
        d = self._rows(d)[:, 0]
        if grad is None:
            if vertices is not None:
                raise ValueError("precomputed grad required with a vertex subset")
            grad = self.gradient_smooth(x)
        lam = self.lam if vertices is None else self.lam[vertices]
        val = np.asarray(grad).reshape(-1) * d + lam * d
        # at the boundary x_v = 0 the indicator blocks descent below zero
        return np.where((x <= 0.0) & (d < 0.0), np.inf, val)

    def reduce(self, partition):
        c = partition.num_components
        phi_red = np.empty((self.phi.shape[0], c))
        lam_red = np.empty(c)
        for cid, verts in enumerate(partition.components):
            phi_red[:, cid] = self.phi[:, verts].sum(axis=1)
            lam_red[cid] = self.lam[verts].sum()
        return WeightedLassoNonneg(self.y, phi_red, lam_red)


def _squared_operator_norm(phi, iters=50):
    """Largest squared singular value of ``phi`` by power iteration."""
    n = phi.shape[1]
    if n == 0 or phi.shape[0] == 0:
        return 0.0
    v = np.ones(n) / np.sqrt(n)
    for _ in range(iters):
        w = phi.T @ (phi @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(v @ (phi.T @ (phi @ v)))


class KLSimplex(Functional):
    """Smoothed Kullback-Leibler fidelity with simplex-constrained rows.

    ``sum_v KL(beta u + (1-beta) y_v || beta u + (1-beta) x_v)`` plus the
    indicator of the probability simplex on every row, with ``u`` the
    uniform distribution over the classes.
    """

    def __init__(self, y, beta=0.1):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 2:
            raise ValueError("y must be (num_vertices, num_classes)")
        if not (1e-6 <= beta < 1.0):
            raise ValueError("beta must lie in [1e-6, 1)")
        if y.min() < -1e-6 or np.abs(y.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("observation rows must lie on the simplex")
        self.y = y
        self.beta = float(beta)
        self.num_vertices, self.dim = y.shape
        self.uniform = np.full(self.dim, 1.0 / self.dim)
        self._floor = self.beta * self.uniform
        self._target = self._floor + (1.0 - self.beta) * y  # strictly positive rows
        self._target_entropy = float((self._target * np.log(self._target)).sum())

    def _mix(self, x):
        return self._floor + (1.0 - self.beta) * self._rows(x)

    def eval_smooth(self, x):
        return self._target_entropy - float((self._target * np.log(self._mix(x))).sum())

    def gradient_smooth(self, x):
        return -(1.0 - self.beta) * self._target / self._mix(x)

    def smooth_gradient_lipschitz(self):
        return _kl_lipschitz(self._target, self._floor, self.beta)

    def smooth_gradient_lipschitz_diag(self):
        return _kl_lipschitz_diag(self._target, self._floor, self.beta)

    def eval_nonsmooth(self, x):
        return _simplex_indicator(self._rows(x))

    def prox_nonsmooth(self, t, step):
        return project_simplex_rows(self._rows(t))

    def directional_unary(self, x, d, grad=None, vertices=None):
        x = self._rows(x)
        d = self._rows(d)
        if grad is None:
            if vertices is not None:
                raise ValueError("precomputed grad required with a vertex subset")
            grad = self.gradient_smooth(x)
        return _simplex_directional(x, d, grad)

    def reduce(self, partition):
        comp = partition.component_of
        c = partition.num_components
        agg = _component_sums(comp, self._target, c)
        return _ReducedKLSimplex(agg, self.beta, self._target_entropy)


class _ReducedKLSimplex(Functional):
    """KL fidelity on partition-constant signals via aggregated targets."""

    def __init__(self, target, beta, target_entropy):
        self._target = target
        self.beta = float(beta)
        self._target_entropy = float(target_entropy)
        self.num_vertices, self.dim = target.shape
        self.uniform = np.full(self.dim, 1.0 / self.dim)
        self._floor = self.beta * self.uniform

    def _mix(self, x):
        return self._floor + (1.0 - self.beta) * self._rows(x)

    def eval_smooth(self, x):
        return self._target_entropy - float((self._target * np.log(self._mix(x))).sum())

    def gradient_smooth(self, x):
        return -(1.0 - self.beta) * self._target / self._mix(x)

    def smooth_gradient_lipschitz(self):
        return _kl_lipschitz(self._target, self._floor, self.beta)

    def smooth_gradient_lipschitz_diag(self):
        return _kl_lipschitz_diag(self._target, self._floor, self.beta)

    def eval_nonsmooth(self, x):
        return _simplex_indicator(self._rows(x))

    def prox_nonsmooth(self, t, step):
        return project_simplex_rows(self._rows(t))

    def directional_unary(self, x, d, grad=None, vertices=None):
        x = self._rows(x)
        d = self._rows(d)
        if grad is None:
            grad = self.gradient_smooth(x)
        return _simplex_directional(x, d, grad)


def _kl_lipschitz(target, floor, beta):
    # curvature bound: (1-beta)^2 * target / mix^2 with mix >= floor
    return float(((1.0 - beta) ** 2 * target / floor[None, :] ** 2).max())


def _kl_lipschitz_diag(target, floor, beta):
    return ((1.0 - beta) ** 2 * target / floor[None, :] ** 2).max(axis=1)


def _simplex_indicator(x):
    if x.min(initial=0.0) < -FEAS_TOL:
        return np.inf
    if x.shape[0] and np.abs(x.sum(axis=1) - 1.0).max() > FEAS_TOL:
        return np.inf
    return 0.0


def _simplex_directional(x, d, grad):
    val = (grad * d).sum(axis=1)
    # feasible directions keep the row on the simplex for small steps
    bad = np.abs(d.sum(axis=1)) > FEAS_TOL
    bad |= ((x <= ZERO_TOL) & (d < -FEAS_TOL)).any(axis=1)
    return np.where(bad, np.inf, val)


def total_variation(graph, x):
    """sum over edges of w_uv ||x_u - x_v|| (Euclidean norm per edge)."""
    if graph.num_edges == 0:
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    diff = x[graph.edge_u] - x[graph.edge_v]
    return float(graph.edge_weight @ np.sqrt((diff ** 2).sum(axis=1)))


def eval_objective(functional, graph, x):
    """Full objective: fidelity plus graph total variation (+inf if infeasible)."""
    x = vertex_matrix(x, functional.num_vertices, functional.dim)
    if graph.num_vertices != functional.num_vertices:
        raise ValueError("graph and functional disagree on the vertex count")
    nonsmooth = functional.eval_nonsmooth(x)
    if not np.isfinite(nonsmooth):
        return np.inf
    return functional.eval_smooth(x) + nonsmooth + total_variation(graph, x)
