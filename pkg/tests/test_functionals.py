import numpy as np
import pytest

import gtvcut as g
from gtvcut.functionals import vertex_matrix
from helpers import (chain_graph, fd_gradient, grid_graph,
                     random_connected_partition, simplex_projection_oracle)


def _random_kl(rng, n=12, k=3, beta=0.1):
    y = g.project_simplex_rows(rng.random((n, k)))
    return g.KLSimplex(y, beta)


def _random_lasso(rng, n=15, m=6):
    phi = rng.standard_normal((m, n))
    y = rng.standard_normal(m)
    lam = rng.uniform(0.05, 0.5, size=n)
    return g.WeightedLassoNonneg(y, phi, lam)


# ---------------------------------------------------------------------------
# objective evaluation

def test_objective_zero_at_perfect_constant_fit():
    gr = grid_graph(3, 3)
    y = np.full(9, 4.2)
    f = g.QuadraticFidelity(y)
    assert g.eval_objective(f, gr, y) == 0.0


def test_objective_single_edge():
    gr = chain_graph(2, weight=2.0)
    f = g.QuadraticFidelity(np.array([0.0, 3.0]))
    assert g.eval_objective(f, gr, np.array([0.0, 3.0])) == pytest.approx(6.0)


def test_objective_kl_at_observations_is_tv_only():
    rng = np.random.default_rng(0)
    gr = chain_graph(6, weight=0.5)
    y = g.project_simplex_rows(rng.random((6, 3)))
    f = g.KLSimplex(y, 0.1)
    assert g.eval_objective(f, gr, y) == pytest.approx(g.total_variation(gr, y), abs=1e-12)


def test_objective_shape_mismatch():
    gr = chain_graph(3)
    f = g.QuadraticFidelity(np.zeros(3))
    with pytest.raises(ValueError):
        g.eval_objective(f, gr, np.zeros(4))


def test_objective_infeasible_is_infinite():
    gr = chain_graph(3)
    f = g.WeightedLassoNonneg(np.zeros(2), np.zeros((2, 3)), np.zeros(3))
    assert g.eval_objective(f, gr, np.array([1.0, -1.0, 0.0])) == np.inf


# ---------------------------------------------------------------------------
# gradients

def test_quadratic_gradient_example():
    f = g.QuadraticFidelity(np.array([1.0, 2.0]))
    grad = f.gradient_smooth(np.zeros(2))
    assert np.allclose(grad.ravel(), [-2.0, -4.0])


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(42)
    quad = g.QuadraticFidelity(rng.standard_normal(8))
    lasso = _random_lasso(rng, n=10, m=5)
    kl = _random_kl(rng, n=8, k=3)
    for f, x in [
        (quad, rng.standard_normal((8, 1))),
        (lasso, rng.uniform(0.1, 2.0, size=(10, 1))),
        (kl, g.project_simplex_rows(rng.random((8, 3)) + 0.2)),
    ]:
        grad = f.gradient_smooth(x)
        fd = fd_gradient(f, x)
        assert np.abs(grad - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


def test_kl_gradient_at_observations():
    rng = np.random.default_rng(1)
    kl = _random_kl(rng, n=5, k=4, beta=0.1)
    grad = kl.gradient_smooth(kl.y)
    assert np.allclose(grad, -(1.0 - 0.1))


def test_kl_beta_validation():
    y = np.full((3, 2), 0.5)
    with pytest.raises(ValueError):
        g.KLSimplex(y, beta=0.0)
    with pytest.raises(ValueError):
        g.KLSimplex(y, beta=1.0)


# ---------------------------------------------------------------------------
# prox operators

def test_lasso_prox_one_sided_threshold():
    f = g.WeightedLassoNonneg(np.zeros(1), np.zeros((1, 2)), np.array([2.0, 2.0]))
    out = f.prox_nonsmooth(np.array([5.0, -1.0]), 1.0)
    assert np.allclose(out.ravel(), [3.0, 0.0])


def test_simplex_projection_examples():
    assert np.allclose(g.project_simplex_rows(np.array([2.0, 0.0])), [1.0, 0.0])
    out = g.project_simplex_rows(np.array([[0.3, 0.3, 0.3]]))
    assert np.allclose(out.sum(axis=1), 1.0)


def test_simplex_projection_against_active_set_oracle():
    rng = np.random.default_rng(9)
    for k in (2, 3, 4):
        for _ in range(60):
            t = rng.standard_normal(k) * rng.uniform(0.5, 3.0)
            got = g.project_simplex_rows(t)
            want = simplex_projection_oracle(t)
            assert np.abs(got - want).max() <= 1e-10
            assert got.sum() == pytest.approx(1.0, abs=1e-12)
            assert got.min() >= 0.0


def test_prox_nonexpansive():
    rng = np.random.default_rng(33)
    quad = g.QuadraticFidelity(rng.standard_normal(6))
    lasso = _random_lasso(rng, n=6, m=3)
    kl = _random_kl(rng, n=6, k=3)
    for f, shape in [(quad, (6, 1)), (lasso, (6, 1)), (kl, (6, 3))]:
        for _ in range(40):
            a = rng.standard_normal(shape) * 2
            b = rng.standard_normal(shape) * 2
            da = f.prox_nonsmooth(a, 0.7)
            db = f.prox_nonsmooth(b, 0.7)
            assert np.linalg.norm(da - db) <= np.linalg.norm(a - b) + 1e-12


# ---------------------------------------------------------------------------
# directional derivatives

def test_directional_zero_direction():
    rng = np.random.default_rng(4)
    quad = g.QuadraticFidelity(rng.standard_normal(5))
    lasso = _random_lasso(rng, n=5, m=3)
    kl = _random_kl(rng, n=5, k=3)
    for f, x in [
        (quad, rng.standard_normal((5, 1))),
        (lasso, rng.uniform(0, 1, size=(5, 1))),
        (kl, g.project_simplex_rows(rng.random((5, 3)))),
    ]:
        x = vertex_matrix(x, 5, f.dim)
        val = f.directional_unary(x, np.zeros_like(x))
        assert np.allclose(val, 0.0)


def test_directional_lasso_boundary():
    f = g.WeightedLassoNonneg(np.zeros(1), np.zeros((1, 1)), np.array([1.0]))
    x = np.array([[0.0]])
    grad = np.array([[0.7]])
    up = f.directional_unary(x, np.array([[1.0]]), grad=grad)
    down = f.directional_unary(x, np.array([[-1.0]]), grad=grad)
    assert up[0] == pytest.approx(1.7)
    assert down[0] == np.inf


def test_directional_quadratic_example():
    f = g.QuadraticFidelity(np.array([0.0]))
    val = f.directional_unary(np.array([[1.0]]), np.array([[-1.0]]))
    assert val[0] == pytest.approx(-2.0)


def test_directional_positive_homogeneity():
    rng = np.random.default_rng(8)
    kl = _random_kl(rng, n=6, k=3)
    x = g.project_simplex_rows(rng.random((6, 3)) + 0.3)
    d = rng.standard_normal((6, 3))
    d -= d.mean(axis=1, keepdims=True)  # feasible: sums to zero, interior x
    base = kl.directional_unary(x, d)
    scaled = kl.directional_unary(x, 2.5 * d)
    assert np.allclose(scaled, 2.5 * base)


def test_directional_kl_infeasible():
    kl = g.KLSimplex(np.array([[1.0, 0.0]]), 0.1)
    x = np.array([[1.0, 0.0]])
    # direction leaving the simplex (nonzero sum)
    val = kl.directional_unary(x, np.array([[1.0, 1.0]]))
    assert val[0] == np.inf
    # decreasing a zero coordinate
    val = kl.directional_unary(x, np.array([[1.0, -1.0]]))
    assert val[0] == np.inf
    # valid exchange direction
    val = kl.directional_unary(x, np.array([[-1.0, 1.0]]))
    assert np.isfinite(val[0])


# ---------------------------------------------------------------------------
# reductions

def test_reduce_singletons_equals_parent():
    rng = np.random.default_rng(12)
    gr = chain_graph(7)
    part = g.Partition.singletons(gr)
    quad = g.QuadraticFidelity(rng.standard_normal(7))
    lasso = _random_lasso(rng, n=7, m=4)
    kl = _random_kl(rng, n=7, k=3)
    for f, x in [
        (quad, rng.standard_normal((7, 1))),
        (lasso, rng.uniform(0, 1, size=(7, 1))),
        (kl, g.project_simplex_rows(rng.random((7, 3)))),
    ]:
        red = f.reduce(part)
        assert red.eval_fidelity(x) == pytest.approx(f.eval_fidelity(x), rel=1e-12)


def test_reduce_quadratic_minimizer_is_mean():
    y = np.array([1.0, 3.0, 8.0])
    gr = g.build_graph([(0, 1, 1.0), (1, 2, 1.0)], 3)
    f = g.QuadraticFidelity(y)
    part = g.Partition.trivial(gr)
    red = f.reduce(part)
    xi = np.array([[y.mean()]])
    assert np.abs(red.gradient_smooth(xi)).max() <= 1e-12


def test_lifting_identity_random_partitions():
    rng = np.random.default_rng(100)
    gr = grid_graph(4, 5)
    n = gr.num_vertices
    quad = g.QuadraticFidelity(rng.standard_normal(n))
    lasso = g.WeightedLassoNonneg(rng.standard_normal(6),
                                  rng.standard_normal((6, n)),
                                  rng.uniform(0, 1, size=n))
    kl = g.KLSimplex(g.project_simplex_rows(rng.random((n, 3))), 0.1)
    for f in (quad, lasso, kl):
        for _ in range(25):
            part = random_connected_partition(gr, rng)
            red = f.reduce(part)
            if f.dim == 1:
                xi = rng.uniform(0.0, 2.0, size=(part.num_components, 1))
            else:
                xi = g.project_simplex_rows(rng.random((part.num_components, f.dim)))
            lifted = xi[part.component_of]
            a = red.eval_fidelity(xi)
            b = f.eval_fidelity(lifted)
            assert a == pytest.approx(b, rel=1e-12)


def test_reduced_lasso_statistics():
    rng = np.random.default_rng(6)
    gr = chain_graph(6)
    f = _random_lasso(rng, n=6, m=4)
    part = g.Partition.from_labels(gr, np.array([0, 0, 1, 1, 1, 2]))
    red = f.reduce(part)
    assert red.phi.shape == (4, 3)
    assert np.allclose(red.phi[:, 0], f.phi[:, [0, 1]].sum(axis=1))
    assert red.lam[1] == pytest.approx(f.lam[2:5].sum())
