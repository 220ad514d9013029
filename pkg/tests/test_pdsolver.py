import numpy as np
import pytest

import gtvcut as g
from gtvcut import pdsolver
from gtvcut.graph import build_reduced_graph
from helpers import chain_graph, grid_graph


def test_single_node_unconstrained():
    gr = g.build_graph([], 1)
    f = g.QuadraticFidelity(np.array([3.25]))
    x, tr = pdsolver.solve(gr, f, tol=1e-12)
    assert x[0, 0] == pytest.approx(3.25, abs=1e-8)
    assert tr.stop_reason == "tol"


def test_two_node_shrinkage_closed_form():
    # gap >= w: both ends move toward each other by w/2 (gradient scale 2)
    gr = chain_graph(2, weight=1.0)
    f = g.QuadraticFidelity(np.array([0.0, 2.0]))
    x, _ = pdsolver.solve(gr, f, tol=1e-12, max_iter=100000)
    assert np.allclose(x.ravel(), [0.5, 1.5], atol=1e-6)


def test_two_node_fusion_closed_form():
    gr = chain_graph(2, weight=4.0)
    f = g.QuadraticFidelity(np.array([0.0, 2.0]))
    x, _ = pdsolver.solve(gr, f, tol=1e-12, max_iter=100000)
    assert np.allclose(x.ravel(), [1.0, 1.0], atol=1e-6)


def test_kkt_zero_at_exact_solution():
    gr = g.build_graph([], 1)
    f = g.QuadraticFidelity(np.array([2.0]))
    residual = g.kkt_residual(gr, f, np.array([[2.0]]), np.zeros((0, 1)))
    assert residual <= 1e-9


def test_kkt_trend_decreases():
    rng = np.random.default_rng(2)
    gr = grid_graph(5, 5, weight=0.6)
    f = g.QuadraticFidelity(rng.standard_normal(25) * 3)
    _, tr = pdsolver.solve(gr, f, tol=1e-16, max_iter=400, record_kkt=True)
    k = tr.kkt
    # min over successive windows shrinks as the iterates settle
    w = 30
    mins = [k[i:i + w].min() for i in range(0, len(k) - w + 1, w)]
    assert len(mins) >= 4
    assert all(mins[i + 1] <= mins[i] + 1e-12 for i in range(len(mins) - 1))
    assert mins[-1] < mins[0] * 1e-2


def test_kkt_positive_off_solution():
    gr = chain_graph(3)
    f = g.WeightedLassoNonneg(np.zeros(2), np.ones((2, 3)), np.ones(3))
    xi = np.array([[-1.0], [0.5], [2.0]])
    assert g.kkt_residual(gr, f, xi, np.zeros((2, 1))) > 0


def test_final_objective_never_above_initial():
    rng = np.random.default_rng(3)
    gr = grid_graph(4, 4, weight=0.7)
    f = g.QuadraticFidelity(rng.standard_normal(16))
    init = rng.standard_normal((16, 1)) * 5
    x, tr = pdsolver.solve(gr, f, init=init, tol=1e-8, max_iter=50)
    assert tr.objective[-1] <= tr.objective[0] + 1e-12
    final = f.eval_fidelity(x) + g.total_variation(gr, x)
    assert final <= tr.objective[0] + 1e-12


def test_returned_iterate_feasible():
    rng = np.random.default_rng(5)
    gr = chain_graph(8, weight=0.2)
    lasso = g.WeightedLassoNonneg(rng.standard_normal(4),
                                  rng.standard_normal((4, 8)),
                                  np.full(8, 0.1))
    x, _ = pdsolver.solve(gr, lasso, tol=1e-8)
    assert x.min() >= 0.0
    kl = g.KLSimplex(g.project_simplex_rows(rng.random((8, 3))), 0.1)
    xk, _ = pdsolver.solve(gr, kl, tol=1e-8)
    assert np.abs(xk.sum(axis=1) - 1.0).max() <= 1e-9
    assert xk.min() >= -1e-9


def test_singleton_reduction_matches_full_solve():
    rng = np.random.default_rng(7)
    gr = grid_graph(3, 4, weight=0.5)
    f = g.QuadraticFidelity(rng.standard_normal(12))
    tol = 1e-10
    x_full, _ = pdsolver.solve(gr, f, tol=tol, max_iter=100000)
    part = g.Partition.singletons(gr)
    red = build_reduced_graph(gr, part)
    rf = f.reduce(part)
    xi, _ = pdsolver.solve(red, rf, tol=tol, max_iter=100000)
    f_full = f.eval_fidelity(x_full) + g.total_variation(gr, x_full)
    f_red = rf.eval_fidelity(xi) + g.total_variation(red, xi)
    assert f_red == pytest.approx(f_full, rel=2 * tol, abs=1e-9)


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_divergence_reported_with_iteration():
    class BadLipschitz(g.QuadraticFidelity):
        def smooth_gradient_lipschitz(self):
            return 1e-9

        def smooth_gradient_lipschitz_diag(self):
            return np.full(self.num_vertices, 1e-9)

    gr = g.build_graph([], 2)
    f = BadLipschitz(np.array([1.0, -1.0]))
    with pytest.raises(pdsolver.SolverDivergenceError) as err:
        pdsolver.solve(gr, f, init=np.array([10.0, 10.0]), tol=1e-9)
    assert err.value.iteration >= 1


def test_rejects_bad_tol():
    gr = g.build_graph([], 1)
    f = g.QuadraticFidelity(np.array([0.0]))
    with pytest.raises(ValueError):
        pdsolver.solve(gr, f, tol=0.0)
