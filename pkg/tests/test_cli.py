import json

import numpy as np
import pytest

import gtvcut as g
from gtvcut import cli
from gtvcut.fileio import (FileFormatError, read_graph, read_matrix,
                           read_operator, write_graph, write_matrix)


def run_cli(args):
    return cli.main(args)


def test_gen_chain_zero_noise(tmp_path, capsys):
    prefix = str(tmp_path / "inst")
    assert run_cli(["gen", "--kind", "chain", "--n", "4", "--blocks", "2",
                    "--noise", "0", "--seed", "7", "--out-prefix", prefix]) == 0
    obs = read_matrix(prefix + ".obs")
    assert obs.shape == (4, 1)
    assert len(np.unique(obs)) == 2  # piecewise constant with two levels
    truth = read_matrix(prefix + ".truth")
    assert np.array_equal(obs, truth)


def test_gen_grid_edge_count(tmp_path):
    prefix = str(tmp_path / "grid")
    assert run_cli(["gen", "--kind", "grid", "--rows", "16", "--cols", "16",
                    "--seed", "1", "--out-prefix", prefix]) == 0
    gr = read_graph(prefix + ".graph")
    assert gr.num_vertices == 256
    assert gr.num_edges == 480


def test_gen_deterministic(tmp_path):
    a = str(tmp_path / "a")
    b = str(tmp_path / "b")
    args = ["gen", "--kind", "knn-cloud", "--n", "40", "--k", "3",
            "--problem", "kl", "--classes", "3", "--seed", "9"]
    assert run_cli(args + ["--out-prefix", a]) == 0
    assert run_cli(args + ["--out-prefix", b]) == 0
    for suffix in (".graph", ".obs", ".truth"):
        with open(a + suffix, "rb") as fa, open(b + suffix, "rb") as fb:
            assert fa.read() == fb.read()


def test_gen_lasso_files_roundtrip(tmp_path):
    prefix = str(tmp_path / "lasso")
    assert run_cli(["gen", "--kind", "chain", "--n", "30", "--problem", "lasso",
                    "--extra-edges", "10", "--operator-rows", "8",
                    "--seed", "3", "--out-prefix", prefix]) == 0
    gr = read_graph(prefix + ".graph")
    assert gr.num_edges == 29 + 10
    phi = read_operator(prefix + ".leadfield")
    assert phi.shape == (8, 30)
    lam = read_matrix(prefix + ".lambda", expected_rows=30)
    assert np.all(lam >= 0)


def test_graph_file_roundtrip(tmp_path):
    gr = g.build_graph([(0, 1, 0.125), (1, 2, 3.0), (0, 3, 1e-3)], 4)
    path = str(tmp_path / "g.graph")
    write_graph(path, gr)
    back = read_graph(path)
    assert back.num_vertices == gr.num_vertices
    assert np.array_equal(back.edge_u, gr.edge_u)
    assert np.array_equal(back.edge_v, gr.edge_v)
    assert np.array_equal(back.edge_weight, gr.edge_weight)


def test_matrix_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((7, 3))
    path = str(tmp_path / "x.txt")
    write_matrix(path, x)
    assert np.array_equal(read_matrix(path), x)


def test_malformed_graph_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.graph"
    path.write_text("3 2\n0 1 1.0\n0 oops 1.0\n")
    code = run_cli(["solve", "--problem", "quadratic", "--graph", str(path),
                    "--obs", str(path)])
    assert code == 1
    err = capsys.readouterr().err
    assert "bad.graph:3" in err


def test_missing_leadfield_is_input_error(tmp_path, capsys):
    gpath = tmp_path / "g.graph"
    write_graph(gpath, g.build_graph([(0, 1, 1.0)], 2))
    opath = tmp_path / "obs.txt"
    write_matrix(opath, np.zeros(2))
    code = run_cli(["solve", "--problem", "lasso", "--graph", str(gpath),
                    "--obs", str(opath)])
    assert code == 1
    assert "leadfield" in capsys.readouterr().err


def test_unknown_flag_exits_with_input_error():
    with pytest.raises(SystemExit) as exc:
        run_cli(["solve", "--nonsense"])
    assert exc.value.code == 1


def test_solver_failure_exit_code(tmp_path, capsys, monkeypatch):
    gpath = tmp_path / "g.graph"
    write_graph(gpath, g.build_graph([(0, 1, 1.0)], 2))
    opath = tmp_path / "obs.txt"
    write_matrix(opath, np.zeros(2))

    from gtvcut.pdsolver import SolverDivergenceError

    def boom(spec):
        raise SolverDivergenceError(3, np.inf)

    monkeypatch.setattr(cli, "run_spec", boom)
    code = run_cli(["solve", "--problem", "quadratic", "--graph", str(gpath),
                    "--obs", str(opath)])
    assert code == 2
    assert "solver failure" in capsys.readouterr().err


@pytest.fixture
def quad_instance(tmp_path):
    prefix = str(tmp_path / "q")
    run_cli(["gen", "--kind", "grid", "--rows", "8", "--cols", "8",
             "--blocks", "4", "--noise", "0.2", "--weight", "0.4",
             "--seed", "5", "--out-prefix", prefix])
    return prefix


def test_solve_zero_weight_returns_observations(tmp_path):
    prefix = str(tmp_path / "z")
    run_cli(["gen", "--kind", "chain", "--n", "12", "--noise", "0.1",
             "--weight", "0.0", "--seed", "2", "--out-prefix", prefix])
    sol = str(tmp_path / "sol.txt")
    assert run_cli(["solve", "--problem", "quadratic", "--graph", prefix + ".graph",
                    "--obs", prefix + ".obs", "--solver", "pcp", "--tol", "1e-10",
                    "--solution-out", sol]) == 0
    obs = read_matrix(prefix + ".obs")
    x = read_matrix(sol)
    assert np.allclose(x, obs, atol=1e-6)


def test_solve_cp_equals_pcp(quad_instance, tmp_path):
    out1 = str(tmp_path / "cp.txt")
    out2 = str(tmp_path / "pcp.txt")
    base = ["--problem", "quadratic", "--graph", quad_instance + ".graph",
            "--obs", quad_instance + ".obs", "--tol", "1e-8"]
    assert run_cli(["solve"] + base + ["--solver", "cp", "--solution-out", out1]) == 0
    assert run_cli(["solve"] + base + ["--solver", "pcp", "--threads", "3",
                                       "--solution-out", out2]) == 0
    with open(out1, "rb") as f1, open(out2, "rb") as f2:
        assert f1.read() == f2.read()


def test_solve_pcp_matches_baseline(quad_instance, tmp_path, capsys):
    trace = str(tmp_path / "t.csv")
    assert run_cli(["solve", "--problem", "quadratic",
                    "--graph", quad_instance + ".graph",
                    "--obs", quad_instance + ".obs", "--solver", "pcp",
                    "--tol", "1e-9", "--trace-out", trace]) == 0
    out = capsys.readouterr().out
    f_pcp = float([l for l in out.splitlines() if l.startswith("objective")][0].split()[1])
    assert run_cli(["solve", "--problem", "quadratic",
                    "--graph", quad_instance + ".graph",
                    "--obs", quad_instance + ".obs", "--solver", "baseline",
                    "--tol", "1e-10"]) == 0
    out = capsys.readouterr().out
    f_base = float([l for l in out.splitlines() if l.startswith("objective")][0].split()[1])
    assert abs(f_pcp - f_base) <= 1e-5 * abs(f_base)
    header = open(trace).readline().strip()
    assert header == "iter,time_s,objective,components,balanced"


def test_bench_gap_curves(quad_instance, tmp_path):
    config = [
        {"problem": "quadratic", "graph": quad_instance + ".graph",
         "obs": quad_instance + ".obs", "solver": "pcp", "tol": 1e-8},
        {"problem": "quadratic", "graph": quad_instance + ".graph",
         "obs": quad_instance + ".obs", "solver": "pcp", "tol": 1e-8},
        {"problem": "quadratic", "graph": quad_instance + ".graph",
         "obs": quad_instance + ".obs", "solver": "baseline", "tol": 1e-9},
    ]
    cpath = tmp_path / "bench.json"
    cpath.write_text(json.dumps(config))
    out = tmp_path / "curves.csv"
    assert run_cli(["bench", "--config", str(cpath), "--out", str(out)]) == 0
    rows = [line.strip().split(",") for line in open(out).readlines()[1:]]
    gaps = {}
    for label, it, t, obj, gap in rows:
        assert float(gap) >= 0.0
        gaps.setdefault(label, []).append(float(gap))
    # identical solver listed twice produces identical gap curves
    assert gaps["pcp-0"] == gaps["pcp-1"]


def test_solve_lasso_problem(tmp_path, capsys):
    prefix = str(tmp_path / "l")
    run_cli(["gen", "--kind", "chain", "--n", "40", "--problem", "lasso",
             "--extra-edges", "8", "--operator-rows", "12", "--weight", "0.05",
             "--seed", "4", "--out-prefix", prefix])
    sol = str(tmp_path / "sol.txt")
    code = run_cli(["solve", "--problem", "lasso", "--graph", prefix + ".graph",
                    "--obs", prefix + ".obs", "--leadfield-file", prefix + ".leadfield",
                    "--lambda-file", prefix + ".lambda", "--solver", "pcp",
                    "--tol", "1e-8", "--solution-out", sol])
    assert code == 0
    x = read_matrix(sol)
    assert x.min() >= 0.0


def test_solve_kl_problem(tmp_path, capsys):
    prefix = str(tmp_path / "k")
    run_cli(["gen", "--kind", "grid", "--rows", "6", "--cols", "6",
             "--problem", "kl", "--classes", "3", "--noise", "0.3",
             "--weight", "0.3", "--seed", "6", "--out-prefix", prefix])
    sol = str(tmp_path / "sol.txt")
    code = run_cli(["solve", "--problem", "kl", "--graph", prefix + ".graph",
                    "--obs", prefix + ".obs", "--beta", "0.1",
                    "--solver", "pcp-balanced", "--threads", "2",
                    "--tol", "1e-7", "--solution-out", sol])
    assert code == 0
    x = read_matrix(sol)
    assert x.shape[1] == 3
    assert np.abs(x.sum(axis=1) - 1.0).max() <= 1e-9


def test_solve_kl_bad_beta(tmp_path, capsys):
    prefix = str(tmp_path / "kb")
    run_cli(["gen", "--kind", "grid", "--rows", "4", "--cols", "4",
             "--problem", "kl", "--classes", "3", "--seed", "6",
             "--out-prefix", prefix])
    code = run_cli(["solve", "--problem", "kl", "--graph", prefix + ".graph",
                    "--obs", prefix + ".obs", "--beta", "1.5"])
    assert code == 1
    assert "beta" in capsys.readouterr().err


def test_bench_rejects_mismatched_instances(tmp_path, quad_instance, capsys):
    other = str(tmp_path / "other")
    run_cli(["gen", "--kind", "chain", "--n", "9", "--seed", "8",
             "--out-prefix", other])
    config = [
        {"problem": "quadratic", "graph": quad_instance + ".graph",
         "obs": quad_instance + ".obs", "solver": "pcp"},
        {"problem": "quadratic", "graph": other + ".graph",
         "obs": other + ".obs", "solver": "baseline"},
    ]
    cpath = tmp_path / "bench.json"
    cpath.write_text(json.dumps(config))
    assert run_cli(["bench", "--config", str(cpath), "--out",
                    str(tmp_path / "c.csv")]) == 1
    assert "same graph" in capsys.readouterr().err
