"""Command-line front end: synthetic instances, solve runs and benchmarks.

Exit codes: 0 success, 1 input error, 2 solver failure.
"""

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import cutpursuit, pdsolver
from .fileio import (FileFormatError, read_graph, read_matrix, read_operator,
                     write_graph, write_matrix, write_operator)
from .functionals import (KLSimplex, QuadraticFidelity, WeightedLassoNonneg,
                          eval_objective, project_simplex_rows)
from .graph import Partition, balance_decompose, build_graph_arrays

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

PROBLEMS = ("quadratic", "lasso", "kl")
SOLVERS = ("pcp", "pcp-balanced", "cp", "baseline")


class InputError(Exception):
    pass


@dataclass
class RunSpec:
    """One solve invocation (CLI flags or one bench config entry)."""
    problem: str
    graph: str
    obs: str
    lambda_file: str = None
    leadfield_file: str = None
    beta: float = 0.1
    solver: str = "pcp"
    threads: int = 1
    balance: bool = False
    tol: float = 1e-6
    max_iter: int = None
    seed: int = 0
    solution_out: str = None
    trace_out: str = None
    label: str = None

    def validate(self):
        if self.problem not in PROBLEMS:
            raise InputError(f"unknown problem {self.problem!r}")
        if self.solver not in SOLVERS:
            raise InputError(f"unknown solver {self.solver!r}")
        if self.problem == "lasso" and not self.leadfield_file:
            raise InputError("lasso problems need --leadfield-file")
        if self.problem == "kl" and not 0.0 < self.beta < 1.0:
            raise InputError("beta must lie in (0, 1) for kl problems")
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if self.label is None:
            self.label = self.solver


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INPUT)


def _build_parser():
    parser = _Parser(prog="gtvcut",
                     description="Graph-total-variation solvers and benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--kind", choices=("chain", "grid", "knn-cloud"), required=True)
    gen.add_argument("--problem", choices=PROBLEMS, default="quadratic")
    gen.add_argument("--n", type=int, default=100, help="vertices (chain, knn-cloud)")
    gen.add_argument("--rows", type=int, default=16)
    gen.add_argument("--cols", type=int, default=16)
    gen.add_argument("--k", type=int, default=5, help="neighbors (knn-cloud)")
    gen.add_argument("--blocks", type=int, default=4, help="ground-truth pieces")
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--weight", type=float, default=1.0, help="uniform edge weight")
    gen.add_argument("--extra-edges", type=int, default=0,
                     help="additional random edges on top of the base topology")
    gen.add_argument("--classes", type=int, default=4, help="classes (kl)")
    gen.add_argument("--operator-rows", type=int, default=40, help="observations (lasso)")
    gen.add_argument("--sparsity", type=float, default=0.05,
                     help="support fraction of the ground truth (lasso)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out-prefix", required=True)

    solve = sub.add_parser("solve", help="solve one instance")
    solve.add_argument("--problem", choices=PROBLEMS, required=True)
    solve.add_argument("--graph", required=True)
    solve.add_argument("--obs", required=True)
    solve.add_argument("--lambda-file", dest="lambda_file")
    solve.add_argument("--leadfield-file", dest="leadfield_file")
    solve.add_argument("--beta", type=float, default=0.1)
    solve.add_argument("--solver", choices=SOLVERS, default="pcp")
    solve.add_argument("--threads", type=int, default=1)
    solve.add_argument("--balance", action="store_true")
    solve.add_argument("--tol", type=float, default=1e-6)
    solve.add_argument("--max-iter", type=int, default=None,
                       help="outer iterations (cut solvers) or iterations (baseline)")
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--solution-out")
    solve.add_argument("--trace-out")

    bench = sub.add_parser("bench", help="run several solvers on one instance")
    bench.add_argument("--config", required=True,
                       help="JSON list of solve specs (same keys as solve flags)")
    bench.add_argument("--out", required=True, help="gap-curve CSV path")
    bench.add_argument("--gap-target", type=float, default=1e-4)
    return parser


# ---------------------------------------------------------------------------
# instance generation

def _chain_edges(n):
    ids = np.arange(n - 1, dtype=np.int64)
    return ids, ids + 1


def _grid_edges(rows, cols):
    ids = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    eu = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    ev = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    return eu, ev


def _knn_edges(n, k, rng):
    pts = rng.uniform(size=(n, 2))
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    k = min(k, n - 1)
    nn = np.argsort(d2, axis=1)[:, :k]
    eu = np.repeat(np.arange(n, dtype=np.int64), k)
    ev = nn.ravel().astype(np.int64)
    lo, hi = np.minimum(eu, ev), np.maximum(eu, ev)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return pairs[:, 0], pairs[:, 1]


def _extra_random_edges(n, existing, count, rng):
    have = set(zip(existing[0].tolist(), existing[1].tolist()))
    eu, ev = [], []
    guard = 0
    while len(eu) < count and guard < 100 * count + 1000:
        guard += 1
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        lo, hi = (int(u), int(v)) if u < v else (int(v), int(u))
        if (lo, hi) in have:
            continue
        have.add((lo, hi))
        eu.append(lo)
        ev.append(hi)
    return np.array(eu, dtype=np.int64), np.array(ev, dtype=np.int64)


def _piecewise_truth(graph, blocks, rng):
    """Connected blocks via capped BFS growth, one random level per block."""
    cap = max(1, int(np.ceil(graph.num_vertices / blocks)))
    parts = balance_decompose(graph, np.arange(graph.num_vertices), cap)
    block_of = np.empty(graph.num_vertices, dtype=np.int64)
    for b, verts in enumerate(parts):
        block_of[verts] = b
    return block_of, len(parts)


def cmd_gen(args):
    rng = np.random.default_rng(args.seed)
    if args.kind == "chain":
        n = args.n
        eu, ev = _chain_edges(n)
    elif args.kind == "grid":
        n = args.rows * args.cols
        eu, ev = _grid_edges(args.rows, args.cols)
    else:
        n = args.n
        eu, ev = _knn_edges(n, args.k, rng)
    if n < 1:
        raise InputError("instance must have at least one vertex")
    if args.extra_edges:
        xu, xv = _extra_random_edges(n, (eu, ev), args.extra_edges, rng)
        eu = np.concatenate([eu, xu])
        ev = np.concatenate([ev, xv])
    graph = build_graph_arrays(eu, ev, np.full(len(eu), args.weight), n)
    block_of, nblocks = _piecewise_truth(graph, args.blocks, rng)

    prefix = args.out_prefix
    write_graph(prefix + ".graph", graph)
    if args.problem == "quadratic":
        levels = rng.uniform(0.0, 10.0, size=nblocks)
        truth = levels[block_of]
        obs = truth + args.noise * rng.standard_normal(n)
        write_matrix(prefix + ".truth", truth)
        write_matrix(prefix + ".obs", obs)
    elif args.problem == "kl":
        k = args.classes
        labels = rng.integers(0, k, size=nblocks)
        truth = np.zeros((n, k))
        truth[np.arange(n), labels[block_of]] = 1.0
        scores = truth + args.noise * rng.standard_normal((n, k))
        obs = project_simplex_rows(scores)
        write_matrix(prefix + ".truth", truth)
        write_matrix(prefix + ".obs", obs)
    else:  # lasso
        support = max(1, int(round(args.sparsity * n)))
        idx = rng.choice(n, size=support, replace=False)
        truth = np.zeros(n)
        truth[idx] = rng.uniform(0.5, 2.0, size=support)
        nobs = args.operator_rows
        phi = rng.standard_normal((nobs, n)) / np.sqrt(nobs)
        obs = phi @ truth + args.noise * rng.standard_normal(nobs)
        lam = np.full(n, 0.1 * np.abs(phi.T @ obs).max())
        write_matrix(prefix + ".truth", truth)
        write_matrix(prefix + ".obs", obs)
        write_operator(prefix + ".leadfield", phi)
        write_matrix(prefix + ".lambda", lam)
    print(f"wrote {prefix}.graph ({n} vertices, {graph.num_edges} edges)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solving

def _load_problem(spec):
    graph = read_graph(spec.graph)
    if spec.problem == "quadratic":
        obs = read_matrix(spec.obs, expected_rows=graph.num_vertices)
        functional = QuadraticFidelity(obs if obs.shape[1] > 1 else obs[:, 0])
    elif spec.problem == "kl":
        obs = read_matrix(spec.obs, expected_rows=graph.num_vertices)
        if obs.shape[1] < 2:
            raise InputError("kl observations need at least two classes per row")
        functional = KLSimplex(obs, beta=spec.beta)
    else:
        obs = read_matrix(spec.obs)[:, 0]
        phi = read_operator(spec.leadfield_file)
        if phi.shape[1] != graph.num_vertices:
            raise InputError("lead-field column count must match the vertex count")
        if phi.shape[0] != len(obs):
            raise InputError("lead-field row count must match the observation length")
        if spec.lambda_file:
            lam = read_matrix(spec.lambda_file, expected_rows=graph.num_vertices)[:, 0]
        else:
            lam = np.zeros(graph.num_vertices)
        functional = WeightedLassoNonneg(obs, phi, lam)
    return graph, functional


def _solution_components(graph, x):
    _, codes = np.unique(np.asarray(x).reshape(len(x), -1), axis=0, return_inverse=True)
    return Partition.from_labels(graph, codes.astype(np.int64)).num_components


def run_spec(spec):
    """Execute one spec; returns (x, trace rows, final objective, components)."""
    graph, functional = _load_problem(spec)
    if spec.solver == "baseline":
        max_iter = spec.max_iter if spec.max_iter else 200000
        x, trace = pdsolver.solve(graph, functional, tol=spec.tol, max_iter=max_iter)
        rows = [(i, trace.time_s[i], trace.objective[i], graph.num_vertices, 0)
                for i in range(len(trace.objective))]
        objective = eval_objective(functional, graph, x)
        comps = _solution_components(graph, x)
        return x, rows, objective, comps
    balance = spec.balance or spec.solver == "pcp-balanced"
    threads = 1 if spec.solver == "cp" else spec.threads
    config = cutpursuit.PcpConfig(
        reduced_tol=spec.tol,
        max_outer_iter=spec.max_iter if spec.max_iter else 1000,
        balance=balance,
        worker_count=threads,
        direction_mode=cutpursuit.default_direction_mode(functional),
    )
    x, partition, trace = cutpursuit.run(graph, functional, config)
    rows = [(i + 1, trace.time_s[i], trace.objective[i], trace.components[i],
             int(trace.balanced[i])) for i in range(trace.num_rows())]
    objective = eval_objective(functional, graph, x)
    return x, rows, objective, partition.num_components


def _write_trace_rows(path, rows):
    with open(path, "w") as f:
        f.write("iter,time_s,objective,components,balanced\n")
        for it, t, obj, comps, bal in rows:
            f.write(f"{it},{t:.6f},{obj:.17g},{comps},{bal}\n")


def cmd_solve(args):
    spec = RunSpec(problem=args.problem, graph=args.graph, obs=args.obs,
                   lambda_file=args.lambda_file, leadfield_file=args.leadfield_file,
                   beta=args.beta, solver=args.solver, threads=args.threads,
                   balance=args.balance, tol=args.tol, max_iter=args.max_iter,
                   seed=args.seed, solution_out=args.solution_out,
                   trace_out=args.trace_out)
    spec.validate()
    x, rows, objective, comps = run_spec(spec)
    if spec.solution_out:
        write_matrix(spec.solution_out, x)
    if spec.trace_out:
        _write_trace_rows(spec.trace_out, rows)
    print(f"objective {objective:.12g}")
    print(f"components {comps}")
    return EXIT_OK


def cmd_bench(args):
    with open(args.config) as f:
        entries = json.load(f)
    if not isinstance(entries, list) or len(entries) < 2:
        raise InputError("bench config must be a JSON list of at least two specs")
    specs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise InputError(f"bench spec {i} must be an object")
        known = {k: v for k, v in entry.items() if k in RunSpec.__dataclass_fields__}
        unknown = set(entry) - set(known)
        if unknown:
            raise InputError(f"bench spec {i} has unknown keys {sorted(unknown)}")
        try:
            spec = RunSpec(**known)
        except TypeError as exc:
            raise InputError(f"bench spec {i}: {exc}") from None
        spec.validate()
        if spec.label == spec.solver:
            spec.label = f"{spec.solver}-{i}"
        specs.append(spec)
    instance = (specs[0].graph, specs[0].obs)
    for spec in specs[1:]:
        if (spec.graph, spec.obs) != instance:
            raise InputError("all bench specs must target the same graph and observations")
    results = []
    for spec in specs:
        _, rows, objective, comps = run_spec(spec)
        results.append((spec.label, rows, objective))
        print(f"ran {spec.label}: objective {objective:.12g}, components {comps}")
    f_inf = min(min(r[2] for r in rows) for _, rows, _ in results)
    denom = max(abs(f_inf), 1e-12)
    with open(args.out, "w") as f:
        f.write("solver,iter,time_s,objective,gap\n")
        for label, rows, _ in results:
            for it, t, obj, _, _ in rows:
                gap = (obj - f_inf) / denom
                f.write(f"{label},{it},{t:.6f},{obj:.17g},{gap:.17g}\n")
    print(f"estimated optimum {f_inf:.12g}")
    for label, rows, objective in results:
        reach = [t for _, t, obj, _, _ in rows
                 if (obj - f_inf) / denom <= args.gap_target]
        when = f"{min(reach):.3f}s" if reach else "never"
        print(f"{label}: final objective {objective:.12g}, "
              f"gap<={args.gap_target:g} at {when}")
    return EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_bench(args)
    except (InputError, FileFormatError, FileNotFoundError, ValueError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except pdsolver.SolverDivergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
