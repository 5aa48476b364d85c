"""Command line front end.

    dualkit run --config cfg.json [--out trace.jsonl]
    dualkit verify --pair <id> [--seed N] [--iters N] [--tol X]
    dualkit list

``run`` executes one solver on one bundled problem and writes a JSON-lines
trace (iter, time_s, objective, residuals).  ``verify`` replays a paired
primal/dual run and reports the linking-relation residuals.  Exit codes:
0 converged or verified, 1 verification failure, 2 iteration cap reached,
3 divergence, 4 usage or configuration error.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import admm as admm_mod
from . import correction, projsplit
from .admm import AdmmConfig, ConstrainedProblem
from .convex import AffineSubspace, Quadratic
from .correction import SolverConfig
from .linops import DenseOp
from .pairings import PAIRINGS, run_pairing
from .problems import TvDenoise, random_spd
from .projsplit import CoupledLinearProblem, ProjectionProblem, SplitConfig


class UsageError(Exception):
    pass


def _require_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise UsageError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise UsageError(f"{where}: unknown keys {sorted(extra)}")
    missing = set(required) - set(obj)
    if missing:
        raise UsageError(f"{where}: missing keys {sorted(missing)}")


# ---------------------------------------------------------------------------
# bundled problems


def _build_affine_feasibility(params, rng):
    dim = int(params.get("dim", 6))
    count = int(params.get("sets", 3))
    anchor = rng.standard_normal(dim)
    sets = [AffineSubspace(dim, rng.standard_normal((dim, 1 + int(rng.integers(0, dim - 1)))), anchor)
            for _ in range(count)]
    return ProjectionProblem(rng.standard_normal(dim), sets)


def _build_convex_feasibility(params, rng):
    from .pairings import _convex_sets_instance
    f, sets = _convex_sets_instance(int(params.get("seed_shape", 0)))
    return ProjectionProblem(f, sets)


def _build_coupled_linear(params, rng):
    dim = int(params.get("dim", 5))
    count = int(params.get("blocks", 3))
    alpha = float(params.get("alpha", 1.0))
    mats = [random_spd(rng, dim, 5.0) for _ in range(count)]
    return CoupledLinearProblem(mats, alpha, rng.standard_normal(dim))


def _build_tv_denoise(params, rng):
    dim = int(params.get("dim", 32))
    alpha = float(params.get("alpha", 1.0))
    steps = np.repeat(rng.standard_normal(4), dim // 4 + 1)[:dim]
    f = steps + 0.1 * rng.standard_normal(dim)
    return TvDenoise(f, alpha)


def _build_random_constrained(params, rng):
    count = int(params.get("blocks", 3))
    w = int(params.get("dim", 4))
    beta = float(params.get("beta", 1.0))
    blocks = []
    for _ in range(count):
        dj = 2 + int(rng.integers(0, 3))
        blocks.append((Quadratic(random_spd(rng, dj, 5.0),
                                 rng.standard_normal(dj)),
                       DenseOp(rng.standard_normal((w, dj)))))
    return ConstrainedProblem(blocks, rng.standard_normal(w), beta)


PROBLEMS = {
    "affine-feasibility": (_build_affine_feasibility,
                           {"dim", "sets"},
                           "closest point in an intersection of affine sets"),
    "convex-feasibility": (_build_convex_feasibility,
                           {"seed_shape"},
                           "closest point in an intersection of boxes and halfspaces"),
    "coupled-linear": (_build_coupled_linear,
                       {"dim", "blocks", "alpha"},
                       "coupled symmetric positive definite system"),
    "tv-denoise": (_build_tv_denoise,
                   {"dim", "alpha"},
                   "1-D total-variation denoising"),
    "random-constrained": (_build_random_constrained,
                           {"dim", "blocks", "beta"},
                           "random quadratic blocks with a linear coupling constraint"),
}


# ---------------------------------------------------------------------------
# algorithms


def _split_cfg(solver):
    return SplitConfig(tau=float(solver.get("tau", 0.25)),
                       max_iters=int(solver["max_iters"]),
                       tol=float(solver.get("tol", 0.0)),
                       record_fractional=False)


def _run_projection(variant):
    def run(problem, solver):
        if not isinstance(problem, ProjectionProblem):
            raise UsageError("this algorithm needs a feasibility problem")
        return variant(problem, _split_cfg(solver))
    return run


def _run_sequential_resolvent(problem, solver):
    if not isinstance(problem, CoupledLinearProblem):
        raise UsageError("this algorithm needs a coupled-linear problem")
    return projsplit.sequential_resolvent(problem, _split_cfg(solver))


def _run_tv_dual(parallel_variant):
    def run(problem, solver):
        if not isinstance(problem, TvDenoise):
            raise UsageError("this algorithm needs a tv-denoise problem")
        be, groups = problem.dual_block_energy(problem.dim // 2)
        cfg = SolverConfig(tau=float(solver.get("tau", 0.45)),
                           max_iters=int(solver["max_iters"]),
                           tol=float(solver.get("tol", 0.0)),
                           record_fractional=False)
        blocks0 = [np.zeros(len(g)) for g in groups]
        if parallel_variant:
            tr = correction.block_jacobi(be, blocks0, cfg)
        else:
            tr = correction.block_gauss_seidel(be, blocks0, cfg)
        # report the primal-dual gap alongside the dual steps
        for rec in tr.records:
            p = problem.assemble_dual(rec["blocks"], groups)
            u = problem.recover(p)
            rec["objective"] = problem.objective(u)
            rec["residuals"]["gap"] = problem.gap(u, p)
        return tr
    return run


def _run_admm(variant):
    def run(problem, solver):
        if not isinstance(problem, ConstrainedProblem):
            raise UsageError("this algorithm needs a random-constrained problem")
        cfg = AdmmConfig(tau=float(solver.get("tau", 0.5)),
                         max_iters=int(solver["max_iters"]),
                         tol=float(solver.get("tol", 0.0)),
                         record_fractional=False)
        us0 = [np.zeros(b.domain_dim) for f, b in problem.blocks]
        lam0 = np.zeros(problem.wdim)
        if variant == "plain":
            return admm_mod.admm_plain(problem, cfg, us0, lam0)
        if variant == "symmetrized":
            return admm_mod.admm_symmetrized(problem, cfg, us0, lam0)
        return admm_mod.admm_random_permuted(problem, cfg, us0, lam0,
                                             seed=int(solver.get("seed", 0)))
    return run


ALGORITHMS = {
    "cyclic-projection": (_run_projection(projsplit.cyclic_projection),
                          "project onto the sets in turn"),
    "cyclic-projection-corrected": (
        _run_projection(projsplit.cyclic_projection_corrected),
        "cyclic projection with outer-normal memory"),
    "parallel-projection": (_run_projection(projsplit.parallel_projection),
                            "damped simultaneous projections"),
    "parallel-projection-corrected": (
        _run_projection(projsplit.parallel_projection_corrected),
        "damped simultaneous projections with memory"),
    "sequential-resolvent": (_run_sequential_resolvent,
                             "sweeping single-operator solves"),
    "tv-dual-sweep": (_run_tv_dual(False),
                      "blockwise sweep on the denoising dual"),
    "tv-dual-parallel": (_run_tv_dual(True),
                         "relaxed parallel block steps on the denoising dual"),
    "admm-plain": (_run_admm("plain"), "cyclic multiplier method"),
    "admm-symmetrized": (_run_admm("symmetrized"),
                         "forward-backward multiplier method"),
    "admm-random": (_run_admm("random"),
                    "multiplier method with random sweep orders"),
}


# ---------------------------------------------------------------------------
# commands


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config is not valid JSON: {e}")
    _require_keys(cfg, {"problem", "algorithm", "solver", "output"},
                  {"problem", "algorithm", "solver"}, "config")
    _require_keys(cfg["problem"], {"id", "params", "seed"}, {"id"}, "config.problem")
    _require_keys(cfg["algorithm"], {"id"}, {"id"}, "config.algorithm")
    _require_keys(cfg["solver"], {"tau", "beta", "max_iters", "tol", "seed"},
                  {"max_iters"}, "config.solver")
    if int(cfg["solver"]["max_iters"]) < 1:
        raise UsageError("config.solver.max_iters must be at least 1")
    pid = cfg["problem"]["id"]
    if pid not in PROBLEMS:
        raise UsageError(f"unknown problem {pid!r}")
    params = cfg["problem"].get("params", {})
    builder, allowed, _ = PROBLEMS[pid]
    _require_keys(params, allowed, set(), "config.problem.params")
    aid = cfg["algorithm"]["id"]
    if aid not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {aid!r}")
    return cfg, builder, params, ALGORITHMS[aid][0]


def cmd_run(args):
    cfg, builder, params, runner = _load_config(args.config)
    seed = int(cfg["problem"].get("seed", 0))
    rng = np.random.default_rng(seed)
    problem = builder(params, rng)
    t0 = time.monotonic()
    tr = runner(problem, cfg["solver"])
    elapsed = time.monotonic() - t0
    # wall time attributed evenly; only the totals matter to readers
    per = elapsed / max(1, len(tr) - 1)
    for i, rec in enumerate(tr.records):
        rec["time_s"] = per * i
    out_path = args.out or cfg.get("output")
    if out_path:
        with open(out_path, "w") as fh:
            tr.write_jsonl(fh)
    else:
        tr.write_jsonl(sys.stdout)
    return {"converged": 0, "max-iters": 2, "diverged": 3}[tr.status]


def cmd_verify(args):
    if args.iters < 1:
        raise UsageError("--iters must be at least 1")
    if args.pair not in PAIRINGS:
        raise UsageError(f"unknown pairing {args.pair!r}; see 'dualkit list'")
    report = run_pairing(args.pair, seed=args.seed, iters=args.iters,
                         tol=args.tol)
    print(report.to_json(indent=2))
    return 0 if report.passed else 1


def cmd_list(args):
    print("problems:")
    for pid, (b, allowed, desc) in sorted(PROBLEMS.items()):
        print(f"  {pid:32s} {desc}")
    print("algorithms:")
    for aid, (r, desc) in sorted(ALGORITHMS.items()):
        print(f"  {aid:32s} {desc}")
    print("pairings:")
    for pid, pairing in sorted(PAIRINGS.items()):
        print(f"  {pid:32s} {pairing.description}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dualkit",
        description="convex solvers with numeric primal-dual verification")
    sub = parser.add_subparsers(dest="command")
    p_run = sub.add_parser("run", help="run one solver from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out")
    p_ver = sub.add_parser("verify", help="verify a primal/dual pairing")
    p_ver.add_argument("--pair", required=True)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--iters", type=int, default=30)
    p_ver.add_argument("--tol", type=float, default=1e-8)
    sub.add_parser("list", help="list problems, algorithms, and pairings")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 4 if e.code not in (0, None) else 0
    if args.command == "run":
        handler = cmd_run
    elif args.command == "verify":
        handler = cmd_verify
    elif args.command == "list":
        handler = cmd_list
    else:
        parser.print_usage(sys.stderr)
        return 4
    try:
        return handler(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
