"""Alternating projection and operator splitting solvers.

Covers cyclic and parallel projection onto convex sets (with and without
outer-normal correction memory), row-action solving of linear systems as a
special case, sequential solves of coupled positive definite systems, and
sweeping/parallel splitting for composite objectives
F(u) + sum_j G_j(B_j u) with a strongly convex smooth F.
"""

from dataclasses import dataclass

import numpy as np

from . import parallel
from .convex import Quadratic, SquaredDistance
from .linops import Identity, as_vector, solve_spd
from .trace import Trace


@dataclass
class SplitConfig:
    tau: float = 0.5
    max_iters: int = 100
    tol: float = 0.0
    record_fractional: bool = True


def _step_done(u_new, u_old, tol):
    return (tol > 0 and
            np.linalg.norm(u_new - u_old) <= tol * (1.0 + np.linalg.norm(u_old)))


# ---------------------------------------------------------------------------
# projection methods


class ProjectionProblem:
    """Find the point of the intersection of closed convex sets K_1..K_J
    closest to f (sets are assumed to intersect)."""

    def __init__(self, f, sets):
        if not sets:
            raise ValueError("need at least one set")
        self.f = as_vector(f)
        self.sets = list(sets)
        for k in sets:
            if k.dim != len(self.f):
                raise ValueError("set dimension mismatch")
        self.dim = len(self.f)
        self.count = len(sets)

    def feasibility(self, u):
        return max(float(np.linalg.norm(u - k.project(u))) for k in self.sets)


def cyclic_projection(problem, cfg):
    """Project onto the sets in turn, starting from f."""
    u = problem.f.copy()
    tr = Trace("cyclic-projection", {"J": problem.count})
    tr.add(u=u.copy(), objective=0.5 * float((u - problem.f) @ (u - problem.f)),
           residuals={"step": 0.0, "feasibility": problem.feasibility(u)})
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        for j, k in enumerate(problem.sets):
            u = k.project(u)
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u.copy())
        step = float(np.linalg.norm(u - u_prev))
        tr.add(u=u.copy(),
               objective=0.5 * float((u - problem.f) @ (u - problem.f)),
               residuals={"step": step, "feasibility": problem.feasibility(u)})
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


def cyclic_projection_corrected(problem, cfg):
    """Cyclic projection with per-set outer-normal memory.

    Each set keeps a correction that is added before its projection and
    refreshed from the projection residual; the iterates then solve the
    closest-point problem for general convex sets, not just affine ones.
    """
    u = problem.f.copy()
    q = [np.zeros(problem.dim) for _ in range(problem.count)]
    tr = Trace("cyclic-projection-corrected", {"J": problem.count})
    tr.add(u=u.copy(), q=[v.copy() for v in q],
           objective=0.5 * float((u - problem.f) @ (u - problem.f)),
           residuals={"step": 0.0, "feasibility": problem.feasibility(u)})
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        for j, k in enumerate(problem.sets):
            u_in = u + q[j]
            u_new = k.project(u_in)
            q[j] = u_in - u_new
            u = u_new
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u.copy())
        step = float(np.linalg.norm(u - u_prev))
        tr.add(u=u.copy(), q=[v.copy() for v in q],
               objective=0.5 * float((u - problem.f) @ (u - problem.f)),
               residuals={"step": step, "feasibility": problem.feasibility(u)})
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


def parallel_projection(problem, cfg):
    """All projections from the current point, then a damped combination."""
    tau = cfg.tau
    if tau <= 0 or tau > 1.0 / problem.count + 1e-15:
        raise ValueError(f"tau must lie in (0, 1/J], got {tau}")
    u = problem.f.copy()
    tr = Trace("parallel-projection", {"J": problem.count, "tau": tau})
    tr.add(u=u.copy(), objective=0.5 * float((u - problem.f) @ (u - problem.f)),
           residuals={"step": 0.0, "feasibility": problem.feasibility(u)})
    for n in range(1, cfg.max_iters + 1):
        projs = parallel.ordered_map(lambda k: k.project(u), problem.sets)
        u_new = (1.0 - tau * problem.count) * u + tau * sum(projs)
        step = float(np.linalg.norm(u_new - u))
        done = _step_done(u_new, u, cfg.tol)
        u = u_new
        tr.add(u=u.copy(),
               objective=0.5 * float((u - problem.f) @ (u - problem.f)),
               residuals={"step": step, "feasibility": problem.feasibility(u)})
        if done:
            tr.status = "converged"
            break
    return tr


def parallel_projection_corrected(problem, cfg):
    """Parallel variant with per-set correction memory."""
    tau = cfg.tau
    if tau <= 0 or tau > 1.0 / problem.count + 1e-15:
        raise ValueError(f"tau must lie in (0, 1/J], got {tau}")
    u = problem.f.copy()
    q = [np.zeros(problem.dim) for _ in range(problem.count)]
    tr = Trace("parallel-projection-corrected", {"J": problem.count, "tau": tau})
    tr.add(u=u.copy(), q=[v.copy() for v in q],
           objective=0.5 * float((u - problem.f) @ (u - problem.f)),
           residuals={"step": 0.0, "feasibility": problem.feasibility(u)})
    for n in range(1, cfg.max_iters + 1):
        projs = parallel.ordered_map(
            lambda jk: jk[1].project(u + q[jk[0]]), enumerate(problem.sets))
        u_new = (1.0 - tau * problem.count) * u + tau * sum(projs)
        for j in range(problem.count):
            q[j] = q[j] + tau * (u - projs[j])
        step = float(np.linalg.norm(u_new - u))
        done = _step_done(u_new, u, cfg.tol)
        u = u_new
        tr.add(u=u.copy(), q=[v.copy() for v in q],
               objective=0.5 * float((u - problem.f) @ (u - problem.f)),
               residuals={"step": step, "feasibility": problem.feasibility(u)})
        if done:
            tr.status = "converged"
            break
    return tr


def kaczmarz(matrix, rhs, cfg, x0=None):
    """Row-action iteration for A x = b: cyclic projection onto row hyperplanes."""
    a = np.asarray(matrix, dtype=float)
    b = as_vector(rhs, a.shape[0])
    x = (np.zeros(a.shape[1]) if x0 is None else as_vector(x0, a.shape[1])).copy()
    row_sq = np.einsum("ij,ij->i", a, a)
    if np.any(row_sq == 0):
        raise ValueError("zero row in the system matrix")
    tr = Trace("kaczmarz", {"rows": a.shape[0]})
    tr.add(u=x.copy(), objective=float(np.linalg.norm(a @ x - b)),
           residuals={"step": 0.0, "linear": float(np.linalg.norm(a @ x - b))})
    for n in range(1, cfg.max_iters + 1):
        x_prev = x.copy()
        for i in range(a.shape[0]):
            x = x + ((b[i] - a[i] @ x) / row_sq[i]) * a[i]
            if cfg.record_fractional:
                tr.add_fractional(n, i + 1, u=x.copy())
        step = float(np.linalg.norm(x - x_prev))
        tr.add(u=x.copy(), objective=float(np.linalg.norm(a @ x - b)),
               residuals={"step": step, "linear": float(np.linalg.norm(a @ x - b))})
        if _step_done(x, x_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


# ---------------------------------------------------------------------------
# coupled positive definite systems


class CoupledLinearProblem:
    """Solve (alpha I + sum_j A_j) u = f with each A_j symmetric positive
    definite, by sweeping solves with a single operator at a time."""

    def __init__(self, mats, alpha, f):
        self.mats = [np.asarray(a, dtype=float) for a in mats]
        self.alpha = float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.f = as_vector(f, self.mats[0].shape[0])
        self.dim = len(self.f)
        self.count = len(self.mats)

    def solution(self):
        total = self.alpha * np.eye(self.dim) + sum(self.mats)
        return solve_spd(total, self.f)


def sequential_resolvent(problem, cfg, warm=None):
    """Sweep j = 1..J solving (A_j + alpha I) u = f - sum of the other
    operator images at their latest points.

    ``warm`` optionally provides the initial per-block images A_j u_j used by
    the first sweep (as the list of vectors A_j u_j^{-1+j/J}).
    """
    p = problem
    images = ([np.zeros(p.dim) for _ in range(p.count)] if warm is None
              else [as_vector(v, p.dim).copy() for v in warm])
    u = np.zeros(p.dim)
    tr = Trace("sequential-resolvent", {"J": p.count, "alpha": p.alpha})
    tr.add(u=u.copy(), images=[v.copy() for v in images],
           residuals={"step": 0.0},
           objective=float(np.linalg.norm(
               (p.alpha * u + sum(m @ u for m in p.mats)) - p.f)))
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        for j in range(p.count):
            rhs = p.f - sum(images[i] for i in range(p.count) if i != j)
            u = solve_spd(p.mats[j] + p.alpha * np.eye(p.dim), rhs)
            images[j] = p.mats[j] @ u
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u.copy())
        step = float(np.linalg.norm(u - u_prev))
        tr.add(u=u.copy(), images=[v.copy() for v in images],
               residuals={"step": step},
               objective=float(np.linalg.norm(
                   (p.alpha * u + sum(m @ u for m in p.mats)) - p.f)))
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


# ---------------------------------------------------------------------------
# composite splitting: F(u) + sum_j G_j(B_j u)


class SplitProblem:
    """min_u F(u) + sum_j G_j(B_j u) with F strongly convex and smooth."""

    def __init__(self, f, terms):
        self.f = f
        self.terms = [(g, Identity(f.dim) if b is None else b) for g, b in terms]
        for g, b in self.terms:
            if b.domain_dim != f.dim or b.codomain_dim != g.dim:
                raise ValueError("operator dimensions incompatible with terms")
        self.dim = f.dim
        self.count = len(self.terms)
        self.f_conj = f.conjugate()

    def objective(self, u):
        return float(self.f(u) + sum(g(b.apply(u)) for g, b in self.terms))

    def dual_objective(self, pblocks):
        w = np.zeros(self.dim)
        val = 0.0
        for (g, b), pj in zip(self.terms, pblocks):
            w -= b.apply_adjoint(pj)
            val += g.conjugate()(pj)
        return float(val + self.f_conj(w))

    def recover_primal(self, pblocks):
        w = np.zeros(self.dim)
        for (g, b), pj in zip(self.terms, pblocks):
            w -= b.apply_adjoint(pj)
        return self.f_conj.grad(w)


def _quad_parts(f):
    if isinstance(f, SquaredDistance):
        f = f.as_quadratic()
    if not isinstance(f, Quadratic):
        raise NotImplementedError(
            "splitting subproblems require a quadratic smooth part")
    return f


def _split_subproblem(problem, v, g, b, u_ref):
    """argmin_u  D_F(u; u_ref) + (v, u) + G(B u)  for quadratic F.

    Equivalent to  min 1/2 (A u, u) - (A u_ref - v, u) + G(B u).
    """
    fq = _quad_parts(problem.f)
    a = fq.a
    rhs = a @ u_ref - v
    gq = None
    if isinstance(g, SquaredDistance):
        gq = g.as_quadratic()
    elif isinstance(g, Quadratic):
        gq = g
    bd = b.to_dense()
    if gq is not None:
        return solve_spd(a + bd.T @ gq.a @ bd, rhs + bd.T @ gq.b)
    # scalar curvature route: A = alpha I makes this a prox of G o B
    alpha = float(np.trace(a)) / a.shape[0]
    if not np.allclose(a, alpha * np.eye(a.shape[0]), atol=1e-10 * (1.0 + alpha)):
        raise NotImplementedError(
            "nonsmooth terms need a scalar-curvature smooth part")
    z = rhs / alpha
    if isinstance(b, Identity):
        return g.prox(z, 1.0 / alpha)
    bbt = bd @ bd.T
    c = float(np.trace(bbt)) / bbt.shape[0]
    if not np.allclose(bbt, c * np.eye(bbt.shape[0]), atol=1e-10 * (1.0 + c)):
        raise NotImplementedError("operator rows must be orthogonal for prox route")
    bz = bd @ z
    return z + (1.0 / c) * (bd.T @ (g.prox(bz, c / alpha) - bz))


def _grad_f(problem, u):
    return problem.f.grad(u)


def _record_split(tr, problem, u, v, step):
    tr.add(u=u.copy(), v=[x.copy() for x in v],
           objective=problem.objective(u), residuals={"step": step})


def sweep_splitting(problem, cfg, u0, v0):
    """Sweep the terms, each time re-minimizing a linearized-memory model and
    shifting the memory by the gradient change (no relaxation)."""
    u = as_vector(u0, problem.dim).copy()
    v = [as_vector(x, problem.dim).copy() for x in v0]
    tr = Trace("sweep-splitting", {"J": problem.count})
    _record_split(tr, problem, u, v, 0.0)
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        for j, (g, b) in enumerate(problem.terms):
            u_next = _split_subproblem(problem, v[j], g, b, u)
            v[j] = v[j] + _grad_f(problem, u_next) - _grad_f(problem, u)
            u = u_next
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u.copy())
        step = float(np.linalg.norm(u - u_prev))
        _record_split(tr, problem, u, v, step)
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


def relaxed_sweep_splitting(problem, cfg, u0, v0):
    """Sweep as above but blend the memory updates with factor tau and map the
    outer point through the gradient of the conjugate of the smooth part."""
    tau = cfg.tau
    if not 0 < tau <= 1:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    u = as_vector(u0, problem.dim).copy()
    v = [as_vector(x, problem.dim).copy() for x in v0]
    tr = Trace("relaxed-sweep-splitting", {"J": problem.count, "tau": tau})
    _record_split(tr, problem, u, v, 0.0)
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        u_hat = u.copy()
        v_new = [x.copy() for x in v]
        for j, (g, b) in enumerate(problem.terms):
            u_next = _split_subproblem(problem, v[j], g, b, u_hat)
            v_new[j] = v[j] + tau * (_grad_f(problem, u_next)
                                     - _grad_f(problem, u_hat))
            u_hat = u_next
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u_hat.copy())
        v = v_new
        u = problem.f_conj.grad(sum(v))
        step = float(np.linalg.norm(u - u_prev))
        _record_split(tr, problem, u, v, step)
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


def parallel_splitting(problem, cfg, u0, v0):
    """All term subproblems from the current point; memory updates blended
    with factor tau and the outer point mapped through grad of F*."""
    tau = cfg.tau
    if tau <= 0 or tau > 1.0 / problem.count + 1e-15:
        raise ValueError(f"tau must lie in (0, 1/J], got {tau}")
    u = as_vector(u0, problem.dim).copy()
    v = [as_vector(x, problem.dim).copy() for x in v0]
    tr = Trace("parallel-splitting", {"J": problem.count, "tau": tau})
    _record_split(tr, problem, u, v, 0.0)
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        us = parallel.ordered_map(
            lambda j: _split_subproblem(problem, v[j], *problem.terms[j], u),
            range(problem.count))
        gu = _grad_f(problem, u)
        v = [v[j] + tau * (_grad_f(problem, us[j]) - gu)
             for j in range(problem.count)]
        u = problem.f_conj.grad(sum(v))
        step = float(np.linalg.norm(u - u_prev))
        _record_split(tr, problem, u, v, step)
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


def two_term_reflection(g1bar, g2bar, v0, cfg, tau=None):
    """Classical reflect-reflect recursion on the memory variable:
    v <- (1 - tau) v + tau (2 prox_{G2} - I)(2 prox_{G1} - I) v,
    with tau = 1 giving the unrelaxed alternating form."""
    tau = 1.0 if tau is None else float(tau)
    v = as_vector(v0).copy()
    tr = Trace("two-term-reflection", {"tau": tau})
    tr.add(v=v.copy(), residuals={"step": 0.0}, objective=None)
    for n in range(1, cfg.max_iters + 1):
        r1 = 2.0 * g1bar.prox(v) - v
        v_hat = 2.0 * g2bar.prox(r1) - r1
        v_new = (1.0 - tau) * v + tau * v_hat
        step = float(np.linalg.norm(v_new - v))
        done = _step_done(v_new, v, cfg.tol)
        v = v_new
        tr.add(v=v.copy(), residuals={"step": step}, objective=None)
        if done:
            tr.status = "converged"
            break
    return tr
