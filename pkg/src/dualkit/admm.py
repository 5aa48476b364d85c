"""Multiplier methods for linearly constrained block problems.

Plain cyclic, symmetrized (forward-backward), and randomly permuted
sweeping variants of the augmented Lagrangian block method; the two-block
specialization; a dualization-based variant with memory that converges for
any number of blocks; and their dual-side counterparts (reflection-style
recursions on the dual of the penalized sharing form).  A saddle-point
preconditioner check certifies convergence conditions for the quadratic
case by smallest-eigenvalue tests.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import parallel
from .convex import Quadratic, SquaredDistance, prox
from .linops import DenseOp, LinOp, as_vector, solve_spd
from .trace import Trace


@dataclass
class AdmmConfig:
    tau: float = 0.5
    max_iters: int = 100
    tol: float = 0.0
    divergence_threshold: float = 1e6
    divergence_patience: int = 200
    record_fractional: bool = True


def _as_quadratic(f, dim):
    if f is None:
        return Quadratic(np.zeros((dim, dim)))
    if isinstance(f, SquaredDistance):
        return f.as_quadratic()
    return f if isinstance(f, Quadratic) else None


class ConstrainedProblem:
    """min sum_j F_j(u_j)  subject to  sum_j B_j u_j = g."""

    def __init__(self, blocks, g, beta):
        self.blocks = []
        for f, b in blocks:
            if not isinstance(b, LinOp):
                b = DenseOp(b)
            if f is not None and f.dim != b.domain_dim:
                raise ValueError("block function and operator dimensions differ")
            self.blocks.append((f, b))
        self.g = as_vector(g, self.blocks[0][1].codomain_dim)
        self.beta = float(beta)
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.count = len(self.blocks)
        self.wdim = len(self.g)

    def constraint_residual(self, us):
        s = -self.g.copy()
        for (f, b), u in zip(self.blocks, us):
            s += b.apply(u)
        return s

    def objective(self, us):
        return float(sum((f(u) if f is not None else 0.0)
                         for (f, b), u in zip(self.blocks, us)))


def _block_step(f, b, beta, lam, target):
    """argmin_u F(u) + (lam, B u) + beta/2 ||B u - target||^2."""
    bd = b.to_dense()
    fq = _as_quadratic(f, b.domain_dim)
    rhs_vec = bd.T @ (beta * target - lam)
    if fq is not None:
        return solve_spd(fq.a + beta * bd.T @ bd, fq.b + rhs_vec)
    btb = bd.T @ bd
    c = float(np.trace(btb)) / btb.shape[0]
    if not np.allclose(btb, c * np.eye(btb.shape[0]), atol=1e-10 * (1.0 + abs(c))):
        raise NotImplementedError(
            "nonsmooth block needs B^t B to be a multiple of the identity")
    return prox(f, rhs_vec / (beta * c), 1.0 / (beta * c))


def _record_admm(tr, problem, us, lam, step):
    r = problem.constraint_residual(us)
    tr.add(u=[u.copy() for u in us], lam=lam.copy(),
           objective=problem.objective(us),
           residuals={"constraint": float(np.linalg.norm(r)), "step": step})


def _finish(tr, problem, us, lam, step, cfg, grow_state):
    """Shared bookkeeping: record, convergence and divergence tests.

    Returns True when the outer loop should stop.
    """
    _record_admm(tr, problem, us, lam, step)
    res = tr.records[-1]["residuals"]["constraint"]
    prev_res, growths = grow_state
    if res > prev_res:
        growths += 1
    else:
        growths = 0
    grow_state[0], grow_state[1] = res, growths
    if res > cfg.divergence_threshold or growths >= cfg.divergence_patience:
        tr.status = "diverged"
        return True
    if cfg.tol > 0 and step <= cfg.tol * (1.0 + sum(map(np.linalg.norm, us))):
        tr.status = "converged"
        return True
    return False


def _sweep(problem, us, lam, order, record=None):
    beta = problem.beta
    for j in order:
        f, b = problem.blocks[j]
        others = problem.constraint_residual(us) - b.apply(us[j]) + problem.g
        us[j] = _block_step(f, b, beta, lam, problem.g - others)
        if record is not None:
            record(j, us)
    return us


def admm_plain(problem, cfg, us0, lam0):
    """Cyclic block minimization of the augmented Lagrangian, then a full
    multiplier step.  No convergence guarantee beyond two blocks."""
    us = [as_vector(u, b.domain_dim).copy() for u, (f, b) in zip(us0, problem.blocks)]
    lam = as_vector(lam0, problem.wdim).copy()
    tr = Trace("admm-plain", {"J": problem.count, "beta": problem.beta})
    _record_admm(tr, problem, us, lam, 0.0)
    grow = [tr.records[-1]["residuals"]["constraint"], 0]
    for n in range(1, cfg.max_iters + 1):
        prev = [u.copy() for u in us]
        rec = ((lambda j, cur: tr.add_fractional(n, j + 1, u=cur[j].copy()))
               if cfg.record_fractional else None)
        us = _sweep(problem, us, lam, range(problem.count), rec)
        lam = lam + problem.beta * problem.constraint_residual(us)
        step = float(np.linalg.norm(np.concatenate(us) - np.concatenate(prev)))
        if _finish(tr, problem, us, lam, step, cfg, grow):
            break
    return tr


def admm_symmetrized(problem, cfg, us0, lam0):
    """One forward sweep, one backward sweep, then the multiplier step."""
    us = [as_vector(u, b.domain_dim).copy() for u, (f, b) in zip(us0, problem.blocks)]
    lam = as_vector(lam0, problem.wdim).copy()
    tr = Trace("admm-symmetrized", {"J": problem.count, "beta": problem.beta})
    _record_admm(tr, problem, us, lam, 0.0)
    grow = [tr.records[-1]["residuals"]["constraint"], 0]
    for n in range(1, cfg.max_iters + 1):
        prev = [u.copy() for u in us]
        us = _sweep(problem, us, lam, range(problem.count))
        us = _sweep(problem, us, lam, range(problem.count - 1, -1, -1))
        lam = lam + problem.beta * problem.constraint_residual(us)
        step = float(np.linalg.norm(np.concatenate(us) - np.concatenate(prev)))
        if _finish(tr, problem, us, lam, step, cfg, grow):
            break
    return tr


def admm_random_permuted(problem, cfg, us0, lam0, seed=0):
    """Each iteration sweeps the blocks in a fresh uniformly random order.

    The orders are drawn from a seeded generator and recorded in the trace,
    so a run can be replayed exactly."""
    rng = np.random.default_rng(seed)
    us = [as_vector(u, b.domain_dim).copy() for u, (f, b) in zip(us0, problem.blocks)]
    lam = as_vector(lam0, problem.wdim).copy()
    tr = Trace("admm-random-permuted",
               {"J": problem.count, "beta": problem.beta, "seed": seed})
    _record_admm(tr, problem, us, lam, 0.0)
    tr.records[-1]["permutation"] = None
    grow = [tr.records[-1]["residuals"]["constraint"], 0]
    for n in range(1, cfg.max_iters + 1):
        prev = [u.copy() for u in us]
        order = rng.permutation(problem.count)
        us = _sweep(problem, us, lam, order)
        lam = lam + problem.beta * problem.constraint_residual(us)
        step = float(np.linalg.norm(np.concatenate(us) - np.concatenate(prev)))
        stop = _finish(tr, problem, us, lam, step, cfg, grow)
        tr.records[-1]["permutation"] = [int(j) for j in order]
        if stop:
            break
    return tr


# ---------------------------------------------------------------------------
# saddle-point preconditioner check (quadratic blocks)


@dataclass
class UzawaReport:
    variant: str
    symmetric: bool
    primal_eig: float
    dual_eig: float
    guaranteed: bool
    note: str = ""


def _augmented_parts(problem):
    dims = [b.domain_dim for f, b in problem.blocks]
    a_blocks, b_cols = [], []
    for f, b in problem.blocks:
        fq = _as_quadratic(f, b.domain_dim)
        if fq is None:
            raise ValueError("the saddle-point check needs quadratic blocks")
        a_blocks.append(fq.a)
        b_cols.append(b.to_dense())
    a_tilde = scipy.linalg.block_diag(*a_blocks)
    b_tilde = np.hstack(b_cols)
    a_beta = a_tilde + problem.beta * b_tilde.T @ b_tilde
    return dims, a_beta, b_tilde


def _block_lower_diag(a_beta, dims):
    n = sum(dims)
    lower = np.zeros((n, n))
    diag = np.zeros((n, n))
    offs = np.cumsum([0] + dims)
    for i in range(len(dims)):
        si = slice(offs[i], offs[i + 1])
        diag[si, si] = a_beta[si, si]
        for k in range(i):
            sk = slice(offs[k], offs[k + 1])
            lower[si, sk] = a_beta[si, sk]
    return lower, diag


def _block_permutation_matrix(dims, order):
    offs = np.cumsum([0] + list(dims))
    n = offs[-1]
    p = np.zeros((n, n))
    row = 0
    for j in order:
        for k in range(offs[j], offs[j + 1]):
            p[row, k] = 1.0
            row += 1
    return p


def uzawa_check(problem, variant, tol=1e-10):
    """Certify the inexact-Uzawa sufficient conditions for a sweeping variant.

    The primal smoother is the inverse sweep operator of the variant (single
    forward sweep, forward-backward sweep, or the expectation over all block
    orders); the multiplier smoother is beta times the identity.  Both
    conditions are tested through the smallest eigenvalue of a symmetric
    difference; a nonsymmetric smoother (the plain single sweep) cannot be
    certified this way and is flagged instead.
    """
    dims, a_beta, b_tilde = _augmented_parts(problem)
    lower, diag = _block_lower_diag(a_beta, dims)
    beta = problem.beta
    if variant == "plain":
        r_v = scipy.linalg.inv(lower + diag)
    elif variant == "symmetrized":
        ld_inv = scipy.linalg.inv(lower + diag)
        r_v = ld_inv.T @ diag @ ld_inv
    elif variant == "random":
        if len(dims) > 4:
            raise ValueError("expectation smoother enumerates at most 4 blocks")
        n = sum(dims)
        r_v = np.zeros((n, n))
        perms = list(itertools.permutations(range(len(dims))))
        for order in perms:
            p = _block_permutation_matrix(dims, order)
            ab = p @ a_beta @ p.T
            lo, dg = _block_lower_diag(ab, [dims[j] for j in order])
            r_v += p.T @ scipy.linalg.inv(lo + dg) @ p
        r_v /= math.factorial(len(dims))
    else:
        raise ValueError(f"unknown variant {variant!r}")

    sym = bool(np.allclose(r_v, r_v.T, atol=tol * (1.0 + np.abs(r_v).max())))
    if not sym:
        return UzawaReport(variant, False, np.nan, np.nan, False,
                           "smoother is not symmetric; the eigenvalue test "
                           "does not apply")
    r_v_inv = scipy.linalg.inv(r_v)
    m1 = r_v_inv - a_beta
    e1 = float(scipy.linalg.eigvalsh(0.5 * (m1 + m1.T))[0])
    schur = b_tilde @ scipy.linalg.solve(a_beta, b_tilde.T)
    m2 = np.eye(schur.shape[0]) / beta - schur
    e2 = float(scipy.linalg.eigvalsh(0.5 * (m2 + m2.T))[0])
    return UzawaReport(variant, True, e1, e2, e1 >= -tol and e2 >= -tol)


# ---------------------------------------------------------------------------
# two-block specialization and its dual reflection recursion


def admm_two_block(f1, b1, f2, g, beta, cfg, u1_0, u2_0, lam0):
    """Constraint B1 u1 - u2 = g, handled by the plain two-block method."""
    if not isinstance(b1, LinOp):
        b1 = DenseOp(b1)
    neg_id = DenseOp(-np.eye(len(as_vector(g))))
    problem = ConstrainedProblem([(f1, b1), (f2, neg_id)], g, beta)
    return admm_plain(problem, cfg, [u1_0, u2_0], lam0)


def dr_dual_two_block(f1, b1, f2, g, beta, cfg, q0, r0):
    """Reflection recursion on the dual min F1*(-B1^t p) + F2*(p) + (g, p).

    Needs F1 quadratic; F2 enters only through its proximal map."""
    if not isinstance(b1, LinOp):
        b1 = DenseOp(b1)
    f1q = _as_quadratic(f1, b1.domain_dim)
    if f1q is None:
        raise NotImplementedError("the p-step needs a quadratic first block")
    a1_inv = scipy.linalg.inv(f1q.a)
    bd = b1.to_dense()
    g = as_vector(g, b1.codomain_dim)
    m = bd @ a1_inv @ bd.T + np.eye(len(g)) / beta
    base = bd @ (a1_inv @ f1q.b) - g
    q = as_vector(q0, len(g)).copy()
    r = as_vector(r0, len(g)).copy()
    tr = Trace("dr-dual-two-block", {"beta": beta})
    tr.add(q=q.copy(), r=r.copy(), p=np.full(len(g), np.nan),
           objective=None, residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        q_prev = q.copy()
        p = solve_spd(m, base - (q - 2.0 * r) / beta)
        q = p + q - r
        r = q - beta * prox(f2, q / beta, 1.0 / beta)
        step = float(np.linalg.norm(q - q_prev))
        tr.add(q=q.copy(), r=r.copy(), p=p.copy(), objective=None,
               residuals={"step": step})
        if cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(q_prev)):
            tr.status = "converged"
            break
    return tr


def alm(f1, b1, g, beta, cfg, u0, lam0):
    """Augmented Lagrangian method for a single block (constraint B1 u = g)."""
    if not isinstance(b1, LinOp):
        b1 = DenseOp(b1)
    problem = ConstrainedProblem([(f1, b1)], g, beta)
    return admm_plain(problem, cfg, [u0], lam0)


def proximal_point_dual(f1, b1, g, beta, cfg, p0):
    """Proximal point recursion on E(p) = F1*(-B1^t p) + (g, p)."""
    if not isinstance(b1, LinOp):
        b1 = DenseOp(b1)
    f1q = _as_quadratic(f1, b1.domain_dim)
    if f1q is None:
        raise NotImplementedError("needs a quadratic block")
    a1_inv = scipy.linalg.inv(f1q.a)
    bd = b1.to_dense()
    g = as_vector(g, b1.codomain_dim)
    m = bd @ a1_inv @ bd.T + np.eye(len(g)) / beta
    base = bd @ (a1_inv @ f1q.b) - g
    p = as_vector(p0, len(g)).copy()
    tr = Trace("proximal-point-dual", {"beta": beta})
    tr.add(p=p.copy(), objective=None, residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        p_new = solve_spd(m, base + p / beta)
        step = float(np.linalg.norm(p_new - p))
        done = cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(p))
        p = p_new
        tr.add(p=p.copy(), objective=None, residuals={"step": step})
        if done:
            tr.status = "converged"
            break
    return tr


# ---------------------------------------------------------------------------
# penalized sharing form and memory-based variants


class SharingProblem:
    """min sum_j F_j(u_j) + beta/2 || sum_j B_j u_j - g ||^2."""

    def __init__(self, terms, g, beta):
        self.terms = []
        for f, b in terms:
            if not isinstance(b, LinOp):
                b = DenseOp(b)
            self.terms.append((f, b))
        self.g = as_vector(g, self.terms[0][1].codomain_dim)
        self.beta = float(beta)
        self.count = len(self.terms)
        self.wdim = len(self.g)

    def objective(self, us):
        s = -self.g.copy()
        val = 0.0
        for (f, b), u in zip(self.terms, us):
            s += b.apply(u)
            val += f(u) if f is not None else 0.0
        return float(val + 0.5 * self.beta * s @ s)

    def block_energy(self):
        """The same objective as a blockwise energy over the product space."""
        from .correction import BlockEnergy
        return BlockEnergy(self.beta * np.eye(self.wdim), self.beta * self.g,
                           [b for f, b in self.terms],
                           [f for f, b in self.terms],
                           const=0.5 * self.beta * float(self.g @ self.g))


def admm_with_memory(problem, cfg, v0, lam0):
    """Sweeping multiplier method with per-block target memory.

    Each block minimizes against its own remembered target v_j and a
    running multiplier that is advanced after every block; both the targets
    and the outer multiplier are then blended with factor tau.  Converges
    for any number of blocks.

    The quantity lam - beta (sum_j v_j - g) is conserved by the iteration,
    so lam0 should equal beta (sum_j v0_j - g) for the limit to solve the
    penalized problem."""
    tau = cfg.tau
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    beta = problem.beta
    v = [as_vector(x, b.codomain_dim).copy() for x, (f, b) in zip(v0, problem.terms)]
    lam = as_vector(lam0, problem.wdim).copy()
    tr = Trace("admm-with-memory", {"J": problem.count, "tau": tau, "beta": beta})
    tr.add(v=[x.copy() for x in v], lam=lam.copy(), objective=None,
           residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        lam_hat = lam.copy()
        v_new = []
        us = []
        for j, (f, b) in enumerate(problem.terms):
            u_hat = _block_step(f, b, beta, lam_hat, v[j])
            bu = b.apply(u_hat)
            v_new.append((1.0 - tau) * v[j] + tau * bu)
            lam_hat = lam_hat + beta * (bu - v[j])
            us.append(u_hat)
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, lam=lam_hat.copy())
        lam_new = (1.0 - tau) * lam + tau * lam_hat
        step = float(np.linalg.norm(lam_new - lam)
                     + sum(np.linalg.norm(a - b) for a, b in zip(v_new, v)))
        v, lam = v_new, lam_new
        tr.add(v=[x.copy() for x in v], lam=lam.copy(), u=[u.copy() for u in us],
               objective=problem.objective(us), residuals={"step": step})
        if cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(lam)):
            tr.status = "converged"
            break
    return tr


def admm_parallel(problem, cfg, v0, lam0):
    """Parallel variant: all blocks minimize against the same multiplier,
    then targets are blended and the multiplier takes a damped full step.

    As with the sweeping form, lam - beta (sum_j v_j - g) is conserved;
    start with lam0 = beta (sum_j v0_j - g) to reach the penalized
    minimum."""
    tau = cfg.tau
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    beta = problem.beta
    v = [as_vector(x, b.codomain_dim).copy() for x, (f, b) in zip(v0, problem.terms)]
    lam = as_vector(lam0, problem.wdim).copy()
    tr = Trace("admm-parallel", {"J": problem.count, "tau": tau, "beta": beta})
    tr.add(v=[x.copy() for x in v], lam=lam.copy(), objective=None,
           residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        us = parallel.ordered_map(
            lambda j: _block_step(*problem.terms[j], beta, lam, v[j]),
            range(problem.count))
        bus = [b.apply(u) for (f, b), u in zip(problem.terms, us)]
        lam_new = lam + tau * beta * sum(bu - vj for bu, vj in zip(bus, v))
        v_new = [(1.0 - tau) * vj + tau * bu for vj, bu in zip(v, bus)]
        step = float(np.linalg.norm(lam_new - lam)
                     + sum(np.linalg.norm(a - b) for a, b in zip(v_new, v)))
        v, lam = v_new, lam_new
        tr.add(v=[x.copy() for x in v], lam=lam.copy(), u=[u.copy() for u in us],
               objective=problem.objective(us), residuals={"step": step})
        if cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(lam)):
            tr.status = "converged"
            break
    return tr


def _sharing_dual_solvers(problem):
    """Per-block p-step matrices for the dual of the penalized sharing form."""
    beta = problem.beta
    mats, bases = [], []
    for f, b in problem.terms:
        fq = _as_quadratic(f, b.domain_dim)
        if fq is None:
            raise NotImplementedError("dual reflection steps need quadratic blocks")
        a_inv = scipy.linalg.inv(fq.a)
        bd = b.to_dense()
        mats.append(bd @ a_inv @ bd.T + np.eye(problem.wdim) / beta)
        bases.append(bd @ (a_inv @ fq.b))
    return mats, bases


def dual_sweep_reflection(problem, cfg, p0, q0):
    """Sweeping reflection recursion on the dual of the sharing form:
    min (1/(2 beta)) ||p||^2 + (g, p) + sum_j F_j*(-B_j^t p)."""
    tau = cfg.tau
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    beta = problem.beta
    mats, bases = _sharing_dual_solvers(problem)
    p = as_vector(p0, problem.wdim).copy()
    q = [as_vector(x, problem.wdim).copy() for x in q0]
    tr = Trace("dual-sweep-reflection", {"J": problem.count, "tau": tau})
    tr.add(p=p.copy(), q=[x.copy() for x in q], objective=None,
           residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        p_hat = p.copy()
        q_new = []
        for j in range(problem.count):
            p_next = solve_spd(mats[j], bases[j] + p_hat / beta - q[j])
            q_new.append(q[j] + (tau / beta) * (p_next - p_hat))
            p_hat = p_next
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, p=p_hat.copy())
        p_new = (1.0 - tau) * p + tau * p_hat
        step = float(np.linalg.norm(p_new - p))
        q, p = q_new, p_new
        tr.add(p=p.copy(), q=[x.copy() for x in q], objective=None,
               residuals={"step": step})
        if cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(p)):
            tr.status = "converged"
            break
    return tr


def dual_parallel_reflection(problem, cfg, p0, q0):
    """Parallel reflection recursion on the dual of the sharing form."""
    tau = cfg.tau
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    beta = problem.beta
    mats, bases = _sharing_dual_solvers(problem)
    p = as_vector(p0, problem.wdim).copy()
    q = [as_vector(x, problem.wdim).copy() for x in q0]
    tr = Trace("dual-parallel-reflection", {"J": problem.count, "tau": tau})
    tr.add(p=p.copy(), q=[x.copy() for x in q], objective=None,
           residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        ps = parallel.ordered_map(
            lambda j: solve_spd(mats[j], bases[j] + p / beta - q[j]),
            range(problem.count))
        q = [qj + (tau / beta) * (pj - p) for qj, pj in zip(q, ps)]
        p_new = (1.0 - tau * problem.count) * p + tau * sum(ps)
        step = float(np.linalg.norm(p_new - p))
        p = p_new
        tr.add(p=p.copy(), q=[x.copy() for x in q], objective=None,
               residuals={"step": step})
        if cfg.tol > 0 and step <= cfg.tol * (1.0 + np.linalg.norm(p)):
            tr.status = "converged"
            break
    return tr
