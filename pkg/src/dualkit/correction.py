"""Space decomposition solvers: parallel and successive subspace correction.

A target energy E over V is minimized through a decomposition
V = V_1 + ... + V_J given by injection operators.  The parallel method
solves all local correction problems from the current point and adds a
damped sum of corrections; the successive method sweeps through the
subspaces updating in place.  Both have equivalent reformulations over the
direct product of the subspaces (relaxed block Jacobi and block
Gauss-Seidel on the expanded energy), and those are provided too.

Local correction problems are solved exactly through a shared kernel that
recognizes quadratic terms, scalar curvature plus a proximable term, and
box-constrained quadratics.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import parallel
from .convex import (Box, Indicator, L1Norm, LinearFn, LinfBall, Quadratic,
                     SquaredDistance, Tilted, box_qp)
from .linops import HCat, as_vector, solve_spd
from .trace import Trace


@dataclass
class SolverConfig:
    tau: float = 0.5
    max_iters: int = 100
    tol: float = 0.0
    override_tau_guard: bool = False
    record_fractional: bool = True


class Decomposition:
    """V = sum of ranges of the injection operators (need not be direct)."""

    def __init__(self, injections):
        if not injections:
            raise ValueError("need at least one subspace")
        self.injections = list(injections)
        d = injections[0].codomain_dim
        for op in injections:
            if op.codomain_dim != d:
                raise ValueError("all injections must map into the same space")
        self.dim = d
        self.count = len(injections)


def _termwise_quadratic(h):
    if isinstance(h, SquaredDistance):
        return h.as_quadratic()
    return h if isinstance(h, Quadratic) else None


def solve_block_problem(m, s, h):
    """Exact argmin of 1/2 (M p, p) + (s, p) + h(p) for structured h.

    M must be symmetric positive semidefinite; the combined problem must be
    strictly convex.  Supported h: None/zero, quadratic, linear, tilted
    variants, proximable terms when M is a positive multiple of the
    identity, and box/sup-ball indicators (solved as box-constrained QPs).
    """
    m = np.asarray(m, dtype=float)
    s = as_vector(s, m.shape[0])
    if isinstance(h, Tilted):
        return solve_block_problem(m, s + h.c, h.inner)
    if isinstance(h, LinearFn):
        return solve_block_problem(m, s + h.c, None)
    if h is None:
        return solve_spd(m, -s)
    hq = _termwise_quadratic(h)
    if hq is not None:
        return solve_spd(m + hq.a, -s + hq.b)
    if isinstance(h, Indicator) and isinstance(h.set, (Box, LinfBall)):
        if isinstance(h.set, Box):
            lo, hi = h.set.lo, h.set.hi
        else:
            r = h.set.radius
            lo, hi = np.full(len(s), -r), np.full(len(s), r)
        return box_qp(m, s, lo, hi)
    if isinstance(h, L1Norm):
        # dualize the l1 term: min over |z| <= w of the conjugate QP,
        # then p = -M^{-1}(s + z)
        minv = np.linalg.inv(m)
        w = h.weight
        lo, hi = np.full(len(s), -w), np.full(len(s), w)
        z = box_qp(minv, minv @ s, lo, hi)
        return -minv @ (s + z)
    # scalar curvature: the problem is a prox of h
    c = float(np.trace(m)) / m.shape[0] if m.shape[0] else 0.0
    if c > 0 and np.allclose(m, c * np.eye(m.shape[0]), atol=1e-10 * (1.0 + c)):
        return h.prox(-s / c, 1.0 / c)
    raise NotImplementedError(
        f"no exact local solver for term {type(h).__name__} with this curvature")


class BlockEnergy:
    """E(p_1,...,p_J) = q(sum_j C_j p_j) + sum_j [(l_j, p_j) + h_j(p_j)]

    with q(w) = 1/2 (A w, w) - (b, w) + c.  This is the working form for
    energies over a direct product of blocks; exact blockwise minimization
    is available whenever each h_j fits the shared block-problem kernel.
    """

    def __init__(self, quad_matrix, quad_vec, ops, terms, linear=None, const=0.0):
        self.a = np.asarray(quad_matrix, dtype=float)
        self.b = as_vector(quad_vec, self.a.shape[0])
        self.ops = list(ops)
        self.terms = list(terms)
        if len(self.terms) != len(self.ops):
            raise ValueError("one term per block required (use None for zero)")
        self.linear = ([None] * len(ops) if linear is None else list(linear))
        self.const = float(const)
        self.block_dims = [op.domain_dim for op in self.ops]
        self.count = len(self.ops)
        # per-block curvature C_j^t A C_j, precomputed
        self._m = []
        for op in self.ops:
            c = op.to_dense()
            self._m.append(c.T @ self.a @ c)

    def coupling(self, blocks):
        w = np.zeros(self.a.shape[0])
        for op, p in zip(self.ops, blocks):
            w += op.apply(p)
        return w

    def eval(self, blocks):
        w = self.coupling(blocks)
        val = 0.5 * w @ (self.a @ w) - self.b @ w + self.const
        for h, l, p in zip(self.terms, self.linear, blocks):
            if l is not None:
                val += l @ p
            if h is not None:
                val += h(p)
        return float(val)

    def block_solve(self, j, blocks):
        """Exact minimizer over block j with the others held fixed."""
        w_rest = self.coupling(blocks) - self.ops[j].apply(blocks[j])
        s = self.ops[j].apply_adjoint(self.a @ w_rest - self.b)
        if self.linear[j] is not None:
            s = s + self.linear[j]
        return solve_block_problem(self._m[j], s, self.terms[j])

    def concat(self, blocks):
        return np.concatenate(blocks)

    def split(self, v):
        out, k = [], 0
        for d in self.block_dims:
            out.append(np.asarray(v[k:k + d], dtype=float).copy())
            k += d
        return out


# ---------------------------------------------------------------------------
# local correction problems over V


def _local_correction(energy, decomp, u, j):
    """Exact argmin_w E(u + I_j w) for quadratic or composite energies."""
    inj = decomp.injections[j]
    q = inj.to_dense()
    if isinstance(energy, SquaredDistance):
        energy = energy.as_quadratic()
    if isinstance(energy, Quadratic):
        m = q.T @ energy.a @ q
        s = q.T @ (energy.a @ u - energy.b)
        return solve_block_problem(m, s, None)
    if isinstance(energy, CompositeEnergy):
        return energy.local_correction(decomp, u, j)
    raise NotImplementedError(
        f"no exact local solver for energy {type(energy).__name__}")


class CompositeEnergy:
    """E(u) = 1/2 (A u, u) - (b, u) + const + sum_l h_l(u restricted to block l)

    over V = R^d split into contiguous index blocks.  Exact local correction
    is available for the decomposition into those same blocks.
    """

    def __init__(self, quad_matrix, quad_vec, block_slices, block_terms, const=0.0):
        self.a = np.asarray(quad_matrix, dtype=float)
        self.b = as_vector(quad_vec, self.a.shape[0])
        self.dim = self.a.shape[0]
        self.slices = list(block_slices)
        self.terms = list(block_terms)
        self.const = float(const)

    def __call__(self, u):
        u = as_vector(u, self.dim)
        val = 0.5 * u @ (self.a @ u) - self.b @ u + self.const
        for sl, h in zip(self.slices, self.terms):
            if h is not None:
                val += h(u[sl])
        return float(val)

    def local_correction(self, decomp, u, j):
        sl = self.slices[j]
        m = self.a[sl, sl]
        g = self.a @ u - self.b
        s = g[sl] - m @ u[sl]
        p = solve_block_problem(m, s, self.terms[j])
        return p - u[sl]

    def decomposition(self):
        from .linops import Restriction
        return Decomposition([
            Restriction(self.dim, np.arange(sl.start, sl.stop)).T
            for sl in self.slices])


# ---------------------------------------------------------------------------
# solvers over V


def _check_tau(tau, j_count, energy, decomp, cfg, rng=None):
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tau <= 1.0 / j_count + 1e-15:
        return
    if not cfg.override_tau_guard:
        raise ValueError(
            f"tau={tau} exceeds 1/J={1.0 / j_count:.4g}; the damped-sum "
            "energy inequality is only guaranteed up to 1/J "
            "(set override_tau_guard to proceed)")
    # sampled check of the damped-sum inequality; violations downgrade to a warning
    rng = rng or np.random.default_rng(0)
    ev = energy if not isinstance(energy, SquaredDistance) else energy.as_quadratic()
    worst = 0.0
    for _ in range(100):
        v = rng.standard_normal(decomp.dim)
        total = np.zeros(decomp.dim)
        lhs = (1.0 - tau * j_count) * ev(v)
        ok = True
        for inj in decomp.injections:
            w = inj.apply(rng.standard_normal(inj.domain_dim))
            val = ev(v + w)
            if not np.isfinite(val):
                ok = False
                break
            lhs += tau * val
            total += w
        if not ok:
            continue
        worst = max(worst, ev(v + tau * total) - lhs)
    if worst > 1e-10:
        warnings.warn(
            f"damped-sum energy inequality violated by {worst:.3e} at "
            f"tau={tau}; convergence is not guaranteed", RuntimeWarning)


def _step_done(u_new, u_old, tol):
    return (tol > 0 and
            np.linalg.norm(u_new - u_old) <= tol * (1.0 + np.linalg.norm(u_old)))


def psc(energy, decomp, u0, cfg):
    """Parallel subspace correction: damped sum of simultaneous corrections."""
    u = as_vector(u0, decomp.dim).copy()
    _check_tau(cfg.tau, decomp.count, energy, decomp, cfg)
    tr = Trace("psc", {"tau": cfg.tau, "J": decomp.count})
    tr.add(u=u.copy(), objective=energy(u), residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        ws = parallel.ordered_map(
            lambda j: _local_correction(energy, decomp, u, j),
            range(decomp.count))
        u_new = u.copy()
        for j, w in enumerate(ws):
            u_new += cfg.tau * decomp.injections[j].apply(w)
        step = float(np.linalg.norm(u_new - u))
        done = _step_done(u_new, u, cfg.tol)
        u = u_new
        tr.add(u=u.copy(), objective=energy(u), residuals={"step": step})
        if done:
            tr.status = "converged"
            break
    return tr


def ssc(energy, decomp, u0, cfg):
    """Successive subspace correction: one in-place sweep per iteration."""
    u = as_vector(u0, decomp.dim).copy()
    tr = Trace("ssc", {"J": decomp.count})
    tr.add(u=u.copy(), objective=energy(u), residuals={"step": 0.0})
    for n in range(1, cfg.max_iters + 1):
        u_prev = u.copy()
        for j in range(decomp.count):
            w = _local_correction(energy, decomp, u, j)
            u = u + decomp.injections[j].apply(w)
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=u.copy())
        step = float(np.linalg.norm(u - u_prev))
        tr.add(u=u.copy(), objective=energy(u), residuals={"step": step})
        if _step_done(u, u_prev, cfg.tol):
            tr.status = "converged"
            break
    return tr


# ---------------------------------------------------------------------------
# expanded-system solvers over the direct product of the subspaces


def expand_problem(energy, decomp):
    """Energy on the product space whose value at (u_1,..,u_J) is E(sum u_j).

    Returns the expanded block energy together with the summation operator.
    """
    sum_op = HCat(decomp.injections)
    if isinstance(energy, SquaredDistance):
        energy = energy.as_quadratic()
    if isinstance(energy, Quadratic):
        be = BlockEnergy(energy.a, energy.b, decomp.injections,
                         [None] * decomp.count, const=energy.const)
        return be, sum_op
    if isinstance(energy, CompositeEnergy):
        # only for the decomposition into the energy's own index blocks
        be = BlockEnergy(energy.a, energy.b, decomp.injections,
                         list(energy.terms), const=energy.const)
        return be, sum_op
    raise NotImplementedError(f"cannot expand energy {type(energy).__name__}")


def _record(tr, be, blocks, step):
    tr.add(u=be.concat(blocks), blocks=[p.copy() for p in blocks],
           coupled=be.coupling(blocks), objective=be.eval(blocks),
           residuals={"step": step})


def block_gauss_seidel(be, blocks0, cfg, tau=None):
    """Sweep the blocks in order; with tau < 1 the sweep output is blended
    with the previous point (relaxed variant)."""
    tau = 1.0 if tau is None else float(tau)
    blocks = [as_vector(p, d).copy() for p, d in zip(blocks0, be.block_dims)]
    tr = Trace("block-gauss-seidel", {"tau": tau, "J": be.count})
    _record(tr, be, blocks, 0.0)
    for n in range(1, cfg.max_iters + 1):
        prev = [p.copy() for p in blocks]
        hat = [p.copy() for p in blocks]
        for j in range(be.count):
            hat[j] = be.block_solve(j, hat)
            if cfg.record_fractional:
                tr.add_fractional(n, j + 1, u=be.concat(hat))
        if tau == 1.0:
            blocks = hat
        else:
            blocks = [(1.0 - tau) * p + tau * h for p, h in zip(prev, hat)]
        step = float(np.linalg.norm(be.concat(blocks) - be.concat(prev)))
        _record(tr, be, blocks, step)
        if _step_done(be.concat(blocks), be.concat(prev), cfg.tol):
            tr.status = "converged"
            break
    return tr


def block_jacobi(be, blocks0, cfg, tau=None):
    """All block problems from the current point, then a relaxed update."""
    tau = cfg.tau if tau is None else float(tau)
    blocks = [as_vector(p, d).copy() for p, d in zip(blocks0, be.block_dims)]
    tr = Trace("block-jacobi", {"tau": tau, "J": be.count})
    _record(tr, be, blocks, 0.0)
    for n in range(1, cfg.max_iters + 1):
        hat = parallel.ordered_map(lambda j: be.block_solve(j, blocks),
                                   range(be.count))
        new = [(1.0 - tau) * p + tau * h for p, h in zip(blocks, hat)]
        step = float(np.linalg.norm(be.concat(new) - be.concat(blocks)))
        done = _step_done(be.concat(new), be.concat(blocks), cfg.tol)
        blocks = new
        _record(tr, be, blocks, step)
        if done:
            tr.status = "converged"
            break
    return tr
