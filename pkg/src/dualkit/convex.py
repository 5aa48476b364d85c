"""Convex functions and sets with exact conjugates, proxes, and projections.

The function classes form closed conjugate pairs: quadratic <-> quadratic,
set indicator <-> support function, log-sum-exp <-> negative entropy on the
probability simplex, weighted l1 norm <-> indicator of the sup-norm ball.
Proximal maps are exact (closed form or an inner Newton solve to machine-level
tolerance).  Constants and linear tilts are tracked exactly so that function
values, not just minimizers, agree with their conjugate counterparts.
"""

import numpy as np
import scipy.linalg
import scipy.special

from .linops import LinOp, as_vector, solve_spd

MEMBERSHIP_TOL = 1e-12


# ---------------------------------------------------------------------------
# convex sets


class ConvexSet:
    """Base: a closed convex subset of R^dim with an exact projection."""

    dim = 0

    def project(self, v):
        raise NotImplementedError

    def contains(self, v, tol=MEMBERSHIP_TOL):
        v = as_vector(v, self.dim)
        return np.linalg.norm(v - self.project(v)) <= tol * (1.0 + np.linalg.norm(v))

    def support(self, p):
        """sup_{u in K} (p, u); may be +inf."""
        raise NotImplementedError


class Box(ConvexSet):
    def __init__(self, lo, hi):
        self.lo = as_vector(lo)
        self.hi = as_vector(hi, len(self.lo))
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        self.dim = len(self.lo)

    def project(self, v):
        return np.clip(as_vector(v, self.dim), self.lo, self.hi)

    def support(self, p):
        p = as_vector(p, self.dim)
        return float(np.sum(np.where(p >= 0, self.hi * p, self.lo * p)))


class LinfBall(ConvexSet):
    def __init__(self, dim, radius=1.0):
        self.dim = int(dim)
        self.radius = float(radius)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def project(self, v):
        return np.clip(as_vector(v, self.dim), -self.radius, self.radius)

    def support(self, p):
        return self.radius * float(np.sum(np.abs(as_vector(p, self.dim))))


class Halfspace(ConvexSet):
    """{u : (a, u) <= b} with a != 0."""

    def __init__(self, a, b):
        self.a = as_vector(a)
        self.b = float(b)
        self.dim = len(self.a)
        self.a_sq = float(self.a @ self.a)
        if self.a_sq == 0.0:
            raise ValueError("normal vector must be nonzero")

    def project(self, v):
        v = as_vector(v, self.dim)
        excess = self.a @ v - self.b
        if excess <= 0:
            return v.copy()
        return v - (excess / self.a_sq) * self.a

    def support(self, p):
        p = as_vector(p, self.dim)
        # finite only along the nonnegative ray spanned by a
        t = (p @ self.a) / self.a_sq
        if t >= 0 and np.linalg.norm(p - t * self.a) <= 1e-10 * (1.0 + np.linalg.norm(p)):
            return t * self.b
        return np.inf


class AffineSubspace(ConvexSet):
    """offset + span(columns of basis); basis may have zero columns (a point)."""

    def __init__(self, dim, basis=None, offset=None):
        self.dim = int(dim)
        self.offset = (np.zeros(self.dim) if offset is None
                       else as_vector(offset, self.dim))
        if basis is None or (hasattr(basis, "shape") and basis.shape[1] == 0):
            self.basis = np.zeros((self.dim, 0))
        else:
            b = np.asarray(basis, dtype=float)
            if b.ndim != 2 or b.shape[0] != self.dim:
                raise ValueError(f"basis shape {b.shape} incompatible with dim {self.dim}")
            # orthonormalize once; rank revealed by QR with pivoting
            q, r, _ = scipy.linalg.qr(b, mode="economic", pivoting=True)
            rank = int(np.sum(np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r).max())))
            self.basis = q[:, :rank]

    def project(self, v):
        v = as_vector(v, self.dim)
        d = v - self.offset
        return self.offset + self.basis @ (self.basis.T @ d)

    def support(self, p):
        p = as_vector(p, self.dim)
        # finite iff p is orthogonal to the direction space
        if np.linalg.norm(self.basis.T @ p) > 1e-10 * (1.0 + np.linalg.norm(p)):
            return np.inf
        return float(p @ self.offset)

    def complement_basis(self):
        """Orthonormal basis of the orthogonal complement of the direction space."""
        if self.basis.shape[1] == 0:
            return np.eye(self.dim)
        q = scipy.linalg.qr(self.basis, mode="full")[0]
        return q[:, self.basis.shape[1]:]


class Simplex(ConvexSet):
    """Probability simplex {p >= 0, sum p = 1}."""

    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, v):
        v = as_vector(v, self.dim)
        # sort-based projection
        u = np.sort(v)[::-1]
        cssv = np.cumsum(u) - 1.0
        idx = np.arange(1, self.dim + 1)
        rho = idx[u - cssv / idx > 0][-1]
        theta = cssv[rho - 1] / rho
        return np.maximum(v - theta, 0.0)

    def support(self, p):
        return float(np.max(as_vector(p, self.dim)))


# ---------------------------------------------------------------------------
# convex functions


class ConvexFn:
    dim = 0

    def __call__(self, u):
        raise NotImplementedError

    def grad(self, u):
        raise NotImplementedError("no gradient available")

    def prox(self, v, t=1.0):
        """argmin_u 1/2 ||u - v||^2 + t f(u)."""
        raise NotImplementedError("no proximal map available")

    def conjugate(self):
        raise NotImplementedError("no conjugate available")


class Quadratic(ConvexFn):
    """f(u) = 1/2 (A u, u) - (b, u) + c with A symmetric positive definite."""

    def __init__(self, a, b=None, const=0.0):
        if isinstance(a, LinOp):
            a = a.to_dense()
        self.a = np.asarray(a, dtype=float)
        if self.a.ndim != 2 or self.a.shape[0] != self.a.shape[1]:
            raise ValueError(f"need a square matrix, got {self.a.shape}")
        self.dim = self.a.shape[0]
        self.b = np.zeros(self.dim) if b is None else as_vector(b, self.dim)
        self.const = float(const)

    def __call__(self, u):
        u = as_vector(u, self.dim)
        return float(0.5 * u @ (self.a @ u) - self.b @ u + self.const)

    def grad(self, u):
        return self.a @ as_vector(u, self.dim) - self.b

    def hess(self, u):
        return self.a

    def prox(self, v, t=1.0):
        v = as_vector(v, self.dim)
        return solve_spd(np.eye(self.dim) + t * self.a, v + t * self.b)

    def conjugate(self):
        # f*(p) = 1/2 (A^{-1}(p + b), p + b) - c
        a_inv = scipy.linalg.inv(self.a)
        a_inv = 0.5 * (a_inv + a_inv.T)
        return Quadratic(a_inv, -a_inv @ self.b,
                         0.5 * float(self.b @ (a_inv @ self.b)) - self.const)


class SquaredDistance(ConvexFn):
    """f(u) = (alpha/2) ||u - center||^2 (a scaled quadratic, closed forms)."""

    def __init__(self, dim, alpha=1.0, center=None):
        self.dim = int(dim)
        self.alpha = float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.center = (np.zeros(self.dim) if center is None
                       else as_vector(center, self.dim))

    def __call__(self, u):
        d = as_vector(u, self.dim) - self.center
        return 0.5 * self.alpha * float(d @ d)

    def grad(self, u):
        return self.alpha * (as_vector(u, self.dim) - self.center)

    def hess(self, u):
        return self.alpha * np.eye(self.dim)

    def prox(self, v, t=1.0):
        v = as_vector(v, self.dim)
        return (v + t * self.alpha * self.center) / (1.0 + t * self.alpha)

    def conjugate(self):
        # f*(p) = (1/(2 alpha)) ||p||^2 + (center, p)
        return Quadratic(np.eye(self.dim) / self.alpha, -self.center, 0.0)

    def as_quadratic(self):
        return Quadratic(self.alpha * np.eye(self.dim), self.alpha * self.center,
                         0.5 * self.alpha * float(self.center @ self.center))


class LinearFn(ConvexFn):
    def __init__(self, c, const=0.0):
        self.c = as_vector(c)
        self.dim = len(self.c)
        self.const = float(const)

    def __call__(self, u):
        return float(self.c @ as_vector(u, self.dim)) + self.const

    def grad(self, u):
        as_vector(u, self.dim)
        return self.c.copy()

    def hess(self, u):
        return np.zeros((self.dim, self.dim))

    def prox(self, v, t=1.0):
        return as_vector(v, self.dim) - t * self.c

    def conjugate(self):
        # indicator of the single point {c}, shifted by -const
        point = AffineSubspace(self.dim, offset=self.c)
        return Indicator(point, const=-self.const)


class L1Norm(ConvexFn):
    """f(u) = w ||u||_1."""

    def __init__(self, dim, weight=1.0):
        self.dim = int(dim)
        self.weight = float(weight)
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")

    def __call__(self, u):
        return self.weight * float(np.sum(np.abs(as_vector(u, self.dim))))

    def prox(self, v, t=1.0):
        v = as_vector(v, self.dim)
        s = t * self.weight
        return np.sign(v) * np.maximum(np.abs(v) - s, 0.0)

    def conjugate(self):
        return Indicator(LinfBall(self.dim, self.weight))


class Indicator(ConvexFn):
    """0 on the set, +inf outside (membership decided up to a tolerance)."""

    def __init__(self, set_, const=0.0):
        self.set = set_
        self.dim = set_.dim
        self.const = float(const)

    def __call__(self, u):
        return self.const if self.set.contains(u) else np.inf

    def prox(self, v, t=1.0):
        return self.set.project(v)

    def conjugate(self):
        return Support(self.set, const=-self.const)


class Support(ConvexFn):
    """Support function of a set: sup_{u in K} (p, u)."""

    def __init__(self, set_, const=0.0):
        self.set = set_
        self.dim = set_.dim
        self.const = float(const)

    def __call__(self, p):
        return self.set.support(p) + self.const

    def prox(self, v, t=1.0):
        # via the decomposition identity: prox of the conjugate of the indicator
        v = as_vector(v, self.dim)
        return v - t * self.set.project(v / t)

    def conjugate(self):
        return Indicator(self.set, const=-self.const)


class LogSumExp(ConvexFn):
    """f(u) = log(sum_i exp(u_i))."""

    def __init__(self, dim):
        self.dim = int(dim)

    def __call__(self, u):
        return float(scipy.special.logsumexp(as_vector(u, self.dim)))

    def grad(self, u):
        return scipy.special.softmax(as_vector(u, self.dim))

    def hess(self, u):
        s = self.grad(u)
        return np.diag(s) - np.outer(s, s)

    def prox(self, v, t=1.0, tol=1e-12, max_iter=100):
        # damped Newton on  u - v + t softmax(u) = 0
        v = as_vector(v, self.dim)
        u = v - t / self.dim  # start at softmax of a constant vector
        scale = 1.0 + np.linalg.norm(v)
        for _ in range(max_iter):
            s = scipy.special.softmax(u)
            g = u - v + t * s
            if np.linalg.norm(g) <= tol * scale:
                return u
            h = np.eye(self.dim) + t * (np.diag(s) - np.outer(s, s))
            step = np.linalg.solve(h, g)
            # backtrack on the residual norm
            alpha = 1.0
            gn = np.linalg.norm(g)
            for _ in range(50):
                u_try = u - alpha * step
                s_try = scipy.special.softmax(u_try)
                if np.linalg.norm(u_try - v + t * s_try) < gn:
                    u = u_try
                    break
                alpha *= 0.5
            else:
                u = u - step
        return u

    def conjugate(self):
        return NegEntropy(self.dim)


def _inv_plog(c, t):
    """Solve p + t log p = c for p > 0 (strictly increasing in p)."""
    # Newton in x = log p: e^x + t x = c
    x = min(np.log(max(c, 1e-300)) if c > 0 else c / t, 700.0)
    if not np.isfinite(x):
        x = 0.0
    lo, hi = -745.0, 710.0
    for _ in range(200):
        ex = np.exp(x)
        f = ex + t * x - c
        if f > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        if abs(f) <= 1e-14 * (1.0 + abs(c)):
            break
        dx = f / (ex + t)
        x_new = x - dx
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-16 * (1.0 + abs(x)):
            x = x_new
            break
        x = x_new
    return np.exp(x)


class NegEntropy(ConvexFn):
    """f(p) = sum_i p_i log p_i on the probability simplex, +inf outside.

    The convention 0 log 0 = 0 applies on the boundary.
    """

    def __init__(self, dim):
        self.dim = int(dim)
        self.simplex = Simplex(self.dim)

    def __call__(self, p):
        p = as_vector(p, self.dim)
        if not self.simplex.contains(p):
            return np.inf
        q = np.clip(p, 0.0, None)
        return float(np.sum(scipy.special.xlogy(q, q)))

    def prox(self, v, t=1.0, tol=1e-12, max_iter=100):
        # KKT: p_i + t log p_i = v_i - t - lam, sum p_i = 1.
        # Safeguarded Newton on lam; inner scalar solves are exact.
        v = as_vector(v, self.dim)
        c0 = v - t
        lam = float(np.max(c0))  # keeps every p_i <= ~1 at the start

        def psum(lam):
            p = np.array([_inv_plog(ci - lam, t) for ci in c0])
            return p, float(np.sum(p))

        # bracket: psum strictly decreasing in lam
        p, s = psum(lam)
        step = 1.0
        lo = hi = lam
        if s > 1.0:
            while s > 1.0:
                lo, lam = lam, lam + step
                step *= 2.0
                p, s = psum(lam)
            hi = lam
        else:
            while s < 1.0:
                hi, lam = lam, lam - step
                step *= 2.0
                p, s = psum(lam)
            lo = lam
        for _ in range(max_iter):
            p, s = psum(lam)
            err = s - 1.0
            if abs(err) <= tol:
                return p
            if err > 0:
                lo = lam
            else:
                hi = lam
            dsdlam = -float(np.sum(p / (p + t)))
            lam_new = lam - err / dsdlam if dsdlam != 0 else 0.5 * (lo + hi)
            if not (lo < lam_new < hi):
                lam_new = 0.5 * (lo + hi)
            lam = lam_new
        return p

    def conjugate(self):
        return LogSumExp(self.dim)


class Tilted(ConvexFn):
    """inner(u) + (c, u) + const."""

    def __init__(self, inner, c, const=0.0):
        self.inner = inner
        self.c = as_vector(c, inner.dim)
        self.const = float(const)
        self.dim = inner.dim

    def __call__(self, u):
        return self.inner(u) + float(self.c @ as_vector(u, self.dim)) + self.const

    def grad(self, u):
        return self.inner.grad(u) + self.c

    def prox(self, v, t=1.0):
        return self.inner.prox(as_vector(v, self.dim) - t * self.c, t)

    def conjugate(self):
        return Translated(self.inner.conjugate(), self.c, const=-self.const)


class Translated(ConvexFn):
    """inner(u - shift) + const."""

    def __init__(self, inner, shift, const=0.0):
        self.inner = inner
        self.shift = as_vector(shift, inner.dim)
        self.const = float(const)
        self.dim = inner.dim

    def __call__(self, u):
        return self.inner(as_vector(u, self.dim) - self.shift) + self.const

    def grad(self, u):
        return self.inner.grad(as_vector(u, self.dim) - self.shift)

    def prox(self, v, t=1.0):
        return self.shift + self.inner.prox(as_vector(v, self.dim) - self.shift, t)

    def conjugate(self):
        return Tilted(self.inner.conjugate(), self.shift, const=-self.const)


class AffinePrecompose(ConvexFn):
    """inner(B u + shift).

    The proximal map is available when B B^t is a positive multiple of the
    identity (checked numerically at construction).
    """

    def __init__(self, inner, op, shift=None):
        if op.codomain_dim != inner.dim:
            raise ValueError(
                f"operator codomain {op.codomain_dim} != function dim {inner.dim}")
        self.inner = inner
        self.op = op
        self.dim = op.domain_dim
        self.shift = (np.zeros(inner.dim) if shift is None
                      else as_vector(shift, inner.dim))
        bbt = op.to_dense() @ op.to_dense().T
        c = float(np.trace(bbt)) / bbt.shape[0] if bbt.shape[0] else 0.0
        self._row_scale = c if (
            c > 0 and np.allclose(bbt, c * np.eye(bbt.shape[0]),
                                  atol=1e-10 * (1.0 + abs(c)))) else None

    def __call__(self, u):
        return self.inner(self.op.apply(as_vector(u, self.dim)) + self.shift)

    def grad(self, u):
        return self.op.apply_adjoint(
            self.inner.grad(self.op.apply(as_vector(u, self.dim)) + self.shift))

    def prox(self, v, t=1.0):
        if self._row_scale is None:
            raise NotImplementedError("prox needs B B^t to be a multiple of I")
        c = self._row_scale
        v = as_vector(v, self.dim)
        z = self.op.apply(v) + self.shift
        return v + (1.0 / c) * self.op.apply_adjoint(self.inner.prox(z, c * t) - z)


class SumFn(ConvexFn):
    def __init__(self, terms):
        if not terms:
            raise ValueError("need at least one term")
        self.terms = list(terms)
        self.dim = terms[0].dim
        for f in terms:
            if f.dim != self.dim:
                raise ValueError("dimension mismatch among terms")

    def __call__(self, u):
        return float(sum(f(u) for f in self.terms))

    def grad(self, u):
        return sum(f.grad(u) for f in self.terms)


# ---------------------------------------------------------------------------
# operations


def prox(f, v, t=1.0):
    return f.prox(v, t)


def conjugate(f):
    return f.conjugate()


def prox_conjugate_via_moreau(f, v, t=1.0):
    """prox of t f* at v computed from the prox of f alone."""
    v = as_vector(v, f.dim)
    return v - t * f.prox(v / t, 1.0 / t)


def bregman(f, u, v):
    """D_f(u; v) = f(u) - f(v) - (grad f(v), u - v)."""
    u = as_vector(u, f.dim)
    v = as_vector(v, f.dim)
    return float(f(u) - f(v) - f.grad(v) @ (u - v))


def fenchel_young_residual(f, u, p, f_conj=None):
    """f(u) + f*(p) - (p, u); zero iff p is a subgradient of f at u."""
    if f_conj is None:
        f_conj = f.conjugate()
    u = as_vector(u, f.dim)
    p = as_vector(p, f.dim)
    return float(f(u) + f_conj(p) - p @ u)


def box_qp(h, q, lo, hi, tol=1e-12, max_iter=200):
    """Minimize 1/2 x^t H x + q^t x over a box, H symmetric positive definite.

    Projected Newton with active-set identification; exact up to ``tol`` on
    the projected gradient.  Small dense problems only.
    """
    h = np.asarray(h, dtype=float)
    q = as_vector(q, h.shape[0])
    lo = as_vector(lo, len(q))
    hi = as_vector(hi, len(q))
    x = np.clip(np.zeros_like(q), lo, hi)

    def obj(x):
        return 0.5 * x @ (h @ x) + q @ x

    for _ in range(max_iter):
        g = h @ x + q
        pg = np.where((x <= lo + 1e-14) & (g > 0), 0.0,
                      np.where((x >= hi - 1e-14) & (g < 0), 0.0, g))
        if np.linalg.norm(pg) <= tol * (1.0 + np.linalg.norm(q)):
            return x
        free = ~(((x <= lo + 1e-14) & (g > 0)) | ((x >= hi - 1e-14) & (g < 0)))
        d = np.zeros_like(x)
        idx = np.where(free)[0]
        if len(idx) == 0:
            return x
        hff = h[np.ix_(idx, idx)]
        try:
            d[idx] = -np.linalg.solve(hff, g[idx])
        except np.linalg.LinAlgError:
            # singular free block: minimum-norm step still decreases the objective
            d[idx] = -np.linalg.lstsq(hff, g[idx], rcond=None)[0]
        f0 = obj(x)
        alpha = 1.0
        for _ in range(60):
            x_try = np.clip(x + alpha * d, lo, hi)
            if obj(x_try) <= f0 - 1e-14 * abs(f0) + 1e-300 or obj(x_try) < f0:
                break
            alpha *= 0.5
        x = np.clip(x + alpha * d, lo, hi)
    return x
