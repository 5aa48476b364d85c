"""Model problems: 1-D total-variation denoising, multinomial logistic
regression with ridge penalty, and seeded random instance generators."""

import csv

import numpy as np
import scipy.linalg
import scipy.special

from .convex import Indicator, L1Norm, LinfBall, LogSumExp, Quadratic, SquaredDistance
from .correction import BlockEnergy
from .duality import CompositeProblem
from .linops import (Adjoint, Compose, ForwardDifference, LinOp, Restriction,
                     as_vector)
from .projsplit import SplitProblem


# ---------------------------------------------------------------------------
# total-variation denoising on a 1-D grid


class TvDenoise:
    """min_u (alpha/2) ||u - f||^2 + ||D u||_1 with the one-sided difference D."""

    def __init__(self, f, alpha):
        self.f = as_vector(f)
        self.alpha = float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.dim = len(self.f)
        self.d_op = ForwardDifference(self.dim)

    def composite(self):
        return CompositeProblem(
            SquaredDistance(self.dim, self.alpha, self.f),
            L1Norm(self.dim), self.d_op)

    def objective(self, u):
        u = as_vector(u, self.dim)
        return (0.5 * self.alpha * float(np.sum((u - self.f) ** 2))
                + float(np.sum(np.abs(self.d_op.apply(u)))))

    def dual_objective(self, p):
        p = as_vector(p, self.dim)
        if np.max(np.abs(p)) > 1.0 + 1e-10:
            return np.inf
        dtp = self.d_op.apply_adjoint(p)
        return (0.5 / self.alpha) * float(dtp @ dtp) - float(
            self.d_op.apply(self.f) @ p)

    def recover(self, p):
        return self.f - self.d_op.apply_adjoint(as_vector(p, self.dim)) / self.alpha

    def gap(self, u, p):
        return self.objective(u) + self.dual_objective(p)

    def dual_block_energy(self, split_at):
        """Dual energy decomposed over two index groups of the gradient field.

        Returns the blockwise energy whose blocks are the dual variables
        restricted to indices [0, split_at) and [split_at, dim)."""
        if not 0 < split_at < self.dim:
            raise ValueError("split point must be interior")
        groups = [np.arange(0, split_at), np.arange(split_at, self.dim)]
        ops = [Compose(Adjoint(self.d_op), Adjoint(Restriction(self.dim, g)))
               for g in groups]
        terms = [Indicator(LinfBall(len(g))) for g in groups]
        # linear part -(D f, p) split by group
        df = self.d_op.apply(self.f)
        linear = [-df[g] for g in groups]
        be = BlockEnergy(np.eye(self.dim) / self.alpha, np.zeros(self.dim),
                         ops, terms, linear=linear)
        return be, groups

    def assemble_dual(self, blocks, groups):
        p = np.zeros(self.dim)
        for g, pj in zip(groups, blocks):
            p[g] = pj
        return p


# ---------------------------------------------------------------------------
# multinomial logistic regression


class FeatureMap(LinOp):
    """theta (stacked k rows of weights-and-bias) -> scores for one sample."""

    def __init__(self, z, k):
        self.z = as_vector(z)
        self.k = int(k)
        self.domain_dim = self.k * len(self.z)
        self.codomain_dim = self.k

    def apply(self, theta):
        theta = self._check_in(theta)
        return theta.reshape(self.k, -1) @ self.z

    def apply_adjoint(self, p):
        p = self._check_adj_in(p)
        return np.outer(p, self.z).ravel()


class LogisticProblem:
    """Ridge-penalized multinomial logistic regression with a bias column.

    Scaled objective (original times N):
    sum_j LSE(scores_j) - (xhat, theta) + (N alpha / 2) ||theta||^2.
    """

    def __init__(self, x, y, alpha):
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        self.y = np.asarray(y, dtype=int)
        if self.y.ndim != 1 or len(self.y) != self.x.shape[0]:
            raise ValueError("labels must match the number of samples")
        if np.any(self.y < 0):
            raise ValueError("labels must be nonnegative integers")
        self.n, self.d = self.x.shape
        self.k = int(self.y.max()) + 1
        self.alpha = float(alpha)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        self.z = np.hstack([self.x, np.ones((self.n, 1))])  # bias column
        self.theta_dim = self.k * (self.d + 1)
        self.maps = [FeatureMap(self.z[j], self.k) for j in range(self.n)]
        self.xhat = np.zeros(self.theta_dim)
        for j in range(self.n):
            e = np.zeros(self.k)
            e[self.y[j]] = 1.0
            self.xhat += self.maps[j].apply_adjoint(e)

    def split_problem(self):
        f = Quadratic(self.n * self.alpha * np.eye(self.theta_dim), self.xhat)
        terms = [(LogSumExp(self.k), m) for m in self.maps]
        return SplitProblem(f, terms)

    def objective(self, theta):
        """The original (per-sample averaged) objective."""
        theta = as_vector(theta, self.theta_dim)
        val = sum(float(scipy.special.logsumexp(m.apply(theta)))
                  for m in self.maps)
        val -= float(self.xhat @ theta)
        return val / self.n + 0.5 * self.alpha * float(theta @ theta)

    def gradient(self, theta):
        theta = as_vector(theta, self.theta_dim)
        g = -self.xhat.copy()
        for m in self.maps:
            g += m.apply_adjoint(scipy.special.softmax(m.apply(theta)))
        return g / self.n + self.alpha * theta

    def solve_gd(self, tol=1e-12, max_iter=200000):
        """Reference minimizer by plain gradient descent with a safe step."""
        lip = 0.5 * float(np.sum(self.z * self.z)) / self.n + self.alpha
        step = 1.0 / lip
        theta = np.zeros(self.theta_dim)
        for _ in range(max_iter):
            g = self.gradient(theta)
            if np.linalg.norm(g) <= tol:
                break
            theta = theta - step * g
        return theta


def logistic_from_csv(path, alpha, delimiter=","):
    """Rows of "x_1, ..., x_d, label" with integer labels starting at 0."""
    feats, labels = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {i}: need features and a label")
            try:
                feats.append([float(c) for c in row[:-1]])
                lab = float(row[-1])
            except ValueError as e:
                raise ValueError(f"{path}: row {i}: {e}") from e
            if lab != int(lab) or lab < 0:
                raise ValueError(
                    f"{path}: row {i}: label must be a nonnegative integer, "
                    f"got {row[-1]!r}")
            labels.append(int(lab))
            if len(feats) > 1 and len(feats[-1]) != len(feats[0]):
                raise ValueError(
                    f"{path}: row {i}: expected {len(feats[0])} features, "
                    f"got {len(feats[-1])}")
    if not feats:
        raise ValueError(f"{path}: no data rows")
    return LogisticProblem(np.asarray(feats), np.asarray(labels), alpha)


# ---------------------------------------------------------------------------
# seeded random instances


def random_spd(rng, dim, cond=10.0):
    """Symmetric positive definite matrix with prescribed condition number."""
    q = scipy.linalg.qr(rng.standard_normal((dim, dim)))[0]
    eigs = np.logspace(0.0, np.log10(cond), dim)
    return q @ np.diag(eigs) @ q.T
