"""Linear operators with explicit adjoints.

Everything works on 1-D float64 numpy arrays.  Operators carry their
domain and codomain dimensions and know how to apply themselves, apply
their adjoints, and densify.  Small sizes only; densifying is always an
option and direct solves go through Cholesky.
"""

import csv

import numpy as np
import scipy.linalg


def as_vector(x, dim=None, name="vector"):
    """Validate and convert ``x`` to a 1-D float64 array.

    Raises ValueError on non-finite entries or a dimension mismatch.
    """
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"{name}: expected 1-D data, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name}: non-finite entries")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name}: expected dimension {dim}, got {v.shape[0]}")
    return v


class LinOp:
    """Base class: a linear map from R^domain_dim to R^codomain_dim."""

    domain_dim = 0
    codomain_dim = 0

    def apply(self, v):
        raise NotImplementedError

    def apply_adjoint(self, w):
        raise NotImplementedError

    def to_dense(self):
        # generic fallback: apply to basis vectors
        cols = []
        for i in range(self.domain_dim):
            e = np.zeros(self.domain_dim)
            e[i] = 1.0
            cols.append(self.apply(e))
        if not cols:
            return np.zeros((self.codomain_dim, 0))
        return np.column_stack(cols)

    def _check_in(self, v):
        return as_vector(v, self.domain_dim, "input")

    def _check_adj_in(self, w):
        return as_vector(w, self.codomain_dim, "adjoint input")

    @property
    def T(self):
        return Adjoint(self)


class DenseOp(LinOp):
    """Operator backed by an explicit 2-D array."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        self.matrix = m
        self.codomain_dim, self.domain_dim = m.shape

    def apply(self, v):
        return self.matrix @ self._check_in(v)

    def apply_adjoint(self, w):
        return self.matrix.T @ self._check_adj_in(w)

    def to_dense(self):
        return self.matrix.copy()


class Identity(LinOp):
    def __init__(self, dim):
        self.domain_dim = self.codomain_dim = int(dim)

    def apply(self, v):
        return self._check_in(v).copy()

    def apply_adjoint(self, w):
        return self._check_adj_in(w).copy()

    def to_dense(self):
        return np.eye(self.domain_dim)


class Scaling(LinOp):
    """Multiplication by a scalar."""

    def __init__(self, dim, alpha):
        self.domain_dim = self.codomain_dim = int(dim)
        self.alpha = float(alpha)

    def apply(self, v):
        return self.alpha * self._check_in(v)

    def apply_adjoint(self, w):
        return self.alpha * self._check_adj_in(w)

    def to_dense(self):
        return self.alpha * np.eye(self.domain_dim)


class Adjoint(LinOp):
    def __init__(self, op):
        self.op = op
        self.domain_dim = op.codomain_dim
        self.codomain_dim = op.domain_dim

    def apply(self, v):
        return self.op.apply_adjoint(v)

    def apply_adjoint(self, w):
        return self.op.apply(w)

    def to_dense(self):
        return self.op.to_dense().T


class VStack(LinOp):
    """Stack operators sharing a domain: v -> (A_1 v, ..., A_J v)."""

    def __init__(self, ops):
        if not ops:
            raise ValueError("need at least one operator")
        d = ops[0].domain_dim
        for op in ops:
            if op.domain_dim != d:
                raise ValueError(
                    f"domain mismatch: {op.domain_dim} vs {d}")
        self.ops = list(ops)
        self.domain_dim = d
        self.codomain_dim = sum(op.codomain_dim for op in ops)

    def apply(self, v):
        v = self._check_in(v)
        return np.concatenate([op.apply(v) for op in self.ops])

    def apply_adjoint(self, w):
        w = self._check_adj_in(w)
        out = np.zeros(self.domain_dim)
        k = 0
        for op in self.ops:
            m = op.codomain_dim
            out += op.apply_adjoint(w[k:k + m])
            k += m
        return out

    def to_dense(self):
        return np.vstack([op.to_dense() for op in self.ops])


class HCat(LinOp):
    """Concatenate operators sharing a codomain: (v_1,...,v_J) -> sum A_j v_j."""

    def __init__(self, ops):
        if not ops:
            raise ValueError("need at least one operator")
        m = ops[0].codomain_dim
        for op in ops:
            if op.codomain_dim != m:
                raise ValueError(
                    f"codomain mismatch: {op.codomain_dim} vs {m}")
        self.ops = list(ops)
        self.codomain_dim = m
        self.domain_dim = sum(op.domain_dim for op in ops)

    def apply(self, v):
        v = self._check_in(v)
        out = np.zeros(self.codomain_dim)
        k = 0
        for op in self.ops:
            d = op.domain_dim
            out += op.apply(v[k:k + d])
            k += d
        return out

    def apply_adjoint(self, w):
        w = self._check_adj_in(w)
        return np.concatenate([op.apply_adjoint(w) for op in self.ops])

    def to_dense(self):
        return np.hstack([op.to_dense() for op in self.ops])


class BlockDiag(LinOp):
    def __init__(self, ops):
        if not ops:
            raise ValueError("need at least one operator")
        self.ops = list(ops)
        self.domain_dim = sum(op.domain_dim for op in ops)
        self.codomain_dim = sum(op.codomain_dim for op in ops)

    def apply(self, v):
        v = self._check_in(v)
        parts, k = [], 0
        for op in self.ops:
            parts.append(op.apply(v[k:k + op.domain_dim]))
            k += op.domain_dim
        return np.concatenate(parts)

    def apply_adjoint(self, w):
        w = self._check_adj_in(w)
        parts, k = [], 0
        for op in self.ops:
            parts.append(op.apply_adjoint(w[k:k + op.codomain_dim]))
            k += op.codomain_dim
        return np.concatenate(parts)

    def to_dense(self):
        return scipy.linalg.block_diag(*[op.to_dense() for op in self.ops])


class ForwardDifference(LinOp):
    """One-sided difference on a 1-D grid: (Du)_i = u_{i+1} - u_i, last entry 0."""

    def __init__(self, dim):
        self.domain_dim = self.codomain_dim = int(dim)

    def apply(self, v):
        v = self._check_in(v)
        out = np.zeros_like(v)
        out[:-1] = v[1:] - v[:-1]
        return out

    def apply_adjoint(self, w):
        w = self._check_adj_in(w)
        out = np.zeros_like(w)
        out[0] = -w[0]
        out[1:-1] = w[:-2] - w[1:-1]
        if self.domain_dim > 1:
            out[-1] = w[-2]
        return out

    def to_dense(self):
        d = self.domain_dim
        m = np.zeros((d, d))
        for i in range(d - 1):
            m[i, i] = -1.0
            m[i, i + 1] = 1.0
        return m


class Compose(LinOp):
    """Composition A o B: apply B first, then A."""

    def __init__(self, outer, inner):
        if inner.codomain_dim != outer.domain_dim:
            raise ValueError(
                f"cannot compose: inner codomain {inner.codomain_dim} "
                f"!= outer domain {outer.domain_dim}")
        self.outer, self.inner = outer, inner
        self.domain_dim = inner.domain_dim
        self.codomain_dim = outer.codomain_dim

    def apply(self, v):
        return self.outer.apply(self.inner.apply(v))

    def apply_adjoint(self, w):
        return self.inner.apply_adjoint(self.outer.apply_adjoint(w))

    def to_dense(self):
        return self.outer.to_dense() @ self.inner.to_dense()


class Restriction(LinOp):
    """Pick out the coordinates listed in ``indices``."""

    def __init__(self, dim, indices):
        self.domain_dim = int(dim)
        self.indices = np.asarray(indices, dtype=int)
        if self.indices.ndim != 1:
            raise ValueError("indices must be 1-D")
        if np.any(self.indices < 0) or np.any(self.indices >= dim):
            raise ValueError("index out of range")
        self.codomain_dim = len(self.indices)

    def apply(self, v):
        return self._check_in(v)[self.indices]

    def apply_adjoint(self, w):
        w = self._check_adj_in(w)
        out = np.zeros(self.domain_dim)
        out[self.indices] = w
        return out


def apply(op, v):
    return op.apply(v)


def apply_adjoint(op, w):
    return op.apply_adjoint(w)


def solve_spd(op, rhs):
    """Solve A x = rhs for symmetric positive definite A (given as LinOp or array).

    Uses a Cholesky factorization of the dense matrix; raises ValueError if
    the matrix is not symmetric positive definite.
    """
    a = op.to_dense() if isinstance(op, LinOp) else np.asarray(op, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix is not square: {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    rhs = as_vector(rhs, a.shape[0], "rhs")
    try:
        c, low = scipy.linalg.cho_factor(a)
    except scipy.linalg.LinAlgError as e:
        raise ValueError(f"matrix is not positive definite: {e}") from e
    return scipy.linalg.cho_solve((c, low), rhs)


def operator_norm(op, tol=1e-12, max_iter=5000, seed=0):
    """Spectral norm of ``op`` by power iteration on A^t A (seeded, deterministic)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.domain_dim)
    nv = np.linalg.norm(v)
    if nv == 0 or op.domain_dim == 0:
        return 0.0
    v /= nv
    sigma = 0.0
    for _ in range(max_iter):
        w = op.apply_adjoint(op.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        new_sigma = np.sqrt(nw)
        v = w / nw
        if abs(new_sigma - sigma) <= tol * (1.0 + new_sigma):
            return new_sigma
        sigma = new_sigma
    return sigma


def load_matrix_csv(path, delimiter=","):
    """Read a dense matrix from a CSV file, one row per line.

    Errors mention the offending row number.
    """
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError as e:
                raise ValueError(f"{path}: row {i}: {e}") from e
            if len(rows) > 1 and len(rows[-1]) != len(rows[0]):
                raise ValueError(
                    f"{path}: row {i}: expected {len(rows[0])} columns, "
                    f"got {len(rows[-1])}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)
