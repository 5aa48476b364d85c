"""Primal-dual problem pairs and the numeric equivalence harness.

A composite problem min F(u) + G(Bu) owns its dual min F*(-B^t p) + G*(p),
the first-order linking relations, and a gap.  The harness takes two solver
traces plus a relation specification and reports, per iteration, how far the
iterate pair is from satisfying the linking identities.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import linops
from .linops import as_vector
from .convex import conjugate as _conjugate


class CompositeProblem:
    """min_u F(u) + G(B u)."""

    def __init__(self, f, g, b):
        if b.domain_dim != f.dim:
            raise ValueError(f"B domain {b.domain_dim} != dim of F {f.dim}")
        if b.codomain_dim != g.dim:
            raise ValueError(f"B codomain {b.codomain_dim} != dim of G {g.dim}")
        self.f, self.g, self.b = f, g, b

    def objective(self, u):
        return self.f(u) + self.g(self.b.apply(u))

    def dual(self):
        """min_p F*(-B^t p) + G*(p) as another composite problem."""
        neg_bt = linops.Compose(linops.Scaling(self.b.domain_dim, -1.0), self.b.T)
        return CompositeProblem(_conjugate(self.g), _conjugate(self.f), neg_bt)

    def dual_objective(self, p):
        return self.dual().objective(p)

    def recover_primal(self, p):
        """u = grad F*(-B^t p); needs F* differentiable."""
        p = as_vector(p, self.b.codomain_dim)
        return _conjugate(self.f).grad(-self.b.apply_adjoint(p))

    def gap(self, u, p):
        """Primal value minus dual value (nonnegative at feasible pairs)."""
        return self.objective(u) + self.dual_objective(p)


def error_transfer_bound(b, mu, p, p_star, norm_b=None):
    """(||B|| / mu) ||p - p_star||: an upper bound for ||u - u_star|| whenever
    the primal sequence dualizes the dual one and F is mu-strongly convex."""
    if norm_b is None:
        norm_b = linops.operator_norm(b)
    p = np.asarray(p, dtype=float)
    p_star = np.asarray(p_star, dtype=float)
    return (norm_b / mu) * float(np.linalg.norm(p - p_star))


@dataclass
class RelationSpec:
    """Named residual maps evaluated on matched (primal, dual) iterate records.

    Each check maps a pair of per-iteration records (dicts of arrays) to a
    scalar residual that must vanish when the linking relations hold.  The
    optional init check is applied at n = 0; a violation there means the two
    runs were not started in matched configurations, which is an input error
    rather than a verification failure.
    """

    theorem_id: str
    checks: list  # list of (name, callable(primal_rec, dual_rec) -> float)
    init_check: object = None  # callable or None
    init_tol: float = 1e-8


@dataclass
class DualizationReport:
    theorem_id: str
    iterations: int
    residuals: list = field(default_factory=list)  # one dict per iteration n>=1
    max_residual: float = 0.0
    tol: float = 0.0
    passed: bool = False

    def to_json(self, indent=None):
        return json.dumps({
            "theorem_id": self.theorem_id,
            "iterations": self.iterations,
            "residuals": self.residuals,
            "max_residual": self.max_residual,
            "tol": self.tol,
            "pass": self.passed,
        }, indent=indent, sort_keys=True)


def verify_dualization(primal_trace, dual_trace, relation, tol=1e-8):
    """Check the linking relations on two equal-length traces.

    Iterations n >= 1 contribute residuals; n = 0 is only checked for a
    matched start (error, not failure, when violated).
    """
    if len(primal_trace) != len(dual_trace):
        raise ValueError(
            f"trace length mismatch: {len(primal_trace)} vs {len(dual_trace)}")
    if len(primal_trace) < 2:
        raise ValueError("need at least one iteration beyond the start")
    if relation.init_check is not None:
        r0 = float(relation.init_check(primal_trace.records[0],
                                       dual_trace.records[0]))
        if not r0 <= relation.init_tol:
            raise ValueError(
                f"{relation.theorem_id}: unmatched initial configuration "
                f"(residual {r0:.3e} > {relation.init_tol:.1e})")
    residuals = []
    worst = 0.0
    for prec, drec in zip(primal_trace.records[1:], dual_trace.records[1:]):
        row = {}
        for name, fn in relation.checks:
            val = float(fn(prec, drec))
            row[name] = val
            worst = max(worst, abs(val))
        residuals.append(row)
    return DualizationReport(
        theorem_id=relation.theorem_id,
        iterations=len(residuals),
        residuals=residuals,
        max_residual=worst,
        tol=tol,
        passed=worst <= tol,
    )
