import numpy as np
import pytest

from dualkit import linops
from dualkit.convex import L1Norm, Quadratic, SquaredDistance
from dualkit.duality import (CompositeProblem, RelationSpec,
                             error_transfer_bound, verify_dualization)
from dualkit.trace import Trace


def _quadratic_problem(seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3))
    f = Quadratic(a @ a.T + 2 * np.eye(3), rng.standard_normal(3))
    g = SquaredDistance(2, 1.5, rng.standard_normal(2))
    b = linops.DenseOp(rng.standard_normal((2, 3)))
    return CompositeProblem(f, g, b), rng


def test_gap_vanishes_at_optimum():
    prob, rng = _quadratic_problem(0)
    # all-quadratic: the minimizer solves a linear system
    bd = prob.b.to_dense()
    gq = prob.g.as_quadratic()
    h = prob.f.a + bd.T @ gq.a @ bd
    u_star = np.linalg.solve(h, prob.f.b + bd.T @ gq.b)
    p_star = gq.grad(bd @ u_star)
    assert abs(prob.gap(u_star, p_star)) <= 1e-9
    # and the primal recovery map inverts the first optimality relation
    assert np.linalg.norm(prob.recover_primal(p_star) - u_star) <= 1e-9


def test_gap_positive_away_from_optimum():
    prob, rng = _quadratic_problem(1)
    for _ in range(10):
        u = rng.standard_normal(3)
        p = rng.standard_normal(2)
        assert prob.gap(u, p) >= -1e-10


def test_dual_of_denoising_form():
    # F = squared distance, G = l1, B = forward difference: the dual of the
    # dual objective evaluates like the primal at matched points
    d = 5
    rng = np.random.default_rng(2)
    f_data = rng.standard_normal(d)
    prob = CompositeProblem(SquaredDistance(d, 2.0, f_data), L1Norm(d),
                            linops.ForwardDifference(d))
    dual = prob.dual()
    p = np.clip(rng.standard_normal(d), -1, 1)
    dtp = linops.ForwardDifference(d).apply_adjoint(p)
    expected = (0.25 * float(dtp @ dtp)
                - float(linops.ForwardDifference(d).apply(f_data) @ p))
    assert abs(dual.objective(p) - expected) <= 1e-10


def test_dimension_checks():
    with pytest.raises(ValueError):
        CompositeProblem(SquaredDistance(3, 1.0), L1Norm(2),
                         linops.Identity(3))


def _traces(n, fn_p, fn_d):
    tp, td = Trace("p"), Trace("d")
    for i in range(n):
        tp.add(u=fn_p(i))
        td.add(u=fn_d(i))
    return tp, td


def test_verify_dualization_pass_and_fail():
    tp, td = _traces(5, lambda i: np.array([float(i)]),
                     lambda i: np.array([-float(i)]))
    rel = RelationSpec("mirror", [("sum", lambda a, b: float((a["u"] + b["u"])[0]))],
                       init_check=lambda a, b: float((a["u"] + b["u"])[0]))
    rep = verify_dualization(tp, td, rel, tol=1e-12)
    assert rep.passed and rep.iterations == 4
    assert '"pass": true' in rep.to_json()

    tp, td = _traces(5, lambda i: np.array([float(i)]),
                     lambda i: np.array([-float(i) + (0.1 if i == 3 else 0.0)]))
    rep = verify_dualization(tp, td, rel, tol=1e-12)
    assert not rep.passed
    assert abs(rep.max_residual - 0.1) <= 1e-12


def test_verify_dualization_errors():
    tp, td = _traces(5, lambda i: np.array([0.0]), lambda i: np.array([0.0]))
    short = Trace("d")
    short.add(u=np.array([0.0]))
    rel = RelationSpec("x", [("z", lambda a, b: 0.0)])
    with pytest.raises(ValueError, match="length"):
        verify_dualization(tp, short, rel)
    # unmatched start is an input error, not a failed verification
    tp, td = _traces(5, lambda i: np.array([1.0]), lambda i: np.array([0.0]))
    rel = RelationSpec("x", [("z", lambda a, b: 0.0)],
                       init_check=lambda a, b: float(abs(a["u"] - b["u"])[0]))
    with pytest.raises(ValueError, match="initial"):
        verify_dualization(tp, td, rel)


def test_error_transfer_bound_value():
    b = linops.Scaling(2, 3.0)
    val = error_transfer_bound(b, mu=1.5, p=np.array([1.0, 0.0]),
                               p_star=np.array([0.0, 0.0]))
    assert abs(val - 2.0) <= 1e-8
