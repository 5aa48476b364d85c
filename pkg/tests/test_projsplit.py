import numpy as np
import pytest

from dualkit import linops
from dualkit.convex import (AffineSubspace, Box, Indicator, Quadratic,
                            SquaredDistance, prox)
from dualkit.projsplit import (CoupledLinearProblem, ProjectionProblem,
                               SplitConfig, SplitProblem, cyclic_projection,
                               cyclic_projection_corrected, kaczmarz,
                               parallel_projection,
                               parallel_projection_corrected,
                               relaxed_sweep_splitting, sequential_resolvent,
                               sweep_splitting, two_term_reflection)


def _affine_sets(rng, d, n_sets):
    sets = []
    for _ in range(n_sets):
        basis = rng.standard_normal((d, d - 1))
        point = rng.standard_normal(d)
        sets.append(AffineSubspace(d, basis, point))
    return sets


def _affine_intersection_projection(sets, f):
    # oracle: stack the normal equations of all sets and project via lstsq
    d = len(f)
    rows, rhs = [], []
    for s in sets:
        n = s.complement_basis()
        rows.append(n.T)
        rhs.append(n.T @ s.offset)
    a = np.vstack(rows)
    b = np.concatenate(rhs)
    # min ||u - f|| s.t. a u = b
    shift = np.linalg.lstsq(a, b - a @ f, rcond=None)[0]
    # lstsq gives the minimum-norm solution in the row space, which is the
    # correction orthogonal to the intersection
    return f + shift


@pytest.mark.parametrize("seed", range(5))
def test_corrected_cyclic_projection_finds_nearest_point(seed):
    rng = np.random.default_rng(seed)
    d = 5
    sets = _affine_sets(rng, d, 3)
    f = rng.standard_normal(d)
    prob = ProjectionProblem(f, sets)
    tr = cyclic_projection_corrected(prob, SplitConfig(max_iters=300))
    u_star = _affine_intersection_projection(sets, f)
    assert np.linalg.norm(tr.last("u") - u_star) <= 1e-8


def test_corrected_equals_plain_on_affine_sets():
    # with affine sets the memory terms stay orthogonal to the progress,
    # so both iterations visit the same points
    rng = np.random.default_rng(7)
    d = 5
    sets = _affine_sets(rng, d, 3)
    f = rng.standard_normal(d)
    prob = ProjectionProblem(f, sets)
    t1 = cyclic_projection(prob, SplitConfig(max_iters=40))
    t2 = cyclic_projection_corrected(prob, SplitConfig(max_iters=40))
    for r1, r2 in zip(t1.series("u"), t2.series("u")):
        assert np.linalg.norm(r1 - r2) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_corrected_parallel_projection_finds_nearest_point(seed):
    rng = np.random.default_rng(seed + 10)
    d = 5
    sets = _affine_sets(rng, d, 3)
    f = rng.standard_normal(d)
    prob = ProjectionProblem(f, sets)
    tr = parallel_projection_corrected(
        prob, SplitConfig(tau=1.0 / 3, max_iters=3000))
    u_star = _affine_intersection_projection(sets, f)
    assert np.linalg.norm(tr.last("u") - u_star) <= 1e-7


def test_plain_methods_reach_feasibility():
    rng = np.random.default_rng(3)
    d = 4
    boxes = [Box(-np.ones(d) * (i + 1), np.ones(d) * (i + 1)) for i in range(3)]
    f = rng.standard_normal(d) * 5
    prob = ProjectionProblem(f, boxes)
    for solver, cfg in [(cyclic_projection, SplitConfig(max_iters=50)),
                        (parallel_projection,
                         SplitConfig(tau=1.0 / 3, max_iters=400))]:
        tr = solver(prob, cfg)
        assert prob.feasibility(tr.last("u")) <= 1e-8


def test_kaczmarz_matches_row_projection_loop():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((3, 5))
    x_true = rng.standard_normal(5)
    b = a @ x_true
    tr = kaczmarz(a, b, SplitConfig(max_iters=30), np.zeros(5))
    # independent reference: project onto row hyperplanes in order
    x = np.zeros(5)
    for rec_iter in range(1, 31):
        for i in range(3):
            x = x - (a[i] @ x - b[i]) / (a[i] @ a[i]) * a[i]
        assert np.linalg.norm(tr.records[rec_iter]["u"] - x) <= 1e-12
    assert np.linalg.norm(a @ tr.last("u") - b) <= 1e-8


def test_sequential_resolvent_converges():
    rng = np.random.default_rng(13)
    d = 4
    from dualkit.problems import random_spd
    mats = [random_spd(rng, d, 4.0) for _ in range(3)]
    prob = CoupledLinearProblem(mats, 2.0, rng.standard_normal(d))
    tr = sequential_resolvent(prob, SplitConfig(max_iters=400))
    assert np.linalg.norm(tr.last("u") - prob.solution()) <= 1e-8


class PlusHalfSq:
    """h(v) = inner(v) + ||v||^2 / 2, exposing only the prox."""

    def __init__(self, inner):
        self.inner = inner

    def prox(self, v, t=1.0):
        return self.inner.prox(v / (1.0 + t), t / (1.0 + t))


def _two_term_instance(seed):
    rng = np.random.default_rng(seed)
    d = 4
    g1 = Indicator(Box(-np.ones(d) * 0.5, np.ones(d) * 2.0))
    from dualkit.problems import random_spd
    g2 = Quadratic(random_spd(rng, d, 3.0), rng.standard_normal(d))
    f = Quadratic(2.0 * np.eye(d))
    prob = SplitProblem(f, [(g1, None), (g2, None)])
    return prob, g1, g2, rng


@pytest.mark.parametrize("seed", range(5))
def test_sweep_splitting_reduces_to_peaceman_rachford(seed):
    # for two identity-coupled terms and F = ||.||^2, the first-term state
    # 2u - v_1 follows the classical double-reflection recursion
    prob, g1, g2, rng = _two_term_instance(seed)
    d = 4
    r1, r2 = PlusHalfSq(g1), PlusHalfSq(g2)
    v1 = rng.standard_normal(d)
    v2 = rng.standard_normal(d)
    u0 = 0.5 * (v1 + v2)
    v_cl = 2.0 * u0 - v1
    tr = sweep_splitting(prob, SplitConfig(max_iters=50), u0=u0,
                         v0=[v1, v2])
    for rec in tr.records[1:]:
        v_cl = (2.0 * r2.prox(2.0 * r1.prox(v_cl) - v_cl)
                - (2.0 * r1.prox(v_cl) - v_cl))
        model = 2.0 * rec["u"] - rec["v"][0]
        assert np.linalg.norm(model - v_cl) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_relaxed_sweep_reduces_to_douglas_rachford(seed):
    # the second-term auxiliary state follows the relaxed double-reflection
    # recursion with the same relaxation weight
    prob, g1, g2, rng = _two_term_instance(seed + 20)
    d = 4
    tau = 0.6
    r1, r2 = PlusHalfSq(g1), PlusHalfSq(g2)
    v1 = rng.standard_normal(d)
    v2 = rng.standard_normal(d)
    u0 = 0.5 * (v1 + v2)
    tr = relaxed_sweep_splitting(prob, SplitConfig(tau=tau, max_iters=50),
                                 u0=u0, v0=[v1, v2])
    v = v2.copy()
    for rec in tr.records[1:]:
        refl = (2.0 * r2.prox(2.0 * r1.prox(v) - v)
                - (2.0 * r1.prox(v) - v))
        v = (1.0 - tau) * v + tau * refl
        assert np.linalg.norm(rec["v"][1] - v) <= 1e-10


def test_two_term_reflection_matches_inline_loop():
    rng = np.random.default_rng(31)
    d = 4
    from dualkit.problems import random_spd
    g1 = Quadratic(random_spd(rng, d, 3.0), rng.standard_normal(d))
    g2 = Indicator(Box(-np.ones(d), np.ones(d)))
    v0 = rng.standard_normal(d)
    tau = 0.7
    tr = two_term_reflection(g1, g2, v0, SplitConfig(max_iters=50), tau=tau)
    v = v0.copy()
    for rec in tr.records[1:]:
        refl = 2.0 * prox(g2, 2.0 * prox(g1, v) - v) - (2.0 * prox(g1, v) - v)
        v = (1.0 - tau) * v + tau * refl
        assert np.linalg.norm(rec["v"] - v) <= 1e-12


def test_splitting_solves_composite_problem():
    rng = np.random.default_rng(41)
    d = 5
    from dualkit.problems import random_spd
    f = Quadratic(random_spd(rng, d, 4.0), rng.standard_normal(d))
    terms = [(Quadratic(random_spd(rng, 3, 3.0)),
              linops.DenseOp(rng.standard_normal((3, d)))),
             (SquaredDistance(d, 1.0, rng.standard_normal(d)), None)]
    prob = SplitProblem(f, terms)

    def full(u):
        val = f(u)
        for g, b in prob.terms:
            val += g(b.apply(u))
        return val

    v0 = [rng.standard_normal(d) for _ in prob.terms]
    u0 = prob.f_conj.grad(sum(v0))
    for solver, cfg in [
            (sweep_splitting, SplitConfig(max_iters=200)),
            (relaxed_sweep_splitting, SplitConfig(tau=0.8, max_iters=300)),
    ]:
        tr = solver(prob, cfg, u0, v0)
        u = tr.last("u")
        base = full(u)
        for _ in range(200):
            assert full(u + rng.standard_normal(d) * 0.01) >= base - 1e-8
