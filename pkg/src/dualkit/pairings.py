"""Registry of paired primal/dual runs and their linking relations.

Each entry builds a seeded random instance, runs one algorithm and its dual
counterpart for the same number of outer iterations from matched starting
configurations, and returns the verification report for the iterate-linking
identities.  Instances stay small (dimensions up to 20, at most 5 blocks)
so every pairing can be swept over many seeds quickly.
"""

from dataclasses import dataclass

import numpy as np

from . import admm as admm_mod
from . import correction, projsplit
from .admm import AdmmConfig, SharingProblem
from .convex import (AffineSubspace, Box, Halfspace, Indicator, L1Norm,
                     Quadratic, SquaredDistance, Support,
                     fenchel_young_residual)
from .correction import BlockEnergy, Decomposition, SolverConfig
from .duality import RelationSpec, verify_dualization
from .linops import DenseOp, Identity
from .problems import random_spd
from .projsplit import (CoupledLinearProblem, ProjectionProblem, SplitConfig,
                        SplitProblem)


@dataclass
class Pairing:
    pair_id: str
    description: str
    run: object  # callable(seed, iters) -> (primal_trace, dual_trace, RelationSpec)


def _norm(x):
    return float(np.linalg.norm(x))


def _sumnorm(xs, ys):
    return float(sum(np.linalg.norm(a - b) for a, b in zip(xs, ys)))


# ---------------------------------------------------------------------------
# projection pairings


def _affine_instance(seed):
    rng = np.random.default_rng(seed)
    d = 4 + seed % 5
    j_count = 2 + seed % 3
    anchor = rng.standard_normal(d)
    f = rng.standard_normal(d)
    sets, comp = [], []
    for _ in range(j_count):
        m = 1 + rng.integers(0, d - 1)
        basis = rng.standard_normal((d, m))
        sub = AffineSubspace(d, basis, anchor)
        sets.append(sub)
        comp.append(DenseOp(sub.complement_basis()))
    return f, anchor, sets, comp


def _run_affine(seed, iters, tau=None):
    f, anchor, sets, comp = _affine_instance(seed)
    fbar = f - anchor
    energy = SquaredDistance(len(f), 1.0, fbar)
    decomp = Decomposition(comp)
    cfg = SolverConfig(max_iters=iters, tol=0.0, record_fractional=False)
    pcfg = SplitConfig(max_iters=iters, tol=0.0, record_fractional=False)
    problem = ProjectionProblem(f, sets)
    if tau is None:
        primal = projsplit.cyclic_projection(problem, pcfg)
        dual = correction.ssc(energy, decomp, np.zeros(len(f)), cfg)
    else:
        pcfg.tau = tau
        cfg.tau = tau
        primal = projsplit.parallel_projection(problem, pcfg)
        dual = correction.psc(energy, decomp, np.zeros(len(f)), cfg)
    link = lambda pr, dr: _norm(pr["u"] - (f - dr["u"]))
    rel = RelationSpec(
        theorem_id="cyclic-projection-equals-dual-sweep" if tau is None
        else "parallel-projection-equals-dual-parallel",
        checks=[("u-vs-f-minus-p", link)], init_check=link)
    return primal, dual, rel


def run_neumann_ssc(seed, iters):
    return _run_affine(seed, iters, tau=None)


def run_parallel_neumann_psc(seed, iters):
    f, anchor, sets, comp = _affine_instance(seed)
    return _run_affine(seed, iters, tau=0.8 / len(sets))


def _convex_sets_instance(seed):
    rng = np.random.default_rng(seed)
    d = 3 + seed % 4
    j_count = 2 + seed % 3
    center = rng.standard_normal(d) * 0.3
    f = rng.standard_normal(d) * 2.0
    sets = []
    for i in range(j_count):
        if (i + seed) % 2 == 0:
            w = 0.5 + rng.random(d)
            sets.append(Box(center - w, center + w))
        else:
            a = rng.standard_normal(d)
            sets.append(Halfspace(a, float(a @ center) + 0.5 + rng.random()))
    return f, sets


def _pocs_block_energy(f, sets):
    d = len(f)
    return BlockEnergy(np.eye(d), f, [Identity(d) for _ in sets],
                       [Support(k) for k in sets],
                       const=0.5 * float(f @ f))


def run_dykstra_ssc(seed, iters):
    f, sets = _convex_sets_instance(seed)
    pcfg = SplitConfig(max_iters=iters, record_fractional=False)
    primal = projsplit.cyclic_projection_corrected(
        ProjectionProblem(f, sets), pcfg)
    be = _pocs_block_energy(f, sets)
    dual = correction.block_gauss_seidel(
        be, [np.zeros(len(f)) for _ in sets],
        SolverConfig(max_iters=iters, record_fractional=False))
    rel = RelationSpec(
        theorem_id="corrected-cyclic-projection-equals-dual-sweep",
        checks=[
            ("u-vs-f-minus-sum-p",
             lambda pr, dr: _norm(pr["u"] - (f - sum(dr["blocks"])))),
            ("q-vs-p", lambda pr, dr: _sumnorm(pr["q"], dr["blocks"])),
        ],
        init_check=lambda pr, dr: _norm(pr["u"] - (f - sum(dr["blocks"]))))
    return primal, dual, rel


def run_parallel_dykstra_psc(seed, iters):
    f, sets = _convex_sets_instance(seed)
    tau = 0.8 / len(sets)
    pcfg = SplitConfig(tau=tau, max_iters=iters, record_fractional=False)
    primal = projsplit.parallel_projection_corrected(
        ProjectionProblem(f, sets), pcfg)
    be = _pocs_block_energy(f, sets)
    dual = correction.block_jacobi(
        be, [np.zeros(len(f)) for _ in sets],
        SolverConfig(tau=tau, max_iters=iters, record_fractional=False))
    rel = RelationSpec(
        theorem_id="parallel-corrected-projection-equals-dual-parallel",
        checks=[
            ("u-vs-f-minus-sum-p",
             lambda pr, dr: _norm(pr["u"] - (f - sum(dr["blocks"])))),
            ("q-vs-p", lambda pr, dr: _sumnorm(pr["q"], dr["blocks"])),
        ],
        init_check=lambda pr, dr: _norm(pr["u"] - (f - sum(dr["blocks"]))))
    return primal, dual, rel


# ---------------------------------------------------------------------------
# coupled linear systems


def run_prlinear_gs(seed, iters):
    rng = np.random.default_rng(seed)
    d = 3 + seed % 4
    j_count = 2 + seed % 3
    mats = [random_spd(rng, d, cond=5.0) for _ in range(j_count)]
    alpha = 0.5 + rng.random()
    f = rng.standard_normal(d)
    problem = CoupledLinearProblem(mats, alpha, f)
    p0 = [rng.standard_normal(d) for _ in range(j_count)]
    primal = projsplit.sequential_resolvent(
        problem, SplitConfig(max_iters=iters, record_fractional=False), warm=p0)
    be = BlockEnergy(np.eye(d) / alpha, f / alpha,
                     [Identity(d) for _ in mats],
                     [Quadratic(np.linalg.inv(m)) for m in mats],
                     const=0.5 * float(f @ f) / alpha)
    dual = correction.block_gauss_seidel(
        be, p0, SolverConfig(max_iters=iters, record_fractional=False))
    rel = RelationSpec(
        theorem_id="sequential-resolvent-equals-dual-sweep",
        checks=[("u-vs-scaled-residual",
                 lambda pr, dr: _norm(pr["u"] - (f - sum(dr["blocks"])) / alpha))],
        init_check=lambda pr, dr: _sumnorm(pr["images"], dr["blocks"]))
    return primal, dual, rel


# ---------------------------------------------------------------------------
# composite splitting


def _split_instance(seed):
    rng = np.random.default_rng(seed)
    d = 3 + seed % 4
    j_count = 2 + seed % 3
    a0 = 1.0 + rng.random()
    f = rng.standard_normal(d)
    smooth = Quadratic(a0 * np.eye(d), f)
    terms = []
    for i in range(j_count):
        kind = (i + seed) % 3
        if kind == 0:
            terms.append((L1Norm(d, 0.5 + rng.random()), Identity(d)))
        elif kind == 1:
            c = rng.standard_normal(d) * 0.5
            w = 0.5 + rng.random(d)
            terms.append((Indicator(Box(c - w, c + w)), Identity(d)))
        else:
            m = 2 + int(rng.integers(0, 3))
            terms.append((Quadratic(random_spd(rng, m, 4.0),
                                    rng.standard_normal(m)),
                          DenseOp(rng.standard_normal((m, d)))))
    problem = SplitProblem(smooth, terms)
    p0 = [rng.standard_normal(g.dim) * 0.5 for g, b in problem.terms]
    return problem, p0


def _split_dual_energy(problem):
    fq = problem.f  # quadratic with matrix a0 I and vector f
    a_inv = np.linalg.inv(fq.a)
    ops = [DenseOp(-b.to_dense().T) for g, b in problem.terms]
    terms = [g.conjugate() for g, b in problem.terms]
    return BlockEnergy(a_inv, -a_inv @ fq.b, ops, terms,
                       const=0.5 * float(fq.b @ (a_inv @ fq.b)))


def _split_relation(problem, theorem_id):
    def u_link(pr, dr):
        return _norm(pr["u"] - problem.recover_primal(dr["blocks"]))

    def v_link(pr, dr):
        return float(sum(
            np.linalg.norm(vj + b.apply_adjoint(pj))
            for vj, pj, (g, b) in zip(pr["v"], dr["blocks"], problem.terms)))

    return RelationSpec(theorem_id,
                        checks=[("u-vs-grad-conj", u_link), ("v-vs-minus-btp", v_link)],
                        init_check=u_link)


def _matched_split_start(problem, p0):
    v0 = [-b.apply_adjoint(pj) for (g, b), pj in zip(problem.terms, p0)]
    u0 = problem.f_conj.grad(sum(v0))
    return u0, v0


def run_genpr_ssc(seed, iters):
    problem, p0 = _split_instance(seed)
    u0, v0 = _matched_split_start(problem, p0)
    primal = projsplit.sweep_splitting(
        problem, SplitConfig(max_iters=iters, record_fractional=False), u0, v0)
    dual = correction.block_gauss_seidel(
        _split_dual_energy(problem), p0,
        SolverConfig(max_iters=iters, record_fractional=False))
    return primal, dual, _split_relation(problem, "sweep-splitting-equals-dual-sweep")


def run_gendr_rssc(seed, iters):
    problem, p0 = _split_instance(seed)
    u0, v0 = _matched_split_start(problem, p0)
    tau = 0.6
    primal = projsplit.relaxed_sweep_splitting(
        problem, SplitConfig(tau=tau, max_iters=iters, record_fractional=False),
        u0, v0)
    dual = correction.block_gauss_seidel(
        _split_dual_energy(problem), p0,
        SolverConfig(max_iters=iters, record_fractional=False), tau=tau)
    return primal, dual, _split_relation(
        problem, "relaxed-sweep-splitting-equals-relaxed-dual-sweep")


def run_pardr_psc(seed, iters):
    problem, p0 = _split_instance(seed)
    u0, v0 = _matched_split_start(problem, p0)
    tau = 0.8 / problem.count
    primal = projsplit.parallel_splitting(
        problem, SplitConfig(tau=tau, max_iters=iters, record_fractional=False),
        u0, v0)
    dual = correction.block_jacobi(
        _split_dual_energy(problem), p0,
        SolverConfig(tau=tau, max_iters=iters, record_fractional=False))
    return primal, dual, _split_relation(
        problem, "parallel-splitting-equals-dual-parallel")


# ---------------------------------------------------------------------------
# multiplier pairings


def run_admm2_dr(seed, iters):
    rng = np.random.default_rng(seed)
    d1 = 3 + seed % 4
    m = 2 + seed % 3
    f1 = Quadratic(random_spd(rng, d1, 5.0), rng.standard_normal(d1))
    b1 = rng.standard_normal((m, d1))
    f2 = Quadratic(random_spd(rng, m, 5.0), rng.standard_normal(m))
    g = rng.standard_normal(m)
    beta = 0.5 + rng.random()
    q0 = rng.standard_normal(m)
    r0 = rng.standard_normal(m)
    cfg = AdmmConfig(max_iters=iters, record_fractional=False)
    primal = admm_mod.admm_two_block(
        f1, b1, f2, g, beta, cfg,
        np.zeros(d1), (q0 - r0) / beta, r0)
    dual = admm_mod.dr_dual_two_block(f1, b1, f2, g, beta, cfg, q0, r0)
    b1d = np.asarray(b1)

    def fy(pr, dr):
        return abs(fenchel_young_residual(f1, pr["u"][0], -b1d.T @ dr["p"]))

    rel = RelationSpec(
        theorem_id="two-block-multiplier-equals-dual-reflection",
        checks=[
            ("u2-vs-(q-r)/beta",
             lambda pr, dr: _norm(pr["u"][1] - (dr["q"] - dr["r"]) / beta)),
            ("lam-vs-r", lambda pr, dr: _norm(pr["lam"] - dr["r"])),
            ("first-block-optimality", fy),
        ],
        init_check=lambda pr, dr: (_norm(pr["u"][1] - (dr["q"] - dr["r"]) / beta)
                                   + _norm(pr["lam"] - dr["r"])))
    return primal, dual, rel


def run_alm_ppa(seed, iters):
    rng = np.random.default_rng(seed)
    d1 = 3 + seed % 4
    m = 2 + seed % 3
    f1 = Quadratic(random_spd(rng, d1, 5.0), rng.standard_normal(d1))
    b1 = rng.standard_normal((m, d1))
    g = b1 @ rng.standard_normal(d1)  # keep the constraint consistent
    beta = 0.5 + rng.random()
    p0 = rng.standard_normal(m)
    cfg = AdmmConfig(max_iters=iters, record_fractional=False)
    primal = admm_mod.alm(f1, b1, g, beta, cfg, np.zeros(d1), p0)
    dual = admm_mod.proximal_point_dual(f1, b1, g, beta, cfg, p0)
    link = lambda pr, dr: _norm(pr["lam"] - dr["p"])
    rel = RelationSpec(
        theorem_id="augmented-lagrangian-equals-dual-proximal-point",
        checks=[("lam-vs-p", link)], init_check=link)
    return primal, dual, rel


def _sharing_instance(seed):
    rng = np.random.default_rng(seed)
    m = 2 + seed % 3  # term count
    w = 2 + seed % 4  # shared-space dimension
    terms = []
    for _ in range(m):
        dj = 2 + int(rng.integers(0, 3))
        terms.append((Quadratic(random_spd(rng, dj, 5.0),
                                rng.standard_normal(dj)),
                      rng.standard_normal((w, dj))))
    g = rng.standard_normal(w)
    beta = 0.5 + rng.random()
    return SharingProblem(terms, g, beta), rng


def run_admmj_gendr(seed, iters):
    sp, rng = _sharing_instance(seed)
    tau = 0.5
    p0 = rng.standard_normal(sp.wdim)
    q0 = [rng.standard_normal(sp.wdim) for _ in range(sp.count)]
    cfg = AdmmConfig(tau=tau, max_iters=iters, record_fractional=False)
    primal = admm_mod.admm_with_memory(sp, cfg, [x.copy() for x in q0], p0.copy())
    dual = admm_mod.dual_sweep_reflection(sp, cfg, p0.copy(),
                                          [x.copy() for x in q0])
    rel = RelationSpec(
        theorem_id="memory-multiplier-equals-dual-sweep-reflection",
        checks=[
            ("lam-vs-p", lambda pr, dr: _norm(pr["lam"] - dr["p"])),
            ("v-vs-q", lambda pr, dr: _sumnorm(pr["v"], dr["q"])),
        ],
        init_check=lambda pr, dr: (_norm(pr["lam"] - dr["p"])
                                   + _sumnorm(pr["v"], dr["q"])))
    return primal, dual, rel


def run_paradmm_pardr(seed, iters):
    sp, rng = _sharing_instance(seed)
    tau = 0.8 / sp.count
    p0 = rng.standard_normal(sp.wdim)
    q0 = [rng.standard_normal(sp.wdim) for _ in range(sp.count)]
    cfg = AdmmConfig(tau=tau, max_iters=iters, record_fractional=False)
    primal = admm_mod.admm_parallel(sp, cfg, [x.copy() for x in q0], p0.copy())
    dual = admm_mod.dual_parallel_reflection(sp, cfg, p0.copy(),
                                             [x.copy() for x in q0])
    rel = RelationSpec(
        theorem_id="parallel-multiplier-equals-dual-parallel-reflection",
        checks=[
            ("lam-vs-p", lambda pr, dr: _norm(pr["lam"] - dr["p"])),
            ("v-vs-q", lambda pr, dr: _sumnorm(pr["v"], dr["q"])),
        ],
        init_check=lambda pr, dr: (_norm(pr["lam"] - dr["p"])
                                   + _sumnorm(pr["v"], dr["q"])))
    return primal, dual, rel


def _sharing_energy_relation(sp, theorem_id):
    def lam_link(pr, dr):
        return _norm(pr["lam"] - sp.beta * (dr["coupled"] - sp.g))

    def v_link(pr, dr):
        return float(sum(
            np.linalg.norm(vj - b.apply(wj))
            for vj, wj, (f, b) in zip(pr["v"], dr["blocks"], sp.terms)))

    return RelationSpec(theorem_id, checks=[("lam-link", lam_link),
                                            ("v-link", v_link)],
                        init_check=lam_link)


def run_admmj_rssc(seed, iters):
    sp, rng = _sharing_instance(seed)
    tau = 0.5
    w0 = [rng.standard_normal(b.domain_dim) for f, b in sp.terms]
    v0 = [b.apply(wj) for (f, b), wj in zip(sp.terms, w0)]
    lam0 = sp.beta * (sum(v0) - sp.g)
    cfg = AdmmConfig(tau=tau, max_iters=iters, record_fractional=False)
    primal = admm_mod.admm_with_memory(sp, cfg, v0, lam0)
    dual = correction.block_gauss_seidel(
        sp.block_energy(), w0,
        SolverConfig(max_iters=iters, record_fractional=False), tau=tau)
    return primal, dual, _sharing_energy_relation(
        sp, "memory-multiplier-equals-relaxed-sweep-on-sharing-energy")


def run_paradmm_psc(seed, iters):
    sp, rng = _sharing_instance(seed)
    tau = 0.8 / sp.count
    w0 = [rng.standard_normal(b.domain_dim) for f, b in sp.terms]
    v0 = [b.apply(wj) for (f, b), wj in zip(sp.terms, w0)]
    lam0 = sp.beta * (sum(v0) - sp.g)
    cfg = AdmmConfig(tau=tau, max_iters=iters, record_fractional=False)
    primal = admm_mod.admm_parallel(sp, cfg, v0, lam0)
    dual = correction.block_jacobi(
        sp.block_energy(), w0,
        SolverConfig(tau=tau, max_iters=iters, record_fractional=False))
    return primal, dual, _sharing_energy_relation(
        sp, "parallel-multiplier-equals-parallel-correction-on-sharing-energy")


# ---------------------------------------------------------------------------
# registry


PAIRINGS = {
    "neumann-ssc": Pairing(
        "neumann-ssc",
        "cyclic projection onto affine sets vs a dual subspace sweep",
        run_neumann_ssc),
    "dykstra-ssc": Pairing(
        "dykstra-ssc",
        "corrected cyclic projection vs a blockwise dual sweep",
        run_dykstra_ssc),
    "parallel-neumann-psc": Pairing(
        "parallel-neumann-psc",
        "parallel projection onto affine sets vs damped dual corrections",
        run_parallel_neumann_psc),
    "parallel-dykstra-psc": Pairing(
        "parallel-dykstra-psc",
        "parallel corrected projection vs a relaxed blockwise dual step",
        run_parallel_dykstra_psc),
    "prlinear-gs": Pairing(
        "prlinear-gs",
        "sequential resolvent sweeps vs a dual block sweep",
        run_prlinear_gs),
    "genpr-ssc": Pairing(
        "genpr-ssc",
        "sweep splitting with memory vs a dual block sweep",
        run_genpr_ssc),
    "gendr-rssc": Pairing(
        "gendr-rssc",
        "relaxed sweep splitting vs a relaxed dual block sweep",
        run_gendr_rssc),
    "pardr-psc": Pairing(
        "pardr-psc",
        "parallel splitting vs damped parallel dual corrections",
        run_pardr_psc),
    "admm2-dr": Pairing(
        "admm2-dr",
        "two-block multiplier method vs a dual reflection recursion",
        run_admm2_dr),
    "admmJ-gendr": Pairing(
        "admmJ-gendr",
        "memory multiplier method vs a sweeping dual reflection",
        run_admmj_gendr),
    "admmJ-rssc": Pairing(
        "admmJ-rssc",
        "memory multiplier method vs a relaxed sweep on the sharing energy",
        run_admmj_rssc),
    "paradmm-pardr": Pairing(
        "paradmm-pardr",
        "parallel multiplier method vs a parallel dual reflection",
        run_paradmm_pardr),
    "paradmm-psc": Pairing(
        "paradmm-psc",
        "parallel multiplier method vs parallel correction on the sharing energy",
        run_paradmm_psc),
    "alm-ppa": Pairing(
        "alm-ppa",
        "augmented Lagrangian method vs the dual proximal point recursion",
        run_alm_ppa),
}


def run_pairing(pair_id, seed, iters, tol=1e-8):
    """Build the seeded instance, run both sides, and verify the relations."""
    if pair_id not in PAIRINGS:
        raise KeyError(f"unknown pairing {pair_id!r}")
    if iters < 1:
        raise ValueError("need at least one iteration")
    primal, dual, rel = PAIRINGS[pair_id].run(seed, iters)
    return verify_dualization(primal, dual, rel, tol=tol)
