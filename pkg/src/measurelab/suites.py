"""Seeded property batteries run by ``measurelab suite``.

Each battery returns rows ``(property, lhs, rhs, passed)``; with a fixed seed
the rows are reproducible bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import capacity as capm
from . import geom
from . import reduced as red
from . import semilinear as sem
from .core import (
    Atom,
    Check,
    DiscreteMeasure,
    Domain,
    GridFunction,
    arctan,
    dirichlet_energy,
    exponential,
    laplacian_apply,
    linear,
    polynomial,
    project_measure,
)
from .linear import check_interpolation, check_kato, check_weak_max, solve_linear


def _row(c: Check, name: str | None = None):
    return (name or c.name, float(c.lhs), float(c.rhs), bool(c.passed))


def random_measure(dom: Domain, rng: np.random.Generator, atoms: int = 2, signed: bool = True) -> DiscreteMeasure:
    """Random atoms on interior nodes plus a random density."""
    idx = rng.choice(dom.n_interior, size=atoms, replace=False)
    lo = -1.0 if signed else 0.0
    ws = rng.uniform(lo, 1.0, size=atoms)
    at = tuple(Atom(tuple(dom.coords[i]), float(w)) for i, w in zip(idx, ws))
    dens = GridFunction(dom, rng.uniform(lo, 1.0, size=dom.n_interior))
    return DiscreteMeasure(dom, at, dens)


def linear_suite(seed: int, inject_fault: bool = False):
    rng = np.random.default_rng(seed)
    rows = []
    dom = Domain.box(1, 0.25)
    rep = solve_linear(dom, DiscreteMeasure.dirac(dom, (0.5,)))
    err = float(np.abs(rep.u.values - [0.125, 0.25, 0.125]).max())
    rows.append(("hand_solution_1d", err, 1e-12, err <= 1e-12))
    for k in range(20):
        dom = Domain.box(2, 1 / 16)
        mu = random_measure(dom, rng)
        if inject_fault and k == 0:
            # negative control: solve with a mis-scaled right-hand side
            mu_bad = mu.scale(2.0)
            rep = solve_linear(dom, mu_bad)
            rep.residual_linf = float(np.abs(laplacian_apply(rep.u).values - project_measure(mu).values).max()
                                      / np.abs(project_measure(mu).values).max())
        else:
            rep = solve_linear(dom, mu)
        rows.append((f"residual_{k}", rep.residual_linf, 1e-8, rep.residual_linf <= 1e-8))
        kappa = float(rng.uniform(0.05, 1.5)) * float(np.abs(rep.u.values).max())
        rows.append(_row(check_interpolation(rep, mu, kappa), f"interpolation_{k}"))
        green = float(dom.cell_volume * rep.u.values @ (dom.stiffness @ rep.u.values))
        de = dirichlet_energy(rep.u)
        rows.append((f"green_identity_{k}", green, de, abs(green - de) <= 1e-10 * max(1.0, de)))
    for sign in (1.0, -1.0):
        dom = Domain.ball(2, 1 / 16)
        mu = random_measure(dom, rng, signed=False).scale(sign)
        rows.append(_row(check_weak_max(solve_linear(dom, mu), mu), f"weak_max_{int(sign)}"))
    for k in range(50):
        dom = Domain.box(2, 1 / 8)
        u1 = GridFunction(dom, rng.standard_normal(dom.n_interior))
        u2 = GridFunction(dom, rng.standard_normal(dom.n_interior))
        f1 = GridFunction(dom, -laplacian_apply(u1).values)
        f2 = GridFunction(dom, -laplacian_apply(u2).values)
        rows.append(_row(check_kato(u1, f1), f"kato_{k}"))
        rows.append(_row(check_kato(u1, f1, u2, f2), f"kato_max_{k}"))
    return rows


def semilinear_suite(seed: int, inject_fault: bool = False):
    rng = np.random.default_rng(seed)
    rows = []
    dom = Domain.box(2, 1 / 16)
    for k, g in enumerate((polynomial(3), exponential(), linear(2.0))):
        mu = random_measure(dom, rng).scale(5.0)
        traces = {r: sem.solve(sem.SemilinearProblem(dom, g, mu), r) for r in sem.ROUTES}
        tol = sem.SemilinearProblem(dom, g, mu).tol
        for r, t in traces.items():
            rows.append((f"converged_{k}_{r}", t.residual, tol, t.converged))
            rows.append(_row(sem.check_absorption(t, mu), f"absorption_{k}_{r}"))
        ref = traces["bracket"].u.values
        for r in ("energy", "contraction"):
            gap = float(dom.cell_volume * np.abs(traces[r].u.values - ref).sum())
            rows.append((f"route_agreement_{k}_{r}", gap, 10 * tol, gap <= 10 * tol))
    for k in range(10):
        g = polynomial(float(rng.uniform(1.5, 4.0)))
        mm, mn = random_measure(dom, rng), random_measure(dom, rng)
        pm, pn = sem.SemilinearProblem(dom, g, mm), sem.SemilinearProblem(dom, g, mn)
        tm, tn = sem.contraction_solve(pm), sem.contraction_solve(pn)
        rows.append(_row(sem.check_contraction(tm, tn, mm, mn, max(pm.tol, pn.tol)), f"contraction_{k}"))
    mu = random_measure(dom, rng, signed=False)
    t = sem.solve(sem.SemilinearProblem(dom, exponential(), mu), "bracket")
    lo = float(t.u.values.min())
    rows.append(("comparison_nonneg", -lo, 1e-8, lo >= -1e-8))
    return rows


def reduced_suite(seed: int, inject_fault: bool = False):
    rows = []
    hs = [1 / 8, 1 / 16]
    slopes = {}
    for p in (2.0, 3.0):
        defects = []
        for h in hs:
            dom = Domain.ball(3, h)
            mu = DiscreteMeasure.dirac(dom, (0.0, 0.0, 0.0), 1.0, singular=True)
            r = red.reduced_measure(dom, polynomial(p), mu)
            defects.append(r.gamma.tv_norm())
            mono = max((float(np.max(b[1].values - a[1].values)) for a, b in zip(r.levels, r.levels[1:])),
                       default=0.0)
            rows.append((f"ladder_monotone_p{p:g}_h{h:g}", mono, 1e-7, mono <= 1e-7))
            rows.append((f"mu_star_below_mu_p{p:g}_h{h:g}", float(r.mu_star.le(mu)), 1.0, r.mu_star.le(mu)))
        slopes[p] = red.defect_slope(hs, defects)
    rows.append(("defect_slope_p2", slopes[2.0], 0.5, slopes[2.0] >= 0.5))
    rows.append(("defect_slope_p3", slopes[3.0], 0.5, slopes[3.0] < 0.5))
    dom = Domain.ball(3, 1 / 8)
    mu = DiscreteMeasure.dirac(dom, (0.0, 0.0, 0.0), 1.0, singular=True)
    r = red.reduced_measure(dom, arctan(), mu)
    bound = dom.cell_volume * math.pi / 2
    rows.append(("bounded_g_defect", r.gamma.tv_norm(), bound, r.gamma.tv_norm() <= bound))
    s = red.threshold_scan("exp", [3 * math.pi, 5 * math.pi], [1 / 16, 1 / 32, 1 / 64])
    rows.append(("exp_boundary", s.critical / math.pi, 4.0, 3.4 <= s.critical / math.pi <= 4.6))
    return rows


def geom_suite(seed: int, inject_fault: bool = False):
    rng = np.random.default_rng(seed)
    rows = []
    for s, ref in ((0, 1.0), (1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)):
        rows.append((f"omega_{s}", geom.omega(s), ref, abs(geom.omega(s) - ref) <= 1e-14 * ref))
    three = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    v = geom.hausdorff_outer(three, 0, 0.4)
    rows.append(("counting_three", v, 3.0, v == 3.0))
    seg = np.c_[np.linspace(0, 1, 33), np.zeros(33)]
    v = geom.hausdorff_outer(seg, 1, math.inf, "greedy", rho=1 / 64)
    rows.append(("segment_33", v, 1.0, abs(v - 1) <= 0.05))
    for k in range(20):
        m = int(rng.integers(1, 9))
        nu = geom.PointMeasure(rng.random((m, 2)), rng.uniform(0, 0.6, m))
        a, dl = float(rng.uniform(0.5, 3)), float(rng.uniform(0.05, 1))
        fc, so = geom.frostman_check(nu, a, 0, dl), geom.frostman_subset_oracle(nu, a, 0, dl)
        rows.append((f"frostman_equivalence_{k}", float(fc), float(so), fc == so))
    for k in range(20):
        m = int(rng.integers(1, 11))
        mu = geom.PointMeasure(rng.random((m, 2)), rng.random(m))
        T = geom.content_oracle(mu.points, 0, float(rng.uniform(0.05, 1)))
        rows.append(_row(geom.verify_decomposition(mu, T, geom.greedy_decompose(mu, T)), f"decomposition_{k}"))
    for eps in (1e-1, 1e-3, 1e-6):
        c = geom.blop_1d_check(geom.f_eps(0.7, 1.3, eps, 2.0), 0.7, 1.3)
        exact = 0.7 * math.log(2.0 / eps)
        rows.append((f"blop_lhs_{eps:g}", c.lhs, exact, abs(c.lhs - exact) <= 1e-12 * exact))
        rows.append((f"blop_gap_{eps:g}", c.rhs - c.lhs, math.log(1.3 / 0.7 + 1),
                     0 <= c.rhs - c.lhs <= math.log(1.3 / 0.7 + 1) + 1e-12))
    mu = geom.PointMeasure(rng.uniform(-0.3, 0.3, (3, 3)), rng.random(3))
    x = np.array([0.5, 0.1, -0.2])
    a, b = geom.radial_potential(mu, x, 2.0), geom.kernel_potential(mu, x, 2.0)
    rows.append(("potential_agreement", a, b, abs(a - b) <= 1e-10 * max(1.0, abs(b))))
    return rows


def capacity_suite(seed: int, inject_fault: bool = False):
    rng = np.random.default_rng(seed)
    rows = []
    dom = Domain.box(2, 0.5, 0.0, 2.0)
    res = capm.capacitary_potential(dom, range(dom.n_interior))
    rows.append(("all_interior_cap", res.cap, 12.0, abs(res.cap - 12.0) <= 1e-12))
    dom = Domain.box(2, 1 / 32, -1.0, 1.0)
    c = dom.nearest_interior((0.0, 0.0))
    block = np.flatnonzero(np.abs(dom.multi_index - dom.multi_index[c]).max(axis=1) <= 1)
    for name, K in (("center", [c]), ("block", block)):
        r = capm.capacitary_potential(dom, K)
        rows.append(_row(capm.cap_equivalence_check(r, 0.5), f"cap_equivalence_{name}"))
        rows.append((f"gauss_identity_{name}", capm.nu_mass(r), r.cap,
                     abs(capm.nu_mass(r) - r.cap) <= 1e-8 * r.cap))
    mu = DiscreteMeasure.dirac(dom, (0.0, 0.0))
    rep = solve_linear(dom, mu)
    lv = capm.capacitary_level_estimate(rep.u, mu, [0.05, 0.1, 0.2, 0.4])
    rows.append(_row(capm.check_level_estimate(lv)))
    small = Domain.box(2, 1 / 8)
    for k in range(10):
        K1 = rng.choice(small.n_interior, size=int(rng.integers(1, 6)), replace=False)
        K2 = rng.choice(small.n_interior, size=int(rng.integers(1, 6)), replace=False)
        c1 = capm.capacitary_potential(small, K1).cap
        c2 = capm.capacitary_potential(small, K2).cap
        cu = capm.capacitary_potential(small, np.union1d(K1, K2)).cap
        rows.append((f"subadditive_{k}", cu, c1 + c2, cu <= (c1 + c2) * (1 + 1e-10)))
        rows.append((f"monotone_{k}", c1, cu, c1 <= cu * (1 + 1e-10)))
    return rows


SUITES = {
    "linear": linear_suite,
    "semilinear": semilinear_suite,
    "reduced": reduced_suite,
    "geom": geom_suite,
    "capacity": capacity_suite,
}


def _run_one(args):
    name, seed, inject = args
    return [(name, *r) for r in SUITES[name](seed, inject)]


def run_suites(names, seed: int, jobs: int = 1, inject_fault: bool = False):
    work = [(n, seed, inject_fault) for n in names]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_run_one, work))
    else:
        parts = [_run_one(w) for w in work]
    return [r for part in parts for r in part]
