import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import fsolve

from conftest import dense_laplacian
from measurelab.core import Atom, DiscreteMeasure, Domain, GridFunction, Nonlinearity, arctan, exponential, linear, polynomial
from measurelab.semilinear import (
    ROUTES,
    SemilinearProblem,
    check_absorption,
    check_contraction,
    check_positive_absorption,
    coordinate_energy_gaps,
    default_brackets,
    energy,
    residual_l1,
    solve,
    sub_super_solve,
)

NONLINEARITIES = {"p2": polynomial(2), "p3": polynomial(3), "exp": exponential(), "arctan": arctan()}


def random_measure(dom, rng, scale=1.0):
    atoms = tuple(Atom(tuple(rng.uniform(0.15, 0.85, dom.dim)), float(scale * rng.normal()))
                  for _ in range(rng.integers(0, 3)))
    return DiscreteMeasure(dom, atoms, GridFunction(dom, scale * rng.normal(size=dom.n_interior)))


def dense_oracle(dom, g, mu):
    A = dense_laplacian(dom)
    b = np.zeros(dom.n_interior)
    for a in mu.atoms:
        b[dom.nearest_interior(a.point)] += a.weight / dom.cell_volume
    b += mu.density_values
    u0 = np.linalg.solve(A, b)
    return fsolve(lambda u: A @ u + g(u) - b, u0, fprime=lambda u: A + np.diag(g.derivative(u)), xtol=1e-13)


@pytest.mark.parametrize("route", sorted(ROUTES))
@pytest.mark.parametrize("gname", sorted(NONLINEARITIES))
def test_routes_match_dense_root_finder(route, gname, rng):
    dom = Domain.box(2, 1 / 8)
    g = NONLINEARITIES[gname]
    mu = random_measure(dom, rng, scale=3.0)
    tr = solve(SemilinearProblem(dom, g, mu), route)
    assert tr.converged
    ref = dense_oracle(dom, g, mu)
    assert np.allclose(tr.u.values, ref, atol=1e-7 * (1 + np.abs(ref).max()))


def test_linear_nonlinearity_is_a_shifted_solve():
    dom = Domain.box(1, 1 / 16)
    mu = DiscreteMeasure.from_density(GridFunction(dom, np.ones(dom.n_interior)))
    ref = np.linalg.solve(dense_laplacian(dom) + 3.0 * np.eye(dom.n_interior), np.ones(dom.n_interior))
    for route in ROUTES:
        u = solve(SemilinearProblem(dom, linear(3.0), mu), route).u.values
        assert np.allclose(u, ref, rtol=1e-8)


def test_energy_route_handles_large_data():
    # exponential with a heavy atom needs the truncation ladder to climb
    dom = Domain.box(2, 1 / 16)
    mu = DiscreteMeasure.dirac(dom, (0.5, 0.5), 30.0)
    prob = SemilinearProblem(dom, exponential(), mu)
    tr = solve(prob, "energy")
    assert tr.converged and residual_l1(tr.u.values, prob) <= prob.tol


@given(seed=st.integers(0, 2**32 - 1), gname=st.sampled_from(sorted(NONLINEARITIES)))
def test_energy_minimiser_beats_coordinate_moves(seed, gname):
    rng = np.random.default_rng(seed)
    dom = Domain.box(2, 1 / 8)
    prob = SemilinearProblem(dom, NONLINEARITIES[gname], random_measure(dom, rng))
    tr = solve(prob, "energy")
    gaps = coordinate_energy_gaps(tr.u, prob, 1e-3)
    assert gaps.min() >= -1e-9
    # and the energy is below that of the zero function
    assert energy(tr.u, prob) <= energy(np.zeros(dom.n_interior), prob) + 1e-12


@given(seed=st.integers(0, 2**32 - 1), gname=st.sampled_from(sorted(NONLINEARITIES)),
       dim=st.sampled_from([1, 2, 3]))
def test_absorption_bounds(seed, gname, dim):
    rng = np.random.default_rng(seed)
    dom = Domain.box(dim, 1 / 8 if dim < 3 else 1 / 4)
    mu = random_measure(dom, rng, scale=2.0)
    prob = SemilinearProblem(dom, NONLINEARITIES[gname], mu)
    tr = solve(prob, "bracket")
    assert check_absorption(tr, mu, tol=10 * prob.tol).passed
    assert check_positive_absorption(tr, mu, tol=10 * prob.tol).passed


@given(seed=st.integers(0, 2**32 - 1), gname=st.sampled_from(sorted(NONLINEARITIES)))
def test_l1_contraction(seed, gname):
    rng = np.random.default_rng(seed)
    dom = Domain.box(2, 1 / 8)
    m1, m2 = random_measure(dom, rng, 2.0), random_measure(dom, rng, 2.0)
    p1 = SemilinearProblem(dom, NONLINEARITIES[gname], m1)
    p2 = SemilinearProblem(dom, NONLINEARITIES[gname], m2)
    t1, t2 = solve(p1, "contraction"), solve(p2, "contraction")
    assert check_contraction(t1, t2, m1, m2, max(p1.tol, p2.tol)).passed


@given(seed=st.integers(0, 2**32 - 1))
def test_comparison_principle(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.box(2, 1 / 8)
    m1 = random_measure(dom, rng)
    extra = DiscreteMeasure.from_density(GridFunction(dom, rng.uniform(0, 2, dom.n_interior)))
    m2 = m1 + extra
    u1 = solve(SemilinearProblem(dom, polynomial(3), m1)).u.values
    u2 = solve(SemilinearProblem(dom, polynomial(3), m2)).u.values
    assert np.all(u1 <= u2 + 1e-9)


def test_sub_super_solution_stays_in_bracket(rng):
    dom = Domain.box(2, 1 / 8)
    mu = DiscreteMeasure.from_density(GridFunction(dom, rng.uniform(0, 5, dom.n_interior)))
    prob = SemilinearProblem(dom, polynomial(2), mu)
    lo, hi = default_brackets(prob)
    tr = sub_super_solve(prob, GridFunction.zeros(dom), hi)
    assert np.all(tr.u.values >= 0) and np.all(tr.u.values <= hi.values)
    with pytest.raises(ValueError):
        sub_super_solve(prob, hi, GridFunction.zeros(dom))
    with pytest.raises(ValueError):
        sub_super_solve(prob, GridFunction(dom, hi.values + 1.0), GridFunction(dom, hi.values + 2.0))


def test_route_preconditions():
    dom = Domain.box(1, 0.25)
    mu = DiscreteMeasure.dirac(dom, (0.5,))
    wiggle = Nonlinearity(g=lambda t: t + 0.9 * np.sin(2 * t), G=lambda t: t**2 / 2 + 0.45 * (1 - np.cos(2 * t)),
                          nondecreasing=False)
    with pytest.raises(ValueError):
        solve(SemilinearProblem(dom, wiggle, mu), "contraction")
    with pytest.raises(ValueError):
        solve(SemilinearProblem(dom, polynomial(2), mu), "newton")
    with pytest.raises(ValueError):
        SemilinearProblem(dom, polynomial(2), mu, theta=1.5)
    # the energy route still handles a non-monotone g with the sign condition
    tr = solve(SemilinearProblem(dom, wiggle, mu), "energy")
    assert tr.converged


def test_trace_csv_header():
    dom = Domain.box(1, 0.25)
    tr = solve(SemilinearProblem(dom, polynomial(2), DiscreteMeasure.dirac(dom, (0.5,))), "contraction")
    lines = tr.csv().splitlines()
    assert lines[0] == "iter,residual,energy"
    assert len(lines) == len(tr.iterates) + 1
