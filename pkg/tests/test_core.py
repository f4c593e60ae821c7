import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import dense_laplacian
from measurelab.core import (
    Atom,
    DiscreteMeasure,
    Domain,
    GridFunction,
    Nonlinearity,
    arctan,
    dirichlet_energy,
    exponential,
    format_measure,
    gradient_magnitude,
    laplacian_apply,
    measure_lattice,
    mollify,
    norms,
    parse_grid_csv,
    parse_measure,
    polynomial,
    project_measure,
    truncate,
    format_grid_csv,
)

DOMAINS = [
    Domain.box(1, 1 / 8),
    Domain.box(2, 1 / 4),
    Domain.box(2, 0.5, -1, 1),
    Domain.ball(2, 1 / 4),
    Domain.box(3, 1 / 4),
    Domain.ball(3, 1 / 4),
]


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: f"{d.shape}{d.dim}_h{d.h:g}")
def test_stiffness_matches_dense_oracle(dom):
    assert np.array_equal(dom.stiffness.toarray(), dense_laplacian(dom))


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: f"{d.shape}{d.dim}_h{d.h:g}")
def test_stencil_routes_agree(dom, rng):
    u = GridFunction(dom, rng.standard_normal(dom.n_interior))
    a = laplacian_apply(u).values
    b = dom.stiffness @ u.values
    assert np.allclose(a, b, rtol=1e-13, atol=1e-12 * np.abs(b).max())


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: f"{d.shape}{d.dim}_h{d.h:g}")
def test_green_identity_and_gradient_energy(dom, rng):
    u = GridFunction(dom, rng.standard_normal(dom.n_interior))
    e = dirichlet_energy(u)
    assert math.isclose(e, dom.cell_volume * u.values @ (dom.stiffness @ u.values), rel_tol=1e-12)
    assert math.isclose(e, dom.cell_volume * np.sum(gradient_magnitude(u) ** 2), rel_tol=1e-12)


def test_domain_validation():
    with pytest.raises(ValueError):
        Domain.box(2, 0.3)
    with pytest.raises(ValueError):
        Domain.box(4, 0.25)
    with pytest.raises(ValueError):
        Domain.box(1, 1.0)
    with pytest.raises(ValueError):
        Domain(2, ((0.0, 1.0), (0.0, 1.0)), 0.25, "torus")
    assert Domain.ball(2, 0.25).n_interior == 45
    assert Domain.box(2, 0.25).n_interior == 9


def test_ball_mask_is_strictly_inside():
    dom = Domain.ball(2, 0.5)
    # the four nodes on the circle |x| = 1 are boundary nodes
    assert dom.n_interior == 9
    assert np.all(np.linalg.norm(dom.coords, axis=1) < 1)


def test_grid_function_is_read_only(rng):
    dom = Domain.box(2, 0.25)
    u = GridFunction(dom, rng.standard_normal(9))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(ValueError):
        GridFunction(dom, np.full(9, np.nan))
    with pytest.raises(ValueError):
        GridFunction(dom, np.zeros(8))


def test_norms_and_truncation():
    dom = Domain.box(1, 0.25)
    u = GridFunction(dom, [1.0, -2.0, 3.0])
    n = norms(u)
    assert n == pytest.approx({"l1": 1.5, "l2": math.sqrt(14 / 4), "linf": 3.0})
    assert np.array_equal(truncate(u, 1.5).values, [1.0, -1.5, 1.5])
    with pytest.raises(ValueError):
        truncate(u, -1)


def test_projection_preserves_mass():
    dom = Domain.box(2, 0.25)
    mu = DiscreteMeasure(dom, (Atom((0.5, 0.5), 2.0), Atom((0.3, 0.7), -1.0)),
                         GridFunction(dom, np.ones(9)))
    b = project_measure(mu)
    assert math.isclose(dom.cell_volume * b.values.sum(), mu.total_mass(), rel_tol=1e-14)
    assert mu.tv_norm() == pytest.approx(3.0 + 9 / 16)


def test_atom_outside_domain_rejected():
    dom = Domain.ball(2, 0.25)
    with pytest.raises(ValueError):
        DiscreteMeasure.dirac(dom, (0.9, 0.9))


def test_lattice_operations():
    dom = Domain.box(1, 0.25)
    mu = DiscreteMeasure(dom, (Atom((0.5,), 2.0, True),), GridFunction(dom, [1.0, -1.0, 0.5]))
    nu = DiscreteMeasure(dom, (Atom((0.5,), -1.0), Atom((0.25,), 1.0)), GridFunction(dom, [0.0, 2.0, 0.5]))
    mx, mn = measure_lattice(mu, nu, "max"), measure_lattice(mu, nu, "min")
    s = (mx + mn) - (mu + nu)
    assert s.tv_norm() == 0.0
    assert mu.positive_part().tv_norm() - mu.negative_part().tv_norm() == pytest.approx(mu.total_mass())
    assert mn.le(mx)
    assert any(a.singular for a in mx.atoms if a.point == (0.5,))


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2, 3]))
def test_measure_text_roundtrip(seed, dim):
    rng = np.random.default_rng(seed)
    dom = Domain.box(dim, 0.25)
    atoms = tuple(Atom(tuple(rng.uniform(0.05, 0.95, dim)), float(rng.normal()), bool(rng.integers(2)))
                  for _ in range(rng.integers(0, 4)))
    dens = GridFunction(dom, rng.normal(size=dom.n_interior)) if rng.integers(2) else None
    mu = DiscreteMeasure(dom, atoms, dens)
    back = parse_measure(format_measure(mu))
    assert back.domain == dom
    assert back.atoms == mu.atoms
    assert np.array_equal(back.density_values, mu.density_values)


def test_grid_csv_roundtrip(rng):
    dom = Domain.ball(2, 0.25)
    u = GridFunction(dom, rng.normal(size=dom.n_interior))
    back = parse_grid_csv(format_grid_csv(u), dom)
    assert np.allclose(back.values, u.values, rtol=1e-11)


@given(seed=st.integers(0, 2**32 - 1))
def test_mollify_preserves_mass_and_shrinks_tv(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.box(2, 1 / 8)
    mu = DiscreteMeasure(dom, (Atom(tuple(rng.uniform(0.1, 0.9, 2)), float(rng.normal())),),
                         GridFunction(dom, rng.normal(size=dom.n_interior)))
    m = mollify(mu, 0.3)
    assert math.isclose(m.total_mass(), mu.total_mass(), rel_tol=1e-10, abs_tol=1e-12)
    assert m.tv_norm() <= mu.tv_norm() * (1 + 1e-12)


@pytest.mark.parametrize("g", [polynomial(2), polynomial(3), exponential(), arctan()],
                         ids=["p2", "p3", "exp", "arctan"])
@pytest.mark.parametrize("n", [0.5, 4.0, 100.0])
def test_truncated_primitive_matches_quadrature(g, n):
    gn = g.truncated(n)
    for t in (-2.0, -0.3, 0.7, 1.5, 6.0):
        ref, _ = quad(lambda x: float(gn(np.array(x))), 0.0, t, limit=200)
        assert float(gn.G(np.array([t]))[0]) == pytest.approx(ref, rel=1e-8, abs=1e-10)
        assert float(gn(np.array(t))) <= n


def test_truncation_of_bounded_g_is_identity():
    g = arctan()
    assert g.truncated(10.0) is g


def test_frozen_primitive_vanishes_at_zero():
    g = polynomial(3)
    lo, hi = np.array([0.5, -1.0]), np.array([2.0, 1.0])
    gf = g.frozen(lo, hi)
    assert np.array_equal(gf.G(np.zeros(2)), [0.0, 0.0])
    assert np.allclose(gf(np.array([3.0, 3.0])), [8.0, 1.0])
    assert np.allclose(gf(np.array([0.0, 0.0])), [0.125, 0.0])


def test_nonlinearity_flags_are_verified():
    with pytest.raises(ValueError):
        Nonlinearity(g=lambda t: -t, G=lambda t: -t**2 / 2)
    with pytest.raises(ValueError):
        Nonlinearity(g=np.sin, G=lambda t: 1 - np.cos(t), sign_condition=False)
    with pytest.raises(ValueError):
        Nonlinearity(g=lambda t: t, G=lambda t: t**2)
    g = Nonlinearity(g=np.sin, G=lambda t: 1 - np.cos(t), sign_condition=False, nondecreasing=False)
    assert g(0.0) == 0.0
