import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_laplacian
from measurelab.capacity import (
    cap_equivalence_check,
    capacitary_level_estimate,
    capacitary_potential,
    check_level_estimate,
    nu_mass,
)
from measurelab.core import Atom, DiscreteMeasure, Domain, GridFunction
from measurelab.linear import solve_linear


def schur_capacity(dom, K):
    A = dense_laplacian(dom)
    K = np.asarray(sorted(set(K)))
    F = np.setdiff1d(np.arange(dom.n_interior), K)
    S = A[np.ix_(K, K)]
    if F.size:
        S = S - A[np.ix_(K, F)] @ np.linalg.solve(A[np.ix_(F, F)], A[np.ix_(F, K)])
    return dom.cell_volume * S.sum()


@pytest.mark.parametrize("k", [0, 3, 5, 6])
def test_1d_single_node_capacity_is_exact(k):
    dom = Domain.box(1, 1 / 8)
    y = (k + 1) / 8
    r = capacitary_potential(dom, [k])
    assert r.cap == pytest.approx(1 / y + 1 / (1 - y), rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2, 3]))
def test_capacity_matches_schur_complement(seed, dim):
    rng = np.random.default_rng(seed)
    dom = Domain.box(dim, 1 / 8 if dim < 3 else 1 / 4)
    K = rng.choice(dom.n_interior, size=rng.integers(1, max(2, dom.n_interior // 3)), replace=False)
    r = capacitary_potential(dom, K)
    assert r.cap == pytest.approx(schur_capacity(dom, K), rel=1e-9)
    # the capacitary measure carries the capacity as its mass and lives on K
    assert nu_mass(r) == pytest.approx(r.cap, rel=1e-9)
    off = np.setdiff1d(np.arange(dom.n_interior), K)
    assert np.allclose(r.nu_K.density_values[off], 0, atol=1e-8 * np.abs(r.nu_K.density_values).max())
    assert np.all((r.u_K.values >= 0) & (r.u_K.values <= 1))


@given(seed=st.integers(0, 2**32 - 1))
def test_capacity_is_monotone_and_subadditive(seed):
    rng = np.random.default_rng(seed)
    dom = Domain.box(2, 1 / 8)
    K1 = rng.choice(49, size=rng.integers(1, 10), replace=False)
    K2 = rng.choice(49, size=rng.integers(1, 10), replace=False)
    c1, c2 = capacitary_potential(dom, K1).cap, capacitary_potential(dom, K2).cap
    cu = capacitary_potential(dom, np.union1d(K1, K2)).cap
    assert max(c1, c2) <= cu * (1 + 1e-10)
    assert cu <= (c1 + c2) * (1 + 1e-10)


def test_empty_set_has_zero_capacity():
    dom = Domain.box(2, 0.25)
    r = capacitary_potential(dom, [])
    assert r.cap == 0.0
    assert cap_equivalence_check(r, 0.5).passed
    with pytest.raises(ValueError):
        capacitary_potential(dom, [9])


@pytest.mark.parametrize("h", [1 / 16, 1 / 32])
@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5])
def test_equivalence_mass_for_resolved_level(h, eps):
    dom = Domain.box(2, h)
    r = capacitary_potential(dom, [dom.nearest_interior((0.5, 0.5))])
    c = cap_equivalence_check(r, eps)
    assert c.passed
    assert c.rhs == pytest.approx(2 * r.cap)


def test_equivalence_validates_level():
    dom = Domain.box(2, 0.25)
    r = capacitary_potential(dom, [4])
    for eps in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            cap_equivalence_check(r, eps)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 3]))
def test_level_estimate_never_exceeds_one(seed, dim):
    rng = np.random.default_rng(seed)
    dom = Domain.box(dim, 1 / 8 if dim == 2 else 1 / 4)
    atoms = tuple(Atom(tuple(rng.uniform(0.2, 0.8, dim)), float(rng.normal())) for _ in range(2))
    mu = DiscreteMeasure(dom, atoms, GridFunction(dom, rng.normal(size=dom.n_interior)))
    u = solve_linear(dom, mu).u
    top = np.abs(u.values).max()
    rows = capacitary_level_estimate(u, mu, top * np.array([0.05, 0.2, 0.5, 0.9]))
    assert check_level_estimate(rows).passed
    assert rows[0].row().count(",") == 2
    with pytest.raises(ValueError):
        capacitary_level_estimate(u, mu, [0.0])
