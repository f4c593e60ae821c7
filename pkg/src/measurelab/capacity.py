"""Discrete capacity of node sets through capacitary potentials."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Check, DiscreteMeasure, Domain, GridFunction, dirichlet_energy, laplacian_apply
from .solvers import spd_solve


@dataclass
class CapacityResult:
    K: np.ndarray
    u_K: GridFunction
    cap: float
    nu_K: DiscreteMeasure

    @property
    def domain(self) -> Domain:
        return self.u_K.domain


def _node_set(dom: Domain, K) -> np.ndarray:
    K = np.unique(np.asarray(K, dtype=int).reshape(-1))
    if K.size and (K.min() < 0 or K.max() >= dom.n_interior):
        raise ValueError("K must consist of interior nodes")
    return K


def capacitary_potential(dom: Domain, K) -> CapacityResult:
    """Minimiser of the Dirichlet energy with ``u = 1`` on ``K`` and zero boundary data.

    The free nodes carry the discrete harmonic extension; the capacity is the
    energy and ``nu_K = -Lap u_K``.
    """
    K = _node_set(dom, K)
    n = dom.n_interior
    u = np.zeros(n)
    if K.size:
        u[K] = 1.0
        free = np.setdiff1d(np.arange(n), K)
        if free.size:
            A = dom.stiffness
            Aff = A[free][:, free].tocsr()
            rhs = -(A[free][:, K] @ np.ones(K.size))
            u[free] = spd_solve(Aff, rhs, dom.dim, rtol=1e-12)
        # exact maximum principle, up to solver rounding
        u = np.clip(u, 0.0, 1.0)
    uK = GridFunction(dom, u)
    nu = DiscreteMeasure.from_density(laplacian_apply(uK))
    return CapacityResult(K, uK, dirichlet_energy(uK), nu)


def nu_mass(result: CapacityResult) -> float:
    return result.nu_K.total_mass()


def cap_equivalence_check(result: CapacityResult, eps: float, rtol: float = 0.2) -> Check:
    """``int |Lap (u_K - eps)+|`` against ``2 cap(K)``.

    On a grid the identity needs the level ``eps`` to be crossed between
    nodes: when no node has ``0 < u_K <= eps`` near ``K`` the level set is not
    resolved and the two sides part ways.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    w = (result.u_K - eps).positive_part()
    mass = float(result.domain.cell_volume * np.abs(laplacian_apply(w).values).sum())
    target = 2 * result.cap
    if target == 0:
        return Check("cap_equivalence", mass, 0.0, mass == 0.0)
    return Check("cap_equivalence", mass, target, abs(mass - target) <= rtol * result.cap)


@dataclass
class LevelRow:
    s: float
    cap: float
    statistic: float

    def row(self) -> str:
        return f"{self.s:.10g},{self.cap:.10g},{self.statistic:.10g}"


def capacitary_level_estimate(u: GridFunction, mu: DiscreteMeasure, s_values) -> list[LevelRow]:
    """``s cap({|u| > s}) / |mu|`` for each level ``s``.

    For a solution of the linear problem this never exceeds one: ``|T_s u| / s``
    is admissible for the capacity and its energy is at most ``s |mu|``.
    """
    tv = mu.tv_norm()
    out = []
    for s in s_values:
        if s <= 0:
            raise ValueError("levels must be positive")
        K = np.flatnonzero(np.abs(u.values) > s)
        cap = capacitary_potential(u.domain, K).cap if K.size else 0.0
        out.append(LevelRow(float(s), cap, s * cap / tv if tv > 0 else 0.0))
    return out


def check_level_estimate(rows: list[LevelRow], bound: float = 1.0, slack: float = 1e-9) -> Check:
    worst = max((r.statistic for r in rows), default=0.0)
    return Check("capacitary_level", worst, bound, worst <= bound + slack)
