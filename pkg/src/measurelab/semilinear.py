"""Solvers for ``-Lap u + g(u) = mu`` with zero Dirichlet data.

Three routes are provided: minimisation of the energy (with the truncation
device for large solutions), the sub/supersolution bracket iterated from the
supersolution, and a damped fixed point for nondecreasing ``g``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import Check, DiscreteMeasure, Domain, GridFunction, Nonlinearity, project_measure
from .linear import solve_density
from .solvers import SolverError, shifted, spd_solve


@dataclass
class SemilinearProblem:
    dom: Domain
    g: Nonlinearity
    mu: DiscreteMeasure
    tol: float | None = None
    max_iter: int = 500
    theta: float = 0.5

    def __post_init__(self):
        if self.mu.domain != self.dom:
            raise ValueError("measure lives on a different domain")
        if self.tol is None:
            self.tol = 1e-8 * (1.0 + self.mu.tv_norm())
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("damping must lie in (0, 1]")

    @cached_property
    def rhs(self) -> np.ndarray:
        return project_measure(self.mu).values

    def with_g(self, g: Nonlinearity) -> "SemilinearProblem":
        return SemilinearProblem(self.dom, g, self.mu, self.tol, self.max_iter, self.theta)


@dataclass
class SolveTrace:
    route: str
    u: GridFunction
    gu: GridFunction
    iterates: list[tuple[int, float, float]] = field(default_factory=list)
    converged: bool = True
    message: str = ""

    @property
    def residual(self) -> float:
        return self.iterates[-1][1] if self.iterates else 0.0

    def csv(self) -> str:
        lines = ["iter,residual,energy"]
        lines += [f"{k},{r:.12g},{e:.12g}" for k, r, e in self.iterates]
        return "\n".join(lines) + "\n"


def _gvals(g: Nonlinearity, u: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return np.asarray(g(u), dtype=float)


def residual_vector(u: np.ndarray, prob: SemilinearProblem, g: Nonlinearity | None = None) -> np.ndarray:
    g = prob.g if g is None else g
    return prob.dom.stiffness @ u + _gvals(g, u) - prob.rhs


def residual_l1(u: np.ndarray, prob: SemilinearProblem, g: Nonlinearity | None = None) -> float:
    r = residual_vector(u, prob, g)
    return float(prob.dom.cell_volume * np.abs(r).sum()) if np.all(np.isfinite(r)) else np.inf


def energy(u: GridFunction | np.ndarray, prob: SemilinearProblem, g: Nonlinearity | None = None) -> float:
    """``1/2 |Du|^2 + int G(u) - <u, mu>``; overflow of ``G`` gives ``+inf``."""
    g = prob.g if g is None else g
    v = u.values if isinstance(u, GridFunction) else np.asarray(u)
    w = prob.dom.cell_volume
    with np.errstate(over="ignore", invalid="ignore"):
        Gsum = float(np.sum(g.G(v)))
    if not np.isfinite(Gsum):
        return np.inf
    return float(w * (0.5 * v @ (prob.dom.stiffness @ v) + Gsum - v @ prob.rhs))


def coordinate_energy_gaps(u: GridFunction, prob: SemilinearProblem, delta: float) -> np.ndarray:
    """``E(u +- delta e_i) - E(u)`` for every node, shape (2, n)."""
    A = prob.dom.stiffness
    v = u.values
    Av = A @ v
    d = A.diagonal()
    w = prob.dom.cell_volume
    out = []
    for s in (delta, -delta):
        with np.errstate(over="ignore", invalid="ignore"):
            dG = prob.g.G(v + s) - prob.g.G(v)
        out.append(w * (s * Av + 0.5 * s * s * d + dG - s * prob.rhs))
    return np.array(out)


def _newton(prob: SemilinearProblem, g: Nonlinearity, u0: np.ndarray, trace: list, k0: int = 0,
            max_iter: int = 100) -> tuple[np.ndarray, bool]:
    """Damped Newton on the energy of ``g`` (Hessian shift clipped at zero).

    A step is accepted when it decreases either the energy or the residual.
    """
    A = prob.dom.stiffness
    u = u0.copy()
    res = residual_l1(u, prob, g)
    E = energy(u, prob, g)
    for k in range(max_iter):
        if res <= prob.tol:
            return u, True
        F = residual_vector(u, prob, g)
        dg = np.maximum(np.nan_to_num(g.derivative(u), nan=0.0, posinf=1e300), 0.0)
        H = shifted(A, dg)
        d = -spd_solve(H, F, prob.dom.dim, x0=None, rtol=1e-12)
        slope = prob.dom.cell_volume * float(F @ d)
        t = 1.0
        accepted = False
        while t > 1e-10:
            cand = u + t * d
            Ec = energy(cand, prob, g)
            rc = residual_l1(cand, prob, g)
            if (np.isfinite(Ec) and Ec <= E + 1e-4 * t * slope) or rc < (1 - 1e-4 * t) * res:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return u, False
        u, E, res = cand, Ec, rc
        trace.append((k0 + k + 1, res, E))
    return u, res <= prob.tol


def _finish(route: str, prob: SemilinearProblem, u: np.ndarray, trace: list, converged: bool,
            g: Nonlinearity | None = None, message: str = "") -> SolveTrace:
    g = prob.g if g is None else g
    if not trace or trace[-1][1] != residual_l1(u, prob, g):
        trace.append((len(trace), residual_l1(u, prob, g), energy(u, prob, g)))
    return SolveTrace(route, GridFunction(prob.dom, u), GridFunction(prob.dom, _gvals(g, u)),
                      trace, converged, message)


# ---------------------------------------------------------------------------
# energy route
# ---------------------------------------------------------------------------


def minimize_energy(prob: SemilinearProblem, max_escalations: int = 20) -> SolveTrace:
    """Minimise the energy with ``g`` frozen outside ``[-kappa, kappa]``.

    ``kappa`` runs over ``||u_lin||_inf * 2**k``; the first minimiser that stays
    inside ``[-kappa, kappa]`` solves the untruncated problem.
    """
    if not prob.g.sign_condition:
        raise ValueError("energy route needs the sign condition")
    b = prob.rhs
    n = prob.dom.n_interior
    if not np.any(b):
        return _finish("energy", prob, np.zeros(n), [], True)
    u_lin = solve_density(prob.dom, b)
    k0 = float(np.abs(u_lin).max())
    trace: list = []
    u = np.zeros(n)
    for k in range(max_escalations):
        kappa = k0 * 2.0**k
        gk = prob.g.frozen(-kappa, kappa)
        u, ok = _newton(prob, gk, u, trace, k0=len(trace), max_iter=prob.max_iter)
        if ok and np.abs(u).max() <= kappa:
            return _finish("energy", prob, u, trace, residual_l1(u, prob) <= prob.tol)
    raise SolverError("truncation level escalation exhausted its budget")


# ---------------------------------------------------------------------------
# bracket route
# ---------------------------------------------------------------------------


def default_brackets(prob: SemilinearProblem) -> tuple[GridFunction, GridFunction]:
    """Subsolution ``-u(mu-)`` and supersolution ``u(mu+)`` (valid under the sign condition)."""
    b = prob.rhs
    hi = solve_density(prob.dom, np.maximum(b, 0.0))
    lo = -solve_density(prob.dom, np.maximum(-b, 0.0))
    return GridFunction(prob.dom, lo), GridFunction(prob.dom, hi)


def _lipschitz_bound(g: Nonlinearity, lo: np.ndarray, hi: np.ndarray, samples: int = 9) -> np.ndarray:
    s = np.linspace(0.0, 1.0, samples)
    pts = lo[None, :] + s[:, None] * (hi - lo)[None, :]
    with np.errstate(over="ignore", invalid="ignore"):
        d = np.nan_to_num(g.derivative(pts), nan=0.0, posinf=1e300)
    return 1.1 * np.maximum(d.max(axis=0), 0.0)


def sub_super_solve(prob: SemilinearProblem, v_lo: GridFunction, v_hi: GridFunction,
                    node_tol: float | None = None) -> SolveTrace:
    """Largest solution between a subsolution and a supersolution.

    ``g`` is frozen at ``v_lo``/``v_hi`` outside the bracket.  The iteration
    starts at ``v_hi`` and solves ``(A + L) u_new = mu - g(u) + L u`` with a
    nodewise shift ``L`` at least the slope of ``g`` on the bracket, which makes
    the iterates decrease monotonically; a Newton polish finishes the solve.
    """
    A = prob.dom.stiffness
    lo, hi = v_lo.values, v_hi.values
    if np.any(lo > hi):
        raise ValueError("subsolution exceeds supersolution")
    b = prob.rhs
    if node_tol is None:
        node_tol = 1e-7 * (1.0 + np.abs(b).max(initial=0.0))
    if np.any(A @ lo + _gvals(prob.g, lo) - b > node_tol):
        raise ValueError("v_lo is not a subsolution")
    if np.any(A @ hi + _gvals(prob.g, hi) - b < -node_tol):
        raise ValueError("v_hi is not a supersolution")
    gt = prob.g.frozen(lo, hi)
    lam = _lipschitz_bound(prob.g, lo, hi)
    S = shifted(A, lam)
    u = hi.copy()
    trace = [(0, residual_l1(u, prob, gt), np.nan)]
    converged = trace[0][1] <= prob.tol
    k = 0
    while not converged and k < prob.max_iter:
        k += 1
        new = spd_solve(S, b - _gvals(gt, u) + lam * u, prob.dom.dim, x0=u, rtol=1e-12, cache=True)
        new = np.clip(new, lo, hi)
        res = residual_l1(new, prob, gt)
        slow = res > 0.5 * trace[-1][1]
        u = new
        trace.append((k, res, np.nan))
        converged = res <= prob.tol
        if not converged and (slow or k >= 5):
            u2, ok = _newton(prob, gt, u, trace, k0=k, max_iter=50)
            if ok and np.all(u2 >= lo - node_tol) and np.all(u2 <= hi + node_tol):
                u = np.clip(u2, lo, hi)
                converged = residual_l1(u, prob, gt) <= prob.tol
                k = trace[-1][0]
    msg = "" if converged else "iteration budget exhausted"
    out = _finish("bracket", prob, u, trace, converged, g=gt, message=msg)
    out.gu = GridFunction(prob.dom, _gvals(prob.g, u))
    return out


def bracket_solve(prob: SemilinearProblem) -> SolveTrace:
    lo, hi = default_brackets(prob)
    return sub_super_solve(prob, lo, hi)


# ---------------------------------------------------------------------------
# contraction route
# ---------------------------------------------------------------------------


def contraction_solve(prob: SemilinearProblem) -> SolveTrace:
    """Damped fixed point ``u <- u + theta (u_lin(mu - g(u)) - u)`` for nondecreasing ``g``.

    A step that increases the residual is rejected and ``theta`` halved.
    """
    if not prob.g.nondecreasing:
        raise ValueError("contraction route needs a nondecreasing nonlinearity")
    n = prob.dom.n_interior
    b = prob.rhs
    u = np.zeros(n)
    res = residual_l1(u, prob)
    trace = [(0, res, energy(u, prob))]
    theta = prob.theta
    streak = 0
    k = 0
    while res > prob.tol:
        if k >= prob.max_iter:
            return _finish("contraction", prob, u, trace, False, message="iteration budget exhausted")
        k += 1
        w = solve_density(prob.dom, b - _gvals(prob.g, u))
        cand = u + theta * (w - u)
        rc = residual_l1(cand, prob)
        if not rc < res:
            theta *= 0.5
            streak = 0
            if theta < 1e-8:
                raise SolverError("damped fixed point diverges")
            continue
        u, res = cand, rc
        trace.append((k, res, energy(u, prob)))
        streak += 1
        if streak >= 5 and theta < prob.theta:
            theta = min(prob.theta, 2 * theta)
            streak = 0
    return _finish("contraction", prob, u, trace, True)


ROUTES = {
    "energy": minimize_energy,
    "bracket": bracket_solve,
    "contraction": contraction_solve,
}


def solve(prob: SemilinearProblem, route: str = "bracket") -> SolveTrace:
    try:
        fn = ROUTES[route]
    except KeyError:
        raise ValueError(f"unknown route {route!r}") from None
    return fn(prob)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def check_absorption(trace: SolveTrace, mu: DiscreteMeasure, tol: float = 1e-6) -> Check:
    """``||g(u)||_1 <= |mu|``."""
    w = trace.u.domain.cell_volume
    lhs = float(w * np.abs(trace.gu.values).sum())
    rhs = mu.tv_norm()
    return Check("absorption", lhs, rhs, lhs <= rhs + tol)


def check_positive_absorption(trace: SolveTrace, mu: DiscreteMeasure, tol: float = 1e-6) -> Check:
    """``||max(g(u), 0)||_1 <= |mu+|``; holds for subsolutions too."""
    w = trace.u.domain.cell_volume
    lhs = float(w * np.maximum(trace.gu.values, 0.0).sum())
    rhs = mu.positive_part().tv_norm()
    return Check("positive_absorption", lhs, rhs, lhs <= rhs + tol)


def check_contraction(tm: SolveTrace, tn: SolveTrace, mu_m: DiscreteMeasure, mu_n: DiscreteMeasure,
                      tol: float) -> Check:
    """``||g(u_m) - g(u_n)||_1 <= |mu_m - mu_n| + 2 tol``."""
    w = tm.u.domain.cell_volume
    lhs = float(w * np.abs(tm.gu.values - tn.gu.values).sum())
    rhs = (mu_m - mu_n).tv_norm()
    return Check("contraction", lhs, rhs + 2 * tol, lhs <= rhs + 2 * tol)
