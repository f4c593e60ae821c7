"""Linear Dirichlet problem ``-Lap u = mu`` and the estimates it satisfies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Check,
    DiscreteMeasure,
    Domain,
    GridFunction,
    dirichlet_energy,
    gradient_magnitude,
    gradient_norm,
    laplacian_apply,
    norms,
    project_measure,
    truncate,
)
from .solvers import RTOL, spd_solve


@dataclass
class LinearReport:
    u: GridFunction
    residual_linf: float  # max |A u - b| / max |b|
    estimates: dict[str, Check] = field(default_factory=dict)

    def rows(self) -> list[str]:
        return [c.row() for c in self.estimates.values()]


def solve_density(dom: Domain, rhs: np.ndarray, x0=None) -> np.ndarray:
    return spd_solve(dom.stiffness, rhs, dom.dim, x0=x0, cache=True)


def solve_linear(dom: Domain, mu: DiscreteMeasure, rtol: float = RTOL) -> LinearReport:
    if mu.domain != dom:
        raise ValueError("measure lives on a different domain")
    b = project_measure(mu).values
    x = spd_solve(dom.stiffness, b, dom.dim, rtol=rtol, cache=True)
    bmax = np.abs(b).max(initial=0.0)
    res = float(np.abs(dom.stiffness @ x - b).max(initial=0.0) / bmax) if bmax > 0 else 0.0
    return LinearReport(GridFunction(dom, x), res)


# ---------------------------------------------------------------------------
# estimate checks
# ---------------------------------------------------------------------------


def _ratio(a: float, b: float) -> float:
    if b == 0.0:
        return 0.0 if a == 0.0 else np.inf
    return a / b


def default_exponents(dim: int) -> tuple[float, ...]:
    return (1.0, 1.2, dim / (dim - 1) - 0.05) if dim > 1 else (1.0, 1.2, 1.5)


def check_stampacchia(report: LinearReport, mu: DiscreteMeasure, qs=None) -> dict[str, Check]:
    """Ratios ``||u||_1 / |mu|`` and ``||Du||_q / |mu|``; each passes when finite.

    Boundedness across a refinement family is judged with :func:`refinement_growth`.
    """
    u = report.u
    tv = mu.tv_norm()
    qs = default_exponents(u.domain.dim) if qs is None else qs
    out = {}
    l1 = norms(u)["l1"]
    out["stampacchia_l1"] = Check("stampacchia_l1", _ratio(l1, tv), np.inf, bool(np.isfinite(_ratio(l1, tv))))
    for q in qs:
        name = f"stampacchia_grad_q{q:.3g}"
        r = _ratio(gradient_norm(u, q), tv)
        out[name] = Check(name, r, np.inf, bool(np.isfinite(r)))
    report.estimates.update(out)
    return out


def refinement_growth(ratios) -> float:
    """Largest ratio over the smallest one along a refinement family."""
    r = np.asarray(ratios, dtype=float)
    if np.all(r == 0):
        return 1.0
    lo = r[r > 0].min() if np.any(r > 0) else 0.0
    return float(r.max() / lo) if lo > 0 else np.inf


def _sup_level(values: np.ndarray, cell: float, power: float) -> float:
    """``sup_t t * |{|v| > t}|**power`` for a finite sample (exact for step distributions)."""
    a = np.sort(np.abs(values))[::-1]
    if a.size == 0 or a[0] == 0:
        return 0.0
    k = np.arange(1, a.size + 1)
    return float(np.max(a * (cell * k) ** power))


def check_weak_lp(report: LinearReport, mu: DiscreteMeasure) -> dict[str, Check]:
    """Weak-Lebesgue statistics of ``u`` and ``Du`` relative to ``|mu|`` (dim 3 only)."""
    u = report.u
    N = u.domain.dim
    if N < 3:
        raise ValueError("weak-Lp check needs dim >= 3")
    tv = mu.tv_norm()
    cell = u.domain.cell_volume
    su = _sup_level(u.values, cell, (N - 2) / N)
    sg = _sup_level(gradient_magnitude(u), cell, (N - 1) / N)
    out = {
        "weak_lp_u": Check("weak_lp_u", _ratio(su, tv), np.inf, bool(np.isfinite(_ratio(su, tv)))),
        "weak_lp_grad": Check("weak_lp_grad", _ratio(sg, tv), np.inf, bool(np.isfinite(_ratio(sg, tv)))),
    }
    report.estimates.update(out)
    return out


def check_interpolation(report: LinearReport, mu: DiscreteMeasure, kappa: float,
                        slack: float = 1e-12) -> Check:
    """``||D T_kappa(u)||_2**2 <= kappa * |mu|``."""
    lhs = dirichlet_energy(truncate(report.u, kappa))
    rhs = kappa * mu.tv_norm()
    c = Check(f"interpolation_k{kappa:.6g}", lhs, rhs, lhs <= rhs + slack * max(1.0, rhs))
    report.estimates[c.name] = c
    return c


def boundary_strip_statistics(report: LinearReport, mu: DiscreteMeasure, multiples=(1, 2, 4, 8)):
    u = report.u
    dom = u.domain
    tv = mu.tv_norm()
    dist = dom.boundary_distance()
    out = []
    for m in multiples:
        eps = m * dom.h
        strip = dist < eps
        s = dom.cell_volume * np.abs(u.values[strip]).sum() / eps**2
        out.append((eps, _ratio(s, tv)))
    return out


def check_boundary_decay(report: LinearReport, mu: DiscreteMeasure, factor: float = 4.0) -> Check:
    """``eps**-2 * int_{d(x) < eps} |u|`` relative to ``|mu|`` for eps in {h, 2h, 4h, 8h}.

    Passes when the statistic stays within ``factor`` of itself across the strips.
    """
    stats = [s for _, s in boundary_strip_statistics(report, mu)]
    growth = refinement_growth(stats)
    c = Check("boundary_decay", max(stats), factor * min(stats) if max(stats) > 0 else 0.0,
              bool(np.all(np.isfinite(stats)) and growth <= factor))
    report.estimates[c.name] = c
    return c


def check_weak_max(report: LinearReport, mu: DiscreteMeasure, tol: float | None = None) -> Check:
    """Sign of ``u`` follows the sign of ``mu``."""
    u = report.u.values
    if tol is None:
        tol = 1e-9 * max(1.0, np.abs(u).max(initial=0.0))
    if mu.is_nonpositive():
        c = Check("weak_max", float(u.max(initial=0.0)), tol, float(u.max(initial=0.0)) <= tol)
    elif mu.is_nonnegative():
        c = Check("weak_max", float(-u.min(initial=0.0)), tol, float(-u.min(initial=0.0)) <= tol)
    else:
        c = Check("weak_max", 0.0, tol, True)
    report.estimates[c.name] = c
    return c


def check_kato(u1: GridFunction, f1: GridFunction, u2: GridFunction | None = None,
               f2: GridFunction | None = None) -> Check:
    """Discrete Kato inequalities, with no tolerance.

    Requires ``Lap u_i >= f_i`` at every node (``Lap = -laplacian_apply``).
    One function: ``Lap u+ >= 1{u > 0} f``.  Two functions: ``Lap max(u1, u2)``
    dominates ``f1`` where ``u1 > u2``, ``f2`` where ``u2 > u1`` and the mean on ties.
    The returned ``lhs`` is the largest nodewise violation (``<= 0`` on success).
    """
    lap1 = -laplacian_apply(u1).values
    if np.any(lap1 < f1.values):
        raise ValueError("precondition Lap u1 >= f1 violated")
    if u2 is None:
        w = u1.positive_part()
        bound = np.where(u1.values > 0, f1.values, 0.0)
        name = "kato"
    else:
        if f2 is None:
            raise ValueError("two-function form needs f2")
        lap2 = -laplacian_apply(u2).values
        if np.any(lap2 < f2.values):
            raise ValueError("precondition Lap u2 >= f2 violated")
        a, b = u1.values, u2.values
        w = GridFunction(u1.domain, np.maximum(a, b))
        bound = np.where(a > b, f1.values, np.where(b > a, f2.values, (f1.values + f2.values) / 2))
        name = "kato_max"
    margin = -laplacian_apply(w).values - bound
    m = float(margin.min())
    return Check(name, -m, 0.0, m >= 0.0)
