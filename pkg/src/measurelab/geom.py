"""Hausdorff contents of finite sets, Frostman density bounds, the greedy
decomposition of point measures and the potential formulas behind the
exponential threshold.

Balls are open.  A finite set is covered by open balls of radius at most
``delta``: a group of points whose smallest enclosing closed ball has radius
``r`` costs ``omega_s r**s`` in the limit and is admissible when ``r < delta``;
a single point costs ``omega_s 0**s`` (``1`` for ``s = 0``).  With a positive
resolution ``rho`` every sample stands for the open ball ``B(p, rho)``; a group
is then covered by a ball of radius ``r + rho`` admissible when ``r + rho <= delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .core import Check

EXACT_LIMIT = 12
ENUM_LIMIT = 16


def omega(s: float) -> float:
    """Volume of the unit ball of dimension ``s``: ``pi**(s/2) / Gamma(s/2 + 1)``."""
    if s < 0:
        raise ValueError("dimension must be nonnegative")
    return math.pi ** (s / 2) / math.gamma(s / 2 + 1)


@dataclass(frozen=True)
class PointMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if p.shape[0] != w.size:
            raise ValueError("one weight per point")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(p)):
            raise ValueError("weights must be finite and nonnegative")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def restrict(self, idx) -> "PointMeasure":
        """``mu`` restricted to the listed atoms (others get weight zero)."""
        w = np.zeros_like(self.weights)
        idx = list(idx)
        w[idx] = self.weights[idx]
        return PointMeasure(self.points, w)

    def scale(self, c: float) -> "PointMeasure":
        return PointMeasure(self.points, c * self.weights)

    @cached_property
    def subset_masses(self) -> np.ndarray:
        return subset_sums(self.weights)


def subset_sums(w: np.ndarray) -> np.ndarray:
    """``out[mask] = sum of w[i]`` over the bits of ``mask``."""
    m = len(w)
    if m > ENUM_LIMIT:
        raise ValueError(f"subset enumeration limited to {ENUM_LIMIT} points")
    out = np.zeros(1 << m)
    for i in range(m):
        out[1 << i : 1 << (i + 1)] = out[: 1 << i] + w[i]
    return out


def min_separation(points: np.ndarray) -> float:
    p = np.atleast_2d(points)
    if len(p) < 2:
        return np.inf
    d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
    return float(d[np.triu_indices(len(p), 1)].min())


def diameter(points: np.ndarray) -> float:
    p = np.atleast_2d(points)
    if len(p) < 2:
        return 0.0
    return float(np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1).max())


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass
class Cover:
    balls: list[Ball]
    value: float
    target: str = ""

    def covers(self, points: np.ndarray, rho: float = 0.0) -> bool:
        p = np.atleast_2d(points)
        hit = np.zeros(len(p), dtype=bool)
        for b in self.balls:
            d = np.linalg.norm(p - np.asarray(b.center), axis=1)
            hit |= d + rho <= b.radius * (1 + 1e-9) + 1e-12
        return bool(hit.all())

    def csv(self) -> str:
        dim = len(self.balls[0].center) if self.balls else 3
        head = ",".join(["cx", "cy", "cz"][:dim] + ["r"])
        lines = [head] + [",".join(f"{v:.10g}" for v in (*b.center, b.radius)) for b in self.balls]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# candidate balls
# ---------------------------------------------------------------------------


def circumball(pts: np.ndarray) -> tuple[np.ndarray, float] | None:
    """Center and radius of the ball through ``pts`` on their affine hull (``None`` if degenerate)."""
    p0 = pts[0]
    if len(pts) == 1:
        return p0.copy(), 0.0
    V = pts[1:] - p0
    G = V @ V.T
    scale = np.trace(G)
    if abs(np.linalg.det(G)) <= 1e-12 * scale ** len(G):
        return None
    lam = np.linalg.solve(2 * G, np.einsum("ij,ij->i", V, V))
    c = p0 + lam @ V
    return c, float(np.linalg.norm(c - p0))


@dataclass(frozen=True)
class Candidates:
    masks: np.ndarray  # int64 bitmask of covered points
    radii: np.ndarray  # smallest enclosing radius of the covered points
    centers: np.ndarray


def candidate_balls(points: np.ndarray) -> Candidates:
    """Balls through at most ``N + 1`` points; each covered subset kept once with its smallest radius.

    Every smallest enclosing ball of a subset is one of these, so covers built
    from them are optimal.  Order is lexicographic in the generating subsets.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    m, N = p.shape
    best: dict[int, tuple[float, np.ndarray]] = {}
    bits = 1 << np.arange(m, dtype=np.int64)
    for k in range(1, min(N + 1, m) + 1):
        for idx in combinations(range(m), k):
            cb = circumball(p[list(idx)])
            if cb is None:
                continue
            c, r = cb
            inside = np.linalg.norm(p - c, axis=1) <= r * (1 + 1e-9) + 1e-12
            mask = int(bits[inside].sum())
            if mask not in best or r < best[mask][0]:
                best[mask] = (r, c)
    masks = np.fromiter(best.keys(), dtype=np.int64, count=len(best))
    radii = np.array([v[0] for v in best.values()])
    centers = np.array([v[1] for v in best.values()]).reshape(len(best), N)
    return Candidates(masks, radii, centers)


def _costs(cands: Candidates, s: float, delta: float, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Cost and admissibility of every candidate."""
    R = cands.radii + rho
    single = (cands.masks & (cands.masks - 1)) == 0
    if rho > 0:
        ok = R <= delta
    else:
        ok = (R < delta) | single
    with np.errstate(divide="ignore"):
        cost = omega(s) * np.power(R, s)
    return cost, ok


# ---------------------------------------------------------------------------
# Hausdorff contents
# ---------------------------------------------------------------------------


def content_table(points, s: float, delta: float = np.inf, rho: float = 0.0) -> np.ndarray:
    """``H^s_delta`` of every subset of ``points`` (indexed by bitmask), exactly.

    Dynamic program over subsets by size: the optimal cover of a set uses one
    candidate meeting the set plus an optimal cover of what it leaves out.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(p)
    if m > EXACT_LIMIT:
        raise ValueError(f"exact mode is limited to {EXACT_LIMIT} points")
    if s < 0 or rho < 0 or not delta > 0:
        raise ValueError("need s >= 0, rho >= 0 and delta > 0")
    cands = candidate_balls(p)
    cost, ok = _costs(cands, s, delta, rho)
    cm, cc = cands.masks[ok], cost[ok]
    size = 1 << m
    f = np.full(size, np.inf)
    f[0] = 0.0
    all_masks = np.arange(size, dtype=np.int64)
    pop = np.array([bin(x).count("1") for x in range(size)])
    for k in range(1, m + 1):
        level = all_masks[pop == k]
        best = np.full(level.size, np.inf)
        for mask, c in zip(cm, cc):
            hit = (level & mask) != 0
            if not hit.any():
                continue
            sub = level[hit]
            cand = f[sub & ~mask] + c
            best[hit] = np.minimum(best[hit], cand)
        f[level] = best
    return f


def greedy_cover(points, s: float, delta: float = np.inf, rho: float = 0.0) -> Cover:
    """Weighted greedy set cover: cheapest cost per newly covered point, ties to the first candidate."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(p)
    if s < 0 or rho < 0 or not delta > 0:
        raise ValueError("need s >= 0, rho >= 0 and delta > 0")
    cands = candidate_balls(p)
    cost, ok = _costs(cands, s, delta, rho)
    masks, cost = cands.masks[ok], cost[ok]
    radii, centers = cands.radii[ok] + rho, cands.centers[ok]
    bits = 1 << np.arange(m, dtype=np.int64)
    member = (masks[:, None] & bits[None, :]) != 0
    left = np.ones(m, dtype=bool)
    chosen: list[int] = []
    while left.any():
        gain = (member & left[None, :]).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rate = np.where(gain > 0, cost / gain, np.inf)
        j = int(np.argmin(rate))
        if not np.isfinite(rate[j]):
            raise ValueError("no admissible ball covers the remaining points")
        chosen.append(j)
        left &= ~member[j]
    balls = [Ball(tuple(map(float, centers[j])), float(radii[j])) for j in chosen]
    return Cover(balls, float(sum(cost[j] for j in chosen)))


def optimal_cover(points, s: float, delta: float = np.inf, rho: float = 0.0) -> Cover:
    """An optimal cover in exact mode (recovered by walking back through the table)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    f = content_table(p, s, delta, rho)
    cands = candidate_balls(p)
    cost, ok = _costs(cands, s, delta, rho)
    idx = np.flatnonzero(ok)
    mask = (1 << len(p)) - 1
    balls = []
    while mask:
        for j in idx:
            cm = int(cands.masks[j])
            if cm & mask and abs(f[mask & ~cm] + cost[j] - f[mask]) <= 1e-12 * max(1.0, f[mask]):
                balls.append(Ball(tuple(map(float, cands.centers[j])), float(cands.radii[j] + rho)))
                mask &= ~cm
                break
        else:  # pragma: no cover - the table is built from these candidates
            raise RuntimeError("cover reconstruction failed")
    return Cover(balls, float(f[(1 << len(p)) - 1]))


def hausdorff_ball(r: float, s: float, delta: float, N: int) -> float:
    """Content of an open ball of radius ``r <= delta`` in dimension ``N``."""
    if r < 0 or r > delta:
        raise ValueError("ball radius must lie in [0, delta]")
    if s < 0:
        raise ValueError("dimension must be nonnegative")
    return omega(s) * r**s if s <= N else 0.0


def hausdorff_outer(A, s: float, delta: float = np.inf, mode: str = "exact", rho: float = 0.0,
                    N: int | None = None) -> float:
    """``H^s_delta`` of a finite point set, or of a ball given as ``("ball", center, r)``."""
    if isinstance(A, tuple) and len(A) == 3 and A[0] == "ball":
        center = np.atleast_1d(np.asarray(A[1], dtype=float))
        return hausdorff_ball(float(A[2]), s, delta, len(center) if N is None else N)
    p = np.atleast_2d(np.asarray(A, dtype=float))
    if p.size == 0:
        return 0.0
    if mode == "exact":
        return float(content_table(p, s, delta, rho)[-1])
    if mode == "greedy":
        return greedy_cover(p, s, delta, rho).value
    raise ValueError(f"unknown mode {mode!r}")


def metric_additivity_check(A1, A2, s: float, delta: float) -> Check:
    """``H(A1 u A2) = H(A1) + H(A2)`` when the sets are ``2 delta`` apart (open balls of radius ``< delta``)."""
    a1, a2 = np.atleast_2d(A1), np.atleast_2d(A2)
    gap = float(np.linalg.norm(a1[:, None, :] - a2[None, :, :], axis=-1).min())
    if gap < 2 * delta:
        raise ValueError("sets must be at least 2*delta apart")
    lhs = hausdorff_outer(np.vstack([a1, a2]), s, delta)
    rhs = hausdorff_outer(a1, s, delta) + hausdorff_outer(a2, s, delta)
    return Check("metric_additivity", lhs, rhs, abs(lhs - rhs) <= 1e-12 * max(1.0, rhs))


def content_gap(points, s: float, delta: float) -> float:
    """``sup_B H^s(B) - H^s_delta(B)`` over subsets of a finite set."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    fine = min_separation(p) / 2
    if not np.isfinite(fine):
        return 0.0
    return float(np.max(content_table(p, s, min(fine, delta)) - content_table(p, s, delta)))


def uniform_convergence_check(points, s: float = 0.0, eps: float = 0.0) -> float:
    """A ``delta`` at which ``H^s_delta`` equals ``H^s`` within ``eps`` on every subset.

    Half the smallest pairwise distance already gives gap zero.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    delta = min_separation(p) / 2
    if not np.isfinite(delta):
        return 1.0
    if content_gap(p, s, delta) > eps:  # pragma: no cover - gap is zero by construction
        raise RuntimeError("content gap exceeds eps")
    return delta


# ---------------------------------------------------------------------------
# Frostman density bound
# ---------------------------------------------------------------------------


def frostman_violations(nu: PointMeasure, alpha: float, s: float, delta: float, rho: float = 0.0):
    """Candidate balls with ``nu(B) > alpha omega_s r**s``: list of ``(mask, mass, bound)``."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    cands = candidate_balls(nu.points)
    cost, ok = _costs(cands, s, delta, rho)
    bits = 1 << np.arange(len(nu), dtype=np.int64)
    member = (cands.masks[:, None] & bits[None, :]) != 0
    mass = member.astype(float) @ nu.weights
    bound = alpha * cost
    bad = ok & (mass > bound * (1 + 1e-12))
    return [(int(cands.masks[j]), float(mass[j]), float(bound[j])) for j in np.flatnonzero(bad)]


def frostman_check(nu: PointMeasure, alpha: float, s: float, delta: float, rho: float = 0.0) -> bool:
    """``nu(B(x, r)) <= alpha omega_s r**s`` for every ball with ``r <= delta``.

    For a finite measure only the balls enclosing a group of atoms tightly
    matter, so checking the candidate balls is exact.
    """
    return not frostman_violations(nu, alpha, s, delta, rho)


def frostman_subset_oracle(nu: PointMeasure, alpha: float, s: float, delta: float, rho: float = 0.0) -> bool:
    """``nu(B) <= alpha H^s_delta(B)`` for every subset ``B`` of the support."""
    f = content_table(nu.points, s, delta, rho)
    m = nu.subset_masses
    return bool(np.all(m <= alpha * f * (1 + 1e-12) + 1e-15))


# ---------------------------------------------------------------------------
# decomposition and strong approximation
# ---------------------------------------------------------------------------


def content_oracle(points, s: float, delta: float, beta: float = 1.0, rho: float = 0.0) -> np.ndarray:
    """``beta H^s_delta`` tabulated on every subset."""
    return beta * content_table(points, s, delta, rho)


def _check_monotone(T: np.ndarray) -> None:
    m = int(np.log2(T.size))
    masks = np.arange(T.size)
    for i in range(m):
        lo = masks[(masks >> i) & 1 == 0]
        if np.any(T[lo | (1 << i)] < T[lo] * (1 - 1e-12) - 1e-15):
            raise ValueError("outer measure oracle is not monotone")


def greedy_decompose(mu: PointMeasure, T: np.ndarray | Callable[[int], float], theta: float = 0.5,
                     support: Sequence[int] | None = None) -> tuple[int, ...]:
    """Split the atoms into ``E`` with ``mu|E <= T`` and a remainder with ``T(rest) <= mu(rest)``.

    ``T`` is tabulated on bitmasks (or a callable on bitmasks).  Repeatedly
    remove a set ``F`` of the remaining atoms with ``T(F) <= mu(F)`` and
    ``mu(F) >= theta * eps`` where ``eps`` is the largest such mass; stop when
    only null sets qualify.  Restricting to ``support`` works on a sub-collection.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    m = len(mu)
    size = 1 << m
    Tv = np.asarray([T(k) for k in range(size)] if callable(T) else T, dtype=float)
    if Tv.size != size:
        raise ValueError("oracle table must cover every subset")
    _check_monotone(Tv)
    mass = mu.subset_masses
    masks = np.arange(size, dtype=np.int64)
    R = (size - 1) if support is None else int(sum(1 << i for i in support))
    while True:
        sub = masks[(masks & ~R) == 0]
        viol = sub[Tv[sub] <= mass[sub]]
        eps = float(mass[viol].max(initial=0.0))
        if eps <= 0:
            break
        F = int(viol[np.argmax(mass[viol] >= theta * eps)])
        R &= ~F
    return tuple(i for i in range(m) if R >> i & 1)


def verify_decomposition(mu: PointMeasure, T: np.ndarray, E: Sequence[int],
                         support: Sequence[int] | None = None, rtol: float = 1e-12) -> Check:
    """``mu(F) <= T(F)`` on subsets of ``E`` and ``T(rest) <= mu(rest)``, exhaustively."""
    m = len(mu)
    size = 1 << m
    full = (size - 1) if support is None else int(sum(1 << i for i in support))
    Emask = int(sum(1 << i for i in E))
    mass = mu.subset_masses
    masks = np.arange(size, dtype=np.int64)
    sub = masks[(masks & ~Emask) == 0]
    excess = float(np.max(mass[sub] - T[sub] * (1 + rtol)))
    rest = full & ~Emask
    ok = excess <= 1e-15 and T[rest] <= mass[rest] * (1 + rtol) + 1e-15
    return Check("decomposition", max(excess, float(T[rest] - mass[rest])), 0.0, bool(ok))


@dataclass
class StrongApprox:
    E: tuple[int, ...]
    delta: float
    pieces: list[tuple[int, ...]]
    deltas: list[float]
    removed: float


def strong_approx(mu: PointMeasure, alpha: float, s: float, eps: float, beta: float,
                  delta0: float | None = None, max_rounds: int = 60, theta: float = 0.5,
                  rho: float = 0.0) -> StrongApprox:
    """Atoms ``E`` and a scale ``delta`` with ``mu|E <= beta H^s_delta`` and ``mu(rest) <= eps``.

    Decompose the remaining atoms against ``beta H^s_{delta_n}`` along
    ``delta_n = delta0 2**-n``; keep each piece, and finish with a scale no
    larger than any ``delta_n`` used and half the gap between pieces so that
    the content adds up across them.  A bare atom has zero ``s``-content for
    ``s > 0``, so atomic measures need ``s = 0`` or a resolution ``rho > 0``.
    """
    if not beta > alpha > 0 or not eps > 0:
        raise ValueError("need beta > alpha > 0 and eps > 0")
    # strictly below half the separation so no pair of atoms fits one ball
    sep = min_separation(mu.points) / 2 * (1 - 1e-9)
    if not frostman_check(mu, alpha, s, sep if np.isfinite(sep) else 1.0, rho):
        raise ValueError("mu is not below alpha H^s at the scale of its support")
    m = len(mu)
    d0 = delta0 if delta0 is not None else max(diameter(mu.points), 1.0)
    R = list(range(m))
    pieces: list[tuple[int, ...]] = []
    deltas: list[float] = []
    for n in range(max_rounds):
        if sum(mu.weights[R]) <= eps / 2 or not R:
            break
        dn = d0 * 2.0**-n
        T = content_oracle(mu.points, s, dn, beta, rho)
        E = greedy_decompose(mu, T, theta, support=R)
        if E:
            pieces.append(E)
            deltas.append(dn)
        R = [i for i in R if i not in E]
    else:
        raise RuntimeError("strong approximation did not reach eps within the round budget")
    E = tuple(sorted(i for p in pieces for i in p))
    # only pairs drawn from distinct pieces constrain the final scale
    gaps = [_cross_gap(mu.points, a, b) / 2 for a, b in combinations(pieces, 2)]
    delta = min(deltas + gaps) if deltas else d0
    return StrongApprox(E, delta, pieces, deltas, float(sum(mu.weights[R])))


def _cross_gap(points: np.ndarray, a, b) -> float:
    pa, pb = points[list(a)], points[list(b)]
    return float(np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1).min())


def approximating_sequence(mu: PointMeasure, alpha: float, s: float, eps_seq, beta_seq, beta_bar_seq,
                           rho: float = 0.0):
    """Measures ``mu_n = (alpha / bar beta_n) mu|E_n`` below ``mu`` with density below ``alpha``.

    Returns rows ``(mu_n, alpha_n, delta_n, tv(mu - mu_n), bound)``.
    """
    out = []
    for e, b, bb in zip(eps_seq, beta_seq, beta_bar_seq):
        if not alpha < b < bb:
            raise ValueError("need alpha < beta_n < bar beta_n")
        sa = strong_approx(mu, alpha, s, e, b, rho=rho)
        mu_n = mu.restrict(sa.E).scale(alpha / bb)
        tv = float(np.abs(mu.weights - mu_n.weights).sum())
        bound = (bb - alpha) / alpha * mu.total + e
        out.append((mu_n, alpha * b / bb, sa.delta, tv, bound))
    return out


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


def _atom_distances(mu: PointMeasure, x, d: float) -> np.ndarray:
    rho = np.linalg.norm(mu.points - np.asarray(x, dtype=float), axis=1)
    live = mu.weights > 0
    if np.any(live & (rho == 0)):
        raise ValueError("potential is infinite at an atom")
    if np.any(live & (rho > d)):
        raise ValueError("d must reach every atom")
    return rho


def radial_potential(mu: PointMeasure, x, d: float, N: int | None = None) -> float:
    """``(1 / N omega_N) int_0^d mu(B(x, r)) / r**(N-1) dr``, integrated piece by piece.

    ``mu(B(x, r))`` is constant between consecutive atom distances.
    """
    N = mu.dim if N is None else N
    if N < 2:
        raise ValueError("need N >= 2")
    rho = _atom_distances(mu, x, d)
    order = np.argsort(rho)
    r_sorted, w_sorted = rho[order], mu.weights[order]
    cum = np.cumsum(w_sorted)
    edges = np.append(r_sorted, d)

    def prim(r):
        return np.log(r) if N == 2 else r ** (2 - N) / (2 - N)

    total = 0.0
    for k in range(len(r_sorted)):
        a, b = edges[k], edges[k + 1]
        if b > a and cum[k] != 0:
            total += cum[k] * (prim(b) - prim(a))
    return float(total / (N * omega(N)))


def kernel_potential(mu: PointMeasure, x, d: float, N: int | None = None) -> float:
    """``sum w (|x-y|**(2-N) - d**(2-N)) / (N (N-2) omega_N)``, or the ``log(d/|x-y|) / 2 pi`` form."""
    N = mu.dim if N is None else N
    if N < 2:
        raise ValueError("need N >= 2")
    rho = _atom_distances(mu, x, d)
    w = mu.weights
    live = w > 0
    if N == 2:
        return float(np.sum(w[live] * np.log(d / rho[live])) / (2 * math.pi))
    return float(np.sum(w[live] * (rho[live] ** (2 - N) - d ** (2 - N))) / (N * (N - 2) * omega(N)))


def brezis_merle_bound(m: float, d: float) -> float:
    """``pi d**2 / (1 - m / 4 pi)``: bound on ``int exp(v)`` for a potential of mass ``m < 4 pi``."""
    if m < 0 or d <= 0:
        raise ValueError("need m >= 0 and d > 0")
    if m >= 4 * math.pi:
        raise ValueError("mass must stay below 4 pi")
    return math.pi * d * d / (1 - m / (4 * math.pi))


# ---------------------------------------------------------------------------
# one-dimensional logarithmic estimate
# ---------------------------------------------------------------------------


def _power_integral(c: float, a: float, b: float, q: float) -> float:
    """``int_a^b c r**q dr``, stable when ``q`` is near ``-1``."""
    if c == 0 or b <= a:
        return 0.0
    k = q + 1
    if a == 0:
        return c * b**k / k if k > 0 else np.inf
    t = k * math.log(a / b)
    return c * b**k * (-math.expm1(t)) / k if k != 0 else c * math.log(b / a)


@dataclass(frozen=True)
class PiecewisePower:
    """``f(r) = coef[k] r**expo[k]`` on ``(breaks[k], breaks[k+1]]``, ``f(0) = 0``."""

    breaks: tuple[float, ...]
    coef: tuple[float, ...]
    expo: tuple[float, ...]

    def __post_init__(self):
        b = self.breaks
        if len(b) != len(self.coef) + 1 or len(self.coef) != len(self.expo):
            raise ValueError("need one coefficient and exponent per piece")
        if b[0] != 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("breaks must start at 0 and increase")

    @property
    def d(self) -> float:
        return self.breaks[-1]

    def __call__(self, r: float) -> float:
        if r <= 0:
            return 0.0
        k = int(np.searchsorted(self.breaks, r, side="left")) - 1
        k = min(max(k, 0), len(self.coef) - 1)
        return self.coef[k] * r ** self.expo[k]

    def integral(self, q: float) -> float:
        """``int_0^d f(r) r**q dr``."""
        return sum(_power_integral(c, a, b, e + q)
                   for c, e, a, b in zip(self.coef, self.expo, self.breaks, self.breaks[1:]))

    def admissible(self, alpha: float, s: float, rtol: float = 1e-12) -> bool:
        """Nonnegative, nondecreasing and ``f <= alpha r**s`` on ``[0, d]``."""
        prev = 0.0
        for c, e, a, b in zip(self.coef, self.expo, self.breaks, self.breaks[1:]):
            if c < 0 or (c > 0 and e < 0):
                return False
            left = c * a**e if a > 0 else (c if e == 0 else 0.0)
            if left < prev * (1 - rtol):
                return False
            prev = c * b**e
            if c > 0:
                # c r**(e-s) <= alpha is monotone in r, so the endpoints decide
                if a == 0 and e < s:
                    return False
                for r in (a, b):
                    if r > 0 and c * r**e > alpha * r**s * (1 + rtol):
                        return False
        return True


def step_function(breaks, values) -> PiecewisePower:
    return PiecewisePower(tuple(breaks), tuple(values), tuple(0.0 for _ in values))


def f_eps(alpha: float, s: float, eps: float, d: float = 1.0) -> PiecewisePower:
    """``alpha r**s`` on ``[eps, d]`` and zero below."""
    return PiecewisePower((0.0, eps, d), (0.0, alpha), (0.0, s))


def blop_1d_check(f: PiecewisePower, alpha: float, s: float) -> Check:
    """``int f / r**(s+1) <= log(1 + C d**alpha int f / r**(s+1+alpha))`` with ``C = s d**s / f(d) + 1``."""
    if not f.admissible(alpha, s):
        raise ValueError("f must be nondecreasing with 0 <= f <= alpha r**s")
    d = f.d
    lhs = f.integral(-s - 1)
    fd = f(d)
    C = s * d**s / fd + 1 if fd > 0 else 1.0
    inner = f.integral(-s - 1 - alpha)
    rhs = math.log1p(C * d**alpha * inner) if np.isfinite(inner) else np.inf
    return Check("blop_1d", lhs, rhs, lhs <= rhs * (1 + 1e-12) + 1e-15)
