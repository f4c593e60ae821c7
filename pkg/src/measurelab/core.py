"""Grid domains, grid functions, discrete measures and nonlinearities.

Everything downstream works with the interior nodes of a uniform grid.
Boundary nodes always carry the value zero and are never stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Check:
    """Outcome of a numerical inequality check ``lhs <= rhs``."""

    name: str
    lhs: float
    rhs: float
    passed: bool

    def row(self) -> str:
        return f"{self.name},{self.lhs:.12g},{self.rhs:.12g},{int(self.passed)}"


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """Uniform grid on an axis-aligned box, optionally masked to a centered ball.

    ``shape='ball'`` keeps the nodes strictly inside the largest ball centered
    at the box midpoint; all other grid nodes are boundary nodes.
    """

    dim: int
    bounds: tuple[tuple[float, float], ...]
    h: float
    shape: str = "box"

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.bounds) != self.dim:
            raise ValueError("need one (lo, hi) interval per axis")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if self.shape not in ("box", "ball"):
            raise ValueError(f"unknown shape {self.shape!r}")
        for lo, hi in self.bounds:
            m = (hi - lo) / self.h
            if abs(m - round(m)) > 1e-8 * max(1.0, m):
                raise ValueError(f"interval ({lo}, {hi}) is not a multiple of h={self.h}")
            if round(m) + 1 < 3:
                raise ValueError("need at least 3 nodes per axis")
        if self.n_interior < 1:
            raise ValueError("domain has no interior node")

    @classmethod
    def box(cls, dim: int, h: float, lo: float = 0.0, hi: float = 1.0) -> "Domain":
        return cls(dim, tuple((float(lo), float(hi)) for _ in range(dim)), float(h), "box")

    @classmethod
    def ball(cls, dim: int, h: float, radius: float = 1.0) -> "Domain":
        r = float(radius)
        return cls(dim, tuple((-r, r) for _ in range(dim)), float(h), "ball")

    def refine(self, h: float) -> "Domain":
        return Domain(self.dim, self.bounds, float(h), self.shape)

    # -- grid geometry ------------------------------------------------------

    @cached_property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(int(round((hi - lo) / self.h)) + 1 for lo, hi in self.bounds)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(lo + self.h * np.arange(m) for (lo, _), m in zip(self.bounds, self.grid_shape))

    @cached_property
    def center(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.bounds])

    @cached_property
    def radius(self) -> float:
        """Ball radius (only meaningful for ``shape='ball'``)."""
        return min(hi - lo for lo, hi in self.bounds) / 2

    @cached_property
    def mask(self) -> np.ndarray:
        """Boolean array over the full grid, True at interior nodes."""
        m = np.zeros(self.grid_shape, dtype=bool)
        m[(slice(1, -1),) * self.dim] = True
        if self.shape == "ball":
            grids = np.meshgrid(*self.axes, indexing="ij")
            r2 = sum((g - c) ** 2 for g, c in zip(grids, self.center))
            m &= r2 < self.radius**2 * (1 - 1e-12)
        m.setflags(write=False)
        return m

    @cached_property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    @cached_property
    def index(self) -> np.ndarray:
        """Full-grid array mapping interior nodes to 0..n-1, -1 elsewhere."""
        idx = -np.ones(self.grid_shape, dtype=np.int64)
        idx[self.mask] = np.arange(self.n_interior)
        idx.setflags(write=False)
        return idx

    @cached_property
    def multi_index(self) -> np.ndarray:
        """(n_interior, dim) integer grid indices of the interior nodes, node-major order."""
        return np.argwhere(self.mask)

    @cached_property
    def coords(self) -> np.ndarray:
        """(n_interior, dim) coordinates of the interior nodes."""
        lo = np.array([b[0] for b in self.bounds])
        return lo + self.h * self.multi_index

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    def contains(self, point: Sequence[float]) -> bool:
        """True if ``point`` lies in the open domain."""
        p = np.asarray(point, dtype=float)
        if p.shape != (self.dim,):
            return False
        if self.shape == "ball":
            return float(np.sum((p - self.center) ** 2)) < self.radius**2
        return all(lo < x < hi for x, (lo, hi) in zip(p, self.bounds))

    def boundary_distance(self) -> np.ndarray:
        """Distance from each interior node to the continuous boundary."""
        if self.shape == "ball":
            return self.radius - np.linalg.norm(self.coords - self.center, axis=1)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.minimum(self.coords - lo, hi - self.coords).min(axis=1)

    # -- operators ------------------------------------------------------------

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Sparse matrix of the (2*dim+1)-point stencil for -Laplacian with zero boundary data."""
        n, h2 = self.n_interior, self.h**2
        mi = self.multi_index
        rows, cols = [np.arange(n)], [np.arange(n)]
        vals = [np.full(n, 2.0 * self.dim / h2)]
        for ax in range(self.dim):
            for step in (-1, 1):
                nb = mi.copy()
                nb[:, ax] += step
                j = self.index[tuple(nb.T)]
                ok = j >= 0
                rows.append(np.flatnonzero(ok))
                cols.append(j[ok])
                vals.append(np.full(int(ok.sum()), -1.0 / h2))
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        A.sort_indices()
        return A

    @cached_property
    def interior_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Pairs (i, j) of interior nodes joined by a grid edge, each edge once."""
        mi = self.multi_index
        I, J = [], []
        for ax in range(self.dim):
            nb = mi.copy()
            nb[:, ax] += 1
            j = self.index[tuple(nb.T)]
            ok = j >= 0
            I.append(np.flatnonzero(ok))
            J.append(j[ok])
        return np.concatenate(I), np.concatenate(J)

    @cached_property
    def boundary_edge_count(self) -> np.ndarray:
        """Number of stencil neighbours of each interior node that are boundary nodes."""
        I, J = self.interior_edges
        deg = np.bincount(I, minlength=self.n_interior) + np.bincount(J, minlength=self.n_interior)
        return 2 * self.dim - deg

    def nearest_interior(self, point: Sequence[float]) -> int:
        """Index of the interior node nearest to ``point``; ties go to the lowest index."""
        p = np.asarray(point, dtype=float)
        d2 = np.sum((self.coords - p) ** 2, axis=1)
        return int(np.argmin(d2))

    def header(self) -> str:
        b = " ".join(f"{lo:.17g} {hi:.17g}" for lo, hi in self.bounds)
        return f"{self.dim} {self.h:.17g} {b} {self.shape}"


# ---------------------------------------------------------------------------
# Grid functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction:
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.domain.n_interior:
            raise ValueError(f"expected {self.domain.n_interior} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, domain: Domain) -> "GridFunction":
        return cls(domain, np.zeros(domain.n_interior))

    @classmethod
    def sample(cls, domain: Domain, f: Callable[..., np.ndarray]) -> "GridFunction":
        """Evaluate ``f(x, y, ...)`` at the interior nodes."""
        return cls(domain, f(*domain.coords.T))

    def full(self) -> np.ndarray:
        """Values on the full grid, zero on boundary nodes."""
        out = np.zeros(self.domain.grid_shape)
        out[self.domain.mask] = self.values
        return out

    def _wrap(self, v) -> "GridFunction":
        return GridFunction(self.domain, v)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise ValueError("grid functions live on different domains")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    def positive_part(self) -> "GridFunction":
        return self._wrap(np.maximum(self.values, 0.0))

    def negative_part(self) -> "GridFunction":
        return self._wrap(np.maximum(-self.values, 0.0))

    def __len__(self) -> int:
        return self.values.size


def laplacian_apply(u: GridFunction) -> GridFunction:
    """Apply the stencil for -Laplacian: ``(2*dim*u_i - sum of neighbours) / h**2``.

    Evaluated on the zero-padded full grid with a fixed operation order, so
    the result is monotone in each neighbour value in floating point too.
    """
    dom = u.domain
    U = u.full()
    acc = np.zeros_like(U)
    for ax in range(dom.dim):
        fwd = [slice(None)] * dom.dim
        bwd = [slice(None)] * dom.dim
        fwd[ax], bwd[ax] = slice(1, None), slice(None, -1)
        acc[tuple(bwd)] += U[tuple(fwd)]
        acc[tuple(fwd)] += U[tuple(bwd)]
    F = (2.0 * dom.dim * U - acc) / dom.h**2
    return GridFunction(dom, F[dom.mask])


def truncate(u: GridFunction, kappa: float) -> GridFunction:
    """Clamp values to ``[-kappa, kappa]``."""
    if kappa < 0:
        raise ValueError("truncation level must be nonnegative")
    return GridFunction(u.domain, np.clip(u.values, -kappa, kappa))


def norms(u: GridFunction) -> dict[str, float]:
    w = u.domain.cell_volume
    a = np.abs(u.values)
    return {
        "l1": float(w * a.sum()),
        "l2": float(math.sqrt(w * np.sum(a**2))),
        "linf": float(a.max(initial=0.0)),
    }


def dist_fn(u: GridFunction, t: float) -> float:
    """Lebesgue measure of ``{|u| > t}``."""
    return float(u.domain.cell_volume * np.count_nonzero(np.abs(u.values) > t))


def dirichlet_energy(u: GridFunction) -> float:
    """Sum over grid edges of ``(u_i - u_j)**2 * h**(dim-2)``, boundary values zero."""
    dom = u.domain
    I, J = dom.interior_edges
    v = u.values
    e = np.sum((v[I] - v[J]) ** 2) + np.sum(dom.boundary_edge_count * v**2)
    return float(e * dom.h ** (dom.dim - 2))


def gradient_magnitude(u: GridFunction) -> np.ndarray:
    """Forward-difference gradient length at every node of the full grid (flattened).

    Every grid edge appears exactly once, so ``h**dim * sum(|Du|**2)`` equals
    :func:`dirichlet_energy`.
    """
    dom = u.domain
    U = u.full()
    sq = np.zeros_like(U)
    for ax in range(dom.dim):
        d = np.diff(U, axis=ax) / dom.h
        pad = [(0, 0)] * dom.dim
        pad[ax] = (0, 1)
        sq += np.pad(d, pad) ** 2
    return np.sqrt(sq).reshape(-1)


def gradient_norm(u: GridFunction, q: float) -> float:
    g = gradient_magnitude(u)
    return float((u.domain.cell_volume * np.sum(g**q)) ** (1.0 / q))


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    point: tuple[float, ...]
    weight: float
    singular: bool = False


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms plus an optional density on the interior nodes.

    The concentrated part is the set of atoms flagged ``singular``; everything
    else (other atoms and the density) is the diffuse part.
    """

    domain: Domain
    atoms: tuple[Atom, ...] = ()
    density: GridFunction | None = None

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        for a in atoms:
            if not self.domain.contains(a.point):
                raise ValueError(f"atom at {a.point} is not inside the open domain")
            if not math.isfinite(a.weight):
                raise ValueError("atom weights must be finite")
        object.__setattr__(self, "atoms", tuple(Atom(tuple(map(float, a.point)), float(a.weight), bool(a.singular)) for a in atoms))
        if self.density is not None and self.density.domain != self.domain:
            raise ValueError("density lives on a different domain")

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, domain: Domain) -> "DiscreteMeasure":
        return cls(domain)

    @classmethod
    def dirac(cls, domain: Domain, point, weight: float = 1.0, singular: bool = False):
        return cls(domain, (Atom(tuple(np.atleast_1d(point).astype(float)), weight, singular),))

    @classmethod
    def from_density(cls, density: GridFunction) -> "DiscreteMeasure":
        return cls(density.domain, (), density)

    # -- accessors -------------------------------------------------------------

    @property
    def density_values(self) -> np.ndarray:
        if self.density is None:
            return np.zeros(self.domain.n_interior)
        return self.density.values

    def tv_norm(self) -> float:
        a = sum(abs(x.weight) for x in self.atoms)
        return float(a + self.domain.cell_volume * np.abs(self.density_values).sum())

    def total_mass(self) -> float:
        a = sum(x.weight for x in self.atoms)
        return float(a + self.domain.cell_volume * self.density_values.sum())

    def concentrated(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.domain, tuple(a for a in self.atoms if a.singular))

    def diffuse(self) -> "DiscreteMeasure":
        return DiscreteMeasure(self.domain, tuple(a for a in self.atoms if not a.singular), self.density)

    def is_nonnegative(self) -> bool:
        return all(a.weight >= 0 for a in self.atoms) and bool(np.all(self.density_values >= 0))

    def is_nonpositive(self) -> bool:
        return all(a.weight <= 0 for a in self.atoms) and bool(np.all(self.density_values <= 0))

    # -- arithmetic (atoms aligned by exact coordinates) --------------------

    def _atom_table(self) -> dict[tuple[float, ...], list]:
        table: dict[tuple[float, ...], list] = {}
        for a in self.atoms:
            entry = table.setdefault(a.point, [0.0, False])
            entry[0] += a.weight
            entry[1] = entry[1] or a.singular
        return table

    def _combine(self, other: "DiscreteMeasure", op) -> "DiscreteMeasure":
        if other.domain != self.domain:
            raise ValueError("measures live on different domains")
        ta, tb = self._atom_table(), other._atom_table()
        atoms = []
        for p in sorted(set(ta) | set(tb)):
            wa, sa = ta.get(p, (0.0, False))
            wb, sb = tb.get(p, (0.0, False))
            w = op(wa, wb)
            if w != 0.0:
                atoms.append(Atom(p, float(w), sa or sb))
        dens = None
        if self.density is not None or other.density is not None:
            dens = GridFunction(self.domain, op(self.density_values, other.density_values))
        return DiscreteMeasure(self.domain, tuple(atoms), dens)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def scale(self, c: float) -> "DiscreteMeasure":
        dens = None if self.density is None else self.density * c
        return DiscreteMeasure(self.domain, tuple(Atom(a.point, c * a.weight, a.singular) for a in self.atoms), dens)

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, c: float):
        return self.scale(c)

    __rmul__ = __mul__

    def positive_part(self) -> "DiscreteMeasure":
        return measure_lattice(self, DiscreteMeasure.zero(self.domain), "max")

    def negative_part(self) -> "DiscreteMeasure":
        """``max(-mu, 0)`` (a nonnegative measure)."""
        return -measure_lattice(self, DiscreteMeasure.zero(self.domain), "min")

    def le(self, other: "DiscreteMeasure", tol: float = 0.0) -> bool:
        """Lattice order: atomwise and nodewise ``self <= other + tol``."""
        d = other - self
        return all(a.weight >= -tol for a in d.atoms) and bool(np.all(d.density_values >= -tol))


def project_measure(mu: DiscreteMeasure) -> GridFunction:
    """Density on the interior nodes with the same total signed mass as ``mu``.

    Each atom of weight ``w`` becomes ``w / h**dim`` at its nearest interior node.
    """
    dom = mu.domain
    v = np.array(mu.density_values, dtype=float)
    for a in mu.atoms:
        v[dom.nearest_interior(a.point)] += a.weight / dom.cell_volume
    return GridFunction(dom, v)


def atom_nodes(mu: DiscreteMeasure) -> list[int]:
    return [mu.domain.nearest_interior(a.point) for a in mu.atoms]


def _bump(r2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def mollify(mu: DiscreteMeasure, eps: float) -> DiscreteMeasure:
    """Spread every atom and every density node over the interior nodes within ``eps``.

    Each source is spread with the standard bump kernel renormalised over the
    interior nodes it reaches, so total mass is preserved exactly and the total
    variation can only decrease.
    """
    dom = mu.domain
    if eps < dom.h:
        raise ValueError("mollification radius must be at least h")
    X = dom.coords
    out = np.zeros(dom.n_interior)

    def spread(point, mass):
        r2 = np.sum((X - point) ** 2, axis=1) / eps**2
        k = _bump(r2)
        s = k.sum()
        if s == 0.0:
            out[dom.nearest_interior(point)] += mass / dom.cell_volume
        else:
            out[:] += mass * k / (s * dom.cell_volume)

    for a in mu.atoms:
        spread(np.asarray(a.point), a.weight)
    dens = mu.density_values
    for i in np.flatnonzero(dens):
        spread(X[i], dens[i] * dom.cell_volume)
    return DiscreteMeasure(dom, (), GridFunction(dom, out))


def measure_lattice(mu: DiscreteMeasure, nu: DiscreteMeasure, op: str) -> DiscreteMeasure:
    """Pointwise max or min of two measures.

    Atoms and densities are mutually singular, so the lattice operation acts
    atomwise on the atomic parts and nodewise on the densities.
    """
    if op not in ("max", "min"):
        raise ValueError(f"op must be 'max' or 'min', got {op!r}")
    if mu.domain != nu.domain:
        raise ValueError("measures live on different domains")
    f = np.maximum if op == "max" else np.minimum
    return mu._combine(nu, f)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------

TEST_LATTICE = np.linspace(-8.0, 8.0, 321)


def _numeric_derivative(g, t):
    step = 1e-6 * np.maximum(1.0, np.abs(t))
    return (g(t + step) - g(t - step)) / (2 * step)


@dataclass(frozen=True)
class Nonlinearity:
    """A continuous ``g`` with primitive ``G(t) = int_0^t g``.

    The declared flags are verified on a sample lattice at construction.
    """

    g: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    sign_condition: bool = True
    nondecreasing: bool = True
    family: str = "custom"
    params: tuple = ()
    dg: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    lattice: np.ndarray = field(default_factory=lambda: TEST_LATTICE, compare=False, repr=False)

    def __post_init__(self):
        t = self.lattice
        with np.errstate(over="ignore", invalid="ignore"):
            gt = np.asarray(self.g(t), dtype=float)
            if self.sign_condition and np.any(gt * t < 0):
                raise ValueError("declared sign condition fails on the test lattice")
            if self.nondecreasing and np.any(np.diff(gt) < -1e-12 * (1 + np.abs(gt[1:]))):
                raise ValueError("declared monotonicity fails on the test lattice")
            if abs(float(self.G(np.array([0.0]))[0])) > 1e-12:
                raise ValueError("primitive must vanish at 0")
            step = 1e-5
            fd = (self.G(t + step) - self.G(t - step)) / (2 * step)
            ok = np.isfinite(fd) & np.isfinite(gt)
            if np.any(np.abs(fd[ok] - gt[ok]) > 1e-5 * (1 + np.abs(gt[ok]))):
                raise ValueError("primitive derivative does not match g on the test lattice")

    def __call__(self, t):
        return self.g(np.asarray(t, dtype=float))

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.dg is not None:
            return self.dg(t)
        return _numeric_derivative(self.g, t)

    def truncated(self, n: float) -> "Nonlinearity":
        """``min(g, n)``; requires the sign condition and ``g`` nondecreasing on ``t >= 0``."""
        return _truncated(self, float(n))

    def frozen(self, lo, hi) -> "Nonlinearity":
        """``g`` held constant outside ``[lo, hi]`` (scalars or node arrays)."""
        return _frozen(self, lo, hi)


def polynomial(p: float) -> Nonlinearity:
    """``g(t) = |t|**(p-1) * t``."""
    if p <= 0:
        raise ValueError("exponent must be positive")
    return Nonlinearity(
        g=lambda t: np.abs(t) ** (p - 1) * t,
        G=lambda t: np.abs(t) ** (p + 1) / (p + 1),
        dg=lambda t: p * np.abs(t) ** (p - 1),
        family="polynomial",
        params=(float(p),),
    )


def exponential() -> Nonlinearity:
    """``g(t) = exp(t) - 1``."""
    return Nonlinearity(
        g=lambda t: np.expm1(t),
        G=lambda t: np.expm1(t) - t,
        dg=lambda t: np.exp(t),
        family="exponential",
    )


def linear(c: float = 1.0) -> Nonlinearity:
    if c < 0:
        raise ValueError("slope must be nonnegative")
    return Nonlinearity(
        g=lambda t: c * t,
        G=lambda t: 0.5 * c * t**2,
        dg=lambda t: np.full_like(t, c, dtype=float),
        family="polynomial",
        params=(1.0, float(c)),
    )


def zero() -> Nonlinearity:
    return linear(0.0)


def arctan() -> Nonlinearity:
    """A bounded nondecreasing nonlinearity, ``|g| < pi/2``."""
    return Nonlinearity(
        g=np.arctan,
        G=lambda t: t * np.arctan(t) - 0.5 * np.log1p(t**2),
        dg=lambda t: 1.0 / (1.0 + t**2),
        family="custom",
        params=("arctan",),
    )


def _truncated(base: Nonlinearity, n: float) -> Nonlinearity:
    if not base.sign_condition:
        raise ValueError("truncation ladder needs the sign condition")
    if n <= 0:
        raise ValueError("truncation level must be positive")
    # crossing point t* with g(t*) = n on t > 0, bracketed by doubling
    hi = 1.0
    with np.errstate(over="ignore"):
        while float(base(hi)) < n and hi < 1e100:
            hi *= 2.0
    if float(base(hi)) < n:
        # n exceeds sup g (as far as floats can tell): nothing to truncate
        return base
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(base(mid)) < n:
            lo = mid
        else:
            hi = mid
    tstar = hi
    Gstar = float(base.G(np.array([tstar]))[0])

    def g(t):
        with np.errstate(over="ignore"):
            return np.minimum(base.g(t), n)

    def G(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            inner = base.G(np.minimum(t, tstar))
        return np.where(t > tstar, Gstar + n * (t - tstar), inner)

    def dg(t):
        with np.errstate(over="ignore", invalid="ignore"):
            d = base.derivative(np.minimum(t, tstar))
        return np.where(t >= tstar, 0.0, d)

    return Nonlinearity(
        g=g, G=G, dg=dg,
        sign_condition=True,
        nondecreasing=base.nondecreasing,
        family=f"{base.family}-truncated",
        params=base.params + (n,),
        lattice=base.lattice,
    )


def _frozen(base: Nonlinearity, lo, hi) -> Nonlinearity:
    lo_a = np.asarray(lo, dtype=float)
    hi_a = np.asarray(hi, dtype=float)
    if np.any(lo_a > hi_a):
        raise ValueError("freezing interval is empty")
    scalar = lo_a.ndim == 0 and hi_a.ndim == 0

    def g(t):
        return base.g(np.clip(t, lo_a, hi_a))

    def Ghat(t):
        c = np.clip(t, lo_a, hi_a)
        return base.G(c) + base.g(c) * (t - c)

    def G(t):
        t = np.asarray(t, dtype=float)
        return Ghat(t) - Ghat(np.zeros_like(t))

    def dg(t):
        t = np.asarray(t, dtype=float)
        inside = (t > lo_a) & (t < hi_a)
        return np.where(inside, base.derivative(np.clip(t, lo_a, hi_a)), 0.0)

    # node-dependent freezing cannot be checked on a scalar lattice
    return Nonlinearity(
        g=g, G=G, dg=dg,
        sign_condition=base.sign_condition if scalar and lo_a <= 0 <= hi_a else False,
        nondecreasing=base.nondecreasing if scalar else False,
        family=f"{base.family}-frozen",
        params=base.params,
        lattice=base.lattice if scalar else np.array([0.0]),
    )


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def parse_header(line: str) -> Domain:
    parts = line.split()
    dim = int(parts[0])
    h = float(parts[1])
    nums = parts[2 : 2 + 2 * dim]
    if len(nums) != 2 * dim:
        raise ValueError("header must list lo hi for every axis")
    bounds = tuple((float(nums[2 * k]), float(nums[2 * k + 1])) for k in range(dim))
    shape = parts[2 + 2 * dim] if len(parts) > 2 + 2 * dim else "box"
    return Domain(dim, bounds, h, shape)


def format_measure(mu: DiscreteMeasure) -> str:
    lines = [mu.domain.header()]
    for a in mu.atoms:
        coords = " ".join(f"{x:.17g}" for x in a.point)
        lines.append(f"atom {coords} {a.weight:.17g}" + (" singular" if a.singular else ""))
    if mu.density is not None:
        lines.append("density " + " ".join(f"{v:.17g}" for v in mu.density.values))
    return "\n".join(lines) + "\n"


def parse_measure(text: str) -> DiscreteMeasure:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty measure file")
    dom = parse_header(lines[0])
    atoms, density = [], None
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "atom":
            singular = parts[-1] == "singular"
            nums = parts[1:-1] if singular else parts[1:]
            if len(nums) != dom.dim + 1:
                raise ValueError(f"bad atom line: {ln!r}")
            atoms.append(Atom(tuple(float(x) for x in nums[:-1]), float(nums[-1]), singular))
        elif parts[0] == "density":
            density = GridFunction(dom, np.array([float(x) for x in parts[1:]]))
        else:
            raise ValueError(f"unknown record {parts[0]!r}")
    return DiscreteMeasure(dom, tuple(atoms), density)


def write_measure(mu: DiscreteMeasure, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_measure(mu))


def read_measure(path) -> DiscreteMeasure:
    with open(path) as fh:
        return parse_measure(fh.read())


def format_grid_csv(u: GridFunction) -> str:
    """Node-major CSV: one row per interior node, coordinates then value."""
    names = ["x", "y", "z"][: u.domain.dim]
    rows = [",".join(names + ["u"])]
    for x, v in zip(u.domain.coords, u.values):
        rows.append(",".join(f"{c:.12g}" for c in x) + f",{v:.12g}")
    return "\n".join(rows) + "\n"


def parse_grid_csv(text: str, domain: Domain) -> GridFunction:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    vals = [float(ln.split(",")[-1]) for ln in lines[1:]]
    return GridFunction(domain, np.array(vals))


def as_node_set(domain: Domain, nodes: Iterable[int] | np.ndarray) -> np.ndarray:
    """Boolean interior mask from an index list or a mask."""
    arr = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes)
    if arr.dtype == bool:
        if arr.size != domain.n_interior:
            raise ValueError("node mask has the wrong length")
        return arr.copy()
    m = np.zeros(domain.n_interior, dtype=bool)
    if arr.size:
        if arr.min() < 0 or arr.max() >= domain.n_interior:
            raise ValueError("node index outside the interior")
        m[arr.astype(int)] = True
    return m
