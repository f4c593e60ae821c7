"""Command line runner: ``measurelab <subcommand> [--config PATH] [--out DIR]``.

Exit status is 0 when every declared check passes, 2 when a check fails and
1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

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
    Nonlinearity,
    arctan,
    exponential,
    format_grid_csv,
    linear,
    polynomial,
    read_measure,
    zero,
)
from .linear import check_interpolation, check_weak_max, solve_linear

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class ConfigError(ValueError):
    pass


def parse_real(text: str) -> float:
    """A float, ``inf``, or a multiple of pi such as ``2pi`` or ``4.5pi``."""
    t = text.strip().lower()
    try:
        if t.endswith("pi"):
            head = t[:-2].strip().rstrip("*")
            return (float(head) if head else 1.0) * math.pi
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_list(text: str) -> list[float]:
    return [parse_real(x) for x in text.replace(",", " ").split()]


def parse_nonlinearity(spec: str) -> Nonlinearity:
    """``poly:p``, ``exp``, ``linear:c``, ``zero`` or ``arctan``."""
    name, _, arg = spec.strip().partition(":")
    try:
        if name == "poly":
            return polynomial(parse_real(arg))
        if name == "exp":
            return exponential()
        if name == "linear":
            return linear(parse_real(arg) if arg else 1.0)
        if name == "zero":
            return zero()
        if name == "arctan":
            return arctan()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    raise ConfigError(f"unknown nonlinearity {spec!r}")


@dataclass
class ExperimentConfig:
    subcommand: str = ""
    dim: int | None = None
    h: list[float] = field(default_factory=list)
    lo: float = 0.0
    hi: float = 1.0
    shape: str = "box"
    radius: float = 1.0
    atoms: list[tuple[tuple[float, ...], float, bool]] = field(default_factory=list)
    density: float | None = None
    measure_file: str | None = None
    g: str = "poly:3"
    route: str = "bracket"
    tol: float | None = None
    max_iter: int = 500
    theta: float = 0.5
    levels: list[float] = field(default_factory=lambda: list(red.DEFAULT_LEVELS))
    family: str = "exp"
    params: list[float] = field(default_factory=list)
    points: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    s: float = 0.0
    delta: float = math.inf
    alpha: float = 1.0
    beta: float = 2.0
    eps: list[float] = field(default_factory=lambda: [0.5])
    mode: str = "exact"
    rho: float = 0.0
    K: str = "center"
    s_levels: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    out: str | None = None
    base_dir: Path = Path(".")

    def domains(self) -> list[Domain]:
        if self.dim is None:
            raise ConfigError("dim is required")
        if not self.h:
            raise ConfigError("h is required")
        try:
            if self.shape == "ball":
                return [Domain.ball(self.dim, h, self.radius) for h in self.h]
            if self.shape == "box":
                return [Domain.box(self.dim, h, self.lo, self.hi) for h in self.h]
        except ValueError as e:
            raise ConfigError(str(e)) from None
        raise ConfigError(f"unknown shape {self.shape!r}")

    def measure(self, dom: Domain) -> DiscreteMeasure:
        try:
            if self.measure_file:
                mu = read_measure(self.base_dir / self.measure_file)
                if mu.domain != dom:
                    mu = DiscreteMeasure(dom, mu.atoms)
                return mu
            atoms = tuple(Atom(p, w, sg) for p, w, sg in self.atoms)
            dens = None
            if self.density is not None:
                dens = GridFunction(dom, np.full(dom.n_interior, self.density))
            return DiscreteMeasure(dom, atoms, dens)
        except (ValueError, OSError) as e:
            raise ConfigError(str(e)) from None

    def point_measure(self) -> geom.PointMeasure:
        if self.measure_file and not self.points:
            try:
                mu = read_measure(self.base_dir / self.measure_file)
                return geom.PointMeasure(np.array([a.point for a in mu.atoms]).reshape(-1, mu.domain.dim),
                                         np.array([a.weight for a in mu.atoms]))
            except (ValueError, OSError) as e:
                raise ConfigError(str(e)) from None
        if not self.points:
            raise ConfigError("no points given")
        dims = {len(p) for p, _ in self.points}
        if len(dims) != 1:
            raise ConfigError("points must share one dimension")
        try:
            return geom.PointMeasure(np.array([p for p, _ in self.points]),
                                     np.array([w for _, w in self.points]))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def nonlinearity(self) -> Nonlinearity:
        return parse_nonlinearity(self.g)


_SCALARS = {
    "dim": int, "lo": parse_real, "hi": parse_real, "shape": str, "radius": parse_real,
    "density": parse_real, "measure_file": str, "g": str, "route": str, "tol": parse_real,
    "max_iter": int, "theta": parse_real, "family": str, "s": parse_real, "delta": parse_real,
    "alpha": parse_real, "beta": parse_real, "mode": str, "rho": parse_real, "K": str,
}
_LISTS = {"h", "levels", "params", "eps", "s_levels"}


def _apply(cfg: ExperimentConfig, key: str, value: str) -> None:
    try:
        if key in _SCALARS:
            setattr(cfg, key, _SCALARS[key](value))
        elif key in _LISTS:
            setattr(cfg, key, parse_list(value))
        elif key == "atom":
            parts = value.replace(",", " ").split()
            singular = parts[-1] == "singular"
            nums = [parse_real(x) for x in (parts[:-1] if singular else parts)]
            if len(nums) < 2:
                raise ConfigError("atom needs coordinates and a weight")
            cfg.atoms.append((tuple(nums[:-1]), nums[-1], singular))
        elif key == "point":
            nums = parse_list(value)
            if len(nums) < 2:
                raise ConfigError("point needs coordinates and a weight")
            cfg.points.append((tuple(nums[:-1]), nums[-1]))
        else:
            raise ConfigError(f"unknown key {key!r}")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None


def load_config(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; ``atom`` and ``point`` may repeat."""
    cfg = ExperimentConfig() if cfg is None else cfg
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value")
        _apply(cfg, key.strip(), value.strip())
    return cfg


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def checks_csv(checks: list[Check]) -> str:
    return "check,lhs,rhs,pass\n" + "".join(
        f"{c.name},{c.lhs:.10g},{c.rhs:.10g},{int(c.passed)}\n" for c in checks)


@dataclass
class Outcome:
    files: dict[str, str]
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _default_dirac(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.dim is None:
        cfg.dim, cfg.h, cfg.atoms = 1, [0.25], [((0.5,), 1.0, False)]
    return cfg


def run_solve_linear(cfg: ExperimentConfig) -> Outcome:
    cfg = _default_dirac(cfg)
    files, checks = {}, []
    for dom in cfg.domains():
        mu = cfg.measure(dom)
        rep = solve_linear(dom, mu)
        tag = f"h{dom.h:.6g}"
        files[f"solution_{tag}.csv"] = format_grid_csv(rep.u)
        kappa = max(float(np.abs(rep.u.values).max()) / 2, 1e-300)
        checks += [
            Check(f"residual_{tag}", rep.residual_linf, 1e-8, rep.residual_linf <= 1e-8),
            check_weak_max(rep, mu),
            check_interpolation(rep, mu, kappa),
        ]
    files["checks.csv"] = checks_csv(checks)
    return Outcome(files, checks)


def run_solve_nonlinear(cfg: ExperimentConfig) -> Outcome:
    cfg = _default_dirac(cfg)
    g = cfg.nonlinearity()
    files, checks = {}, []
    for dom in cfg.domains():
        mu = cfg.measure(dom)
        prob = sem.SemilinearProblem(dom, g, mu, cfg.tol, cfg.max_iter, cfg.theta)
        try:
            trace = sem.solve(prob, cfg.route)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        tag = f"h{dom.h:.6g}"
        files[f"trace_{tag}.csv"] = "iter,residual,energy\n" + "".join(
            f"{k},{r:.10g},{e:.10g}\n" for k, r, e in trace.iterates)
        files[f"solution_{tag}.csv"] = format_grid_csv(trace.u)
        checks.append(Check(f"converged_{tag}", trace.residual, prob.tol, trace.converged))
        if g.sign_condition:
            checks.append(sem.check_absorption(trace, mu))
    files["checks.csv"] = checks_csv(checks)
    return Outcome(files, checks)


def run_reduced(cfg: ExperimentConfig) -> Outcome:
    if cfg.dim is None:
        cfg.dim, cfg.shape, cfg.h = 3, "ball", [1 / 8, 1 / 16]
        cfg.atoms = [((0.0, 0.0, 0.0), 1.0, True)]
    g = cfg.nonlinearity()
    rows, checks = [], []
    for dom in cfg.domains():
        mu = cfg.measure(dom)
        r = red.reduced_measure(dom, g, mu, cfg.levels, cfg.tol)
        rows += r.rows()
        tag = f"h{dom.h:.6g}"
        tol = r.levels[-1][2] + 1e-9
        mono = max((float(np.max(b[1].values - a[1].values)) for a, b in zip(r.levels, r.levels[1:])),
                   default=0.0)
        checks += [
            Check(f"ladder_monotone_{tag}", mono, tol, mono <= 10 * tol),
            Check(f"mu_star_below_mu_{tag}", float(r.mu_star.le(mu, 1e-12)), 1.0, r.mu_star.le(mu, 1e-12)),
            Check(f"ladder_converged_{tag}", r.diagnostics["levels_used"], len(cfg.levels), r.converged),
        ]
    files = {"reduced.csv": "h,level,l1_u,tv_mu_star,tv_gamma\n" + "".join(x + "\n" for x in rows),
             "checks.csv": checks_csv(checks)}
    return Outcome(files, checks)


def _scan_one(args):
    family, p, hs = args
    return red.threshold_scan(family, [p], hs)


def run_threshold(cfg: ExperimentConfig, jobs: int = 1) -> Outcome:
    fam = {"exp": "exp", "exponential": "exp", "poly": "poly", "polynomial": "poly"}.get(cfg.family)
    if fam is None:
        raise ConfigError(f"unknown family {cfg.family!r}")
    params = cfg.params or ([2 * math.pi] if fam == "exp" else [2.0, 3.0])
    hs = cfg.h or ([1 / 32, 1 / 64, 1 / 128] if fam == "exp" else [1 / 8, 1 / 16, 1 / 32])
    work = [(fam, p, hs) for p in params]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_scan_one, work))
    else:
        parts = [_scan_one(w) for w in work]
    rows = [r for part in parts for r in part.rows]
    verdict = {p: part.rows[0].classification == "convergent" for p, part in zip(params, parts)}
    crit = red.classification_boundary(verdict)
    checks = []
    if fam == "exp":
        for r in rows:
            if r.param < 4 * math.pi:
                bound = geom.brezis_merle_bound(r.param, 2.0)
                checks.append(Check(f"brezis_merle_c{r.param:.6g}_h{r.h:.6g}", r.statistic, bound,
                                    r.statistic <= 1.1 * bound))
    est = "".join(f"{p:.10g},{part.estimates[p]:.10g}\n" for p, part in zip(params, parts))
    files = {
        "scan.csv": "param,h,statistic,classification\n" + "".join(r.row() + "\n" for r in rows),
        "critical.csv": f"param,critical_estimate\n{est}boundary,{crit:.10g}\n",
        "checks.csv": checks_csv(checks),
    }
    return Outcome(files, checks)


def run_hausdorff(cfg: ExperimentConfig) -> Outcome:
    nu = cfg.point_measure()
    try:
        if cfg.mode == "exact":
            cover = geom.optimal_cover(nu.points, cfg.s, cfg.delta, cfg.rho)
        elif cfg.mode == "greedy":
            cover = geom.greedy_cover(nu.points, cfg.s, cfg.delta, cfg.rho)
        else:
            raise ConfigError(f"unknown mode {cfg.mode!r}")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None
    ok = cover.covers(nu.points, cfg.rho)
    checks = [Check("cover_valid", cover.value, cover.value, ok)]
    files = {"cover.csv": cover.csv(), "value.csv": f"s,delta,mode,value\n{cfg.s:.10g},{cfg.delta:.10g},"
             f"{cfg.mode},{cover.value:.10g}\n", "checks.csv": checks_csv(checks)}
    return Outcome(files, checks)


def run_frostman(cfg: ExperimentConfig) -> Outcome:
    nu = cfg.point_measure()
    fc = geom.frostman_check(nu, cfg.alpha, cfg.s, cfg.delta, cfg.rho)
    checks = []
    if len(nu) <= geom.EXACT_LIMIT:
        so = geom.frostman_subset_oracle(nu, cfg.alpha, cfg.s, cfg.delta, cfg.rho)
        checks.append(Check("frostman_equivalence", float(fc), float(so), fc == so))
    viol = geom.frostman_violations(nu, cfg.alpha, cfg.s, cfg.delta, cfg.rho)
    files = {
        "frostman.csv": f"alpha,s,delta,holds,violations\n{cfg.alpha:.10g},{cfg.s:.10g},{cfg.delta:.10g},"
                        f"{int(fc)},{len(viol)}\n",
        "checks.csv": checks_csv(checks),
    }
    return Outcome(files, checks)


def run_decompose(cfg: ExperimentConfig) -> Outcome:
    nu = cfg.point_measure()
    if len(nu) > geom.EXACT_LIMIT:
        raise ConfigError(f"decomposition limited to {geom.EXACT_LIMIT} atoms")
    T = geom.content_oracle(nu.points, cfg.s, cfg.delta, cfg.beta, cfg.rho)
    E = geom.greedy_decompose(nu, T, cfg.theta)
    chk = geom.verify_decomposition(nu, T, E)
    kept = set(E)
    files = {
        "decompose.csv": "index,weight,kept\n" + "".join(
            f"{i},{w:.10g},{int(i in kept)}\n" for i, w in enumerate(nu.weights)),
        "checks.csv": checks_csv([chk]),
    }
    return Outcome(files, [chk])


def node_set(cfg: ExperimentConfig, dom: Domain) -> np.ndarray:
    spec = cfg.K.strip()
    if spec == "center":
        return np.array([dom.nearest_interior(dom.center)])
    if spec.startswith("block"):
        r = int(spec[5:] or 1)
        c = dom.multi_index[dom.nearest_interior(dom.center)]
        return np.flatnonzero(np.abs(dom.multi_index - c).max(axis=1) <= r)
    if spec.startswith("box:"):
        b = parse_list(spec[4:])
        if len(b) != 2 * dom.dim:
            raise ConfigError("box node set needs lo hi per axis")
        x = dom.coords
        inside = np.ones(len(x), dtype=bool)
        for k in range(dom.dim):
            inside &= (x[:, k] >= b[2 * k]) & (x[:, k] <= b[2 * k + 1])
        return np.flatnonzero(inside)
    if spec == "all":
        return np.arange(dom.n_interior)
    try:
        return np.array([int(v) for v in spec.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"bad node set {spec!r}") from None


def run_capacity(cfg: ExperimentConfig) -> Outcome:
    if cfg.dim is None:
        cfg.dim, cfg.h, cfg.lo, cfg.hi = 2, [1 / 32], -1.0, 1.0
    rows, checks = [], []
    for dom in cfg.domains():
        try:
            res = capm.capacitary_potential(dom, node_set(cfg, dom))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        tag = f"h{dom.h:.6g}"
        mass = capm.nu_mass(res)
        checks.append(Check(f"gauss_identity_{tag}", mass, res.cap,
                            abs(mass - res.cap) <= 1e-8 * max(1.0, res.cap)))
        for e in cfg.eps:
            c = capm.cap_equivalence_check(res, e)
            checks.append(Check(f"cap_equivalence_{tag}_eps{e:.6g}", c.lhs, c.rhs, c.passed))
        rows.append(f"{dom.h:.10g},{len(res.K)},{res.cap:.10g},{mass:.10g}\n")
    files = {"capacity.csv": "h,nodes,cap,nu_mass\n" + "".join(rows), "checks.csv": checks_csv(checks)}
    return Outcome(files, checks)


def run_suite(name: str, seed: int, jobs: int = 1, inject_fault: bool = False) -> Outcome:
    from .suites import SUITES, run_suites

    names = list(SUITES) if name == "all" else [name]
    if any(n not in SUITES for n in names):
        raise ConfigError(f"unknown suite {name!r}")
    rows = run_suites(names, seed, jobs, inject_fault)
    checks = [Check(f"{s}:{p}", lhs, rhs, ok) for s, p, lhs, rhs, ok in rows]
    text = "suite,property,lhs,rhs,pass\n" + "".join(
        f"{s},{p},{lhs:.10g},{rhs:.10g},{int(ok)}\n" for s, p, lhs, rhs, ok in rows)
    return Outcome({"suite.csv": text}, checks)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help="directory for CSV output (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key")
    p = _Parser(prog="measurelab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sub.add_parser("solve-linear", parents=[common])
    sn = sub.add_parser("solve-nonlinear", parents=[common])
    sn.add_argument("--route", choices=sorted(sem.ROUTES))
    sub.add_parser("reduced-measure", parents=[common])
    ts = sub.add_parser("threshold-scan", parents=[common])
    ts.add_argument("--family", choices=["exp", "poly"])
    ts.add_argument("--masses", "--params", dest="params", help="comma list, e.g. 2pi,3pi")
    for name in ("hausdorff", "frostman", "decompose", "capacity"):
        sub.add_parser(name, parents=[common])
    su = sub.add_parser("suite", parents=[common])
    su.add_argument("name", choices=["linear", "semilinear", "reduced", "geom", "capacity", "all"])
    su.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def _emit(files: dict[str, str], out: Path | None) -> None:
    if out is None:
        for name in sorted(files):
            sys.stdout.write(f"# {name}\n{files[name]}")
        return
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "suite":
            outcome = run_suite(args.name, args.seed, args.jobs, args.inject_fault)
        else:
            cfg = ExperimentConfig(subcommand=args.cmd)
            if args.config is not None:
                try:
                    text = args.config.read_text()
                except OSError as e:
                    raise ConfigError(str(e)) from None
                cfg.base_dir = args.config.parent
                load_config(text, cfg)
            for kv in args.set:
                key, sep, value = kv.partition("=")
                if not sep:
                    raise ConfigError(f"--set expects KEY=VALUE, got {kv!r}")
                _apply(cfg, key.strip(), value.strip())
            if getattr(args, "route", None):
                cfg.route = args.route
            if getattr(args, "family", None):
                cfg.family = args.family
            if getattr(args, "params", None):
                cfg.params = parse_list(args.params)
            runner = {
                "solve-linear": run_solve_linear,
                "solve-nonlinear": run_solve_nonlinear,
                "reduced-measure": run_reduced,
                "threshold-scan": lambda c: run_threshold(c, args.jobs),
                "hausdorff": run_hausdorff,
                "frostman": run_frostman,
                "decompose": run_decompose,
                "capacity": run_capacity,
            }[args.cmd]
            outcome = runner(cfg)
    except ConfigError as e:
        print(f"measurelab: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    _emit(outcome.files, args.out)
    return EXIT_OK if outcome.passed else EXIT_CHECK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
