"""Command-line interface: ``algctl verify|simulate|portrait|shoot|invariants``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import inspect
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import models as zoo
from .chart import DualPoint, sample_verify
from .errors import (AlgctlError, IntegrationError, NoConvergenceError, NoSolutionError,
                     RegularityError)
from .fields import gradient_check, random_quadratic_field
from .integrate import IntegratorConfig, Trajectory, drift_report, integrate
from .poisson import jacobiator
from .shooting import ShootingConfig, habitat_problem, s2_problem, shoot
from .svg import line_plot, stacked_plots

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

BRACKET_JACOBI_TOL = 1e-5
GRADIENT_TOL = 1e-6

PORTRAIT_PROJECTIONS = {"habitat": ("x_1", "mu_1"), "rigid-body": ("mu_1", "mu_2")}
HABITAT_X0_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
HABITAT_ALPHA_GRID = (-1.0, -0.5, 0.0, 0.5, 1.0)
S2_THETA_TRUE = (0.4, -0.3)

CONFIG_KEYS = {
    "run": {"model", "x0", "mu0", "T", "seed", "out", "xT", "m0", "guess", "samples", "tol",
            "svg", "runs", "x0_grid", "mu0_grid", "workers", "theta_true", "max_iter"},
    "integrator": {"scheme", "h", "rtol", "atol", "projection"},
}


class UsageError(Exception):
    pass


def register_model(name: str, factory: Callable[..., zoo.ModelBundle]) -> None:
    """Make an extra model addressable by name (used for test-only models)."""
    zoo.MODEL_FACTORIES[name] = factory


def unregister_model(name: str) -> None:
    zoo.MODEL_FACTORIES.pop(name, None)


# parsing helpers -------------------------------------------------------------

def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(s) for s in str(text).split(",") if s.strip() != ""], dtype=float)
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as comma-separated reals") from None


def parse_value(text: str):
    vec = parse_vector(text)
    if "," in str(text):
        return vec.tolist()
    if vec.size != 1:
        raise UsageError(f"cannot parse {text!r} as a real")
    return float(vec[0])


def model_param_names(factory) -> set:
    names = set()
    for p in inspect.signature(factory).parameters.values():
        if p.name.startswith("_") or isinstance(p.default, str):
            continue
        if p.kind in (p.POSITIONAL_OR_KEYWORD, p.KEYWORD_ONLY):
            names.add(p.name)
    return names


def read_config(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {"run": {}, "integrator": {}, "params": {}}
    for section in cp.sections():
        if section not in out:
            raise UsageError(f"unknown config section [{section}]")
        for key, value in cp.items(section):
            if section in CONFIG_KEYS and key not in CONFIG_KEYS[section]:
                raise UsageError(f"unknown key {key!r} in [{section}]")
            out[section][key] = value
    return out


class RunConfig:
    """Resolved settings: flags override the config file, which overrides defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        cfg = read_config(args.config) if args.config else {"run": {}, "integrator": {}, "params": {}}
        self.file = cfg
        name = args.model if args.model is not None else cfg["run"].get("model")
        if name is None:
            raise UsageError("no model given")
        if name not in zoo.MODEL_FACTORIES:
            raise UsageError(f"unknown model {name!r}; known: {', '.join(sorted(zoo.MODEL_FACTORIES))}")
        self.model_name = name
        factory = zoo.MODEL_FACTORIES[name]
        allowed = model_param_names(factory)
        params = {}
        for key, value in cfg["params"].items():
            params[key] = value
        for item in args.param or []:
            if "=" not in item:
                raise UsageError(f"--param expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            params[key.strip()] = value
        unknown = set(params) - allowed
        if unknown:
            raise UsageError(f"unknown parameter(s) {sorted(unknown)} for {name}; allowed: {sorted(allowed)}")
        self.params = {k: parse_value(v) for k, v in params.items()}
        try:
            self.model = factory(**self.params)
        except (ValueError, TypeError, AlgctlError) as exc:
            raise UsageError(f"invalid parameters for {name}: {exc}") from None
        self.seed = int(self.get("seed", 0))
        self.out = Path(self.get("out") or os.environ.get("ALGCTL_OUT") or "./out")

    def get(self, key: str, default=None):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        return self.file["run"].get(key, default)

    def initial_state(self) -> DualPoint:
        d = self.model.default_state
        x0, mu0 = self.get("x0"), self.get("mu0")
        x = parse_vector(x0) if x0 is not None else d.x
        mu = parse_vector(mu0) if mu0 is not None else d.mu
        chart = self.model.chart
        if x.size != chart.base_dim or mu.size != chart.fiber_rank:
            raise UsageError(f"{self.model_name} expects x0 of length {chart.base_dim} "
                             f"and mu0 of length {chart.fiber_rank}")
        return DualPoint(x, mu)

    def integrator(self, T_default: Optional[float] = None) -> IntegratorConfig:
        base = self.model.default_integrator
        sec = self.file["integrator"]
        changes = {}
        for key, conv in (("scheme", str), ("h", float), ("rtol", float), ("atol", float)):
            v = getattr(self.args, key, None)
            if v is None and key in sec:
                v = sec[key]
            if v is not None:
                try:
                    changes[key] = conv(v)
                except ValueError:
                    raise UsageError(f"bad value for {key}: {v!r}") from None
        T = self.get("T")
        if T is None:
            T = T_default if T_default is not None else base.T
        changes["T"] = float(T)
        proj = sec.get("projection")
        if getattr(self.args, "no_projection", False) or (proj is not None and proj.lower() in ("off", "false", "0", "no")):
            changes["projection"] = ()
        try:
            return base.replace(**changes)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


# output helpers --------------------------------------------------------------

def _r(v) -> str:
    return repr(float(v))


def _prepare_out(rc: RunConfig, names) -> list[Path]:
    paths = [rc.out / n for n in names]
    clash = [p for p in paths if p.exists()]
    if clash and not rc.args.force:
        raise UsageError(f"refusing to overwrite {', '.join(map(str, clash))} (use --force)")
    rc.out.mkdir(parents=True, exist_ok=True)
    return paths


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _monitors(model: zoo.ModelBundle) -> dict:
    mons = {"H": model.hamiltonian}
    mons.update({k: v for k, v in model.monitors.items() if k != "H"})
    return mons


def trajectory_table(traj: Trajectory, monitor_names=None):
    """Header and rows of the trajectory CSV schema."""
    n, k = traj.xs.shape[1], traj.mus.shape[1]
    m = traj.controls.shape[1] if traj.controls is not None else 0
    names = list(monitor_names) if monitor_names is not None else list(traj.monitors)
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"mu_{i + 1}" for i in range(k)] \
        + [f"u_{i + 1}" for i in range(m)] + names
    rows = []
    for j, t in enumerate(traj.times):
        row = [_r(t)] + [_r(v) for v in traj.xs[j]] + [_r(v) for v in traj.mus[j]]
        if m:
            row += [_r(v) for v in traj.controls[j]]
        row += [_r(traj.monitors[name][j]) for name in names]
        rows.append(row)
    return header, rows


def _ordered_monitor_names(traj: Trajectory):
    names = [n for n in traj.monitors if n == "H"]
    return names + [n for n in traj.monitors if n != "H"]


def _run(rc: RunConfig, p0: DualPoint, cfg: IntegratorConfig) -> Trajectory:
    m = rc.model
    return integrate(m.chart, m.hamiltonian, p0, cfg, _monitors(m), constraints=m.constraints,
                     control=m.feedback if m.control is not None else None)


def _column(header, rows, name):
    if name not in header:
        raise UsageError(f"unknown column {name!r}; have {header}")
    j = header.index(name)
    return np.array([float(r[j]) for r in rows])


# subcommands -----------------------------------------------------------------

def cmd_verify(rc: RunConfig) -> int:
    samples = int(rc.get("samples", 100))
    tol = float(rc.get("tol", 1e-6))
    seed = int(rc.get("seed", 7))
    (path,) = _prepare_out(rc, ["verify_report.csv"])
    m = rc.model
    report = sample_verify(m.chart, samples, seed, tol)
    rows = [list(r) for r in report.rows()]

    rng = np.random.default_rng(seed)
    n, k = m.chart.base_dim, m.chart.fiber_rank
    jac = 0.0
    for _ in range(5):
        p = zoo.sample_state(m, rng)
        F, G, K = (random_quadratic_field(rng, n, k) for _ in range(3))
        jac = max(jac, abs(jacobiator(m.chart, F, G, K, p)))
    rows.append(["bracket_jacobi", jac, BRACKET_JACOBI_TOL, bool(jac <= BRACKET_JACOBI_TOL)])
    if m.constraints:
        djac = 0.0
        for _ in range(3):
            p = zoo.sample_state(m, rng)
            F, G, K = (random_quadratic_field(rng, n, k) for _ in range(3))
            djac = max(djac, abs(jacobiator(m.chart, F, G, K, p, m.constraints)))
        rows.append(["dirac_jacobi", djac, BRACKET_JACOBI_TOL, bool(djac <= BRACKET_JACOBI_TOL)])
    pts = [zoo.sample_state(m, rng) for _ in range(20)]
    try:
        gerr = gradient_check(m.hamiltonian, pts)
    except (AlgctlError, ValueError, ArithmeticError):
        gerr = float("inf")
    rows.append(["hamiltonian_gradient", gerr, GRADIENT_TOL, bool(gerr <= GRADIENT_TOL)])

    text = _csv_text(["check", "max_residual", "tol", "pass"],
                     [[c, _r(v), _r(t), "true" if ok else "false"] for c, v, t, ok in rows])
    _write_text(path, text)
    for c, v, t, ok in rows:
        print(f"{c:22s} {float(v):.3e}  tol {float(t):.1e}  {'PASS' if ok else 'FAIL'}")
    if all(r[3] for r in rows):
        print(f"{rc.model_name}: all checks passed")
        return EXIT_OK
    worst = max(rows, key=lambda r: (not r[3], float(r[1]) / float(r[2])))
    print(f"{rc.model_name}: FAILED, worst check {worst[0]}")
    return EXIT_NUMERIC


def cmd_simulate(rc: RunConfig) -> int:
    svg = rc.get("svg")
    names = ["trajectory.csv"] + (["trajectory.svg"] if svg else [])
    paths = _prepare_out(rc, names)
    p0, cfg = rc.initial_state(), rc.integrator()
    status = EXIT_OK
    try:
        traj = _run(rc, p0, cfg)
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        traj, status = exc.partial, EXIT_NUMERIC
    except (NoSolutionError, RegularityError) as exc:
        print(f"feedback failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    header, rows = trajectory_table(traj, _ordered_monitor_names(traj))
    _write_text(paths[0], _csv_text(header, rows))
    if svg:
        cols = [c.strip() for c in svg.split(",")]
        if len(cols) != 2:
            raise UsageError("--svg expects two column names, e.g. x_1,mu_1")
        xs, ys = _column(header, rows, cols[0]), _column(header, rows, cols[1])
        _write_text(paths[1], line_plot([(rc.model_name, xs, ys)], cols[0], cols[1], rc.model_name))
    print(f"wrote {len(rows)} rows to {paths[0]}")
    return status


def _portrait_initials(rc: RunConfig):
    m = rc.model
    if rc.model_name == "habitat":
        xg = parse_vector(rc.get("x0_grid")) if rc.get("x0_grid") else np.array(HABITAT_X0_GRID)
        ag = parse_vector(rc.get("mu0_grid")) if rc.get("mu0_grid") else np.array(HABITAT_ALPHA_GRID)
        return [DualPoint([x], [a]) for a in ag for x in xg]
    runs = int(rc.get("runs", 5))
    if runs < 1:
        raise UsageError("--runs must be >= 1")
    m0 = rc.initial_state().mu
    radius = float(np.linalg.norm(m0))
    rng = np.random.default_rng(rc.seed)
    out = [DualPoint(np.zeros(0), m0)]
    for _ in range(runs - 1):
        d = rng.standard_normal(3)
        out.append(DualPoint(np.zeros(0), radius * d / np.linalg.norm(d)))
    return out


def cmd_portrait(rc: RunConfig) -> int:
    if rc.model_name not in PORTRAIT_PROJECTIONS:
        raise UsageError(f"model {rc.model_name!r} has no declared 2-D projection for a portrait")
    fig3 = rc.model_name == "habitat"
    names = ["portrait.csv", "portrait.svg"] + (["coupling.csv", "coupling.svg"] if fig3 else [])
    paths = _prepare_out(rc, names)
    inits = _portrait_initials(rc)
    cfg = rc.integrator()
    workers = int(rc.get("workers", 4))

    def one(p0):
        try:
            return _run(rc, p0, cfg), None
        except IntegrationError as exc:
            return exc.partial, exc

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, inits))
    header, rows, series, status = None, [], [], EXIT_OK
    cx, cy = PORTRAIT_PROJECTIONS[rc.model_name]
    for run_id, (traj, err) in enumerate(results):
        if err is not None:
            print(f"run {run_id}: {err}", file=sys.stderr)
            status = EXIT_NUMERIC
        h, rr = trajectory_table(traj, _ordered_monitor_names(traj))
        header = ["run_id"] + h
        rows.extend([[str(run_id)] + r for r in rr])
        series.append((f"run {run_id}", _column(h, rr, cx), _column(h, rr, cy)))
        dev, _ = drift_report(traj, "H")
        print(f"run {run_id}: H drift {dev:.3e}")
    _write_text(paths[0], _csv_text(header, rows))
    _write_text(paths[1], line_plot(series, cx, cy, f"{rc.model_name} phase portrait"))
    if fig3:
        try:
            _, traj, _ = shoot(habitat_problem(rc.model, 0.2, 0.8, 1.0),
                               ShootingConfig(restarts=[[0.0], [1.0], [2.0]]))
        except NoConvergenceError as exc:
            print(f"coupling shot failed: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        crow = [[_r(t), _r(x[0]), _r(a[0])] for t, x, a in zip(traj.times, traj.xs, traj.mus)]
        _write_text(paths[2], _csv_text(["t", "x_1", "mu_1"], crow))
        _write_text(paths[3], line_plot([("shot 0.2 -> 0.8", traj.xs[:, 0], traj.mus[:, 0])],
                                        "x_1", "mu_1", "costate along the steering trajectory"))
    print(f"wrote {len(results)} runs to {paths[0]}")
    return status


def _guesses(rc: RunConfig, dim: int, default):
    raw = rc.get("guess")
    if raw is None:
        return default
    items = raw if isinstance(raw, list) else str(raw).split(";")
    out = [parse_vector(g) for g in items]
    if any(g.size != dim for g in out):
        raise UsageError(f"each --guess needs {dim} component(s)")
    return out


def cmd_shoot(rc: RunConfig) -> int:
    m = rc.model
    if rc.model_name not in ("habitat", "s2-steering"):
        raise UsageError(f"model {rc.model_name!r} does not support shooting")
    paths = _prepare_out(rc, ["solution.csv", "shoot_report.csv"])
    T = float(rc.get("T", 1.0))
    tol = float(rc.get("tol", 1e-10))
    extra = []
    if rc.model_name == "habitat":
        x0 = float(parse_vector(rc.get("x0", "0.2"))[0])
        xT = float(parse_vector(rc.get("xT", "0.8"))[0])
        try:
            prob = habitat_problem(m, x0, xT, T)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        guesses = _guesses(rc, 1, [[0.0], [1.0], [2.0]])
    else:
        x0 = parse_vector(rc.get("x0")) if rc.get("x0") else m.default_state.x
        m0 = parse_vector(rc.get("m0")) if rc.get("m0") else m.default_state.mu[3:]
        if rc.get("xT") is not None:
            xT = parse_vector(rc.get("xT"))
        else:
            # manufactured target: forward flow from a known initial costate
            theta_true = parse_vector(rc.get("theta_true")) if rc.get("theta_true") else np.array(S2_THETA_TRUE)
            try:
                aux = s2_problem(m, x0, x0, T, m0)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            end = integrate(m.chart, m.hamiltonian, aux.assemble(theta_true), aux.integrator,
                            constraints=m.constraints).final()
            xT = end.x / np.linalg.norm(end.x)
            extra += [(f"theta_true_{i + 1}", v) for i, v in enumerate(theta_true)]
        try:
            prob = s2_problem(m, x0, xT, T, m0)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        guesses = _guesses(rc, 2, [[0.0, 0.0]])
    scfg = ShootingConfig(tol_residual=tol, max_iter=int(rc.get("max_iter", 30)), restarts=guesses)
    try:
        theta, traj, report = shoot(prob, scfg)
    except NoConvergenceError as exc:
        rows = [("converged", "false"), ("best_residual", _r(exc.best_residual))]
        if exc.best_theta is not None:
            rows += [(f"theta_star_{i + 1}", _r(v)) for i, v in enumerate(exc.best_theta)]
        _write_text(paths[1], _csv_text(["key", "value"], rows))
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    header, rows = trajectory_table(traj, _ordered_monitor_names(traj))
    _write_text(paths[0], _csv_text(header, rows))
    xend = traj.xs[-1] / (np.linalg.norm(traj.xs[-1]) if rc.model_name == "s2-steering" else 1.0)
    terminal_error = float(np.max(np.abs(xend - np.atleast_1d(xT))))
    rep = [("converged", "true"), ("restart_index", str(report.restart_index)),
           ("iterations", str(report.iterations)), ("residual_norm", _r(report.residual_norm)),
           ("terminal_error", _r(terminal_error))]
    rep += [(f"theta_star_{i + 1}", _r(v)) for i, v in enumerate(theta)]
    if extra:
        rep += [(key, _r(v)) for key, v in extra]
        recovery = float(np.max(np.abs(theta - np.array([v for _, v in extra]))))
        rep.append(("recovery_error", _r(recovery)))
    for r_i, hist in enumerate(report.residual_history):
        rep += [(f"residual_history_{r_i}_{j}", _r(v)) for j, v in enumerate(hist)]
    _write_text(paths[1], _csv_text(["key", "value"], rep))
    print(f"converged: theta* = {[float(v) for v in theta]}, |x(T) - xT| = {terminal_error:.3e}")
    return EXIT_OK


def cmd_invariants(rc: RunConfig) -> int:
    m = rc.model
    if not _monitors(m):
        raise UsageError(f"model {rc.model_name!r} declares no monitors")
    paths = _prepare_out(rc, ["invariants.csv", "invariants.svg"])
    status = EXIT_OK
    try:
        traj = _run(rc, rc.initial_state(), rc.integrator())
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        traj, status = exc.partial, EXIT_NUMERIC
    names = _ordered_monitor_names(traj)
    rows = [[_r(t)] + [_r(traj.monitors[n][j]) for n in names] for j, t in enumerate(traj.times)]
    _write_text(paths[0], _csv_text(["t"] + names, rows))
    panels = [([(n, traj.times, traj.monitors[n])], "t", n, n) for n in names]
    _write_text(paths[1], stacked_plots(panels))
    for n in names:
        dev, rel = drift_report(traj, n)
        rel_text = f"{rel:.3e}" if traj.monitors[n][0] != 0 else "n/a"
        print(f"{n:16s} max_abs_drift {dev:.3e}  max_rel_drift {rel_text}")
    return status


COMMANDS = {"verify": cmd_verify, "simulate": cmd_simulate, "portrait": cmd_portrait,
            "shoot": cmd_shoot, "invariants": cmd_invariants}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", nargs="?", help="model name (rigid-body, action-so3, s2-steering, habitat)")
    common.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter override")
    common.add_argument("--config", help="key=value file with [run], [integrator], [params] sections")
    common.add_argument("--out", help="output directory (default $ALGCTL_OUT or ./out)")
    common.add_argument("--force", action="store_true", help="overwrite existing output files")
    common.add_argument("--seed", type=int)
    common.add_argument("--x0", help="initial base point, comma-separated")
    common.add_argument("--mu0", help="initial costate, comma-separated")
    common.add_argument("--T", type=float, help="horizon")
    common.add_argument("--scheme", choices=["rk4", "rk45"])
    common.add_argument("--h", type=float, help="fixed step (rk4)")
    common.add_argument("--rtol", type=float)
    common.add_argument("--atol", type=float)
    common.add_argument("--no-projection", action="store_true", help="disable constraint projection")

    parser = argparse.ArgumentParser(prog="algctl", description="Pontryagin dynamics on Lie algebroids")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", parents=[common], help="certify chart structure and gradients")
    p.add_argument("--samples", type=int)
    p.add_argument("--tol", type=float)
    p = sub.add_parser("simulate", parents=[common], help="integrate one trajectory")
    p.add_argument("--svg", metavar="COLX,COLY", help="also plot two columns")
    p = sub.add_parser("portrait", parents=[common], help="phase portrait over a grid of initial states")
    p.add_argument("--x0-grid", dest="x0_grid")
    p.add_argument("--mu0-grid", dest="mu0_grid")
    p.add_argument("--runs", type=int)
    p.add_argument("--workers", type=int)
    p = sub.add_parser("shoot", parents=[common], help="solve a fixed-endpoint steering problem")
    p.add_argument("--xT")
    p.add_argument("--m0")
    p.add_argument("--guess", action="append", help="initial guess (repeatable)")
    p.add_argument("--theta-true", dest="theta_true", help="costate used for a manufactured target")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    sub.add_parser("invariants", parents=[common], help="monitor drift along one trajectory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        rc = RunConfig(args)
        return COMMANDS[args.command](rc)
    except UsageError as exc:
        print(f"algctl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, NoSolutionError, RegularityError, FloatingPointError) as exc:
        print(f"algctl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
