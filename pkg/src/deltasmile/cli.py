"""Batch front end: ``deltasmile <command> --config <path> [--out <path>] [--seed N] [--order 0|1]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 validation mismatch.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import geometry as geo
from . import kernel as ker
from . import oracle as orc
from . import pricing as pr
from .errors import ConfigError, DeltaSmileError, NumericalError, ParameterError
from .model import FellerGrid, ModelParams, Verdict, feller_classify, feller_numeric_check

COMMANDS = ("feller", "geodesic", "kernel", "digital", "smile", "validate")
EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 2, 3, 4

_SECTIONS = {"model", "task", "numerics", "output"}
_MODEL_KEYS = {"delta", "beta", "nu", "rho", "lambda_raw", "mu_raw", "f0", "sigma0"}
_TASK_KEYS = {"command", "tau", "strikes", "order", "deltas", "start", "angles", "length", "samples", "points", "regimes"}
_NUMERIC_KEYS = {"epsilon", "convention", "k1_variant", "quartic", "mapping", "printed_f_av", "order1_smile",
                 "vol_tolerance", "mc"}
_MC_KEYS = {"n_paths", "n_steps", "seed", "antithetic", "block_size", "workers"}
_OUTPUT_KEYS = {"format", "path", "plots", "plot_format"}
_REGIME_KEYS = {"delta", "lambda_raw", "mu_raw", "nu"}


# --- configuration ---------------------------------------------------------------------------


def _check_keys(block: Any, allowed: set[str], where: str) -> dict:
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")
    return block


def _num(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number")
    return float(v)


def _num_list(v: Any, where: str) -> list[float]:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)]
    if not isinstance(v, list):
        raise ConfigError(f"{where} must be a number or a list of numbers")
    return [_num(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _strikes(v: Any) -> list[float]:
    if isinstance(v, dict):
        spec = _check_keys(v, {"min", "max", "num", "spacing"}, "task.strikes")
        try:
            lo, hi, n = _num(spec["min"], "strikes.min"), _num(spec["max"], "strikes.max"), int(spec["num"])
        except KeyError as exc:
            raise ConfigError(f"task.strikes needs {exc.args[0]}") from exc
        if n < 1 or not (0 < lo <= hi):
            raise ConfigError("task.strikes needs 0 < min <= max and num >= 1")
        spacing = spec.get("spacing", "linear")
        if spacing == "log":
            ks = np.geomspace(lo, hi, n)
        elif spacing == "linear":
            ks = np.linspace(lo, hi, n)
        else:
            raise ConfigError("task.strikes.spacing must be linear or log")
        return [float(k) for k in ks]
    ks = _num_list(v, "task.strikes")
    if not ks:
        raise ConfigError("task.strikes is empty")
    if any(k <= 0 for k in ks) or any(b < a for a, b in zip(ks, ks[1:])):
        raise ConfigError("task.strikes must be positive and sorted")
    return ks


@dataclass
class RunConfig:
    model: dict
    task: dict
    numerics: dict
    mc: dict
    output: dict
    source: Path

    def params(self, delta: float | None = None) -> ModelParams:
        m = self.model
        for k in ("delta", "beta", "nu", "rho"):
            if k not in m:
                raise ConfigError(f"model.{k} is required")
        try:
            return ModelParams(
                _num(m["delta"], "model.delta") if delta is None else delta,
                _num(m["beta"], "model.beta"),
                _num(m["nu"], "model.nu"),
                _num(m["rho"], "model.rho"),
                _num(m.get("lambda_raw", 0.0), "model.lambda_raw"),
                _num(m.get("mu_raw", 0.0), "model.mu_raw"),
            )
        except ParameterError as exc:
            raise ConfigError(f"invalid model: {exc}") from exc

    def spot(self) -> tuple[float, float]:
        try:
            f0, s0 = _num(self.model["f0"], "model.f0"), _num(self.model["sigma0"], "model.sigma0")
        except KeyError as exc:
            raise ConfigError(f"model.{exc.args[0]} is required") from exc
        if not (f0 > 0 and s0 > 0):
            raise ConfigError("model.f0 and model.sigma0 must be > 0")
        return f0, s0

    def taus(self) -> list[float]:
        if "tau" not in self.task:
            raise ConfigError("task.tau is required")
        ts = _num_list(self.task["tau"], "task.tau")
        if not ts or any(t <= 0 for t in ts):
            raise ConfigError("task.tau must be non-empty and positive")
        return ts

    def strikes(self) -> list[float]:
        if "strikes" not in self.task:
            raise ConfigError("task.strikes is required")
        return _strikes(self.task["strikes"])

    def order(self) -> int:
        o = self.task.get("order", 0)
        if o not in (0, 1) or isinstance(o, bool):
            raise ConfigError("task.order must be 0 or 1")
        return int(o)

    def options(self) -> pr.PricingOptions:
        n = self.numerics
        opts = pr.PricingOptions(
            convention=n.get("convention", "metric"),
            k1_variant=n.get("k1_variant", "corrected"),
            quartic=n.get("quartic", "exact"),
            mapping=n.get("mapping", "midpoint"),
            printed_f_av=bool(n.get("printed_f_av", False)),
            order1_smile=n.get("order1_smile", "average"),
        )
        choices = {"convention": ker.CONVENTIONS, "k1_variant": ("corrected", "printed"),
                   "quartic": ("exact", "printed", "zero"), "mapping": ("midpoint", "printed", "harmonic"),
                   "order1_smile": ("average", "terminal")}
        for key, allowed in choices.items():
            if getattr(opts, key) not in allowed:
                raise ConfigError(f"numerics.{key} must be one of {', '.join(allowed)}")
        return opts

    def sim_config(self) -> orc.SimConfig:
        m = self.mc
        try:
            return orc.SimConfig(
                n_paths=int(m.get("n_paths", 200_000)),
                n_steps=int(m.get("n_steps", 500)),
                seed=int(m.get("seed", 0)),
                antithetic=bool(m.get("antithetic", False)),
                block_size=int(m.get("block_size", 8192)),
                workers=int(m.get("workers", 1)),
            )
        except (ParameterError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid numerics.mc: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = _check_keys(raw, _SECTIONS, "config")
    model = _check_keys(raw.get("model"), _MODEL_KEYS, "model")
    task = _check_keys(raw.get("task"), _TASK_KEYS, "task")
    numerics = dict(_check_keys(raw.get("numerics"), _NUMERIC_KEYS, "numerics"))
    mc = _check_keys(numerics.pop("mc", None), _MC_KEYS, "numerics.mc")
    output = _check_keys(raw.get("output"), _OUTPUT_KEYS, "output")
    return RunConfig(dict(model), dict(task), numerics, dict(mc), dict(output), path)


# --- commands -------------------------------------------------------------------------------


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    figure: Callable[[], Any] | None = None
    failed: bool = False
    notes: list[str] = field(default_factory=list)


def _warn_regime(params: ModelParams) -> None:
    if params.nu > 0:
        v = feller_classify(params.delta, params.lambda_raw, params.mu_raw, params.nu)
        if v.verdict is Verdict.EXPLOSION_POSSIBLE:
            print(f"warning: {v.rationale}; the volatility may reach zero", file=sys.stderr)


def cmd_feller(cfg: RunConfig, order: int) -> Table:
    regimes = cfg.task.get("regimes")
    if regimes is None:
        p = cfg.params()
        regimes = [{"delta": p.delta, "lambda_raw": p.lambda_raw, "mu_raw": p.mu_raw, "nu": p.nu}]
    if not isinstance(regimes, list) or not regimes:
        raise ConfigError("task.regimes must be a non-empty list")
    cols = ["delta", "lambda_raw", "mu_raw", "nu", "ratio", "verdict", "rationale", "lower_trend", "upper_trend",
            "numeric_explosion", "consistent"]
    rows = []
    for i, r in enumerate(regimes):
        r = _check_keys(r, _REGIME_KEYS, f"task.regimes[{i}]")
        try:
            d, lam, mu, nu = (_num(r[k], f"regimes[{i}].{k}") for k in ("delta", "lambda_raw", "mu_raw", "nu"))
        except KeyError as exc:
            raise ConfigError(f"task.regimes[{i}] needs {exc.args[0]}") from exc
        try:
            diag = feller_numeric_check(d, lam, mu, nu, FellerGrid())
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        rows.append([d, lam, mu, nu, 2 * lam * mu / nu**2, diag.analytic.verdict.value, diag.analytic.rationale,
                     diag.lower.trend.value, diag.upper.trend.value,
                     "" if diag.numeric_explosion is None else diag.numeric_explosion,
                     "" if diag.consistent is None else diag.consistent])
    return Table(cols, rows)


def cmd_geodesic(cfg: RunConfig, order: int) -> Table:
    p = cfg.params()
    t = cfg.task
    start = t.get("start", [0.0, 1.0])
    if not isinstance(start, list) or len(start) != 2:
        raise ConfigError("task.start must be [x, y]")
    x0, y0 = _num(start[0], "start.x"), _num(start[1], "start.y")
    if not y0 > 0:
        raise ConfigError("task.start y must be > 0")
    angles = _num_list(t.get("angles", [0.0]), "task.angles")
    length = _num(t.get("length", 2.0), "task.length")
    n = int(t.get("samples", 101))
    if length < 0 or n < 2 or not angles:
        raise ConfigError("task.length must be >= 0, task.samples >= 2 and task.angles non-empty")
    cols = ["angle", "t", "x", "y", "killing_speed", "killing_x", "d"]
    rows, series = [], {}
    for a in angles:
        st = geo.GeodesicState.unit(x0, y0, a, p.delta)
        try:
            path = geo.geodesic_integrate(st, length, p.delta, n_samples=n)
        except geo.BoundaryHit as exc:
            path = exc.partial
        c1, c2 = geo.killing_constants(p.delta, path.y, path.vx, path.vy)
        for k in range(path.t.size):
            d = geo.geodesic_distance(p.delta, (x0, y0), (path.x[k], path.y[k])) if k else 0.0
            rows.append([a, float(path.t[k]), float(path.x[k]), float(path.y[k]), float(c1[k]), float(c2[k]), d])
        series[f"angle {a:g}"] = (path.x, path.y)
    fig = lambda: orc_plot_lines(series, "x", "y", f"geodesics, delta = {p.delta:g}", True)  # noqa: E731
    return Table(cols, rows, fig)


def orc_plot_lines(series, xl, yl, title, equal=False):
    from .report import line_figure

    return line_figure(series, xl, yl, title, equal)


def cmd_kernel(cfg: RunConfig, order: int) -> Table:
    p = cfg.params()
    f0, s0 = cfg.spot()
    opts = cfg.options()
    pts = cfg.task.get("points")
    if not isinstance(pts, list) or not pts:
        raise ConfigError("task.points must be a non-empty list of [F, sigma] pairs")
    targets = []
    for i, q in enumerate(pts):
        if not isinstance(q, list) or len(q) != 2:
            raise ConfigError(f"task.points[{i}] must be [F, sigma]")
        F, s = _num(q[0], "F"), _num(q[1], "sigma")
        if not (F > 0 and s > 0):
            raise ConfigError(f"task.points[{i}] must be positive")
        targets.append((F, s))
    taus = cfg.taus()
    if p.nu == 0:
        raise ConfigError("the kernel command needs nu > 0")
    _warn_regime(p)
    spec = ker.IsometrySpec.from_params(p)
    fld = ker.DriftField(spec, p.lambda_raw / p.nu**2, p.mu_raw / p.nu, opts.convention)
    a = ker.phi_forward(spec, (f0, s0 / p.nu))
    cols = ["tau", "s", "F", "sigma", "X", "Y", "d", "W", "Zd", "K1_0", "density"]
    rows = []
    for tau in taus:
        s = spec.time_factor * p.nu**2 * tau
        for F, sg in targets:
            b = ker.phi_forward(spec, (F, sg / p.nu))
            terms = ker.kernel_terms(fld, a, b, s, opts.k1_variant)
            dens = ker.heat_kernel_density(fld, a, b, s, order, opts.k1_variant)
            rows.append([tau, s, F, sg, b.x, b.y, terms.d, terms.W, terms.Zd, terms.K1_0, dens])

    def fig():
        from .report import scatter_figure

        last = [r for r in rows if r[0] == taus[-1]]
        return scatter_figure([r[2] for r in last], [r[3] for r in last], [r[10] for r in last], "F", "sigma",
                              f"kernel density, tau = {taus[-1]:g}")

    return Table(cols, rows, fig)


def cmd_digital(cfg: RunConfig, order: int) -> Table:
    p = cfg.params()
    f0, s0 = cfg.spot()
    strikes, taus, opts = cfg.strikes(), cfg.taus(), cfg.options()
    _warn_regime(p)
    cols = ["tau", "K", "P", "d", "W", "order"]
    rows, series = [], {}
    for tau in taus:
        ps = []
        for K in strikes:
            sol = pr.strike_solution(p, tau, f0, s0, K, opts)
            P = pr.digital_density_P(p, tau, f0, s0, K, order, opts)
            rows.append([tau, K, P, sol.d, sol.W, order])
            ps.append(P)
        series[f"tau {tau:g}"] = (strikes, ps)
    fig = lambda: orc_plot_lines(series, "K", "P", f"density of F, order {order}")  # noqa: E731
    return Table(cols, rows, fig)


def cmd_smile(cfg: RunConfig, order: int) -> Table:
    f0, s0 = cfg.spot()
    strikes, taus, opts = cfg.strikes(), cfg.taus(), cfg.options()
    deltas = _num_list(cfg.task["deltas"], "task.deltas") if "deltas" in cfg.task else [cfg.params().delta]
    if not deltas:
        raise ConfigError("task.deltas is empty")
    models = [cfg.params(d) for d in deltas]
    cols = ["delta", "tau", "K", "sigma_K", "sigma_B", "f_av", "order", "error"]
    rows, series = [], {}
    for p in models:
        _warn_regime(p)
        for tau in taus:
            curve = pr.smile_curve(p, tau, f0, s0, strikes, order, opts)
            for pt in curve:
                rows.append([p.delta, tau, pt.K, pt.sigma_local, pt.sigma_implied, pt.f_av, order, pt.error or ""])
            series[f"delta {p.delta:g}, tau {tau:g}"] = (strikes, [pt.sigma_implied for pt in curve])
    label = "order-1 (constructed)" if order else "order 0"
    fig = lambda: orc_plot_lines(series, "K", "sigma_B", f"implied volatility, {label}")  # noqa: E731
    return Table(cols, rows, fig)


def _validation_rows(cfg: RunConfig, order: int) -> list[list[Any]]:
    eps = _num(cfg.numerics.get("epsilon", 1e-2), "numerics.epsilon")
    vol_tol = _num(cfg.numerics.get("vol_tolerance", 0.005), "numerics.vol_tolerance")
    rows: list[list[Any]] = []

    def add(name, value, reference, tol):
        err = abs(value - reference)
        rows.append([name, float(value), float(reference), float(err), float(tol), bool(err <= tol)])

    y = np.linspace(0.0, 0.99, 200)
    w = np.power(y, 2 / 3)
    forms = {1.0: 1 - np.sqrt(1 - y * y), 0.5: np.arcsin(np.sqrt(y)) - np.sqrt(y - y * y),
             1 / 3: 2 - np.sqrt(1 - w) * (2 + w)}
    err = max(float(np.max(np.abs(geo.standard_geodesic_x(d, y) - f))) for d, f in forms.items())
    add("geodesic_table", err, 0.0, 1e-8)
    grid = np.linspace(0.2, math.pi - 0.2, 10)
    err = max(abs(geo.sind(1.0, a, b) - math.sin(a) / math.sin(b)) for a in grid for b in grid
              if abs(geo.sind_solve(1.0, a, b).intercept + 1 / math.tan(b)) > 1e-6)
    add("sind_hyperbolic", err, 0.0, 1e-8)
    jac = geo.jacobi_solve(1.0, eps, numeric=True)
    err = max(abs(jac.Z1(t) - math.sinh(t)) for t in np.linspace(0.0, 3.0, 31))
    add("jacobi_sinh", err, 0.0, 1e-4)
    p = cfg.params()
    path = geo.geodesic_integrate(geo.GeodesicState.unit(0.0, 1.0, 0.3, p.delta), 5.0, p.delta)
    add("killing_drift", max(path.killing_drift()), 0.0, 1e-6)
    f0, s0 = cfg.spot()
    if p.beta < 1 and p.nu > 0:
        p1 = ModelParams(1.0, p.beta, p.nu, p.rho, p.lambda_raw, p.mu_raw)
        worst = 0.0
        for K in (0.8 * f0, 0.95 * f0, 1.1 * f0, 1.3 * f0):
            a = pr.digital_density_P(p1, 0.25, f0, s0, K, 0)
            b = pr.sabr_closed_form_P(p1, 0.25, f0, s0, K, 0)
            worst = max(worst, abs(a / b - 1))
        add("pipeline_delta1", worst, 0.0, 1e-6)
    zero = ker.DriftFieldSample(geo.HalfPlanePoint(0.0, 0.7), 0.0, 0.0, 0.0, ((0.0, 0.0), (0.0, 0.0)))
    add("k1_flat", ker.k1_origin(p.delta, 0.7, zero), float(geo.gauss_curvature(p.delta, 0.7)) / 6, 1e-12)
    add("f_av_limit", pr.f_av(f0, f0), f0, 0.0)
    regimes = [(0.75, 1.0, 0.2, 0.4), (0.5, 1.0, 0.3, 0.5), (0.75, 0.0, 0.0, 0.4), (1.0, 0.0, 0.0, 0.4),
               (0.5, 0.25, 0.25, 0.5), (0.3, 1.0, 0.2, 0.4)]
    bad = 0
    for r in regimes:
        diag = feller_numeric_check(*r)
        bad += diag.consistent is False
    add("feller_numeric_consistency", bad, 0, 0)
    if p.nu > 0:
        sim = orc.simulate(p, 0.1, f0, s0, cfg.sim_config())
        opts = cfg.options()
        for K in (0.85 * f0, f0, 1.15 * f0):
            mc = orc.mc_implied_vol(sim, K, 0.1, f0)
            add(f"mc_implied_vol_K={K:g}", pr.implied_vol(p, 0.1, f0, s0, K, order, opts), mc.vol,
                vol_tol + 3 * mc.stderr)
    return rows


def cmd_validate(cfg: RunConfig, order: int) -> Table:
    rows = _validation_rows(cfg, order)
    return Table(["check", "value", "reference", "error", "tolerance", "pass"], rows, None,
                 failed=not all(r[-1] for r in rows))


_HANDLERS = {"feller": cmd_feller, "geodesic": cmd_geodesic, "kernel": cmd_kernel, "digital": cmd_digital,
             "smile": cmd_smile, "validate": cmd_validate}


# --- entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deltasmile", description="Short-time asymptotics for delta-exponent "
                                 "stochastic volatility models.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML configuration file")
    ap.add_argument("--out", help="output table path (.csv or .json); overrides output.path")
    ap.add_argument("--seed", type=int, help="Monte Carlo seed; overrides numerics.mc.seed")
    ap.add_argument("--order", type=int, choices=(0, 1), help="expansion order; overrides task.order")
    return ap


def _output_paths(cfg: RunConfig, command: str, out: str | None) -> tuple[Path, str, Path | None]:
    o = cfg.output
    path = Path(out or o.get("path") or f"{command}.csv")
    fmt = o.get("format") or ("json" if path.suffix == ".json" else "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format must be csv or json")
    plots = o.get("plots", True)
    pfmt = o.get("plot_format", "png")
    if pfmt not in ("png", "svg"):
        raise ConfigError("output.plot_format must be png or svg")
    return path, fmt, (path.with_suffix(f".{pfmt}") if plots else None)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.mc["seed"] = args.seed
        order = args.order if args.order is not None else cfg.order()
        if cfg.task.get("command", args.command) != args.command:
            raise ConfigError(f"task.command is {cfg.task['command']!r} but {args.command!r} was requested")
        table_path, fmt, fig_path = _output_paths(cfg, args.command, args.out)
        table = _HANDLERS[args.command](cfg, order)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DeltaSmileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    from .report import save_figure, to_csv, write_table

    write_table(table_path, fmt, args.command, table.columns, table.rows)
    if fig_path is not None and table.figure is not None:
        save_figure(table.figure(), fig_path)
    if args.command == "validate":
        sys.stdout.write(to_csv(table.columns, table.rows))
        if table.failed:
            return EXIT_MISMATCH
    return 0


def main() -> None:
    sys.exit(run())
