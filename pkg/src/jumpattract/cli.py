"""``jumpattract`` command line: one subcommand per workflow, config-driven.

Exit codes: 0 success, 1 usage or config error, 2 model-level negative
verdict (stability check says "unbounded"), 3 numerical failure.
"""
from __future__ import annotations

import logging
import math
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import bounds as bd
from .compare import compare_correlations
from .config import ConfigError, RunConfig, build_model, load_config
from .hierarchy import (BlowUpError, CorrelationVector, DivergenceError, HorizonWarning, integrate,
                        make_engine, picard_solve, theta_zero)
from .kernels import KernelModel, ResolutionError, stability_check
from .output import manifest, write_csv, write_json
from .simulator import SamplingError, run

EXIT_OK, EXIT_CONFIG, EXIT_UNBOUNDED, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("jumpattract")


class Abort(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str) -> RunConfig:
    try:
        return load_config(path)
    except ConfigError as exc:
        raise Abort(EXIT_CONFIG, str(exc)) from None


def _model(cfg: RunConfig) -> KernelModel:
    try:
        return build_model(cfg)
    except (ConfigError, ResolutionError, ValueError) as exc:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: model: {exc}") from None


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _stability(cfg, model):
    st = cfg.stability
    return stability_check(model, st["sample_budget"], st["max_config_size"], st["seed"])


def _omega(cfg, model) -> tuple[float, dict | None]:
    if cfg.bounds["omega"] is not None:
        return cfg.bounds["omega"], None
    rep = _stability(cfg, model)
    if rep.unbounded:
        raise Abort(EXIT_UNBOUNDED, "stability check: unbounded (no finite omega); refusing to integrate")
    return rep.omega, rep.as_dict()


def _initial(cfg, engine) -> CorrelationVector:
    ini = cfg.hierarchy["initial"]
    if "density" in ini:
        return engine.poisson(ini["density"])
    if engine.layout != "reduced" or engine.max_order != 2:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: hierarchy.initial: tabulated states need layout reduced, order 2")
    g = np.asarray(ini["g"], dtype=float)
    if g.size != int(np.prod(engine.domain.shape)):
        raise Abort(EXIT_CONFIG, f"{cfg.source}: hierarchy.initial.g: needs {int(np.prod(engine.domain.shape))} values")
    return CorrelationVector([1.0, ini["rho"], g.reshape(engine.domain.shape)], "reduced")


def _engine(cfg, model, density: float | None = None):
    h = cfg.hierarchy
    try:
        engine = make_engine(model, h["order"], h["closure"], h["layout"])
    except ValueError as exc:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: hierarchy: {exc}") from None
    k0 = engine.poisson(density) if density is not None else _initial(cfg, engine)
    return engine, k0


def _time_plan(cfg, model, k0, omega):
    theta0 = theta_zero(k0)
    if not math.isfinite(theta0):
        theta0 = 0.0
    theta_star, tau = bd.optimal(theta0, omega, model.mean_b)
    h = cfg.hierarchy
    t_end = h["t_end"] if h["t_end"] is not None else h["tau_fraction"] * tau
    thetas = h["thetas"] or [theta_star]
    return theta0, theta_star, tau, t_end, thetas


def _state_tables(out: Path, engine, times, states, prefix="order") -> list[Path]:
    """One CSV per order: time, grid coordinate(s), value."""
    files = []
    dom = engine.domain
    for n in range(1, engine.max_order + 1):
        if engine.layout == "reduced":
            if n == 1:
                files.append(write_csv(out / f"{prefix}1.csv", ["time", "value"],
                                       [times, [float(s[1]) for s in states]]))
                continue
            coords = dom.min_image(dom.displacements.reshape(-1, dom.dimension))
            names = ["r"] if dom.dimension == 1 else ["rx", "ry"]
        else:
            nodes = dom.positions.reshape(-1, dom.dimension)
            grids = np.indices((engine.p,) * n).reshape(n, -1).T
            coords = np.concatenate([nodes[grids[:, i]] for i in range(n)], axis=1)
            axes = ["x"] if dom.dimension == 1 else ["x", "y"]
            names = [f"{a}{i + 1}" for i in range(n) for a in axes]
        rows = coords.shape[0]
        t_col = np.repeat(times, rows)
        c_cols = [np.tile(coords[:, j], len(times)) for j in range(coords.shape[1])]
        v_col = np.concatenate([np.asarray(s[n]).ravel() for s in states])
        files.append(write_csv(out / f"{prefix}{n}.csv", ["time", *names, "value"], [t_col, *c_cols, v_col]))
    return files


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose):
    """Jump dynamics with attraction: kernels, simulation, hierarchy, bounds."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(message)s")


def _command(name):
    def deco(fn):
        @main.command(name, help=fn.__doc__)
        @click.argument("config", type=click.Path(dir_okay=False))
        @click.option("--out", "out", default="out", show_default=True, help="Output directory.")
        @click.option("--workers", default=1, show_default=True, type=click.IntRange(1),
                      help="Worker processes for replica-parallel sections.")
        def wrapper(config, out, workers):
            try:
                code = fn(config, out, workers)
            except Abort as exc:
                click.echo(f"error: {exc}", err=True)
                sys.exit(exc.code)
            except (BlowUpError, DivergenceError, SamplingError) as exc:
                click.echo(f"numerical failure: {exc}", err=True)
                sys.exit(EXIT_NUMERICAL)
            sys.exit(code or EXIT_OK)
        return wrapper
    return deco


@_command("check-kernels")
def check_kernels(config, out, workers):
    """Stability verdict (Fourier test, omega) and kernel constants."""
    cfg = _load(config)
    model = _model(cfg)
    rep = _stability(cfg, model)
    path = _outdir(out)
    consts = model.constants()
    consts["omega"] = rep.omega
    files = [write_json(path / "stability.json", rep.as_dict()),
             write_csv(path / "constants.csv", ["name", "value"], [list(consts), list(consts.values())])]
    dom = model.domain
    coords = dom.min_image(dom.displacements.reshape(-1, dom.dimension))
    names = ["r"] if dom.dimension == 1 else ["rx", "ry"]
    pp, pm = model.phi_plus_grid.ravel(), model.phi_minus_grid.ravel()
    files.append(write_csv(path / "phi.csv", [*names, "phi_plus", "phi_minus", "psi"],
                           [*coords.T, pp, pm, pm - pp]))
    write_json(path / "manifest.json", manifest("check-kernels", cfg, files, verdict=rep.verdict))
    click.echo(rep.summary())
    for k, v in consts.items():
        click.echo(f"{k} = {v:.17g}")
    return EXIT_UNBOUNDED if rep.unbounded else EXIT_OK


def _simulate(cfg, model, workers):
    s = cfg.simulate
    density = s["density"]
    if density is None and s["particles"] is None:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: simulate: give 'density' or 'particles'")
    try:
        return run(model, s["t_end"], replicas=s["replicas"], seed=s["seed"], density=density,
                   n_particles=s["particles"], sample_times=s["sample_times"], initial=s["initial"],
                   bins=s["bins"], r_max=s["r_max"], max_events=s["max_events"], workers=workers)
    except ValueError as exc:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: simulate: {exc}") from None


def _write_simulation(path, res):
    cols = [[] for _ in range(9)]
    for e in res.estimates:
        for j in range(len(e.g)):
            row = (e.time, e.density, e.density_se, e.bin_edges[j], e.bin_edges[j + 1], e.bin_centers[j],
                   e.g[j], e.g_se[j], int(e.counts[j]))
            for c, v in zip(cols, row):
                c.append(v)
    header = ["time", "density", "density_se", "bin_left", "bin_right", "r_center", "g", "g_se", "counts"]
    return [write_csv(path / "correlations.csv", header, cols)]


@_command("simulate")
def simulate(config, out, workers):
    """Kinetic Monte Carlo replicas; density and pair-correlation estimates."""
    cfg = _load(config)
    model = _model(cfg)
    res = _simulate(cfg, model, workers)
    # the torus wraps b, so the verdict is recomputed on the periodised kernels
    stab = _stability(cfg, model)
    path = _outdir(out)
    files = _write_simulation(path, res)
    write_json(path / "manifest.json", manifest("simulate", cfg, files, stability=stab.as_dict(),
                                                **res.manifest()))
    for e in res.estimates:
        click.echo(f"t = {e.time:.6g}: density {e.density:.6g} +/- {e.density_se:.2g}")
    if res.partial:
        click.echo("warning: event cap reached, results are partial", err=True)
    return EXIT_OK


@_command("solve")
def solve(config, out, workers):
    """RK4 integration of the truncated hierarchy with norm tracking."""
    cfg = _load(config)
    model = _model(cfg)
    omega, stab = _omega(cfg, model)
    engine, k0 = _engine(cfg, model)
    theta0, theta_star, tau, t_end, thetas = _time_plan(cfg, model, k0, omega)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        traj = integrate(engine, k0, t_end, cfg.hierarchy["dt"], theta_track=thetas, omega=omega,
                         record_every=cfg.hierarchy["record_every"])
    path = _outdir(out)
    files = _state_tables(path, engine, traj.times, traj.states)
    nt, nth = traj.norms.shape
    files.append(write_csv(path / "norms.csv", ["time", "theta", "norm", "bound"],
                           [np.repeat(traj.times, nth), np.tile(traj.thetas, nt),
                            traj.norms.ravel(), traj.bounds.ravel()]))
    write_json(path / "manifest.json", manifest(
        "solve", cfg, files, omega=omega, stability=stab, theta0=theta0, theta_star=theta_star, tau=tau,
        t_end=t_end, horizons=dict(zip(map(str, thetas), traj.horizons)), warnings=traj.warnings))
    for w in traj.warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"integrated to t = {t_end:.6g} (tau = {tau:.6g}); final norm(s) "
               + ", ".join(f"{v:.6g}" for v in traj.norms[-1]))
    return EXIT_OK


@_command("picard")
def picard(config, out, workers):
    """Iterated Duhamel solution with successive differences and majorant."""
    cfg = _load(config)
    model = _model(cfg)
    omega, stab = _omega(cfg, model)
    engine, k0 = _engine(cfg, model)
    theta0, theta_star, tau, t_end, _ = _time_plan(cfg, model, k0, omega)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HorizonWarning)
        res = picard_solve(engine, k0, t_end, cfg.hierarchy["picard_terms"], omega=omega,
                           theta1=theta0, theta2=theta_star, delta=cfg.bounds["delta"],
                           substeps=cfg.hierarchy["substeps"])
    path = _outdir(out)
    it = np.arange(1, res.iterates + 1)
    files = [write_csv(path / "picard.csv", ["iterate", "difference", "majorant"],
                       [it, res.differences, res.majorant])]
    files += _state_tables(path, engine, np.array([t_end]), [res.state], prefix="picard_order")
    notes = [str(w.message) for w in caught]
    write_json(path / "manifest.json", manifest(
        "picard", cfg, files, omega=omega, stability=stab, theta0=theta0, theta_star=theta_star, tau=tau,
        t=t_end, t_delta=res.t_delta, norm_theta=res.theta, warnings=notes))
    for w in notes:
        click.echo(f"warning: {w}", err=True)
    for i, d, m in zip(it, res.differences, res.majorant):
        click.echo(f"iterate {i}: difference {d:.6g}  majorant {m:.6g}")
    return EXIT_OK


@_command("bounds")
def bounds_cmd(config, out, workers):
    """Horizons, optimal scale, operator-norm bounds, ladder and majorant."""
    cfg = _load(config)
    b = cfg.bounds
    model = None
    need_model = any(b[k] is None for k in ("omega", "mean_b", "sup_b"))
    if need_model or b["theta0"] is None:
        model = _model(cfg)
    omega = b["omega"] if b["omega"] is not None else _omega(cfg, model)[0]
    mean_b = b["mean_b"] if b["mean_b"] is not None else model.mean_b
    sup_b = b["sup_b"] if b["sup_b"] is not None else model.sup_b
    if b["theta0"] is not None:
        theta0 = b["theta0"]
    else:
        engine, k0 = _engine(cfg, model)
        theta0 = theta_zero(k0)
    try:
        theta_star, tau = bd.optimal(theta0, omega, mean_b)
        theta = b["theta"] if b["theta"] is not None else theta_star
        p = bd.HorizonParams(theta0, theta, omega, mean_b, sup_b)
        T = bd.horizon(p)
        theta_pp = b["theta_pp"] if b["theta_pp"] is not None else theta - 1.0
        ops = bd.operator_norm_bounds(p, theta_pp)
        delta = b["delta"] if b["delta"] is not None else 0.1 * (theta - theta0)
        lad = bd.ladder(theta0, theta, b["ladder_l"], delta)
        t_delta = (theta - theta0 - delta) * math.exp(-theta) / p.rate
        if t_delta <= 0.5 * T:
            raise ValueError(f"delta = {delta:g} leaves T_delta = {t_delta:.6g} <= T/2; use delta < (theta - theta0)/2")
        maj = bd.majorant_terms(0.5 * T, t_delta, b["majorant_terms"])
    except ValueError as exc:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: bounds: {exc}") from None
    table = {"theta0": theta0, "theta": theta, "omega": omega, "mean_b": mean_b, "sup_b": sup_b,
             "horizon": T, "theta_star": theta_star, "tau": tau, "theta_pp": theta_pp,
             "bound_L": ops.L, "bound_C": ops.C, "bound_D": ops.D, "delta": delta, "t_delta": t_delta}
    path = _outdir(out)
    files = [write_csv(path / "bounds.csv", ["quantity", "value"], [list(table), list(table.values())]),
             write_csv(path / "ladder.csv", ["index", "theta"], [np.arange(len(lad)), lad]),
             write_csv(path / "majorant.csv", ["n", "term"], [np.arange(1, len(maj) + 1), maj])]
    write_json(path / "manifest.json", manifest("bounds", cfg, files, values=table))
    for k, v in table.items():
        click.echo(f"{k} = {v:.17g}")
    return EXIT_OK


@_command("compare")
def compare(config, out, workers):
    """Simulated g(r) against hierarchy k2 at the simulation sample times."""
    cfg = _load(config)
    model = _model(cfg)
    if cfg.hierarchy["layout"] != "reduced":
        raise Abort(EXIT_CONFIG, f"{cfg.source}: compare needs hierarchy.layout reduced")
    omega, stab = _omega(cfg, model)
    res = _simulate(cfg, model, workers)
    s = cfg.simulate
    density = s["density"] if s["density"] is not None else s["particles"] / model.domain.volume
    engine, k = _engine(cfg, model, density=density)
    if engine.max_order < 2:
        raise Abort(EXIT_CONFIG, f"{cfg.source}: compare needs hierarchy.order 2")
    path = _outdir(out)
    files = _write_simulation(path, res)
    rows = [[] for _ in range(7)]
    summary, t_prev = [], 0.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", HorizonWarning)
        for est in res.estimates:
            if est.time > t_prev:
                k = integrate(engine, k, est.time - t_prev, cfg.hierarchy["dt"], keep_states=False).final
                t_prev = est.time
            cmp = compare_correlations(est, model.domain, k[2])
            for c, v in zip(rows, (np.full(len(cmp.z), est.time), cmp.r_center, cmp.simulated, cmp.se,
                                   cmp.predicted, cmp.z, np.abs(cmp.z) <= cmp.threshold)):
                c.extend(list(v))
            summary.append({"time": est.time, "fraction_within": cmp.fraction_within,
                            "max_abs_z": cmp.max_abs_z, "status": cmp.status})
    files.append(write_csv(path / "compare.csv",
                           ["time", "r_center", "g_mc", "g_se", "k2_hierarchy", "z", "within"], rows))
    status = "PASS" if all(x["status"] == "PASS" for x in summary) else "FAIL"
    write_json(path / "manifest.json", manifest(
        "compare", cfg, files, omega=omega, stability=stab, status=status, comparisons=summary,
        warnings=[str(w.message) for w in caught], **res.manifest()))
    for x in summary:
        click.echo(f"t = {x['time']:.6g}: {100 * x['fraction_within']:.1f}% of bins within 3 se "
                   f"(max |z| {x['max_abs_z']:.3g}) {x['status']}")
    click.echo(f"status: {status}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    main()
