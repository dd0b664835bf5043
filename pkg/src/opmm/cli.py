"""Benchmark command line: run, sweep, check.

Exit codes: 0 on success, 1 on solver failure in strict mode or a failed
audit, 2 on configuration or schema errors.
"""

from __future__ import annotations

import sys

import click
import numpy as np

from . import bench, config, report
from .inner import MaxItersExceeded
from .oracle import assumption_audit


def _load_config(path, seed):
    try:
        cfg = config.load(path)
        if seed is not None:
            cfg = cfg.with_overrides(seed=seed)
        return cfg
    except (config.ConfigError, OSError, ValueError) as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)


def _resolve_out(cfg, out):
    path = out or cfg.output
    if path is None:
        click.echo("config error: no output path (set 'output' or pass --out)", err=True)
        sys.exit(2)
    return path


def _build(cfg):
    try:
        return bench.build_problem(cfg)
    except (ValueError, TypeError) as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)


@click.group()
def main():
    """Online proximal multiplier solver benchmark."""


@main.command(name="run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Run configuration file.")
@click.option("--route", type=click.Choice(["primal", "dual"]), default="primal",
              show_default=True, help="Per-round subproblem route.")
@click.option("--strict", is_flag=True, help="Fail the run if an inner solve gives up.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Per-round CSV path (overrides the config).")
@click.option("--seed", type=int, default=None, help="Override the config seed (u64).")
@click.option("--plot", is_flag=True, help="Render a PNG of the run next to the CSV.")
def run_cmd(config_path, route, strict, out_path, seed, plot):
    """Execute one run and write the per-round CSV plus a summary file."""
    cfg = _load_config(config_path, seed)
    out = _resolve_out(cfg, out_path)
    problem = _build(cfg)
    if route == "dual" and not problem.cons.all_convex:
        click.echo("config error: the dual route requires convex constraints", err=True)
        sys.exit(2)
    try:
        result = bench.opmm_run(problem, bench.build_algo_params(cfg), route=route,
                                strict=strict)
    except MaxItersExceeded as err:
        click.echo(f"solver failure in strict mode: {err}", err=True)
        sys.exit(1)
    except ValueError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)
    report.write_run_csv(out, result)
    report.write_summary_csv(report.summary_path(out), result, seed=cfg.seed)
    if plot:
        report.render_run_figure(report.figure_path(out), result)
    reg = result.regrets()
    click.echo(f"T={result.T} route={result.route} "
               f"lagrangian={reg.lagrangian:.6g} violation_max={reg.violation_max:.6g} "
               f"complementarity={reg.complementarity:.6g} warnings={len(result.warnings)}")
    click.echo(f"wrote {out}")


@main.command(name="sweep")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--horizons", default="256,1024,4096,16384", show_default=True,
              help="Comma-separated list of at least four horizons.")
@click.option("--route", type=click.Choice(["primal", "dual"]), default="primal",
              show_default=True)
@click.option("--strict", is_flag=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Merged sweep CSV path (overrides the config).")
@click.option("--seed", type=int, default=None, help="Override the config seed (u64).")
@click.option("--plot", is_flag=True, help="Render a PNG of the regret curves.")
def sweep_cmd(config_path, horizons, route, strict, out_path, seed, plot):
    """Run several horizons and fit log-log regret slopes."""
    cfg = _load_config(config_path, seed)
    out = _resolve_out(cfg, out_path)
    try:
        hs = [int(h) for h in horizons.split(",") if h.strip()]
        sweep = bench.execute_sweep(cfg, hs, route=route, strict=strict)
    except MaxItersExceeded as err:
        click.echo(f"solver failure in strict mode: {err}", err=True)
        sys.exit(1)
    except ValueError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(2)
    report.write_sweep_csv(out, sweep.results)
    report.write_sweep_summary(report.summary_path(out), sweep.results)
    if plot:
        report.render_sweep_figure(report.figure_path(out), sweep.results)
    for key, val in report.sweep_slopes(sweep.results).items():
        click.echo(f"{key}: {val}")
    click.echo(f"wrote {out}")


@main.command(name="check")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--route", type=click.Choice(["primal", "dual"]), default="primal",
              show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed (u64).")
def check_cmd(config_path, route, seed):
    """Audit the declared structure of the configured instance."""
    cfg = _load_config(config_path, seed)
    problem = _build(cfg)
    params = bench.build_algo_params(cfg)
    rep = assumption_audit(problem.stream.oracle(1), problem.cons, problem.set_,
                           params.theta_strategy, sigma=params.sigma)
    click.echo(rep.format())
    ok = rep.passed
    if route == "dual" and not problem.cons.all_convex:
        click.echo("route convexity               FAIL  dual route needs convex constraints")
        ok = False
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
