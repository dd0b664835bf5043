"""Glue between run configurations and executed runs.

The CLI is a thin wrapper over these helpers, and tests drive them directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .inner import InnerSolverParams
from .oracle import ConcaveMinorant, ScalarTheta, ThetaStrategy, ZeroTheta
from .solver import AlgoParams, OnlineProblem, RunResult, opmm_run
from .streams import make_constraints, make_set, make_stream


def theta_strategy_from(cfg: RunConfig) -> ThetaStrategy:
    spec = cfg.params.theta
    if spec.kind == "zero":
        return ZeroTheta()
    if spec.kind == "scalar":
        return ScalarTheta(spec.eta0)
    return ConcaveMinorant(spec.eta0)


def build_problem(cfg: RunConfig) -> OnlineProblem:
    set_ = make_set(cfg.set_dict())
    cons = make_constraints({"id": cfg.constraints.id, "params": cfg.constraints.params_dict()},
                            set_)
    stream = make_stream({"id": cfg.stream.id, "params": cfg.stream.params_dict()},
                         set_, seed=cfg.seed)
    if cfg.x1 == "center":
        lo, hi = set_.bounding_box()
        x1 = set_.project(0.5 * (lo + hi))
    elif cfg.x1 == "slater":
        x1 = cons.slater_point
    else:
        x1 = np.asarray(cfg.x1, dtype=float)
    return OnlineProblem(set_=set_, cons=cons, stream=stream, x1=x1)


def build_algo_params(cfg: RunConfig, T: int | None = None) -> AlgoParams:
    T = cfg.T if T is None else T
    sigma, alpha = cfg.params.resolve(T)
    inner = InnerSolverParams(max_iters=cfg.params.inner.max_iters, tol=cfg.params.inner.tol)
    return AlgoParams(sigma=sigma, alpha=alpha, T=T,
                      theta_strategy=theta_strategy_from(cfg), inner=inner)


def execute_run(cfg: RunConfig, route: str = "primal", strict: bool = False,
                T: int | None = None) -> RunResult:
    problem = build_problem(cfg)
    params = build_algo_params(cfg, T=T)
    return opmm_run(problem, params, route=route, strict=strict)


@dataclass
class SweepResult:
    horizons: list
    results: list


def execute_sweep(cfg: RunConfig, horizons, route: str = "primal",
                  strict: bool = False) -> SweepResult:
    """Run the configured instance at several horizons with the preset scaling.

    Horizons share the stream seed, so shorter runs are prefixes of longer
    ones in distribution.  Four or more horizons are required so the fitted
    slopes mean something.
    """
    horizons = sorted(int(h) for h in horizons)
    if len(horizons) < 4:
        raise ValueError("a sweep needs at least 4 horizons")
    results = [execute_run(cfg, route=route, strict=strict, T=h) for h in horizons]
    return SweepResult(horizons=horizons, results=results)
