"""Projected first-order inner loop shared by the primal and dual subproblems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class InnerSolverParams:
    """Projected gradient with Armijo backtracking.

    tol=None resolves to 1e-9 * (1 + |grad|) at the starting point.  The
    sufficient-decrease test accepts a step eta when the new value drops by at
    least decrease * |move|^2 / eta.
    """

    max_iters: int = 10_000
    tol: float | None = None
    shrink: float = 0.5
    decrease: float = 1e-4
    step0: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.tol is not None and self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.decrease <= 0.0 or self.step0 <= 0.0:
            raise ValueError("decrease and step0 must be positive")


@dataclass
class DescentInfo:
    iters: int
    residual: float
    step: float
    tol: float
    converged: bool


class MaxItersExceeded(RuntimeError):
    """Inner loop ran out of iterations; carries the best iterate found."""

    def __init__(self, x: np.ndarray, info: DescentInfo):
        super().__init__(
            f"inner solver stopped after {info.iters} iterations with residual "
            f"{info.residual:.3e} > tol {info.tol:.3e}"
        )
        self.x = x
        self.info = info


def projected_descent(value_and_grad, project, x0, params: InnerSolverParams,
                      step_cap: float | None = None):
    """Minimize a smooth function over a convex set by projected gradient.

    Returns (x, info) where the projected-gradient residual
    |x - project(x - step * grad(x))| / step, measured with the last accepted
    step, is at or below tol.  Raises MaxItersExceeded otherwise.  Iterates are
    monotone in function value, and the whole trajectory is deterministic.

    step_cap, when given, must be a certified inverse curvature bound; steps
    never exceed it, which keeps the update a contraction and immune to the
    float noise that an objective-value test alone cannot resolve.
    """
    x = project(np.asarray(x0, dtype=float))
    fx, g = value_and_grad(x)
    tol = params.tol if params.tol is not None else 1e-9 * (1.0 + float(np.linalg.norm(g)))
    max_step = params.step0 if step_cap is None else step_cap
    eta = max_step
    for k in range(params.max_iters):
        u = project(x - eta * g)
        res = float(np.linalg.norm(u - x)) / eta
        if res <= tol:
            return x, DescentInfo(iters=k, residual=res, step=eta, tol=tol, converged=True)
        trial = min(2.0 * eta, max_step)
        # allowance for objective values agreeing to the last couple of ulps
        eps_f = 8.0 * np.finfo(float).eps * (1.0 + abs(fx))
        while True:
            u = project(x - trial * g)
            d = u - x
            fu, gu = value_and_grad(u)
            if fu <= fx - params.decrease * float(d @ d) / trial + eps_f:
                break
            trial *= params.shrink
            if trial < 1e-18:
                # no float-representable progress left; re-measure and stop
                u = project(x - eta * g)
                res = float(np.linalg.norm(u - x)) / eta
                info = DescentInfo(iters=k, residual=res, step=eta, tol=tol,
                                   converged=res <= tol)
                if info.converged:
                    return x, info
                raise MaxItersExceeded(x, info)
        x, fx, g, eta = u, fu, gu, trial
    u = project(x - eta * g)
    res = float(np.linalg.norm(u - x)) / eta
    info = DescentInfo(iters=params.max_iters, residual=res, step=eta, tol=tol,
                       converged=res <= tol)
    if info.converged:
        return x, info
    raise MaxItersExceeded(x, info)
