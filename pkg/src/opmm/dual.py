"""Projection form of the round subproblem for convex constraints.

When every constraint is convex, the constraints enter the round model through
their linearization only, and the proximal subproblem has an explicit concave
dual over the nonnegative orthant.  Solving that dual and projecting once
recovers the primal minimizer, which turns each round into a single projection
plus a small concave maximization in p variables.

Only the scalar-curvature case (loss model curvature eta_t * I, so the
weighting matrix is (alpha + eta_t) * I) is implemented; it is the form whose
projection is the plain Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SimpleSet
from .inner import InnerSolverParams, projected_descent
from .oracle import ConstraintFamily, RoundOracle


@dataclass(frozen=True)
class DualState:
    """A dual candidate with its objective value and gradient.

    The objective is concave in y over the nonnegative orthant, so a
    nonpositive gradient at y = 0 certifies optimality there.
    """

    y: np.ndarray
    value: float
    gradient: np.ndarray


def _parts(set_: SimpleSet, alpha: float, eta_t: float, x_t, grad_f, g_vals, jac_g,
           lam, sigma: float):
    """Closure computing the dual value and gradient for fixed round data."""
    h = alpha + eta_t
    if h <= 0.0:
        raise ValueError("alpha + eta_t must be positive")
    x_t = np.asarray(x_t, dtype=float)
    grad_f = np.asarray(grad_f, dtype=float)
    g_vals = np.asarray(g_vals, dtype=float)
    jac_g = np.asarray(jac_g, dtype=float)
    lam = np.asarray(lam, dtype=float)
    lin = lam + sigma * g_vals

    def value_and_grad(y):
        y = np.asarray(y, dtype=float)
        b = grad_f + sigma * (jac_g.T @ y)
        v = x_t - b / h
        u = set_.project(v)
        r = v - u
        val = (
            -0.5 * sigma * float(y @ y)
            + float(y @ lin)
            - float(b @ b) / (2.0 * h)
            + 0.5 * h * float(r @ r)
        )
        grad = -sigma * y + lin - sigma * (jac_g @ (x_t - u))
        return val, grad, u

    return value_and_grad


def _require_convex(cons: ConstraintFamily):
    if not cons.all_convex:
        raise ValueError("the dual route requires every constraint to be convex")


def dual_objective(set_: SimpleSet, oracle: RoundOracle, cons: ConstraintFamily,
                   lam, sigma: float, alpha: float, eta_t: float, x_t, y):
    """Value and gradient of the round's dual at multiplier candidate y.

    The objective is concave on {y >= 0}; its gradient is available in closed
    form through the projection of the shifted primal point.
    """
    _require_convex(cons)
    x_t = np.asarray(x_t, dtype=float)
    vg = _parts(set_, alpha, eta_t, x_t, oracle.gradient(x_t), cons.value(x_t),
                cons.jacobian(x_t), lam, sigma)
    val, grad, _ = vg(y)
    return val, grad


def dual_state(set_: SimpleSet, oracle: RoundOracle, cons: ConstraintFamily,
               lam, sigma: float, alpha: float, eta_t: float, x_t, y) -> DualState:
    """Bundle a dual candidate with its value and gradient."""
    val, grad = dual_objective(set_, oracle, cons, lam, sigma, alpha, eta_t, x_t, y)
    return DualState(y=np.asarray(y, dtype=float), value=val, gradient=grad)


def solve_dual(set_: SimpleSet, alpha: float, eta_t: float, x_t, grad_f, g_vals, jac_g,
               lam, sigma: float, inner: InnerSolverParams = InnerSolverParams()):
    """Maximize the round dual over y >= 0 by projected gradient ascent.

    Warm starts at the current multipliers, so the optimal value can never
    fall below the dual value at the warm start.
    """
    vg = _parts(set_, alpha, eta_t, x_t, grad_f, g_vals, jac_g, lam, sigma)

    def neg(y):
        val, grad, _ = vg(y)
        return -val, -grad

    def clip_nonneg(y):
        return np.maximum(y, 0.0)

    # curvature of -omega is at most sigma + sigma^2 |J|^2 / (alpha + eta_t)
    jac_sq = float(np.sum(np.asarray(jac_g, dtype=float) ** 2))
    cap = 1.0 / (sigma + sigma**2 * jac_sq / (alpha + eta_t))
    y0 = np.maximum(np.asarray(lam, dtype=float), 0.0)
    y_star, info = projected_descent(neg, clip_nonneg, y0, inner, step_cap=cap)
    return y_star, info


def recover_primal(set_: SimpleSet, alpha: float, eta_t: float, x_t, grad_f, jac_g,
                   sigma: float, y_star) -> np.ndarray:
    """Primal minimizer induced by a dual solution: one projected step."""
    h = alpha + eta_t
    b = np.asarray(grad_f, dtype=float) + sigma * (np.asarray(jac_g, dtype=float).T @ np.asarray(y_star, dtype=float))
    return set_.project(np.asarray(x_t, dtype=float) - b / h)


def recover_multiplier(omega_grad, sigma: float, y_star) -> np.ndarray:
    """Next multipliers from the dual gradient: [grad_omega(y) + sigma y]_+.

    Identical, in exact arithmetic, to the positive-part update through the
    linearized constraints at the recovered primal point.
    """
    return np.maximum(np.asarray(omega_grad, dtype=float) + sigma * np.asarray(y_star, dtype=float), 0.0)


def duality_gap(set_: SimpleSet, q0, qs, lam, sigma: float, alpha: float, x_t,
                eta_t: float, x_next, y_star, f_xt: float) -> float:
    """Primal prox objective minus the dual value, constant offsets aligned.

    The dual objective omits the loss value at the anchor and the multiplier
    norm term that the augmented Lagrangian carries; both are added back so
    the gap vanishes at an exact primal-dual pair.
    """
    from .solver import aug_lagrangian

    lam = np.asarray(lam, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    gvals = np.array([q.const for q in qs])
    jac = np.stack([q.grad for q in qs])
    vg = _parts(set_, alpha, eta_t, x_t, q0.grad, gvals, jac, lam, sigma)
    dual_val, _, _ = vg(y_star)
    primal_val, _ = aug_lagrangian(q0, qs, lam, sigma, x_next)
    primal_val += 0.5 * alpha * float(np.sum((x_next - x_t) ** 2))
    return primal_val - (dual_val + f_xt - float(lam @ lam) / (2.0 * sigma))
