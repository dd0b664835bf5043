"""Per-round proximal multiplier step and the online run driver.

Each round minimizes the penalized round model plus a proximal term over the
feasible set, pushes the multipliers through the positive-part map, and backs
out a normal-cone element certifying stationarity.  The driver wires those
steps to a loss stream, enforcing the online protocol: the next loss is only
revealed after the round's decision is committed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dual as dual_route
from .geometry import InfeasiblePoint, SimpleSet
from .inner import DescentInfo, InnerSolverParams, MaxItersExceeded, projected_descent
from .metrics import RegretLedger, RoundRecord, TheoryBounds, theory_bounds
from .oracle import (
    ConcaveMinorant,
    ConstraintFamily,
    QuadModel,
    ScalarTheta,
    StructuralConstants,
    ThetaStrategy,
    ZeroTheta,
    build_models,
)

# Slack added to exact per-round inequality checks to absorb float roundoff.
CHECK_EPS = 1e-9


def _stacked(q0: QuadModel, qs) -> tuple | None:
    """Flatten same-anchor scalar-curvature models into plain arrays."""
    models = [q0, *qs]
    if any(isinstance(m.theta, np.ndarray) for m in models):
        return None
    if any(m.anchor is not q0.anchor and not np.array_equal(m.anchor, q0.anchor) for m in qs):
        return None
    G = np.stack([q.grad for q in qs]) if qs else np.zeros((0, q0.anchor.size))
    c = np.array([q.const for q in qs])
    ti = np.array([float(q.theta) for q in qs])
    return q0.const, q0.grad, float(q0.theta), c, G, ti


def aug_lagrangian(q0: QuadModel, qs, lam, sigma: float, x):
    """Value and gradient of the penalized round model.

    value = q0(x) + (sum_i [lam_i + sigma q_i(x)]_+^2 - |lam|^2) / (2 sigma).
    The squared positive part is continuously differentiable, so the gradient
    is exact wherever lam_i + sigma q_i(x) != 0 and is the active one-sided
    branch at the kink.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    stk = _stacked(q0, qs)
    if stk is not None:
        c0, g0, t0, c, G, ti = stk
        d = x - q0.anchor
        dd = float(d @ d)
        qv = c + G @ d + 0.5 * ti * dd
        pos = np.maximum(lam + sigma * qv, 0.0)
        val = c0 + float(g0 @ d) + 0.5 * t0 * dd + (float(pos @ pos) - float(lam @ lam)) / (2.0 * sigma)
        grad = g0 + t0 * d + G.T @ pos + float(pos @ ti) * d
        return val, grad
    val = float(q0.value(x))
    grad = q0.gradient(x).astype(float, copy=True)
    acc = -float(lam @ lam)
    for i, q in enumerate(qs):
        pos = max(lam[i] + sigma * float(q.value(x)), 0.0)
        acc += pos * pos
        if pos > 0.0:
            grad += pos * q.gradient(x)
    return val + acc / (2.0 * sigma), grad


def _curvature_cap(q0: QuadModel, qs, lam, sigma: float, alpha: float, D0: float) -> float:
    """Inverse bound on the prox objective's gradient Lipschitz modulus.

    The penalty Hessian is at most sigma * sum |grad q_i|^2 plus the active
    multipliers times the constraint curvatures; model gradients and the
    positive parts are bounded over a set of diameter D0.
    """
    t0 = q0.theta_norm()
    L = t0 + alpha
    for i, q in enumerate(qs):
        gi = float(np.linalg.norm(q.grad)) + q.theta_norm() * D0
        q_hi = q.const + float(np.linalg.norm(q.grad)) * D0 + 0.5 * q.theta_norm() * D0**2
        pos_hi = max(float(lam[i]) + sigma * q_hi, 0.0)
        L += sigma * gi * gi + pos_hi * q.theta_norm()
    return 1.0 / L


def solve_subproblem(set_: SimpleSet, q0: QuadModel, qs, lam, sigma: float,
                     alpha: float, x_t, inner: InnerSolverParams = InnerSolverParams()):
    """Minimize the penalized model plus (alpha/2)|x - x_t|^2 over the set.

    Starts at x_t, so the objective never rises above its value there.
    Returns (x_next, info); raises MaxItersExceeded with the best iterate if
    the residual target is not met.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    lam = np.asarray(lam, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    stk = _stacked(q0, qs)
    if stk is not None and np.array_equal(x_t, q0.anchor):
        c0, g0, t0, c, G, ti = stk
        anchor = q0.anchor
        ll = float(lam @ lam)
        two_sigma = 2.0 * sigma

        def vg(x):
            d = x - anchor
            dd = float(d @ d)
            qv = c + G @ d + 0.5 * ti * dd
            pos = np.maximum(lam + sigma * qv, 0.0)
            val = (c0 + float(g0 @ d) + 0.5 * (t0 + alpha) * dd
                   + (float(pos @ pos) - ll) / two_sigma)
            grad = g0 + (t0 + alpha) * d + G.T @ pos + float(pos @ ti) * d
            return val, grad
    else:
        def vg(x):
            val, grad = aug_lagrangian(q0, qs, lam, sigma, x)
            e = x - x_t
            return val + 0.5 * alpha * float(e @ e), grad + alpha * e

    cap = _curvature_cap(q0, qs, lam, sigma, alpha, set_.diameter)
    return projected_descent(vg, set_.project, x_t, inner, step_cap=min(inner.step0, cap))


def update_multipliers(lam, sigma: float, qs, x_next) -> np.ndarray:
    """Positive-part multiplier update through the round surrogates."""
    lam = np.asarray(lam, dtype=float)
    qv = np.array([float(q.value(x_next)) for q in qs])
    return np.maximum(lam + sigma * qv, 0.0)


def recover_w(q0: QuadModel, qs, lam_next, alpha: float, x_t, x_next) -> np.ndarray:
    """Normal-cone element certifying stationarity of the round minimizer.

    Rearranges the subproblem's first-order condition: the negative of the
    model gradient, weighted by the updated multipliers, plus the proximal
    pull must lie in the normal cone at x_next (up to the inner tolerance).
    """
    lam_next = np.asarray(lam_next, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    d = x_next - x_t
    w = q0.gradient(x_next) + alpha * d
    for i, q in enumerate(qs):
        if lam_next[i] != 0.0:
            w = w + lam_next[i] * q.gradient(x_next)
    return -w


@dataclass(frozen=True)
class AlgoParams:
    """Run parameters: penalty sigma, proximal weight alpha, horizon, strategy."""

    sigma: float
    alpha: float
    T: int
    theta_strategy: ThetaStrategy = ScalarTheta(0.0)
    inner: InnerSolverParams = InnerSolverParams()

    def __post_init__(self):
        if self.sigma <= 0.0 or self.alpha <= 0.0:
            raise ValueError("sigma and alpha must be positive")
        if self.T < 1:
            raise ValueError("T must be positive")

    @classmethod
    def theorem1(cls, T: int, theta_strategy: ThetaStrategy = ScalarTheta(0.0),
                 inner: InnerSolverParams = InnerSolverParams()) -> "AlgoParams":
        """Rate-targeting preset: sigma = T^(-1/4), alpha = T^(1/4)."""
        return cls(sigma=T ** -0.25, alpha=T ** 0.25, T=T,
                   theta_strategy=theta_strategy, inner=inner)

    @classmethod
    def prop4(cls, T: int, theta_strategy: ThetaStrategy = ScalarTheta(0.0),
              inner: InnerSolverParams = InnerSolverParams()) -> "AlgoParams":
        """Quadratic-convex preset: sigma = T^(-1/2), alpha = T^(1/2)."""
        return cls(sigma=T ** -0.5, alpha=T ** 0.5, T=T,
                   theta_strategy=theta_strategy, inner=inner)


@dataclass(frozen=True)
class OnlineProblem:
    """A feasible set, a constraint family, a loss stream and a start point.

    The stream must serve rounds 1 .. T+1: the final extra loss closes the
    last stationarity record.
    """

    set_: SimpleSet
    cons: ConstraintFamily
    stream: object
    x1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x1", np.asarray(self.x1, dtype=float))
        if not self.set_.contains(self.x1):
            raise InfeasiblePoint("x1 must lie in the feasible set")


@dataclass
class IterateState:
    """State committed at the end of a round: decision, multipliers, certificate."""

    t: int
    x: np.ndarray
    lam: np.ndarray
    w: np.ndarray
    models: tuple
    solver: DescentInfo


@dataclass
class RunResult:
    """Trace, ledger and per-round bound checks of one completed run."""

    route: str
    sigma: float
    alpha: float
    T: int
    records: list
    trace: list
    ledger: RegretLedger
    consts: StructuralConstants
    bounds: TheoryBounds
    lam_norms: np.ndarray      # |lam^1| .. |lam^(T+1)|
    step_ok: np.ndarray        # per round: multiplier step within sigma * beta0
    psi_ok: np.ndarray         # per multiplier: norm within min_s psi
    comp_bound_ok: np.ndarray  # per round: complementarity within its bound
    warnings: list

    def regrets(self):
        return self.ledger.regrets()


def opmm_run(problem: OnlineProblem, params: AlgoParams, route: str = "primal",
             sinks=(), strict: bool = False) -> RunResult:
    """Run T rounds of the proximal multiplier method on a loss stream.

    route="dual" solves each round through its concave dual and a single
    projection (convex constraints with scalar curvature only).  Rounds where
    the inner solver gives up carry a warning and continue with the best
    iterate unless strict is set.  Given one seed and configuration the whole
    trace is deterministic.
    """
    if route not in ("primal", "dual"):
        raise ValueError(f"unknown route {route!r}")
    set_, cons, stream = problem.set_, problem.cons, problem.stream
    strategy = params.theta_strategy
    sigma, alpha, T = params.sigma, params.alpha, params.T

    if route == "dual":
        if not cons.all_convex:
            raise ValueError("the dual route requires convex constraints")
        if isinstance(strategy, ConcaveMinorant):
            raise ValueError("the dual route needs zero constraint curvature")
        eta0 = 0.0 if isinstance(strategy, ZeroTheta) else strategy.eta0

    oracle = stream.oracle(1)
    consts = StructuralConstants.from_problem(
        cons, set_, kappa_f=stream.kappa_f, L_f=stream.L_f,
        kappa_q=strategy.kappa_q(cons),
    )
    bcoef = theory_bounds(consts, sigma, alpha, T)

    x = problem.x1.copy()
    lam = np.zeros(cons.p)
    ledger = RegretLedger(set_.dim, cons.p)
    records, trace, warn_rounds = [], [], []
    lam_norms = np.zeros(T + 1)
    step_ok = np.zeros(T, dtype=bool)
    comp_ok = np.zeros(T, dtype=bool)
    sqp = math.sqrt(cons.p)

    for t in range(1, T + 1):
        q0, qs = build_models(oracle, cons, x, strategy)
        y_star = None
        omega_grad = None
        if route == "primal":
            try:
                x_next, info = solve_subproblem(set_, q0, qs, lam, sigma, alpha, x,
                                                inner=params.inner)
            except MaxItersExceeded as err:
                if strict:
                    raise
                x_next, info = err.x, err.info
                warn_rounds.append(t)
            lam_next = update_multipliers(lam, sigma, qs, x_next)
            w = recover_w(q0, qs, lam_next, alpha, x, x_next)
        else:
            grad_f = q0.grad
            g_vals = np.array([q.const for q in qs])
            jac = np.stack([q.grad for q in qs])
            try:
                y_star, info = dual_route.solve_dual(set_, alpha, eta0, x, grad_f,
                                                     g_vals, jac, lam, sigma,
                                                     inner=params.inner)
            except MaxItersExceeded as err:
                if strict:
                    raise
                y_star, info = err.x, err.info
                warn_rounds.append(t)
            x_next = dual_route.recover_primal(set_, alpha, eta0, x, grad_f, jac,
                                               sigma, y_star)
            lam_next = update_multipliers(lam, sigma, qs, x_next)
            _, omega_grad = dual_route.dual_objective(set_, oracle, cons, lam, sigma,
                                                      alpha, eta0, x, y_star)
            w = -(grad_f + sigma * (jac.T @ y_star) + (alpha + eta0) * (x_next - x))

        oracle_next = stream.oracle(t + 1)
        rec = RoundRecord(
            t=t, x_t=x, x_next=x_next, lam=lam, lam_next=lam_next, w=w,
            f_xt=float(oracle.value(x)),
            g_xt=np.asarray(cons.value(x), dtype=float),
            g_xnext=np.asarray(cons.value(x_next), dtype=float),
            grad_f_next=np.asarray(oracle_next.gradient(x_next), dtype=float),
            jac_g_xnext=np.asarray(cons.jacobian(x_next), dtype=float),
            sigma=sigma, solver=info, y=y_star, omega_grad=omega_grad,
        )
        ledger.accumulate(rec)
        records.append(rec)
        trace.append(IterateState(t=t, x=x_next, lam=lam_next, w=w,
                                  models=(q0, tuple(qs)), solver=info))
        for sink in sinks:
            sink(rec)

        lam_norms[t] = float(np.linalg.norm(lam_next))
        step_ok[t - 1] = abs(lam_norms[t] - lam_norms[t - 1]) <= sigma * consts.beta0 + CHECK_EPS
        dx2 = float(np.sum((x_next - x) ** 2))
        comp_cap = sigma * consts.beta0 + 0.5 * sqp * (cons.L_g + consts.kappa_q) * sigma * dx2
        comp_ok[t - 1] = rec.comp_residual() <= comp_cap + CHECK_EPS

        x, lam, oracle = x_next, lam_next, oracle_next

    psi_ok = lam_norms <= bcoef.psi_min
    return RunResult(
        route=route, sigma=sigma, alpha=alpha, T=T,
        records=records, trace=trace, ledger=ledger, consts=consts, bounds=bcoef,
        lam_norms=lam_norms, step_ok=step_ok, psi_ok=psi_ok, comp_bound_ok=comp_ok,
        warnings=warn_rounds,
    )
