"""Regret accounting and theoretical-bound checks.

The ledger tracks the three KKT residual regrets (averaged stationarity
vector, per-constraint violation, complementarity residual) plus the running
objective sum, all as exact running sums.  Alongside it live the offline
comparator oracle, the evaluated bound coefficients, and the bounded-drift
sequence checker used to validate the multiplier norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, Box, SimpleSet, Simplex
from .inner import DescentInfo
from .oracle import ConstraintFamily, StructuralConstants


class LedgerError(ValueError):
    """Record arrived out of order, or an empty ledger was summarized."""


@dataclass(frozen=True)
class RoundRecord:
    """Everything a completed round contributes to the regret sums.

    The stationarity term pairs the next round's loss gradient with the
    freshly updated multipliers, so a record can only be closed once the
    following loss has been revealed.
    """

    t: int
    x_t: np.ndarray
    x_next: np.ndarray
    lam: np.ndarray
    lam_next: np.ndarray
    w: np.ndarray
    f_xt: float
    g_xt: np.ndarray
    g_xnext: np.ndarray
    grad_f_next: np.ndarray
    jac_g_xnext: np.ndarray
    sigma: float
    solver: DescentInfo | None = None
    y: np.ndarray | None = None
    omega_grad: np.ndarray | None = None

    def stationarity_vector(self) -> np.ndarray:
        return self.grad_f_next + self.jac_g_xnext.T @ self.lam_next + self.w

    def comp_residual(self) -> float:
        return comp_residual(self.lam_next, self.sigma, self.g_xnext)


def comp_residual(lam_next: np.ndarray, sigma: float, g_xnext: np.ndarray) -> float:
    """Norm of lam - [lam + sigma g]_+, the complementarity fixed-point gap."""
    return float(np.linalg.norm(lam_next - np.maximum(lam_next + sigma * g_xnext, 0.0)))


@dataclass
class RegretSummary:
    rounds: int
    lagrangian: float
    violation: np.ndarray
    violation_max: float
    complementarity: float
    objective_avg: float


class RegretLedger:
    """Running sums behind the averaged KKT regrets.

    One producer appends records in round order; snapshots are cheap and leave
    the ledger untouched.
    """

    def __init__(self, n: int, p: int):
        self.sum_h = np.zeros(n)
        self.sum_g = np.zeros(p)
        self.sum_comp = 0.0
        self.sum_f = 0.0
        self._rounds = 0

    @property
    def rounds(self) -> int:
        return self._rounds

    def accumulate(self, rec: RoundRecord) -> None:
        if rec.t != self._rounds + 1:
            raise LedgerError(f"record {rec.t} arrived after {self._rounds} rounds")
        self.sum_h += rec.stationarity_vector()
        self.sum_g += rec.g_xt
        self.sum_comp += rec.comp_residual()
        self.sum_f += rec.f_xt
        self._rounds += 1

    def regrets(self) -> RegretSummary:
        if self._rounds == 0:
            raise LedgerError("no rounds accumulated")
        T = self._rounds
        viol = self.sum_g / T
        return RegretSummary(
            rounds=T,
            lagrangian=float(np.linalg.norm(self.sum_h / T)),
            violation=viol,
            violation_max=float(np.max(viol)),
            complementarity=self.sum_comp / T,
            objective_avg=self.sum_f / T,
        )


def objective_regret(ledger: RegretLedger, offline_value: float,
                     consts: StructuralConstants | None = None,
                     x1: np.ndarray | None = None,
                     s_star: np.ndarray | None = None):
    """Average objective gap against the fixed offline comparator.

    Returns (regret, bound); bound is the quadratic-loss guarantee
    (kappa_f^2 + nu_g^2 / 2 + dist(x1, S*)^2 / 2) / sqrt(T) when the
    constants and comparator are supplied, else None.  Negative regret is
    possible and meaningful on drifting streams.
    """
    summ = ledger.regrets()
    regret = summ.objective_avg - float(offline_value)
    bound = None
    if consts is not None and x1 is not None and s_star is not None:
        d2 = float(np.sum((np.asarray(x1, float) - np.asarray(s_star, float)) ** 2))
        bound = (consts.kappa_f**2 + 0.5 * consts.nu_g**2 + 0.5 * d2) / math.sqrt(summ.rounds)
    return regret, bound


# --- offline comparator -----------------------------------------------------


@dataclass
class OfflineSolution:
    point: np.ndarray
    value: float
    mode: str


def _aggregate_loss(stream, T: int):
    """Average loss over rounds 1..T as batched value / pointwise gradient."""
    agg = getattr(stream, "aggregate_quadratic", None)
    if agg is not None:
        a_bar, m, c = agg(T)

        def value(z):
            z = np.asarray(z, dtype=float)
            return 0.5 * a_bar * np.sum(z * z, axis=-1) - z @ m + c

        def grad(z):
            return a_bar * np.asarray(z, dtype=float) - m

        return value, grad

    oracles = [stream.oracle(t) for t in range(1, T + 1)]

    def value(z):
        return sum(o.value(z) for o in oracles) / T

    def grad(z):
        return sum(o.gradient(z) for o in oracles) / T

    return value, grad


def _restore_feasibility(z, cons: ConstraintFamily, set_: SimpleSet, tol: float = 1e-12):
    """Pull a nearly feasible point onto the constraint set along the Slater ray."""
    z = set_.project(np.asarray(z, dtype=float))
    if float(np.max(cons.value(z))) <= tol:
        return z
    xh = cons.slater_point
    lo_t, hi_t = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        if float(np.max(cons.value(z + mid * (xh - z)))) <= 0.0:
            hi_t = mid
        else:
            lo_t = mid
    return z + hi_t * (xh - z)


def offline_oracle(set_: SimpleSet, cons: ConstraintFamily, stream, T: int,
                   mode: str = "auto", pitch: float | None = None) -> OfflineSolution:
    """Minimize the horizon-average loss over the feasible region of the set.

    mode="convex" runs SLSQP from several starts (requires convex constraints
    and a convex loss stream); mode="grid" brute-forces a fine lattice with a
    local refinement pass and works for any structure up to dimension 3.
    """
    value, grad = _aggregate_loss(stream, T)
    if mode == "auto":
        loss_convex = bool(getattr(stream.oracle(1), "is_convex", False))
        mode = "convex" if cons.all_convex and loss_convex else "grid"

    if mode == "convex":
        return _offline_convex(set_, cons, value, grad)
    if mode == "grid":
        return _offline_grid(set_, cons, value, pitch)
    raise ValueError(f"unknown offline mode {mode!r}")


def _offline_convex(set_, cons, value, grad) -> OfflineSolution:
    from scipy.optimize import minimize

    n = set_.dim
    constraints = [{
        "type": "ineq",
        "fun": lambda z: -np.asarray(cons.value(z), dtype=float),
        "jac": lambda z: -np.asarray(cons.jacobian(z), dtype=float),
    }]
    bounds = None
    if isinstance(set_, Box):
        bounds = list(zip(set_.lower, set_.upper))
    elif isinstance(set_, Ball):
        constraints.append({
            "type": "ineq",
            "fun": lambda z: set_.radius**2 - float(np.sum((z - set_.center) ** 2)),
            "jac": lambda z: -2.0 * (z - set_.center),
        })
    elif isinstance(set_, Simplex):
        bounds = [(0.0, 1.0)] * n
        constraints.append({
            "type": "eq",
            "fun": lambda z: float(np.sum(z)) - 1.0,
            "jac": lambda z: np.ones(n),
        })

    starts = [cons.slater_point]
    lo, hi = set_.bounding_box()
    starts.append(set_.project(0.5 * (lo + hi)))
    best = None
    for z0 in starts:
        res = minimize(
            lambda z: float(value(z)), np.asarray(z0, dtype=float), jac=lambda z: grad(z),
            method="SLSQP", bounds=bounds, constraints=constraints,
            options={"maxiter": 500, "ftol": 1e-14},
        )
        z = _restore_feasibility(res.x, cons, set_)
        v = float(value(z))
        if best is None or v < best[1]:
            best = (z, v)
    return OfflineSolution(point=best[0], value=best[1], mode="convex")


def _offline_grid(set_, cons, value, pitch) -> OfflineSolution:
    n = set_.dim
    if n > 3:
        raise ValueError("grid mode is limited to dimension <= 3")
    h = pitch if pitch is not None else set_.diameter / 2000.0

    def best_on(lo, hi, step):
        axes = [np.arange(lo[i], hi[i] + 0.5 * step, step) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        if isinstance(set_, Ball):
            mask = np.sum((pts - set_.center) ** 2, axis=1) <= set_.radius**2
            pts = pts[mask]
        elif isinstance(set_, Simplex):
            mask = np.abs(np.sum(pts, axis=1) - 1.0) <= step
            pts = np.array([set_.project(p) for p in pts[mask]]) if np.any(mask) else pts[:0]
        gv = np.asarray(cons.value(pts), dtype=float)
        feas = np.all(gv <= 1e-12, axis=-1)
        if not np.any(feas):
            return None
        pts = pts[feas]
        vals = np.asarray(value(pts), dtype=float)
        j = int(np.argmin(vals))
        return pts[j], float(vals[j])

    lo, hi = set_.bounding_box()
    coarse = best_on(lo, hi, h)
    if coarse is None:
        raise ValueError("no feasible grid point; refine the pitch")
    z, v = coarse
    step = h
    for _ in range(2):  # local refinement: boundary minima converge first order
        fine = best_on(np.maximum(lo, z - 2 * step), np.minimum(hi, z + 2 * step),
                       step / 50.0)
        step /= 50.0
        if fine is not None and fine[1] < v:
            z, v = fine
    return OfflineSolution(point=np.asarray(z, dtype=float), value=v, mode="grid")


# --- theoretical bounds -----------------------------------------------------


@dataclass(frozen=True)
class TheoryBounds:
    """Bound coefficients evaluated for one run configuration."""

    step_bound: float
    psi_min: float
    psi_argmin_s: int
    s_recommended: int
    psi_recommended: float
    rho0: float
    violation_coeff: float
    comp_coeff: float


def theory_bounds(consts: StructuralConstants, sigma: float, alpha: float, T: int) -> TheoryBounds:
    """Leading coefficients of the regret guarantees plus the multiplier caps.

    Only the leading terms are evaluated; the asymptotic remainders have no
    closed form to check against.
    """
    k0, k1, k2, k3 = consts.kappas()
    ksum = k0 + k1 + k3
    rho0 = (
        0.5 * consts.kappa_q**2
        + 2.0 * (1 + consts.p) * consts.nu_g * ksum
        + 0.5 * (consts.L_g + consts.kappa_q) ** 2 * ksum**2
    )
    psi_min, s_min = consts.psi_min(sigma, alpha, T)
    s_rec = max(1, min(T, round(T**0.25)))
    return TheoryBounds(
        step_bound=sigma * consts.beta0,
        psi_min=psi_min,
        psi_argmin_s=s_min,
        s_recommended=s_rec,
        psi_recommended=consts.psi(sigma, alpha, s_rec),
        rho0=rho0,
        violation_coeff=consts.nu_g * ksum + consts.kappa_g**2,
        comp_coeff=consts.beta0,
    )


# --- bounded-drift checker --------------------------------------------------


@dataclass(frozen=True)
class DriftHypothesis:
    """Bounded steps plus conditional decrease above a threshold.

    Any sequence satisfying the hypothesis stays below
    theta + t0 * delta_max + t0 * (4 delta_max^2 / zeta) * ln(8 delta_max^2 / zeta^2).
    """

    t0: int
    theta: float
    delta_max: float
    zeta: float

    def __post_init__(self):
        if self.t0 < 1:
            raise ValueError("t0 must be a positive integer")
        if self.theta < 0.0:
            raise ValueError("theta must be nonnegative")
        if not 0.0 < self.zeta <= self.delta_max:
            raise ValueError("need 0 < zeta <= delta_max")

    @property
    def bound(self) -> float:
        d, z = self.delta_max, self.zeta
        return self.theta + self.t0 * d + self.t0 * (4.0 * d**2 / z) * math.log(8.0 * d**2 / z**2)


@dataclass
class DriftCheckResult:
    hypothesis_holds: bool
    step_ok: bool
    decrease_ok: bool
    bound_holds: bool
    bound: float
    step_witness: int | None = None
    decrease_witness: int | None = None
    bound_witness: int | None = None


def drift_check(Z, hyp: DriftHypothesis, tol: float = 1e-9) -> DriftCheckResult:
    """Verify the drift hypothesis on a sequence and the implied uniform bound.

    Z is indexed from 0 and must start at zero.  A bound violation on a
    sequence whose hypothesis holds would falsify the checker (or the caller's
    constants), never the underlying inequality.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 1 or Z.size < 1:
        raise ValueError("Z must be a nonempty 1-d sequence")
    if abs(Z[0]) > tol:
        raise ValueError("Z_0 must be zero")

    steps = np.abs(np.diff(Z))
    step_ok, step_wit = True, None
    if steps.size and float(np.max(steps)) > hyp.delta_max + tol:
        step_ok, step_wit = False, int(np.argmax(steps > hyp.delta_max + tol))

    dec_ok, dec_wit = True, None
    for t in range(1, Z.size - hyp.t0):
        if Z[t] >= hyp.theta and Z[t + hyp.t0] - Z[t] > -hyp.t0 * hyp.zeta + tol:
            dec_ok, dec_wit = False, t
            break

    b = hyp.bound
    bound_ok, bound_wit = True, None
    over = np.nonzero(Z > b + tol)[0]
    if over.size:
        bound_ok, bound_wit = False, int(over[0])

    return DriftCheckResult(
        hypothesis_holds=step_ok and dec_ok,
        step_ok=step_ok,
        decrease_ok=dec_ok,
        bound_holds=bound_ok,
        bound=b,
        step_witness=step_wit,
        decrease_witness=dec_wit,
        bound_witness=bound_wit,
    )


def fit_loglog_slope(horizons, values) -> float:
    """Least-squares slope of ln(value) against ln(horizon)."""
    h = np.asarray(horizons, dtype=float)
    v = np.asarray(values, dtype=float)
    if h.size != v.size or h.size < 2:
        raise ValueError("need at least two (horizon, value) pairs")
    if np.any(v <= 0.0):
        raise ValueError("slope fit requires positive values")
    return float(np.polyfit(np.log(h), np.log(v), 1)[0])
