"""Problem oracles and surrogate models.

This module holds the pieces that define a round of the online problem: the
per-round loss oracle, the shared constraint family with its declared Lipschitz
data, the quadratic surrogates built at the current iterate, and the structural
constants that drive the multiplier bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import SimpleSet

# Positive floor used when a curvature modulus is exactly zero (affine data).
TINY = 1e-12


class StrategyAssumptionViolation(ValueError):
    """Convexity flags of the problem contradict the chosen curvature strategy."""


@dataclass(frozen=True)
class RoundOracle:
    """One round's loss: value and gradient callables plus declared moduli.

    value accepts arrays of shape (..., n) and returns (...,); gradient is
    evaluated pointwise.  kappa_f bounds both the function's Lipschitz modulus
    and the gradient norm over the feasible set; L_f bounds the gradient's
    Lipschitz modulus.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    kappa_f: float
    L_f: float
    is_convex: bool = False
    is_quadratic_convex: bool = False
    hessian: np.ndarray | None = None

    def __post_init__(self):
        if self.kappa_f <= 0.0 or self.L_f <= 0.0:
            raise ValueError("declared loss moduli must be positive")
        if self.is_quadratic_convex and self.hessian is None:
            raise ValueError("quadratic convex losses must expose their Hessian")


@dataclass(frozen=True)
class ConstraintFamily:
    """Shared inequality constraints g(x) <= 0 with declared structure.

    value maps (..., n) -> (..., p); jacobian maps a single point to the
    (p, n) matrix of row gradients.  slater_point must satisfy
    g_i(slater_point) <= -slater_margin for every i.
    """

    p: int
    value: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    kappa_g: float
    nu_g: float
    L_g: float
    convex_flags: tuple
    slater_point: np.ndarray
    slater_margin: float

    def __post_init__(self):
        object.__setattr__(self, "slater_point", np.asarray(self.slater_point, dtype=float))
        object.__setattr__(self, "convex_flags", tuple(bool(f) for f in self.convex_flags))
        if self.p < 1 or len(self.convex_flags) != self.p:
            raise ValueError("need one convexity flag per constraint")
        if min(self.kappa_g, self.nu_g, self.L_g, self.slater_margin) <= 0.0:
            raise ValueError("declared constraint moduli must be positive")
        if self.nu_g < self.slater_margin:
            raise ValueError("nu_g must be at least the Slater margin")
        gs = np.asarray(self.value(self.slater_point), dtype=float)
        if np.any(gs > -self.slater_margin + 1e-12):
            raise ValueError(
                f"slater point violates the declared margin: g(x_hat)={gs}, "
                f"margin={self.slater_margin}"
            )

    @property
    def all_convex(self) -> bool:
        return all(self.convex_flags)


@dataclass(frozen=True)
class QuadModel:
    """Quadratic surrogate anchored at a point.

    value(x) = const + <grad, x - anchor> + 0.5 <theta (x - anchor), x - anchor>
    where theta is either a scalar (meaning theta * I) or a dense symmetric
    matrix.  Scalars cover every strategy this package ships; dense matrices
    are accepted for completeness.
    """

    anchor: np.ndarray
    const: float
    grad: np.ndarray
    theta: float | np.ndarray = 0.0

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        object.__setattr__(self, "grad", np.asarray(self.grad, dtype=float))
        if isinstance(self.theta, np.ndarray):
            th = np.asarray(self.theta, dtype=float)
            if th.shape != (self.anchor.size, self.anchor.size):
                raise ValueError("dense theta must be square of the anchor dimension")
            if not np.allclose(th, th.T, atol=1e-12):
                raise ValueError("dense theta must be symmetric")
            object.__setattr__(self, "theta", th)
        else:
            object.__setattr__(self, "theta", float(self.theta))

    def value(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        d = x - self.anchor
        lin = d @ self.grad
        if isinstance(self.theta, np.ndarray):
            quad = 0.5 * np.einsum("...i,ij,...j->...", d, self.theta, d)
        else:
            quad = 0.5 * self.theta * np.sum(d * d, axis=-1)
        out = self.const + lin + quad
        return float(out) if out.ndim == 0 else out

    def gradient(self, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.anchor
        return self.grad + self.theta_matvec(d)

    def theta_matvec(self, v: np.ndarray) -> np.ndarray:
        if isinstance(self.theta, np.ndarray):
            return self.theta @ v
        return self.theta * v

    def theta_norm(self) -> float:
        if isinstance(self.theta, np.ndarray):
            return float(np.max(np.abs(np.linalg.eigvalsh(self.theta))))
        return abs(self.theta)


# --- curvature strategies -------------------------------------------------


@dataclass(frozen=True)
class ZeroTheta:
    """All curvature matrices zero: linearize the loss and every constraint.

    Valid when every constraint is convex and the loss itself is convex (the
    linearizations are then global minorants).
    """

    def kappa_q(self, cons: ConstraintFamily) -> float:
        return TINY


@dataclass(frozen=True)
class ScalarTheta:
    """Proximal curvature eta0 * I on the loss model, none on the constraints.

    Requires convex constraints; eta0 >= 0.
    """

    eta0: float = 0.0

    def __post_init__(self):
        if self.eta0 < 0.0:
            raise ValueError("eta0 must be nonnegative")
        object.__setattr__(self, "eta0", float(self.eta0))

    def kappa_q(self, cons: ConstraintFamily) -> float:
        return max(self.eta0, TINY)


@dataclass(frozen=True)
class ConcaveMinorant:
    """eta0 * I on the loss model, -L_g * I on each non-convex constraint.

    The descent lemma makes the curved-down quadratic a global minorant of a
    smooth non-convex constraint.  The induced augmented Lagrangian can lose
    convexity for large multipliers; the assumption audit flags that case
    instead of forbidding the strategy.
    """

    eta0: float = 0.0

    def __post_init__(self):
        if self.eta0 < 0.0:
            raise ValueError("eta0 must be nonnegative")
        object.__setattr__(self, "eta0", float(self.eta0))

    def kappa_q(self, cons: ConstraintFamily) -> float:
        return max(self.eta0, cons.L_g, TINY)


ThetaStrategy = ZeroTheta | ScalarTheta | ConcaveMinorant


def build_models(
    oracle: RoundOracle,
    cons: ConstraintFamily,
    x_t: np.ndarray,
    strategy: ThetaStrategy,
    validate: bool = True,
):
    """Quadratic surrogates of the loss and constraints anchored at x_t.

    Returns (q0, [q_1 .. q_p]).  Evaluated at the anchor, the models reproduce
    the true loss and constraint values exactly.
    """
    x_t = np.asarray(x_t, dtype=float)
    if validate:
        if isinstance(strategy, ZeroTheta):
            if not cons.all_convex:
                raise StrategyAssumptionViolation("ZeroTheta needs convex constraints")
            if not (oracle.is_convex or oracle.is_quadratic_convex):
                raise StrategyAssumptionViolation("ZeroTheta needs a convex loss")
        elif isinstance(strategy, ScalarTheta):
            if not cons.all_convex:
                raise StrategyAssumptionViolation("ScalarTheta needs convex constraints")
        elif not isinstance(strategy, ConcaveMinorant):
            raise TypeError(f"unknown strategy {type(strategy).__name__}")

    theta0 = 0.0 if isinstance(strategy, ZeroTheta) else strategy.eta0
    q0 = QuadModel(
        anchor=x_t,
        const=float(oracle.value(x_t)),
        grad=np.asarray(oracle.gradient(x_t), dtype=float),
        theta=theta0,
    )
    gvals = np.asarray(cons.value(x_t), dtype=float)
    jac = np.asarray(cons.jacobian(x_t), dtype=float)
    qs = []
    for i in range(cons.p):
        theta_i = 0.0
        if isinstance(strategy, ConcaveMinorant) and not cons.convex_flags[i]:
            theta_i = -cons.L_g
        qs.append(QuadModel(anchor=x_t, const=float(gvals[i]), grad=jac[i].copy(), theta=theta_i))
    return q0, qs


# --- structural constants ---------------------------------------------------


@dataclass(frozen=True)
class StructuralConstants:
    """Declared problem moduli plus the derived bound coefficients.

    beta0 caps the multiplier step per round (scaled by sigma); vartheta and
    psi bound the multiplier norm through the bounded-drift argument.  The
    logarithm throughout is the natural one.
    """

    kappa_f: float
    kappa_g: float
    nu_g: float
    L_f: float
    L_g: float
    kappa_q: float
    eps0: float
    D0: float
    p: int

    def __post_init__(self):
        if min(self.kappa_f, self.kappa_g, self.nu_g, self.eps0, self.D0) <= 0.0:
            raise ValueError("kappa_f, kappa_g, nu_g, eps0 and D0 must be positive")
        if self.kappa_q < 0.0 or self.L_g < 0.0 or self.L_f < 0.0:
            raise ValueError("curvature moduli cannot be negative")
        if self.p < 1:
            raise ValueError("p must be positive")
        if self.nu_g < self.eps0:
            raise ValueError("nu_g >= eps0 is implied by the Slater margin")

    @classmethod
    def from_problem(
        cls,
        cons: ConstraintFamily,
        set_: SimpleSet,
        kappa_f: float,
        L_f: float,
        kappa_q: float,
    ) -> "StructuralConstants":
        return cls(
            kappa_f=float(kappa_f),
            kappa_g=cons.kappa_g,
            nu_g=cons.nu_g,
            L_f=float(L_f),
            L_g=cons.L_g,
            kappa_q=float(kappa_q),
            eps0=cons.slater_margin,
            D0=set_.diameter,
            p=cons.p,
        )

    @property
    def beta0(self) -> float:
        return self.nu_g + math.sqrt(self.p) * (
            self.kappa_g * self.D0 + 0.5 * self.kappa_q * self.D0**2
        )

    def vartheta(self, sigma: float, alpha: float, s: int) -> float:
        _check_params(sigma, alpha, s)
        return (
            0.5 * self.eps0 * sigma * s
            + self.beta0 * sigma * (s - 1)
            + alpha * self.D0**2 / (self.eps0 * s)
            + (2.0 * self.kappa_f * self.D0 + self.kappa_q * self.D0**2) / self.eps0
            + sigma * self.nu_g**2 / self.eps0
        )

    def psi(self, sigma: float, alpha: float, s: int) -> float:
        _check_params(sigma, alpha, s)
        b0 = self.beta0
        drift = b0 + (8.0 * b0**2 / self.eps0) * math.log(32.0 * b0**2 / self.eps0**2)
        return self.vartheta(sigma, alpha, s) + drift * sigma * s

    def kappas(self):
        """Coefficients (k0, k1, k2, k3) so that psi = k0 + k1*a/s + k2*s_ + k3*s_*s.

        Here a is the proximal weight and s_ the penalty parameter.  k2 can be
        negative.
        """
        b0 = self.beta0
        k0 = (2.0 * self.kappa_f * self.D0 + self.kappa_q * self.D0**2) / self.eps0
        k1 = self.D0**2 / self.eps0
        k2 = self.nu_g**2 / self.eps0 - b0
        k3 = 2.0 * b0 + 0.5 * self.eps0 + (8.0 * b0**2 / self.eps0) * math.log(
            32.0 * b0**2 / self.eps0**2
        )
        return k0, k1, k2, k3

    def psi_min(self, sigma: float, alpha: float, T: int):
        """Minimum of psi over integer window lengths s in [1, T], with argmin.

        psi is convex in s, so it suffices to examine the integer neighbours of
        the unconstrained stationary point.
        """
        _check_params(sigma, alpha, 1)
        if T < 1:
            raise ValueError("T must be positive")
        k0, k1, k2, k3 = self.kappas()
        s_star = math.sqrt(k1 * alpha / (k3 * sigma))
        cands = {1, T, max(1, min(T, int(math.floor(s_star)))), max(1, min(T, int(math.ceil(s_star))))}
        best_s = min(cands, key=lambda s: self.psi(sigma, alpha, s))
        return self.psi(sigma, alpha, best_s), best_s

    def snapshot(self, sigma: float, alpha: float, s: int) -> "ConstantsSnapshot":
        k0, k1, k2, k3 = self.kappas()
        return ConstantsSnapshot(
            beta0=self.beta0,
            vartheta=self.vartheta(sigma, alpha, s),
            psi=self.psi(sigma, alpha, s),
            kappa0=k0,
            kappa1=k1,
            kappa2=k2,
            kappa3=k3,
            sigma=float(sigma),
            alpha=float(alpha),
            s=int(s),
        )


@dataclass(frozen=True)
class ConstantsSnapshot:
    beta0: float
    vartheta: float
    psi: float
    kappa0: float
    kappa1: float
    kappa2: float
    kappa3: float
    sigma: float
    alpha: float
    s: int


def _check_params(sigma: float, alpha: float, s: int):
    if sigma <= 0.0 or alpha <= 0.0:
        raise ValueError("sigma and alpha must be positive")
    if int(s) != s or s < 1:
        raise ValueError("s must be an integer >= 1")


def constants(
    cons: ConstraintFamily,
    set_: SimpleSet,
    kappa_f: float,
    kappa_q: float,
    sigma: float,
    alpha: float,
    s: int,
    L_f: float = 1.0,
) -> ConstantsSnapshot:
    """Evaluate the derived bound coefficients for one (sigma, alpha, s) choice."""
    sc = StructuralConstants.from_problem(cons, set_, kappa_f, L_f, kappa_q)
    return sc.snapshot(sigma, alpha, s)


# --- assumption audit -------------------------------------------------------


@dataclass
class AuditItem:
    name: str
    passed: bool
    required: bool
    declared: float | None = None
    observed: float | None = None
    witness: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.required else "WARN")
        parts = [f"{self.name:28s} {status}"]
        if self.declared is not None:
            parts.append(f"declared={self.declared:.6g}")
        if self.observed is not None:
            parts.append(f"observed={self.observed:.6g}")
        if self.witness and not self.passed:
            parts.append(self.witness)
        return "  ".join(parts)


@dataclass
class AuditReport:
    items: list

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items if it.required)

    @property
    def failures(self) -> list:
        return [it for it in self.items if it.required and not it.passed]

    @property
    def warnings(self) -> list:
        return [it for it in self.items if not it.required and not it.passed]

    def format(self) -> str:
        lines = [it.line() for it in self.items]
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        if self.warnings:
            lines.append(f"warnings: {', '.join(it.name for it in self.warnings)}")
        return "\n".join(lines)


def assumption_audit(
    oracle: RoundOracle,
    cons: ConstraintFamily,
    set_: SimpleSet,
    strategy: ThetaStrategy,
    sigma: float = 1.0,
    lam: np.ndarray | None = None,
    n_samples: int = 200,
    seed: int = 0,
) -> AuditReport:
    """Check the declared structure against deterministic samples over the set.

    Lipschitz-style items compare the declared modulus with the worst sampled
    ratio.  The convexity probe for the augmented Lagrangian samples midpoints
    along segments; it is reported as a warning, not a failure, because the
    curvature strategy may deliberately trade it away on non-convex problems.
    """
    from .solver import aug_lagrangian  # deferred, solver depends on this module

    rng = np.random.default_rng(seed)
    X = set_.sample(rng, n_samples)
    pairs = list(zip(X[:-1], X[1:])) + list(zip(X, X[::-1]))
    lam = np.ones(cons.p) if lam is None else np.asarray(lam, dtype=float)
    slack = 1e-9

    items = []

    def ratio_item(name, declared, fun):
        worst, wit = 0.0, ""
        for u, v in pairs:
            dn = float(np.linalg.norm(u - v))
            if dn < 1e-12:
                continue
            r = fun(u, v) / dn
            if r > worst:
                worst, wit = r, f"at {np.round(u, 4)} / {np.round(v, 4)}"
        items.append(
            AuditItem(name, worst <= declared * (1 + slack) + slack, True, declared, worst, wit)
        )

    fvals = {tuple(x): float(oracle.value(x)) for x in X}
    ratio_item("A1 loss Lipschitz", oracle.kappa_f, lambda u, v: abs(fvals[tuple(u)] - fvals[tuple(v)]))
    grad_norm = max(float(np.linalg.norm(oracle.gradient(x))) for x in X)
    items.append(
        AuditItem("A1 loss gradient bound", grad_norm <= oracle.kappa_f * (1 + slack) + slack,
                  True, oracle.kappa_f, grad_norm)
    )

    gvals = {tuple(x): np.asarray(cons.value(x), dtype=float) for x in X}
    ratio_item(
        "A1 constraint Lipschitz", cons.kappa_g,
        lambda u, v: float(np.max(np.abs(gvals[tuple(u)] - gvals[tuple(v)]))),
    )
    gn = max(float(np.linalg.norm(g)) for g in gvals.values())
    items.append(AuditItem("A1 constraint bound", gn <= cons.nu_g * (1 + slack) + slack,
                           True, cons.nu_g, gn))

    ratio_item(
        "A2 loss grad Lipschitz", oracle.L_f,
        lambda u, v: float(np.linalg.norm(oracle.gradient(u) - oracle.gradient(v))),
    )
    jacs = {tuple(x): np.asarray(cons.jacobian(x), dtype=float) for x in X}
    ratio_item(
        "A2 constraint grad Lipschitz", cons.L_g,
        lambda u, v: float(np.max(np.linalg.norm(jacs[tuple(u)] - jacs[tuple(v)], axis=1))),
    )

    g_hat = np.asarray(cons.value(cons.slater_point), dtype=float)
    items.append(AuditItem("A3 Slater margin", bool(np.all(g_hat <= -cons.slater_margin + 1e-12)),
                           True, -cons.slater_margin, float(np.max(g_hat))))

    # model-level checks at a few anchors
    anchors = X[: min(5, len(X))]
    kq = strategy.kappa_q(cons)
    theta_worst, minorant_worst, b1_ok = 0.0, -np.inf, True
    for a in anchors:
        q0, qs = build_models(oracle, cons, a, strategy, validate=False)
        if isinstance(q0.theta, np.ndarray):
            b1_ok &= bool(np.min(np.linalg.eigvalsh(q0.theta)) >= -1e-12)
        else:
            b1_ok &= q0.theta >= -1e-12
        theta_worst = max(theta_worst, q0.theta_norm(), *(q.theta_norm() for q in qs))
        qmat = np.stack([np.asarray(q.value(X), dtype=float) for q in qs], axis=1)
        gmat = np.stack([gvals[tuple(x)] for x in X])
        minorant_worst = max(minorant_worst, float(np.max(qmat - gmat)))
    items.append(AuditItem("B1 loss curvature PSD", b1_ok, True))
    items.append(AuditItem("B2 surrogate minorant", minorant_worst <= 1e-9, True,
                           0.0, minorant_worst))
    items.append(AuditItem("B3 curvature bound", theta_worst <= kq * (1 + slack) + slack,
                           True, kq, theta_worst))

    worst_gap, wit = 0.0, ""
    for a in anchors[:3]:
        q0, qs = build_models(oracle, cons, a, strategy, validate=False)
        for u, v in pairs[: 3 * n_samples // 10]:
            m = 0.5 * (u + v)
            lu, _ = aug_lagrangian(q0, qs, lam, sigma, u)
            lv, _ = aug_lagrangian(q0, qs, lam, sigma, v)
            lm, _ = aug_lagrangian(q0, qs, lam, sigma, m)
            gap = lm - 0.5 * (lu + lv)
            scale = 1.0 + abs(lu) + abs(lv)
            if gap / scale > worst_gap:
                worst_gap, wit = gap / scale, f"segment {np.round(u, 4)} to {np.round(v, 4)}"
    items.append(AuditItem("B4 augmented Lagrangian convex", worst_gap <= 1e-9, False,
                           0.0, worst_gap, wit))

    return AuditReport(items)
