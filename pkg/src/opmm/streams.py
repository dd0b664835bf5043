"""Seeded synthetic loss streams and constraint families.

Every stream is a deterministic function of (seed, round), so horizons can be
re-run, extended, or executed concurrently with identical draws.  Constraint
constructors compute honest analytic bounds for the declared moduli over the
given feasible set, which keeps the assumption audit and the theoretical
multiplier caps valid without sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, Box, SimpleSet, Simplex
from .oracle import ConstraintFamily, RoundOracle

# Positive placeholder modulus for quantities whose true modulus is zero.
AFFINE_EPS = 1e-9


def rng_for_round(seed: int, t: int) -> np.random.Generator:
    """Independent generator for one round, stable across runs and platforms."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(t),)))


# --- loss streams -----------------------------------------------------------


def _drift_coeff(n: int, seed: int, t: int, scale: float, bias, rotate: float,
                 noise: float) -> np.ndarray:
    """Bounded coefficient with a persistent bias, slow rotation and noise.

    The result always has norm at most `scale`.
    """
    rng = rng_for_round(seed, t)
    raw = np.zeros(n)
    if bias is not None:
        b = np.asarray(bias, dtype=float)
        nb = np.linalg.norm(b)
        if nb > 0:
            raw += b / nb
    if rotate > 0.0:
        ang = rotate * t
        raw[0] += 0.3 * math.cos(ang)
        raw[min(1, n - 1)] += 0.3 * math.sin(ang)
    if noise > 0.0:
        raw += noise * rng.uniform(-1.0, 1.0, n)
    nr = float(np.linalg.norm(raw))
    if nr > 1.0:
        raw /= nr
    return scale * raw


@dataclass(frozen=True)
class LinearDriftStream:
    """f_t(x) = <c_t, x> with seeded bounded coefficients."""

    n: int
    seed: int
    c_scale: float = 1.0
    bias: tuple | None = None
    rotate: float = 0.05
    noise: float = 0.3

    @property
    def kappa_f(self) -> float:
        return self.c_scale

    @property
    def L_f(self) -> float:
        return AFFINE_EPS

    def oracle(self, t: int) -> RoundOracle:
        c = _drift_coeff(self.n, self.seed, t, self.c_scale, self.bias,
                         self.rotate, self.noise)

        return RoundOracle(
            value=lambda x, c=c: np.asarray(x, dtype=float) @ c,
            gradient=lambda x, c=c: np.broadcast_to(c, np.shape(x)).copy(),
            kappa_f=self.kappa_f,
            L_f=self.L_f,
            is_convex=True,
        )


@dataclass(frozen=True)
class QuadConvexStream:
    """f_t(x) = (a/2) |x - b_t|^2 with targets b_t drawn inside the set.

    The curvature a is constant across rounds, so a scalar model curvature of
    a reproduces the loss exactly.  b_lower / b_upper restrict the target
    region (defaults to the set's bounding box); targets are projected onto
    the set, which keeps the gradient bound at a * diameter.
    """

    set_: SimpleSet
    seed: int
    a: float = 1.0
    b_lower: tuple | None = None
    b_upper: tuple | None = None

    def __post_init__(self):
        if self.a <= 0.0:
            raise ValueError("curvature a must be positive")

    @property
    def n(self) -> int:
        return self.set_.dim

    @property
    def kappa_f(self) -> float:
        return self.a * self.set_.diameter

    @property
    def L_f(self) -> float:
        return self.a

    def _target(self, t: int) -> np.ndarray:
        rng = rng_for_round(self.seed, t)
        lo, hi = self.set_.bounding_box()
        if self.b_lower is not None:
            lo = np.asarray(self.b_lower, dtype=float)
        if self.b_upper is not None:
            hi = np.asarray(self.b_upper, dtype=float)
        return self.set_.project(rng.uniform(lo, hi))

    def oracle(self, t: int) -> RoundOracle:
        b = self._target(t)
        a = self.a

        return RoundOracle(
            value=lambda x, b=b: 0.5 * a * np.sum((np.asarray(x, dtype=float) - b) ** 2, axis=-1),
            gradient=lambda x, b=b: a * (np.asarray(x, dtype=float) - b),
            kappa_f=self.kappa_f,
            L_f=self.L_f,
            is_convex=True,
            is_quadratic_convex=True,
            hessian=a * np.eye(self.n),
        )

    def aggregate_quadratic(self, T: int):
        """Exact horizon average: (a_bar, linear term, constant)."""
        bs = np.stack([self._target(t) for t in range(1, T + 1)])
        m = self.a * bs.mean(axis=0)
        c = 0.5 * self.a * float(np.mean(np.sum(bs * bs, axis=1)))
        return self.a, m, c


@dataclass(frozen=True)
class NonconvexSmoothStream:
    """f_t(x) = <c_t, x> + a_t * sum_j sin(x_j) with bounded seeded a_t."""

    n: int
    seed: int
    c_scale: float = 1.0
    bias: tuple | None = None
    rotate: float = 0.05
    noise: float = 0.3
    a_max: float = 0.2

    def __post_init__(self):
        if self.a_max <= 0.0:
            raise ValueError("a_max must be positive")

    @property
    def kappa_f(self) -> float:
        return self.c_scale + self.a_max * math.sqrt(self.n)

    @property
    def L_f(self) -> float:
        return self.a_max

    def oracle(self, t: int) -> RoundOracle:
        c = _drift_coeff(self.n, self.seed, t, self.c_scale, self.bias,
                         self.rotate, self.noise)
        a = self.a_max * float(rng_for_round(self.seed ^ 0x5EED, t).uniform(-1.0, 1.0))

        def value(x, c=c, a=a):
            x = np.asarray(x, dtype=float)
            return x @ c + a * np.sum(np.sin(x), axis=-1)

        def gradient(x, c=c, a=a):
            return c + a * np.cos(np.asarray(x, dtype=float))

        return RoundOracle(value=value, gradient=gradient,
                           kappa_f=self.kappa_f, L_f=self.L_f, is_convex=False)


# --- constraint families ----------------------------------------------------


def _abs_bound_linear(A: np.ndarray, b: np.ndarray, set_: SimpleSet) -> np.ndarray:
    """Per-row upper bound on |A x - b| over the set."""
    if isinstance(set_, Box):
        mid = 0.5 * (set_.lower + set_.upper)
        half = 0.5 * (set_.upper - set_.lower)
        return np.abs(A @ mid - b) + np.abs(A) @ half
    if isinstance(set_, Ball):
        return np.abs(A @ set_.center - b) + set_.radius * np.linalg.norm(A, axis=1)
    if isinstance(set_, Simplex):
        return np.max(np.abs(A - b[:, None]), axis=1)
    raise TypeError(f"unsupported set {type(set_).__name__}")


def linear_constraints(A, b, set_: SimpleSet, slater_point, L_g: float = AFFINE_EPS,
                       margin: float | None = None) -> ConstraintFamily:
    """g(x) = A x - b with moduli bounded analytically over the set."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    p, n = A.shape
    if b.shape != (p,) or n != set_.dim:
        raise ValueError("incompatible constraint shapes")
    slater_point = np.asarray(slater_point, dtype=float)
    computed = float(np.min(b - A @ slater_point))
    eps0 = computed if margin is None else float(margin)
    if eps0 <= 0.0 or eps0 > computed + 1e-12:
        raise ValueError("slater margin must be positive and attained at the slater point")
    nu = float(np.linalg.norm(np.maximum(_abs_bound_linear(A, b, set_), eps0)))

    return ConstraintFamily(
        p=p,
        value=lambda x: np.asarray(x, dtype=float) @ A.T - b,
        jacobian=lambda x: A.copy(),
        kappa_g=float(np.max(np.linalg.norm(A, axis=1))),
        nu_g=nu,
        L_g=L_g,
        convex_flags=(True,) * p,
        slater_point=slater_point,
        slater_margin=eps0,
    )


def ball_constraints(centers, radii, set_: SimpleSet, slater_point,
                     margin: float | None = None) -> ConstraintFamily:
    """g_i(x) = (|x - c_i|^2 - r_i^2) / 2, convex with unit gradient Lipschitz."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    p, n = centers.shape
    if radii.shape != (p,) or n != set_.dim or np.any(radii <= 0):
        raise ValueError("incompatible ball constraint shapes")
    lo, hi = set_.bounding_box()
    corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), axis=-1).reshape(-1, n)
    maxd = np.array([float(np.max(np.linalg.norm(corners - c, axis=1))) for c in centers])

    slater_point = np.asarray(slater_point, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        d = x[..., None, :] - centers
        return 0.5 * (np.sum(d * d, axis=-1) - radii**2)

    computed = float(np.min(-value(slater_point)))
    eps0 = computed if margin is None else float(margin)
    if eps0 <= 0.0 or eps0 > computed + 1e-12:
        raise ValueError("slater margin must be positive and attained at the slater point")
    nu = float(np.linalg.norm(np.maximum(0.5 * np.maximum(maxd**2 - radii**2, radii**2), eps0)))

    return ConstraintFamily(
        p=p,
        value=value,
        jacobian=lambda x: np.asarray(x, dtype=float) - centers,
        kappa_g=float(np.max(maxd)),
        nu_g=nu,
        L_g=1.0,
        convex_flags=(True,) * p,
        slater_point=slater_point,
        slater_margin=eps0,
    )


def sine_constraints(offsets, amps, freqs, set_: SimpleSet, slater_point,
                     margin: float | None = None) -> ConstraintFamily:
    """g_i(x) = offset_i + amp_i * sin(<freq_i, x>), generally non-convex."""
    offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
    amps = np.atleast_1d(np.asarray(amps, dtype=float))
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    p = offsets.size
    if amps.shape != (p,) or freqs.shape != (p, set_.dim):
        raise ValueError("incompatible sine constraint shapes")
    slater_point = np.asarray(slater_point, dtype=float)

    def value(x):
        x = np.asarray(x, dtype=float)
        return offsets + amps * np.sin(x @ freqs.T)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return (amps * np.cos(x @ freqs.T))[:, None] * freqs

    computed = float(np.min(-value(slater_point)))
    eps0 = computed if margin is None else float(margin)
    if eps0 <= 0.0 or eps0 > computed + 1e-12:
        raise ValueError("slater margin must be positive and attained at the slater point")
    fnorm = np.linalg.norm(freqs, axis=1)

    return ConstraintFamily(
        p=p,
        value=value,
        jacobian=jacobian,
        kappa_g=float(np.max(np.abs(amps) * fnorm)),
        nu_g=float(np.linalg.norm(np.maximum(np.abs(offsets) + np.abs(amps), eps0))),
        L_g=float(np.max(np.abs(amps) * fnorm**2)),
        convex_flags=(False,) * p,
        slater_point=slater_point,
        slater_margin=eps0,
    )


# --- assembly from config sections ------------------------------------------


def _reject_unknown(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")


def make_set(spec: dict) -> SimpleSet:
    kind = spec.get("kind")
    if kind == "box":
        _reject_unknown(spec, {"kind", "lower", "upper"}, "set")
        return Box(lower=spec["lower"], upper=spec["upper"])
    if kind == "ball":
        _reject_unknown(spec, {"kind", "center", "radius"}, "set")
        return Ball(center=spec["center"], radius=spec["radius"])
    if kind == "simplex":
        _reject_unknown(spec, {"kind", "dim"}, "set")
        return Simplex(dim=spec["dim"])
    raise ValueError(f"unknown set kind {kind!r}")


def make_constraints(spec: dict, set_: SimpleSet) -> ConstraintFamily:
    cid, params = spec.get("id"), dict(spec.get("params", {}))
    if cid == "linear":
        _reject_unknown(params, {"A", "b", "slater_point", "L_g", "margin"}, "constraints.params")
        return linear_constraints(params["A"], params["b"], set_, params["slater_point"],
                                  L_g=params.get("L_g", AFFINE_EPS),
                                  margin=params.get("margin"))
    if cid == "ball":
        _reject_unknown(params, {"centers", "radii", "slater_point", "margin"}, "constraints.params")
        return ball_constraints(params["centers"], params["radii"], set_,
                                params["slater_point"], margin=params.get("margin"))
    if cid == "sine":
        _reject_unknown(params, {"offsets", "amps", "freqs", "slater_point", "margin"},
                        "constraints.params")
        return sine_constraints(params["offsets"], params["amps"], params["freqs"], set_,
                                params["slater_point"], margin=params.get("margin"))
    raise ValueError(f"unknown constraint family {cid!r}")


def make_stream(spec: dict, set_: SimpleSet, seed: int):
    sid, params = spec.get("id"), dict(spec.get("params", {}))
    n = set_.dim
    if sid == "linear-drift":
        _reject_unknown(params, {"c_scale", "bias", "rotate", "noise"}, "stream.params")
        bias = tuple(params["bias"]) if params.get("bias") is not None else None
        return LinearDriftStream(n=n, seed=seed, c_scale=params.get("c_scale", 1.0),
                                 bias=bias, rotate=params.get("rotate", 0.05),
                                 noise=params.get("noise", 0.3))
    if sid == "quad-convex":
        _reject_unknown(params, {"a", "b_lower", "b_upper"}, "stream.params")
        b_lo = tuple(params["b_lower"]) if params.get("b_lower") is not None else None
        b_hi = tuple(params["b_upper"]) if params.get("b_upper") is not None else None
        return QuadConvexStream(set_=set_, seed=seed, a=params.get("a", 1.0),
                                b_lower=b_lo, b_upper=b_hi)
    if sid == "nonconvex-smooth":
        _reject_unknown(params, {"c_scale", "bias", "rotate", "noise", "a_max"}, "stream.params")
        bias = tuple(params["bias"]) if params.get("bias") is not None else None
        return NonconvexSmoothStream(n=n, seed=seed, c_scale=params.get("c_scale", 1.0),
                                     bias=bias, rotate=params.get("rotate", 0.05),
                                     noise=params.get("noise", 0.3),
                                     a_max=params.get("a_max", 0.2))
    raise ValueError(f"unknown stream {sid!r}")
