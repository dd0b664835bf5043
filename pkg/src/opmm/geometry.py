"""Compact convex sets with closed-form projections and normal-cone certificates.

Three set families are supported: axis-aligned boxes, Euclidean balls and the
probability simplex.  All projections are exact (no inner iteration), and every
operation is a pure function of immutable inputs, so instances can be shared
across any number of concurrent callers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

# Absolute tolerance for set-membership tests.
FEAS_TOL = 1e-10

# Boxes with more vertices than this skip vertex enumeration.
_MAX_VERTEX_DIM = 12


class UnsupportedMetricSetPair(ValueError):
    """Weighted projection requested for a (metric, set) pair with no closed form."""


class InfeasiblePoint(ValueError):
    """A point that is required to lie in the set does not."""


def _as_vector(x, n: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({n},)")
    return x


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {x : lower <= x <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim)
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def vertices(self) -> np.ndarray:
        if self.dim > _MAX_VERTEX_DIM:
            return np.empty((0, self.dim))
        cols = [(lo, hi) for lo, hi in zip(self.lower, self.upper)]
        return np.array(list(itertools.product(*cols)))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(k, self.dim))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()


@dataclass(frozen=True)
class Ball:
    """Euclidean ball {x : |x - center| <= radius}."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if float(self.radius) <= 0.0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def project(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim)
        d = x - self.center
        r = float(np.linalg.norm(d))
        if r <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / r)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = _as_vector(x, self.dim)
        return bool(np.linalg.norm(x - self.center) <= self.radius + tol)

    def vertices(self) -> np.ndarray:
        return np.empty((0, self.dim))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        # direction times radius scaled for uniformity in volume
        g = rng.standard_normal((k, self.dim))
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
        u = rng.uniform(0.0, 1.0, size=(k, 1)) ** (1.0 / self.dim)
        return self.center + self.radius * u * g

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Simplex:
    """Probability simplex {x >= 0 : sum(x) = 1} in R^dim."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("simplex dimension must be positive")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(2.0))

    def project(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim)
        return project_simplex(x)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        x = _as_vector(x, self.dim)
        return bool(np.all(x >= -tol) and abs(float(np.sum(x)) - 1.0) <= tol * self.dim + tol)

    def vertices(self) -> np.ndarray:
        return np.eye(self.dim)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.dirichlet(np.ones(self.dim), size=k)

    def bounding_box(self):
        return np.zeros(self.dim), np.ones(self.dim)


SimpleSet = Box | Ball | Simplex


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold: with u the coordinates sorted in decreasing order,
    the threshold is tau = (cumsum(u)_rho - 1) / rho for the largest rho with
    u_rho > (cumsum(u)_rho - 1) / rho, and the projection is max(x - tau, 0).
    """
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.size + 1)
    cond = u - css / idx > 0.0
    rho = int(np.nonzero(cond)[0][-1]) + 1
    tau = css[rho - 1] / rho
    return np.maximum(x - tau, 0.0)


@dataclass(frozen=True)
class ScalarMetric:
    """Weighting matrix G = c * I with c > 0."""

    c: float

    def __post_init__(self):
        if float(self.c) <= 0.0:
            raise ValueError("scalar metric weight must be positive")
        object.__setattr__(self, "c", float(self.c))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.c * v


@dataclass(frozen=True)
class DiagMetric:
    """Weighting matrix G = diag(d) with d > 0 componentwise."""

    d: np.ndarray

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if np.any(d <= 0.0):
            raise ValueError("diagonal metric weights must be positive")
        object.__setattr__(self, "d", d)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.d * v


WeightedMetric = ScalarMetric | DiagMetric


def weighted_project(set_: SimpleSet, metric: WeightedMetric, x) -> np.ndarray:
    """Nearest point of the set in the metric |v|_G = sqrt(v' G v).

    A scalar metric rescales the norm uniformly, so it reduces to the plain
    projection on every set.  A diagonal metric is supported on boxes only,
    where the problem separates per coordinate and the clamp is independent
    of the (positive) weights.
    """
    x = _as_vector(x, set_.dim)
    if isinstance(metric, ScalarMetric):
        return set_.project(x)
    if isinstance(metric, DiagMetric):
        if metric.d.shape != (set_.dim,):
            raise ValueError("diagonal metric dimension mismatch")
        if isinstance(set_, Box):
            return np.clip(x, set_.lower, set_.upper)
        raise UnsupportedMetricSetPair(
            f"diagonal metric is only supported on boxes, got {type(set_).__name__}"
        )
    raise TypeError(f"unknown metric type {type(metric).__name__}")


def weighted_dist_sq(set_: SimpleSet, metric: WeightedMetric, x):
    """Half squared weighted distance to the set, with its gradient.

    Returns (value, gradient) where value = 0.5 * dist_G(x, C)^2 and
    gradient = G (x - proj_G(x)).  The value is continuously differentiable
    even across the set boundary.
    """
    x = _as_vector(x, set_.dim)
    u = weighted_project(set_, metric, x)
    r = x - u
    grad = metric.apply(r)
    return 0.5 * float(r @ grad), grad


def normal_cone_violation(set_: SimpleSet, x, w, samples: int = 64, seed: int = 0) -> float:
    """Largest inner product <w, z - x> over a deterministic sample of z in the set.

    A value below tolerance certifies, on the sample, that w lies in the normal
    cone at x.  The candidate set is seeded uniform samples plus all vertices
    for boxes and simplices (where the linear maximum is attained at a vertex,
    making the certificate exact) and the analytic support point for balls.
    x itself is always a candidate, so the result is at least zero, with zero
    attained exactly when w is a valid normal direction on the sample.
    """
    x = _as_vector(x, set_.dim)
    w = _as_vector(w, set_.dim, "w")
    if not set_.contains(x):
        raise InfeasiblePoint("normal cone queried at a point outside the set")
    if samples < 0:
        raise ValueError("samples must be nonnegative")
    cands = [x[None, :]]
    if samples > 0:
        rng = np.random.default_rng(seed)
        cands.append(set_.sample(rng, samples))
    verts = set_.vertices()
    if verts.size:
        cands.append(verts)
    if isinstance(set_, Ball):
        wn = float(np.linalg.norm(w))
        if wn > 0.0:
            cands.append((set_.center + set_.radius * w / wn)[None, :])
    z = np.vstack(cands)
    return float(np.max((z - x) @ w))
