"""Independent numerical oracles used to pin expected values.

Everything here is deliberately dumb and self-contained (plain numpy, no
package imports beyond constructors in the instance factories), so the tests
check the implementation against brute force rather than against itself.
"""

import numpy as np


def central_diff_grad(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def grid_minimize_1d(f, lo, hi, n_points):
    """Brute-force minimizer of f over [lo, hi] on an n_points lattice."""
    xs = np.linspace(lo, hi, n_points)
    vals = np.array([f(np.array([x])) for x in xs]) if _wants_vector(f) else f(xs)
    j = int(np.argmin(vals))
    return np.array([xs[j]]), float(vals[j])


def _wants_vector(f):
    try:
        out = f(np.linspace(0.0, 1.0, 3))
        return np.ndim(out) != 1
    except Exception:
        return True


def grid_minimize_2d(f, lo, hi, pitch):
    """Brute-force minimizer over a 2-d box with the given per-axis pitch.

    f must accept an (N, 2) array and return (N,) values.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ax = [np.arange(lo[i], hi[i] + 0.5 * pitch, pitch) for i in range(2)]
    X, Y = np.meshgrid(ax[0], ax[1], indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    vals = f(pts)
    j = int(np.argmin(vals))
    return pts[j], float(vals[j])


def grid_min_simplex_distance(x, n_points=100_001):
    """Nearest point of the 2-simplex to x by brute force over the edge param."""
    a = np.linspace(0.0, 1.0, n_points)
    pts = np.stack([a, 1.0 - a], axis=1)
    d = np.sum((pts - np.asarray(x, dtype=float)) ** 2, axis=1)
    return pts[int(np.argmin(d))]
