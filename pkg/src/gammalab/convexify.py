"""Legendre-Fenchel conjugates and convex envelopes of sampled functions.

The conjugate of a sampled function is computed by the linear-time
monotone-argmax sweep: the maximizing index of ``s*x_i - f_i`` is
nondecreasing in ``s``, so after reducing to the lower convex hull a single
pointer pass over an ascending dual grid produces all values.  The convex
envelope (double conjugate restricted to the grid) is realized directly as
chord interpolation on the lower hull, which is what double conjugation
collapses to on the sample points.

Chord values use ``f_i + (f_j - f_i) * (x - x_i) / (x_j - x_i)`` throughout;
envelope outputs are additionally clamped below the input samples so the
``envelope <= original`` guarantee is exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameterError

Array = np.ndarray


def _check_grid(xs: Array, what: str) -> Array:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size < 2:
        raise InvalidParameterError(f"{what} must be a 1d array with >= 2 entries")
    if not np.all(np.isfinite(xs)):
        raise InvalidParameterError(f"{what} must be finite")
    if np.any(np.diff(xs) <= 0):
        raise InvalidParameterError(f"{what} must be strictly increasing")
    return xs


@dataclass(frozen=True)
class SampledFunction1D:
    """Function samples on a strictly increasing grid; +inf outside the grid."""

    xs: Array
    values: Array

    def __post_init__(self):
        xs = _check_grid(self.xs, "sample grid")
        values = np.asarray(self.values, dtype=float)
        if values.shape != xs.shape:
            raise InvalidParameterError("values must match the grid in length")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("sampled values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)

    def __call__(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.xs, self.values)
        outside = (x < self.xs[0]) | (x > self.xs[-1])
        return np.where(outside, np.inf, out)

    def boundary_trust(self) -> Array:
        """False within one grid cell of the window edge, where envelope values
        can depend on samples outside the window."""
        trust = np.ones_like(self.values, dtype=bool)
        trust[:2] = False
        trust[-2:] = False
        return trust


def from_callable(fn: Callable, xs) -> SampledFunction1D:
    xs = np.asarray(xs, dtype=float)
    return SampledFunction1D(xs=xs, values=np.asarray(fn(xs), dtype=float))


def _lower_hull_indices(xs: Array, values: Array) -> np.ndarray:
    """Indices of the strict lower convex hull, left to right (monotone chain)."""
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (xs[a] - xs[o]) * (values[i] - values[o]) - (
                values[a] - values[o]
            ) * (xs[i] - xs[o])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def _conjugate_values(
    xs: Array, values: Array, dual_grid: Array, assume_convex: bool = False
) -> Array:
    """max_i (s * x_i - f_i) for every s in the ascending dual grid.

    Linear-time monotone-argmax sweep: the max over points equals the max over
    their lower hull, where the objective is unimodal in the vertex index and
    the maximizing index is nondecreasing in s.  The argmax for each s is the
    vertex whose neighboring edge slopes bracket s; ties resolve to the
    smallest index.  ``assume_convex`` skips the hull reduction for inputs
    known to be convex sequences (conjugates of earlier sweeps).
    """
    if assume_convex:
        hx, hv = xs, values
        slopes = np.diff(hv) / np.diff(hx)
        # repair ulp-scale dips so the slope sequence is monotone
        slopes = np.maximum.accumulate(slopes)
    else:
        hull = _lower_hull_indices(xs, values)
        hx = xs[hull]
        hv = values[hull]
        if hx.size == 1:
            return dual_grid * hx[0] - hv[0]
        slopes = np.diff(hv) / np.diff(hx)
    j = np.searchsorted(slopes, dual_grid, side="left")
    return dual_grid * hx[j] - hv[j]


def legendre_transform(f: SampledFunction1D, dual_grid) -> SampledFunction1D:
    """Conjugate ``f*(s) = max_i (s x_i - f(x_i))`` on a strictly increasing dual grid."""
    dual_grid = _check_grid(np.asarray(dual_grid, dtype=float), "dual grid")
    return SampledFunction1D(xs=dual_grid, values=_conjugate_values(f.xs, f.values, dual_grid))


def default_dual_grid(f: SampledFunction1D, size: int = 513) -> Array:
    """Symmetric dual grid covering all sample slopes, padded by 10%.

    Slopes outside that range never achieve the sup on a bounded grid.
    """
    slopes = np.diff(f.values) / np.diff(f.xs)
    limit = 1.1 * max(float(np.max(np.abs(slopes))), 1e-8)
    return np.linspace(-limit, limit, size)


def _chord(x_i, f_i, x_j, f_j, x):
    return f_i + (f_j - f_i) * ((x - x_i) / (x_j - x_i))


def convex_envelope(f: SampledFunction1D) -> SampledFunction1D:
    """Lower convex envelope of the sampled points, on the same grid.

    Equals the double conjugate restricted to the grid: hull vertices keep
    their sampled values exactly, points strictly above the hull receive the
    chord value of the bracketing hull edge.  Pointwise <= f and idempotent.
    """
    xs, values = f.xs, f.values
    hull = _lower_hull_indices(xs, values)
    env = values.copy()
    for a, b in zip(hull[:-1], hull[1:]):
        if b - a > 1:
            inner = slice(a + 1, b)
            env[inner] = _chord(xs[a], values[a], xs[b], values[b], xs[inner])
    np.minimum(env, values, out=env)
    return SampledFunction1D(xs=xs, values=env)


@dataclass(frozen=True)
class SampledFunction2D:
    """Samples on a rectangular grid; values indexed as values[i, j] = f(xs[i], ys[j])."""

    xs: Array
    ys: Array
    values: Array

    def __post_init__(self):
        xs = _check_grid(self.xs, "x grid")
        ys = _check_grid(self.ys, "y grid")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (xs.size, ys.size):
            raise InvalidParameterError(
                f"values shape {values.shape} must be ({xs.size}, {ys.size})"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("sampled values must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "values", values)

    def boundary_trust(self) -> Array:
        trust = np.ones_like(self.values, dtype=bool)
        trust[:2, :] = False
        trust[-2:, :] = False
        trust[:, :2] = False
        trust[:, -2:] = False
        return trust


def from_callable_2d(fn: Callable, xs, ys) -> SampledFunction2D:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    return SampledFunction2D(xs=xs, ys=ys, values=np.asarray(fn(pts), dtype=float))


def _slope_grid(primal: Array, values_2d: Array, axis: int, cap: int) -> Array:
    """Adaptive dual grid: the sorted union of secant slopes along one axis.

    Slope-space density then matches the local curvature of the samples, which
    is what the back-conjugation needs to recover hull vertices accurately;
    endpoints are padded by 10%.
    """
    diffs = np.diff(values_2d, axis=axis)
    steps = np.diff(primal)
    steps = steps.reshape((-1, 1) if axis == 0 else (1, -1))
    slopes = np.unique((diffs / steps).ravel())
    limit = 1.1 * max(float(np.max(np.abs(slopes))), 1e-8)
    if slopes.size > cap:
        take = np.round(np.linspace(0, slopes.size - 1, cap)).astype(int)
        slopes = slopes[np.unique(take)]
    # slope 0 supports flat envelope regions (interior minima); keep it always,
    # together with the padded extremes
    return np.unique(np.concatenate([slopes, [-limit, 0.0, limit]]))


def _conjugate_along_rows(
    xs: Array, V: Array, sgrid: Array, assume_convex: bool = False
) -> Array:
    """Conjugate each row of V (sampled on xs) onto sgrid; returns (rows, len(sgrid))."""
    out = np.empty((V.shape[0], sgrid.size))
    for i in range(V.shape[0]):
        out[i] = _conjugate_values(xs, V[i], sgrid, assume_convex=assume_convex)
    return out


def convex_envelope_2d(f: SampledFunction2D, dual_cap: int = 2048) -> SampledFunction2D:
    """Lower convex envelope on a rectangular grid via double conjugation.

    The conjugate g*(s) = max over grid points of (<s, x> - f(x)) is computed
    on a 2d dual grid (adaptive product of secant slopes) by factorizing the
    joint max into per-axis conjugate sweeps, then conjugated back onto the
    primal grid.  Iterating the 1d envelope per axis would not produce the 2d
    envelope; the joint dual max is required.  Accuracy is limited by the dual
    grid resolution; outputs are clamped below the input samples.
    """
    xs, ys, V = f.xs, f.ys, f.values
    sx = _slope_grid(xs, V, axis=0, cap=dual_cap)
    sy = _slope_grid(ys, V, axis=1, cap=dual_cap)

    # H[i, b] = max_y (sy_b * y - V[i, y])
    H = _conjugate_along_rows(ys, V, sy)
    # F[a, b] = max_x (sx_a * x - (-H[x, b])) = g*(sx_a, sy_b)
    F = _conjugate_along_rows(xs, -H.T, sx).T
    # back: G[i, b] = max_a (x_i * sx_a - F[a, b]); F is an exact discrete
    # conjugate, hence convex along sx, so the hull reduction can be skipped
    G = _conjugate_along_rows(sx, F.T, xs, assume_convex=True).T
    # env[i, j] = max_b (y_j * sy_b - (-G[i, b])); -G is concave in s2 only in
    # the continuum limit (discrete max over sx breaks it), so reduce via hull
    env = _conjugate_along_rows(sy, -G, ys)

    np.minimum(env, V, out=env)
    return SampledFunction2D(xs=xs, ys=ys, values=env)
