"""Deterministic quadrature over the unit ball for kernel moments.

Evaluates the concentration limit density

    f0(xi) = integral over the unit ball of psi(z) |xi . z|^p / |z|^p dz

together with kernel masses, plus a Monte-Carlo oracle used to cross-check the
deterministic rules in tests.  The integrand extends continuously along rays
(it depends on z only through |z| and z/|z|), and every node of the rules
below is interior, so the apparent 0/0 at the origin never arises.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .densities import KernelSpec
from .errors import InvalidParameterError

Array = np.ndarray

DEFAULT_RADIAL_ORDER = 64
DEFAULT_ANGULAR_ORDER = 128


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights integrating over the unit ball in d dimensions."""

    nodes: Array  # (m,) in 1d, (m, 2) in 2d
    weights: Array
    scheme: str
    order: int
    dim: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise InvalidParameterError("quadrature weights must be positive")
        r = np.abs(self.nodes) if self.dim == 1 else np.sqrt(
            np.sum(self.nodes * self.nodes, axis=-1)
        )
        if np.any(r > 1.0 + 1e-14):
            raise InvalidParameterError("quadrature nodes must lie in the unit ball")


@lru_cache(maxsize=None)
def unit_ball_rule(
    dim: int,
    radial_order: int = DEFAULT_RADIAL_ORDER,
    angular_order: int = DEFAULT_ANGULAR_ORDER,
) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] for d=1; product polar rule for d=2.

    The polar rule pairs Gauss-Legendre in radius (mapped to (0, 1), weighted
    by the Jacobian r) with equispaced midpoint angles, which is spectrally
    accurate for the periodic angular factor.
    """
    if dim == 1:
        # Two Gauss-Legendre panels [-1, 0] and [0, 1]: radial profiles have a
        # kink at the origin, and per-panel the integrand is smooth.
        t, w = np.polynomial.legendre.leggauss(radial_order)
        r = 0.5 * (t + 1.0)
        w_half = 0.5 * w
        nodes = np.concatenate([-r[::-1], r])
        weights = np.concatenate([w_half[::-1], w_half])
        return QuadratureRule(
            nodes=nodes, weights=weights, scheme="gauss-legendre", order=radial_order, dim=1
        )
    if dim == 2:
        r_ref, w_ref = np.polynomial.legendre.leggauss(radial_order)
        r = 0.5 * (r_ref + 1.0)
        w_r = 0.5 * w_ref
        theta = 2.0 * np.pi * (np.arange(angular_order) + 0.5) / angular_order
        w_theta = 2.0 * np.pi / angular_order
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        nodes = np.stack(
            [np.outer(r, cos_t).ravel(), np.outer(r, sin_t).ravel()], axis=-1
        )
        weights = np.outer(w_r * r, np.full(angular_order, w_theta)).ravel()
        return QuadratureRule(
            nodes=nodes,
            weights=weights,
            scheme="product-polar",
            order=radial_order * angular_order,
            dim=2,
        )
    raise InvalidParameterError(f"unit ball quadrature supports d in {{1, 2}}, got {dim}")


def kernel_mass(kernel: KernelSpec, rule: QuadratureRule | None = None) -> float:
    """Quadrature approximation of the kernel's mass over the unit ball."""
    rule = rule or unit_ball_rule(kernel.dim)
    return float(np.sum(rule.weights * kernel.psi(rule.nodes)))


def f0_of_xi(kernel: KernelSpec, p: float, xi, rule: QuadratureRule | None = None) -> float:
    """Concentration limit density at slope xi.

    Positively p-homogeneous and even in xi up to quadrature error, and convex
    (a nonnegative mixture of convex functions of xi).
    """
    if not p > 1:
        raise InvalidParameterError(f"growth exponent p must be > 1, got {p}")
    rule = rule or unit_ball_rule(kernel.dim)
    z = rule.nodes
    if kernel.dim == 1:
        xi = float(xi)
        dot = xi * z
        norm = np.abs(z)
    else:
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (2,):
            raise InvalidParameterError(f"xi must have 2 components, got shape {xi.shape}")
        dot = z @ xi
        norm = np.sqrt(np.sum(z * z, axis=-1))
    integrand = kernel.psi(z) * np.abs(dot) ** p / norm**p
    return float(np.sum(rule.weights * integrand))


def f0_monte_carlo_oracle(
    kernel: KernelSpec, p: float, xi, n_samples: int, seed: int = 0
) -> tuple[float, float]:
    """Unbiased rejection-sampled estimate of f0(xi) with its standard error.

    Draws uniform points in the unit ball (rejection from the bounding box in
    2d) and averages the integrand times the ball volume.  Intended as an
    independent cross-check of the deterministic rule in tests.
    """
    if n_samples < 1_000:
        raise InvalidParameterError(f"need n_samples >= 1000, got {n_samples}")
    rng = np.random.default_rng(seed)
    if kernel.dim == 1:
        if float(xi) == 0.0:
            return 0.0, 0.0
        z = rng.uniform(-1.0, 1.0, size=n_samples)
        volume = 2.0
        dot = float(xi) * z
        norm = np.abs(z)
    else:
        xi = np.asarray(xi, dtype=float)
        if not np.any(xi):
            return 0.0, 0.0
        z = np.empty((n_samples, 2))
        filled = 0
        while filled < n_samples:
            cand = rng.uniform(-1.0, 1.0, size=(2 * (n_samples - filled) + 8, 2))
            keep = cand[np.sum(cand * cand, axis=1) <= 1.0][: n_samples - filled]
            z[filled : filled + keep.shape[0]] = keep
            filled += keep.shape[0]
        volume = np.pi
        dot = z @ xi
        norm = np.sqrt(np.sum(z * z, axis=-1))
    # the origin has probability zero; guard anyway
    norm = np.where(norm == 0, 1.0, norm)
    values = kernel.psi(z) * np.abs(dot) ** p / norm**p
    estimate = volume * float(np.mean(values))
    std_error = volume * float(np.std(values, ddof=1)) / np.sqrt(n_samples)
    return estimate, std_error
