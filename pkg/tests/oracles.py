"""Independent brute-force oracles used by the tests.

These deliberately re-derive quantities by the most direct route available
(pair enumeration, chord enumeration, dense linear algebra, finite
differences) so they share no code path with the implementations they check.
"""

from __future__ import annotations

import numpy as np


def chord(x_i, f_i, x_j, f_j, x):
    return f_i + (f_j - f_i) * ((x - x_i) / (x_j - x_i))


def brute_lower_envelope(xs, values):
    """O(n^2) per point: minimum over the point itself and all spanning chords."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(xs)
    env = values.copy()
    for m in range(n):
        best = values[m]
        for i in range(m):
            for j in range(m + 1, n):
                c = chord(xs[i], values[i], xs[j], values[j], xs[m])
                if c < best:
                    best = c
        env[m] = best
    return env


def brute_envelope_at(xs, values, x0):
    """Envelope value at a single grid point x0 (min over spanning chords)."""
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    m = int(np.argmin(np.abs(xs - x0)))
    best = values[m]
    for i in range(m):
        for j in range(m + 1, len(xs)):
            c = chord(xs[i], values[i], xs[j], values[j], xs[m])
            if c < best:
                best = c
    return best


def brute_conjugate(xs, values, s):
    """sup over grid of s*x - f(x) by direct enumeration."""
    return float(np.max(s * np.asarray(xs) - np.asarray(values)))


def brute_nonlocal_energy_1d(u, xs, k, profile, p):
    """Direct O(n^2) double sum of the concentrated difference-quotient energy."""
    n = len(xs)
    h = xs[1] - xs[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            z = xs[i] - xs[j]
            r = abs(k * z)
            if r > 1.0:
                continue
            psi_k = k * float(profile(np.asarray([r]))[0])
            total += h * h * psi_k * abs(u[i] - u[j]) ** p / abs(z) ** p
    return total


def central_difference_gradient(energy_fn, u, free_mask, step=1e-6):
    """Central differences of a scalar energy in each free coordinate."""
    grad = np.zeros_like(u)
    for i in np.flatnonzero(free_mask):
        up = u.copy()
        up[i] += step
        um = u.copy()
        um[i] -= step
        grad[i] = (energy_fn(up) - energy_fn(um)) / (2 * step)
    return grad


def dense_quadratic_solve(problem):
    """Solve the stationarity system of a quadratic problem directly.

    Builds the dense linear map u -> grad E(u) column by column (exact for
    quadratic energies), then solves for the free nodes given the pins.
    """
    n = problem.grid.node_count
    mask = problem.mask
    u0 = np.zeros(n)
    g0 = problem.model.gradient(u0)
    A = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        A[:, i] = problem.model.gradient(e) - g0
    free = ~mask.pinned
    u = np.where(mask.pinned, mask.values, 0.0)
    rhs = -(g0[free] + A[np.ix_(free, mask.pinned)] @ u[mask.pinned])
    u[free] = np.linalg.solve(A[np.ix_(free, free)], rhs)
    return u


def harmonic_mean_coefficient(a_fn, n_quad=20001):
    """1/ <1/a> over one period by composite trapezoid quadrature."""
    x = np.linspace(0.0, 1.0, n_quad)
    return 1.0 / np.trapz(1.0 / a_fn(x), x)


def random_smooth_field_1d(grid, rng, amplitude=1.0, modes=6):
    """Random low-frequency Fourier field on the grid (zero boundary values)."""
    xs = grid.axis_nodes / grid.length
    out = np.zeros(grid.n)
    for _ in range(modes):
        m = int(rng.integers(1, 12))
        out += amplitude * rng.standard_normal() / m * np.sin(np.pi * m * xs)
    return out
