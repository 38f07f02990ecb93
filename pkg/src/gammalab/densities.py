"""Kernels and energy densities, plus sampled validation of their growth bounds.

Kernels are radial profiles supported on the unit ball; scaled copies
``k^d psi(k z)`` concentrate their mass at scale ``1/k``.  Local densities
``g(x, xi)`` act on gradients, nonlocal densities ``f(x, y, z, tau)`` act on
finite differences ``tau = u(x) - u(y)`` at separation ``z = x - y``.  All
objects are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError

Array = np.ndarray

_PROFILE_SCAN_POINTS = 4097


def _as_radius(z: Array, dim: int) -> Array:
    z = np.asarray(z, dtype=float)
    if dim == 1:
        return np.abs(z)
    if z.shape[-1] != dim:
        raise InvalidParameterError(
            f"expected points with {dim} components, got shape {z.shape}"
        )
    return np.sqrt(np.sum(z * z, axis=-1))


@dataclass(frozen=True)
class KernelSpec:
    """Radial kernel profile on the unit ball.

    ``profile`` maps radii in [0, 1] to nonnegative values (vectorized); the
    kernel value at a point z is ``profile(|z|)`` for ``|z| <= 1`` and exactly
    0 outside.  ``nominal_mass`` is the mass the full integral over the ball
    is expected to have (checked against quadrature by callers).
    """

    profile: Callable[[Array], Array]
    dim: int
    nominal_mass: float = 1.0
    name: str = "custom"
    profile_sup: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidParameterError(f"kernel dim must be 1 or 2, got {self.dim}")
        rs = np.linspace(0.0, 1.0, _PROFILE_SCAN_POINTS)
        vals = np.asarray(self.profile(rs), dtype=float)
        if vals.shape != rs.shape:
            raise InvalidParameterError("kernel profile must be vectorized over radii")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("kernel profile produced non-finite values")
        if np.any(vals < 0):
            r_bad = rs[int(np.argmin(vals))]
            raise InvalidParameterError(
                f"kernel profile is negative at r={r_bad:.6g} ({vals.min():.6g})"
            )
        object.__setattr__(self, "profile_sup", float(vals.max()))

    def psi(self, z: Array) -> Array:
        """Kernel value at points ``z`` (shape (...,) for d=1, (..., 2) for d=2)."""
        r = _as_radius(z, self.dim)
        inside = r <= 1.0
        vals = np.zeros_like(r)
        if np.any(inside):
            vals[inside] = self.profile(r[inside])
        return vals

    def validate_mass(self, tol: float = 1e-6) -> float:
        """Check the quadrature mass against ``nominal_mass``; returns the mass."""
        from .quadrature import kernel_mass  # deferred: quadrature imports this module

        mass = kernel_mass(self)
        if abs(mass - self.nominal_mass) > tol:
            raise InvalidParameterError(
                f"kernel mass {mass!r} differs from nominal {self.nominal_mass!r} "
                f"by more than {tol!r}"
            )
        return mass


def tabulated_profile(radii, values) -> Callable[[Array], Array]:
    """Piecewise-linear profile through samples; radii must span [0, 1]."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.shape != values.shape:
        raise InvalidParameterError("tabulated profile needs matching 1d arrays")
    if np.any(np.diff(radii) <= 0):
        raise InvalidParameterError("tabulated radii must be strictly increasing")
    if radii[0] != 0.0 or radii[-1] != 1.0:
        raise InvalidParameterError("tabulated radii must span [0, 1] exactly")

    def profile(r):
        return np.interp(np.asarray(r, dtype=float), radii, values)

    return profile


def eval_scaled_kernel(kernel: KernelSpec, k: float, z) -> Array:
    """Evaluate the concentrated kernel ``k^d psi(k z)``.

    Vanishes whenever ``|k z| > 1``, i.e. outside a ball of radius 1/k.
    """
    if not np.isfinite(k) or k <= 0:
        raise InvalidParameterError(f"concentration parameter k must be > 0, got {k}")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0 if kernel.dim == 1 else z.ndim == 1
    out = k**kernel.dim * kernel.psi(k * z)
    return float(out) if scalar else out


# --- kernel builtins -------------------------------------------------------

def _uniform_kernel(dim: int) -> KernelSpec:
    height = 0.5 if dim == 1 else 1.0 / np.pi
    return KernelSpec(
        profile=lambda r, _h=height: np.full_like(np.asarray(r, dtype=float), _h),
        dim=dim,
        nominal_mass=1.0,
        name=f"uniform-{dim}d",
    )


def _triangle_kernel(dim: int) -> KernelSpec:
    # Mass of (1 - r) over the ball: 1 in 1d, pi/3 in 2d.
    scale = 1.0 if dim == 1 else 3.0 / np.pi
    return KernelSpec(
        profile=lambda r, _s=scale: _s * (1.0 - np.asarray(r, dtype=float)),
        dim=dim,
        nominal_mass=1.0,
        name=f"triangle-{dim}d",
    )


BUILTIN_KERNELS = {
    "uniform": (_uniform_kernel, {"dim": "1 or 2"}),
    "triangle": (_triangle_kernel, {"dim": "1 or 2"}),
}


def builtin_kernel(name: str, dim: int | None = None) -> KernelSpec:
    """Construct a built-in kernel by name ('uniform', 'triangle', or 'name-1d')."""
    base = name
    if name.endswith("-1d") or name.endswith("-2d"):
        base = name[:-3]
        suffix_dim = int(name[-2])
        if dim is not None and dim != suffix_dim:
            raise InvalidParameterError(f"kernel name {name!r} conflicts with dim={dim}")
        dim = suffix_dim
    if base not in BUILTIN_KERNELS:
        raise InvalidParameterError(
            f"unknown kernel {name!r}; known: {sorted(BUILTIN_KERNELS)}"
        )
    if dim is None:
        dim = 1
    factory, _ = BUILTIN_KERNELS[base]
    return factory(dim)


# --- densities -------------------------------------------------------------

@dataclass(frozen=True)
class LocalDensity:
    """Density g(x, xi) acting on gradients, with two-sided p-growth constants.

    ``evaluate(x, xi)`` is vectorized over a leading sample axis; x-independent
    densities simply ignore ``x``.  ``evaluate_dxi`` is the analytic derivative
    in xi (same shape as xi), needed for gradient assembly.
    """

    name: str
    evaluate: Callable[[Array, Array], Array]
    p: float
    c0: float
    c1: float
    a0: float
    dim: Optional[int] = None
    periodic: bool = False
    convex: bool = False
    x_independent: bool = False
    evaluate_dxi: Optional[Callable[[Array, Array], Array]] = None

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameterError(f"growth exponent p must be > 1, got {self.p}")
        if not (self.c0 > 0 and self.c1 >= self.c0 and self.a0 >= 0):
            raise InvalidParameterError(
                f"need c0 > 0, c1 >= c0, a0 >= 0; got {self.c0}, {self.c1}, {self.a0}"
            )


@dataclass(frozen=True)
class NonlocalDensity:
    """Density f(x, y, z, tau) on pairs, sandwiched between kernel difference quotients.

    Vanishes for |z| > 1.  When the tau-dependence is exactly
    ``pair_weight(x, y, z) * |tau|^p`` the separable fast assembly path is used;
    ``evaluate``/``evaluate_dtau`` stay authoritative for the generic path.
    """

    name: str
    kernel: KernelSpec
    p: float
    C0: float
    C1: float
    evaluate: Callable[[Array, Array, Array, Array], Array]
    periodic: bool = False
    x_independent: bool = False
    pair_weight: Optional[Callable[[Array, Array, Array], Array]] = None
    evaluate_dtau: Optional[Callable[[Array, Array, Array, Array], Array]] = None

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def __post_init__(self):
        if not self.p > 1:
            raise InvalidParameterError(f"growth exponent p must be > 1, got {self.p}")
        if not (self.C0 > 0 and self.C1 >= self.C0):
            raise InvalidParameterError(
                f"need 0 < C0 <= C1; got {self.C0}, {self.C1}"
            )


def _smoothed_p_derivative(t: Array, p: float, sigma: float | None = None) -> Array:
    """d/dt |t|^p; for p < 2 the modulus is smoothed near 0 so first-order
    methods stay well defined (sigma defaults to 1e-8 times the data scale)."""
    t = np.asarray(t, dtype=float)
    if p == 2.0:
        return 2.0 * t
    if p >= 2.0:
        return p * np.abs(t) ** (p - 1.0) * np.sign(t)
    if sigma is None:
        sigma = 1e-8 * (1.0 + float(np.max(np.abs(t))) if t.size else 1.0)
    return p * t * (t * t + sigma * sigma) ** ((p - 2.0) / 2.0)


def _periodic_profile(x: Array, dim: int) -> Array:
    """Smooth unit-periodic profile in [0, 1]; product over coordinates in 2d."""
    x = np.asarray(x, dtype=float)
    per = 0.5 * (1.0 + np.cos(2.0 * np.pi * x))
    if dim == 2:
        return np.prod(per, axis=-1)
    return per


def _sq_norm(xi: Array, dim: int) -> Array:
    xi = np.asarray(xi, dtype=float)
    if dim == 2:
        return np.sum(xi * xi, axis=-1)
    return xi * xi


# --- builtin local densities ------------------------------------------------

def _make_quadratic_local(dim: int = 1) -> LocalDensity:
    def ev(x, xi):
        return _sq_norm(xi, dim)

    def dxi(x, xi):
        return 2.0 * np.asarray(xi, dtype=float)

    return LocalDensity(
        name="quadratic-local",
        evaluate=ev,
        p=2.0,
        c0=1.0,
        c1=1.0,
        a0=0.0,
        dim=dim,
        periodic=True,
        convex=True,
        x_independent=True,
        evaluate_dxi=dxi,
    )


def _make_double_well_1d(delta: float = 0.1) -> LocalDensity:
    if not delta > 0:
        raise InvalidParameterError(f"double-well delta must be > 0, got {delta}")

    def ev(x, xi):
        xi = np.asarray(xi, dtype=float)
        well = np.minimum((xi - 1.0) ** 2, (xi + 1.0) ** 2)
        return well + delta * xi * xi

    def dxi(x, xi):
        xi = np.asarray(xi, dtype=float)
        branch = np.where(xi >= 0.0, xi - 1.0, xi + 1.0)
        return 2.0 * branch + 2.0 * delta * xi

    return LocalDensity(
        name="double-well-1d",
        evaluate=ev,
        p=2.0,
        c0=delta,
        c1=1.0 + delta,
        a0=1.0,
        dim=1,
        periodic=True,
        convex=False,
        x_independent=True,
        evaluate_dxi=dxi,
    )


def _make_periodic_coefficient_local(
    a_min: float = 1.0, a_max: float = 2.0, p: float = 2.0, dim: int = 1
) -> LocalDensity:
    if not (0 < a_min <= a_max):
        raise InvalidParameterError(f"need 0 < a_min <= a_max, got {a_min}, {a_max}")

    def coeff(x):
        return a_min + (a_max - a_min) * _periodic_profile(x, dim)

    def ev(x, xi):
        return coeff(x) * _sq_norm(xi, dim) ** (p / 2.0)

    def dxi(x, xi):
        xi = np.asarray(xi, dtype=float)
        a = coeff(x)
        if p == 2.0:
            fac = 2.0 * a
        else:
            nrm2 = _sq_norm(xi, dim)
            fac = p * a * nrm2 ** ((p - 2.0) / 2.0)
        if dim == 2:
            fac = fac[..., None]
        return fac * xi

    return LocalDensity(
        name="periodic-coefficient-local",
        evaluate=ev,
        p=p,
        c0=a_min,
        c1=a_max,
        a0=0.0,
        dim=dim,
        periodic=True,
        convex=True,
        x_independent=False,
        evaluate_dxi=dxi,
    )


# --- builtin nonlocal densities ----------------------------------------------

def _difference_quotient_density(
    name: str,
    kernel: KernelSpec,
    p: float,
    modulation: Optional[Callable[[Array, Array], Array]],
    C0: float,
    C1: float,
    x_independent: bool,
) -> NonlocalDensity:
    dim = kernel.dim

    def pw(x, y, z):
        r2 = _sq_norm(z, dim)
        w = np.where(r2 > 0, kernel.psi(z) / np.where(r2 > 0, r2, 1.0) ** (p / 2.0), 0.0)
        if modulation is not None:
            w = w * modulation(x, y)
        return w

    def ev(x, y, z, tau):
        tau = np.asarray(tau, dtype=float)
        return pw(x, y, z) * np.abs(tau) ** p

    def dtau(x, y, z, tau):
        return pw(x, y, z) * _smoothed_p_derivative(tau, p)

    return NonlocalDensity(
        name=name,
        kernel=kernel,
        p=p,
        C0=C0,
        C1=C1,
        evaluate=ev,
        periodic=True,
        x_independent=x_independent,
        pair_weight=pw,
        evaluate_dtau=dtau,
    )


def _make_kernel_p_difference(kernel: KernelSpec, p: float = 2.0) -> NonlocalDensity:
    return _difference_quotient_density(
        "kernel-p-difference", kernel, p, None, 1.0, 1.0, x_independent=True
    )


def _make_periodic_kernel_p_difference(
    kernel: KernelSpec, p: float = 2.0, c_min: float = 1.0, c_max: float = 2.0
) -> NonlocalDensity:
    if not (0 < c_min <= c_max):
        raise InvalidParameterError(f"need 0 < c_min <= c_max, got {c_min}, {c_max}")
    dim = kernel.dim

    def modulation(x, y):
        return c_min + (c_max - c_min) * _periodic_profile(x, dim) * _periodic_profile(y, dim)

    return _difference_quotient_density(
        "periodic-kernel-p-difference",
        kernel,
        p,
        modulation,
        c_min,
        c_max,
        x_independent=False,
    )


BUILTIN_DENSITIES = {
    "quadratic-local": (
        _make_quadratic_local,
        {"dim": "1 or 2 (default 1)"},
        "g(xi) = |xi|^2",
    ),
    "double-well-1d": (
        _make_double_well_1d,
        {"delta": "coercivity weight > 0 (default 0.1)"},
        "g(xi) = min{(xi-1)^2, (xi+1)^2} + delta*xi^2",
    ),
    "periodic-coefficient-local": (
        _make_periodic_coefficient_local,
        {
            "a_min": "coefficient floor > 0 (default 1.0)",
            "a_max": "coefficient cap >= a_min (default 2.0)",
            "p": "growth exponent (default 2.0)",
            "dim": "1 or 2 (default 1)",
        },
        "g(x, xi) = a(x)|xi|^p with a = a_min + (a_max - a_min) * per(x)",
    ),
    "kernel-p-difference": (
        _make_kernel_p_difference,
        {"kernel": "KernelSpec", "p": "growth exponent (default 2.0)"},
        "f(x, y, z, tau) = psi(z) |tau|^p / |z|^p",
    ),
    "periodic-kernel-p-difference": (
        _make_periodic_kernel_p_difference,
        {
            "kernel": "KernelSpec",
            "p": "growth exponent (default 2.0)",
            "c_min": "modulation floor > 0 (default 1.0)",
            "c_max": "modulation cap >= c_min (default 2.0)",
        },
        "f = [c_min + (c_max - c_min) per(x) per(y)] psi(z) |tau|^p / |z|^p",
    ),
}


def builtin_density(name: str, **params):
    """Construct a named built-in density with its growth constants filled in."""
    if name not in BUILTIN_DENSITIES:
        raise InvalidParameterError(
            f"unknown density {name!r}; known: {sorted(BUILTIN_DENSITIES)}"
        )
    factory, schema, _ = BUILTIN_DENSITIES[name]
    unknown = set(params) - set(schema)
    if unknown:
        raise InvalidParameterError(
            f"density {name!r} got unknown parameters {sorted(unknown)}; "
            f"accepts {sorted(schema)}"
        )
    return factory(**params)


# --- sampled hypothesis validation -------------------------------------------

@dataclass(frozen=True)
class GrowthSampler:
    """Sampling plan for growth-bound validation; deterministic given the seed."""

    n_samples: int = 10_000
    seed: int = 0
    x_range: tuple[float, float] = (0.0, 1.0)
    xi_range: tuple[float, float] = (-5.0, 5.0)
    tau_range: tuple[float, float] = (-5.0, 5.0)
    min_separation: float = 1e-3


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    worst_sample: Optional[dict]
    violation: float


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of sampled growth checks; pass means zero violating samples."""

    checked_conditions: tuple[ConditionResult, ...]
    sample_count: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checked_conditions)


_VALIDATION_RTOL = 1e-9


def _condition(name, margins, samples) -> ConditionResult:
    """margins >= 0 means satisfied; the worst (most negative) sample is reported."""
    worst_idx = int(np.argmin(margins))
    violation = max(0.0, -float(margins[worst_idx]))
    passed = violation == 0.0
    worst = None if passed else {k: float(v[worst_idx]) for k, v in samples.items()}
    return ConditionResult(name=name, passed=passed, worst_sample=worst, violation=violation)


def _sample_points(rng, n, dim, lo, hi):
    if dim == 1:
        return rng.uniform(lo, hi, size=n)
    return rng.uniform(lo, hi, size=(n, dim))


def _sample_ball(rng, n, dim, min_r):
    if dim == 1:
        return rng.uniform(min_r, 1.0, size=n) * rng.choice([-1.0, 1.0], size=n)
    # rejection from the bounding square, then radius floor
    out = np.empty((n, 2))
    filled = 0
    while filled < n:
        cand = rng.uniform(-1.0, 1.0, size=(2 * (n - filled) + 8, 2))
        r = np.sqrt(np.sum(cand * cand, axis=1))
        ok = (r <= 1.0) & (r >= min_r)
        take = cand[ok][: n - filled]
        out[filled : filled + take.shape[0]] = take
        filled += take.shape[0]
    return out


def _components(tag: str, arr: Array) -> dict:
    """Split an (n,) or (n, d) sample array into named 1d columns for reporting."""
    arr = np.asarray(arr)
    if arr.ndim == 1:
        return {tag: arr}
    return {f"{tag}{j}": arr[:, j] for j in range(arr.shape[1])}


def validate_growth(density, sampler: GrowthSampler = GrowthSampler()) -> HypothesisReport:
    """Sample a density and check its declared two-sided growth bounds.

    Violations are reported, never raised; the report lists each condition
    with its worst violating sample and violation magnitude.
    """
    rng = np.random.default_rng(sampler.seed)
    n = sampler.n_samples
    conditions = []

    if isinstance(density, LocalDensity):
        dim = density.dim or 1
        x = _sample_points(rng, n, dim, *sampler.x_range)
        xi = _sample_points(rng, n, dim, *sampler.xi_range)
        g = np.asarray(density.evaluate(x, xi), dtype=float)
        nrm_p = _sq_norm(xi, dim) ** (density.p / 2.0)
        lower = density.c0 * nrm_p
        upper = density.c1 * nrm_p + density.a0
        scale = 1.0 + np.abs(g) + np.abs(upper)
        samples = {**_components("x", x), **_components("xi", xi), "g": g}
        conditions.append(
            _condition(
                "local lower growth bound: c0*|xi|^p <= g(x, xi)",
                (g - lower) + _VALIDATION_RTOL * scale,
                samples,
            )
        )
        conditions.append(
            _condition(
                "local upper growth bound: g(x, xi) <= c1*|xi|^p + a0",
                (upper - g) + _VALIDATION_RTOL * scale,
                samples,
            )
        )
        conditions.append(
            _condition(
                "local nonnegativity: g(x, xi) >= 0",
                g + _VALIDATION_RTOL * scale,
                samples,
            )
        )
    elif isinstance(density, NonlocalDensity):
        dim = density.dim
        x = _sample_points(rng, n, dim, *sampler.x_range)
        y = _sample_points(rng, n, dim, *sampler.x_range)
        z = _sample_ball(rng, n, dim, sampler.min_separation)
        tau = rng.uniform(*sampler.tau_range, size=n)
        f = np.asarray(density.evaluate(x, y, z, tau), dtype=float)
        quot = density.kernel.psi(z) * np.abs(tau) ** density.p / _sq_norm(z, dim) ** (
            density.p / 2.0
        )
        scale = 1.0 + np.abs(f) + density.C1 * np.abs(quot)
        samples = {
            **_components("x", x),
            **_components("y", y),
            **_components("z", z),
            "tau": tau,
            "f": f,
        }
        conditions.append(
            _condition(
                "nonlocal lower kernel bound: C0*psi(z)|tau|^p/|z|^p <= f",
                (f - density.C0 * quot) + _VALIDATION_RTOL * scale,
                samples,
            )
        )
        conditions.append(
            _condition(
                "nonlocal upper kernel bound: f <= C1*psi(z)|tau|^p/|z|^p",
                (density.C1 * quot - f) + _VALIDATION_RTOL * scale,
                samples,
            )
        )
        # compact support: evaluate outside the unit ball must vanish
        n_out = n // 10 + 1
        r_out = rng.uniform(1.0 + 1e-9, 2.0, size=n_out)
        if dim == 1:
            z_out = r_out * rng.choice([-1.0, 1.0], size=n_out)
        else:
            direction = _sample_ball(rng, n_out, 2, 0.25)
            direction /= np.sqrt(np.sum(direction * direction, axis=1))[:, None]
            z_out = direction * r_out[:, None]
        tau_out = rng.uniform(*sampler.tau_range, size=n_out)
        x_out = _sample_points(rng, n // 10 + 1, dim, *sampler.x_range)
        f_out = np.asarray(density.evaluate(x_out, x_out, z_out, tau_out), dtype=float)
        conditions.append(
            _condition(
                "nonlocal compact support: f(x, y, z, tau) = 0 for |z| > 1",
                -np.abs(f_out),
                {**_components("z", z_out), "tau": tau_out, "f": f_out},
            )
        )
    else:
        raise InvalidParameterError(
            f"validate_growth expects LocalDensity or NonlocalDensity, got {type(density)!r}"
        )

    return HypothesisReport(checked_conditions=tuple(conditions), sample_count=n)
