import numpy as np
import pytest
from hypothesis import given, strategies as st

import gammalab as gl
from gammalab.densities import BUILTIN_DENSITIES

from conftest import symmetric_grid


class TestScaledKernel:
    def test_uniform_1d_inside_support(self, uniform_1d):
        # k^d * psi(k z) with d=1, k z = 0.4 inside the support
        assert gl.eval_scaled_kernel(uniform_1d, 4.0, 0.1) == pytest.approx(2.0, rel=1e-14)

    def test_outside_support_is_zero(self, uniform_1d, triangle_1d, uniform_2d):
        assert gl.eval_scaled_kernel(uniform_1d, 4.0, 0.5) == 0.0
        assert gl.eval_scaled_kernel(triangle_1d, 4.0, -0.5) == 0.0
        z = np.array([0.3, 0.4])  # |z| = 0.5, k|z| = 2
        assert gl.eval_scaled_kernel(uniform_2d, 4.0, z) == 0.0

    def test_uniform_2d_value(self, uniform_2d):
        val = gl.eval_scaled_kernel(uniform_2d, 2.0, np.array([0.1, 0.2]))
        assert val == pytest.approx(4.0 / np.pi, rel=1e-14)

    def test_invalid_k(self, uniform_1d):
        with pytest.raises(gl.InvalidParameterError):
            gl.eval_scaled_kernel(uniform_1d, 0.0, 0.1)
        with pytest.raises(gl.InvalidParameterError):
            gl.eval_scaled_kernel(uniform_1d, -1.0, 0.1)

    @pytest.mark.parametrize("k", [0.5, 1.0, 3.0, 17.0])
    def test_scaling_identity(self, triangle_1d, uniform_2d, k):
        # k^d psi(k z) computed directly vs through the unscaled kernel
        zs = np.linspace(-2.0, 2.0, 41)
        lhs = gl.eval_scaled_kernel(triangle_1d, k, zs)
        rhs = k * gl.eval_scaled_kernel(triangle_1d, 1.0, k * zs)
        np.testing.assert_allclose(lhs, rhs, rtol=4e-16)
        pts = np.stack([zs, 0.3 * zs], axis=-1)
        lhs2 = gl.eval_scaled_kernel(uniform_2d, k, pts)
        rhs2 = k**2 * gl.eval_scaled_kernel(uniform_2d, 1.0, k * pts)
        np.testing.assert_allclose(lhs2, rhs2, rtol=4e-16)

    @pytest.mark.parametrize("name,dim", [("uniform", 1), ("triangle", 1), ("uniform", 2), ("triangle", 2)])
    @pytest.mark.parametrize("k", [1.0, 2.0, 8.0])
    def test_scaled_kernel_mass(self, name, dim, k):
        # midpoint Riemann sum with step well below 1/(8k) recovers the mass
        kernel = gl.builtin_kernel(name, dim)
        h = 1.0 / (1024.0 * k) if dim == 1 else 1.0 / (96.0 * k)
        half = int(np.ceil(1.0 / (k * h))) + 2
        centers = (np.arange(-half, half) + 0.5) * h
        if dim == 1:
            total = np.sum(gl.eval_scaled_kernel(kernel, k, centers)) * h
        else:
            X, Y = np.meshgrid(centers, centers, indexing="ij")
            pts = np.stack([X, Y], axis=-1)
            total = np.sum(gl.eval_scaled_kernel(kernel, k, pts)) * h * h
        assert total == pytest.approx(1.0, abs=1e-3)


class TestKernelSpec:
    def test_negative_profile_rejected(self):
        with pytest.raises(gl.InvalidParameterError):
            gl.KernelSpec(profile=lambda r: r - 0.5, dim=1)

    def test_tabulated_profile_interpolates(self):
        profile = gl.tabulated_profile([0.0, 0.5, 1.0], [1.0, 0.5, 0.0])
        np.testing.assert_allclose(profile(np.array([0.25, 0.75])), [0.75, 0.25])

    def test_tabulated_profile_must_span_unit_interval(self):
        with pytest.raises(gl.InvalidParameterError):
            gl.tabulated_profile([0.0, 0.5], [1.0, 1.0])

    def test_mass_validation(self, uniform_1d):
        assert uniform_1d.validate_mass() == pytest.approx(1.0, abs=1e-8)
        bad = gl.KernelSpec(profile=lambda r: np.full_like(r, 0.75), dim=1)
        with pytest.raises(gl.InvalidParameterError):
            bad.validate_mass()

    def test_unknown_kernel_name(self):
        with pytest.raises(gl.InvalidParameterError):
            gl.builtin_kernel("gauss", 1)


class TestBuiltinDensities:
    def test_double_well_at_well(self):
        g = gl.builtin_density("double-well-1d", delta=0.1)
        assert g.evaluate(0.0, np.array([1.0]))[0] == pytest.approx(0.1, rel=1e-14)

    def test_quadratic_at_zero(self):
        g = gl.builtin_density("quadratic-local")
        assert g.evaluate(0.0, np.array([0.0]))[0] == 0.0

    def test_kernel_p_difference_value(self, uniform_1d):
        f = gl.builtin_density("kernel-p-difference", kernel=uniform_1d, p=2.0)
        val = f.evaluate(np.array([0.2]), np.array([0.7]), np.array([0.5]), np.array([1.0]))
        assert val[0] == pytest.approx(2.0, rel=1e-14)

    def test_periodic_coefficient_matches_cosine_profile(self):
        g = gl.builtin_density("periodic-coefficient-local", a_min=1.0, a_max=2.0)
        xs = np.linspace(0.0, 2.0, 17)
        xi = np.ones_like(xs)
        expected = (1.5 + 0.5 * np.cos(2 * np.pi * xs)) * xi**2
        np.testing.assert_allclose(g.evaluate(xs, xi), expected, rtol=1e-14)

    def test_periodicity_of_builtins(self, uniform_1d):
        g = gl.builtin_density("periodic-coefficient-local")
        xs = np.linspace(0.0, 1.0, 11)
        xi = np.linspace(-2.0, 2.0, 11)
        np.testing.assert_allclose(g.evaluate(xs, xi), g.evaluate(xs + 1.0, xi), rtol=1e-12)
        f = gl.builtin_density("periodic-kernel-p-difference", kernel=uniform_1d)
        z = np.full(11, 0.5)
        tau = np.linspace(-1, 1, 11)
        np.testing.assert_allclose(
            f.evaluate(xs, xs + 0.3, z, tau),
            f.evaluate(xs + 1.0, xs + 1.3, z, tau),
            rtol=1e-12,
        )

    def test_unknown_name_and_params(self, uniform_1d):
        with pytest.raises(gl.InvalidParameterError):
            gl.builtin_density("triple-well")
        with pytest.raises(gl.InvalidParameterError):
            gl.builtin_density("double-well-1d", gamma=0.1)

    def test_double_well_needs_positive_delta(self):
        with pytest.raises(gl.InvalidParameterError):
            gl.builtin_density("double-well-1d", delta=0.0)


class TestValidateGrowth:
    def test_equality_case_passes(self):
        g = gl.LocalDensity(
            name="exact-quadratic",
            evaluate=lambda x, xi: np.asarray(xi) ** 2,
            p=2.0,
            c0=1.0,
            c1=1.0,
            a0=0.0,
            dim=1,
            x_independent=True,
        )
        report = gl.validate_growth(g, gl.GrowthSampler(n_samples=2000, seed=3))
        assert report.passed

    def test_broken_lower_bound_reports_violation(self):
        g = gl.LocalDensity(
            name="shifted-quadratic",
            evaluate=lambda x, xi: np.asarray(xi) ** 2 - 1.0,
            p=2.0,
            c0=1.0,
            c1=1.0,
            a0=0.0,
            dim=1,
            x_independent=True,
        )
        report = gl.validate_growth(g, gl.GrowthSampler(n_samples=2000, seed=3))
        assert not report.passed
        lower = next(c for c in report.checked_conditions if "lower" in c.name)
        assert not lower.passed
        assert lower.violation == pytest.approx(1.0, abs=1e-6)
        assert lower.worst_sample is not None

    def test_prototype_saturates_both_bounds(self, uniform_1d):
        f = gl.builtin_density("kernel-p-difference", kernel=uniform_1d, p=2.0)
        report = gl.validate_growth(f, gl.GrowthSampler(n_samples=2000, seed=5))
        assert report.passed

    @pytest.mark.parametrize("name", sorted(BUILTIN_DENSITIES))
    def test_every_builtin_passes_its_own_constants(self, name, uniform_1d):
        if "kernel" in name:
            density = gl.builtin_density(name, kernel=uniform_1d)
        else:
            density = gl.builtin_density(name)
        report = gl.validate_growth(density, gl.GrowthSampler(n_samples=10_000, seed=11))
        assert report.passed, [c.name for c in report.checked_conditions if not c.passed]

    def test_deterministic_given_seed(self, uniform_1d):
        f = gl.builtin_density("periodic-kernel-p-difference", kernel=uniform_1d)
        r1 = gl.validate_growth(f, gl.GrowthSampler(n_samples=500, seed=9))
        r2 = gl.validate_growth(f, gl.GrowthSampler(n_samples=500, seed=9))
        assert [c.violation for c in r1.checked_conditions] == [
            c.violation for c in r2.checked_conditions
        ]


class TestDensityInvariants:
    @given(st.floats(0.25, 4.0), st.floats(-0.9, 0.9))
    def test_scaled_kernel_matches_unscaled(self, k, z):
        kernel = gl.builtin_kernel("triangle", 1)
        lhs = gl.eval_scaled_kernel(kernel, k, z)
        rhs = k * gl.eval_scaled_kernel(kernel, 1.0, k * z)
        assert lhs == pytest.approx(rhs, rel=4e-16, abs=1e-300)

    @given(st.floats(-3.0, 3.0))
    def test_double_well_even(self, xi):
        g = gl.builtin_density("double-well-1d", delta=0.1)
        plus = g.evaluate(0.0, np.array([xi]))[0]
        minus = g.evaluate(0.0, np.array([-xi]))[0]
        assert plus == minus

    def test_double_well_even_on_symmetric_grid(self):
        g = gl.builtin_density("double-well-1d", delta=0.1)
        grid = symmetric_grid(3.0, 600)
        vals = g.evaluate(np.zeros_like(grid), grid)
        np.testing.assert_array_equal(vals, vals[::-1])
