"""gammalab: a numerical laboratory for local + nonlocal p-energies.

Discretizes and minimizes energies combining a kernel-weighted double sum over
node pairs with a gradient integrand, and measures their limits: the
concentration limit density f0 + convex envelope for affine boundary data, and
the periodic homogenization density from cell problems on growing boxes.
"""

__version__ = "0.1.0"

from .convexify import (
    SampledFunction1D,
    SampledFunction2D,
    convex_envelope,
    convex_envelope_2d,
    legendre_transform,
)
from .densities import (
    GrowthSampler,
    HypothesisReport,
    KernelSpec,
    LocalDensity,
    NonlocalDensity,
    builtin_density,
    builtin_kernel,
    eval_scaled_kernel,
    tabulated_profile,
    validate_growth,
)
from .discretize import (
    ConstraintMask,
    EnergyBreakdown,
    EnergyModel,
    Field,
    Grid,
    affine_field,
    assemble_energy,
    assemble_gradient,
    boundary_layer_mask,
    diagonal_bound_check,
    field_from_csv,
    field_to_csv,
)
from .errors import ConfigError, DivergedError, InvalidInputError, InvalidParameterError
from .limits import (
    GridRule,
    SweepReport,
    cell_energy,
    epsilon_sweep,
    g_hom_estimate,
    separation_density,
)
from .minimize import MinimizeOptions, MinResult, Problem, gradient_check, make_problem, minimize
from .quadrature import QuadratureRule, f0_monte_carlo_oracle, f0_of_xi, kernel_mass, unit_ball_rule

__all__ = [
    "__version__",
    "SampledFunction1D",
    "SampledFunction2D",
    "convex_envelope",
    "convex_envelope_2d",
    "legendre_transform",
    "GrowthSampler",
    "HypothesisReport",
    "KernelSpec",
    "LocalDensity",
    "NonlocalDensity",
    "builtin_density",
    "builtin_kernel",
    "eval_scaled_kernel",
    "tabulated_profile",
    "validate_growth",
    "ConstraintMask",
    "EnergyBreakdown",
    "EnergyModel",
    "Field",
    "Grid",
    "affine_field",
    "assemble_energy",
    "assemble_gradient",
    "boundary_layer_mask",
    "diagonal_bound_check",
    "field_from_csv",
    "field_to_csv",
    "ConfigError",
    "DivergedError",
    "InvalidInputError",
    "InvalidParameterError",
    "GridRule",
    "SweepReport",
    "cell_energy",
    "epsilon_sweep",
    "g_hom_estimate",
    "separation_density",
    "MinimizeOptions",
    "MinResult",
    "Problem",
    "gradient_check",
    "make_problem",
    "minimize",
    "QuadratureRule",
    "f0_monte_carlo_oracle",
    "f0_of_xi",
    "kernel_mass",
    "unit_ball_rule",
]
