"""The three desk-scale limit experiments.

* ``separation_density``: the predicted limit density for affine data, the
  kernel moment f0(xi) plus the convex envelope of the local density at xi.
* ``epsilon_sweep``: boundary-value minimizations at increasing concentration
  k, with the layer constraint u = w on a band of width 1/k (or the classical
  trace for layer 0), checked against the predicted limit.
* ``cell_energy`` / ``g_hom_estimate``: the homogenization cell problem on
  boxes (0, T)^d with affine boundary data, normalized by T^d, swept over T.

Sweep points are independent jobs; they may run concurrently and the report
assembler orders results by parameter value, so results do not depend on the
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .convexify import SampledFunction1D, SampledFunction2D, convex_envelope, convex_envelope_2d
from .densities import KernelSpec, LocalDensity, NonlocalDensity
from .discretize import EnergyBreakdown, Field, Grid, affine_field, boundary_layer_mask
from .errors import InvalidParameterError
from .minimize import MinimizeOptions, MinResult, make_problem, minimize
from .quadrature import f0_of_xi

Array = np.ndarray


@dataclass(frozen=True)
class GridRule:
    """How sweep grids are chosen.

    Concentration sweeps use the two-scale resolution rule: the microstructure
    scale eps_micro = 1/(oversample_micro * k) must stay well below the kernel
    width 1/k, and the mesh must resolve it, h = eps_micro / oversample_h.
    ``resolution_growth`` > 0 widens the scale separation as k grows (cells
    scale like k^(1+growth)), which is what a vanishing ratio of microstructure
    to kernel width requires; with growth 0 the ratio stays fixed and the
    microstructure cost saturates instead of decaying.  Cell problems resolve
    each unit period with ``cells_per_period`` cells.
    """

    oversample_micro: int = 8
    oversample_h: int = 8
    resolution_growth: float = 0.0
    node_cap: int = 20_000
    cells_per_period: int = 16

    def __post_init__(self):
        if self.oversample_micro < 8 or self.oversample_h < 8:
            raise InvalidParameterError(
                "two-scale rule needs oversample factors >= 8 "
                f"(got {self.oversample_micro}, {self.oversample_h})"
            )
        if self.resolution_growth < 0:
            raise InvalidParameterError("resolution_growth must be >= 0")
        if self.cells_per_period < 8:
            raise InvalidParameterError(
                f"cell problems need >= 8 cells per period, got {self.cells_per_period}"
            )

    def nodes_for_k(self, k: float) -> int:
        cells = int(round(self.oversample_micro * self.oversample_h * k ** (1.0 + self.resolution_growth)))
        return cells + 1

    def feasible_k(self, k: float) -> bool:
        return self.nodes_for_k(k) <= self.node_cap

    def grid_for_cell(self, T: int, dim: int) -> Grid:
        return Grid(dim=dim, n=self.cells_per_period * T + 1, length=float(T))


@dataclass
class SweepReport:
    """Structured record of a parameter sweep with convergence diagnostics."""

    parameter_name: str
    parameter_values: list[float]
    energies: list[EnergyBreakdown]
    predicted_limit: Optional[float]
    gaps: list[float]
    converged_flags: list[bool]
    extrapolated_value: Optional[float]
    estimate: Optional[float] = None
    convergent: bool = False
    inconclusive_flags: list[bool] = dc_field(default_factory=list)
    restart_spreads: list[float] = dc_field(default_factory=list)
    secondary_densities: list[float] = dc_field(default_factory=list)
    secondary_label: str = ""
    truncated_values: list[float] = dc_field(default_factory=list)

    @property
    def densities(self) -> list[float]:
        return [e.density for e in self.energies]

    def to_rows(self) -> tuple[list[str], list[list]]:
        header = [
            self.parameter_name,
            "nonlocal",
            "local",
            "total",
            "density",
            "predicted_limit",
            "gap",
            "converged",
            "inconclusive",
            "restart_spread",
        ]
        if self.secondary_densities:
            header.append(f"density_{self.secondary_label}")
        rows = []
        for i, value in enumerate(self.parameter_values):
            e = self.energies[i]
            row = [
                value,
                e.nonlocal_term,
                e.local_term,
                e.total,
                e.density,
                self.predicted_limit if self.predicted_limit is not None else float("nan"),
                self.gaps[i],
                self.converged_flags[i],
                self.inconclusive_flags[i] if self.inconclusive_flags else False,
                self.restart_spreads[i] if self.restart_spreads else 0.0,
            ]
            if self.secondary_densities:
                row.append(self.secondary_densities[i])
            rows.append(row)
        return header, rows

    def to_document(self) -> dict:
        doc = {
            "parameter_name": self.parameter_name,
            "parameter_values": [float(v) for v in self.parameter_values],
            "densities": [float(d) for d in self.densities],
            "gaps": [float(g) for g in self.gaps],
            "converged_flags": [bool(f) for f in self.converged_flags],
            "convergent": bool(self.convergent),
        }
        if self.predicted_limit is not None:
            doc["predicted_limit"] = float(self.predicted_limit)
        if self.extrapolated_value is not None:
            doc["extrapolated_value"] = float(self.extrapolated_value)
        if self.estimate is not None:
            doc["estimate"] = float(self.estimate)
        if self.inconclusive_flags:
            doc["inconclusive_flags"] = [bool(f) for f in self.inconclusive_flags]
        if self.restart_spreads:
            doc["restart_spreads"] = [float(s) for s in self.restart_spreads]
        if self.secondary_densities:
            doc[f"densities_{self.secondary_label}"] = [
                float(d) for d in self.secondary_densities
            ]
        if self.truncated_values:
            doc["truncated_parameter_values"] = [float(v) for v in self.truncated_values]
        return doc


def richardson_extrapolate(small_params: list[float], values: list[float]) -> Optional[float]:
    """First-order extrapolation in the small parameter over the last three points.

    Fits values ~ v_inf + c * eps by least squares; reporting aid only, never
    used for pass/fail decisions.
    """
    if len(values) < 2:
        return None
    eps = np.asarray(small_params[-3:], dtype=float)
    v = np.asarray(values[-3:], dtype=float)
    A = np.stack([np.ones_like(eps), eps], axis=-1)
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[0])


def _restart_spread(restart_energies: list[float]) -> float:
    lo, hi = min(restart_energies), max(restart_energies)
    return (hi - lo) / max(abs(lo), 1e-30)


def _tail_nonincreasing(gaps: list[float], tail: int = 3) -> bool:
    tail_gaps = gaps[-tail:]
    return all(a >= b for a, b in zip(tail_gaps[:-1], tail_gaps[1:]))


# --- predicted limit density --------------------------------------------------


def separation_density(
    kernel: KernelSpec,
    p: float,
    g0: LocalDensity,
    xi,
    envelope_halfwidth: float = 3.0,
    envelope_samples: int = 2001,
) -> float:
    """Predicted limit density f0(xi) + (convex envelope of g0)(xi).

    Requires an x-independent local density; the envelope window is centered
    on xi so the evaluation point is a grid node.
    """
    if not g0.x_independent:
        raise InvalidParameterError("separation_density needs an x-independent local density")
    dim = kernel.dim
    f0_val = f0_of_xi(kernel, p, xi)
    if dim == 1:
        xi = float(xi)
        width = envelope_halfwidth + abs(xi)
        xs = xi + np.linspace(-width, width, envelope_samples)
        sampled = SampledFunction1D(xs=xs, values=np.asarray(g0.evaluate(np.zeros_like(xs), xs)))
        env = convex_envelope(sampled)
        center = (envelope_samples - 1) // 2
        env_val = float(env.values[center])
    else:
        xi = np.asarray(xi, dtype=float)
        n_side = 81
        width = envelope_halfwidth + float(np.max(np.abs(xi)))
        xs = xi[0] + np.linspace(-width, width, n_side)
        ys = xi[1] + np.linspace(-width, width, n_side)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X, Y], axis=-1)
        vals = np.asarray(g0.evaluate(np.zeros_like(pts), pts))
        env2 = convex_envelope_2d(SampledFunction2D(xs=xs, ys=ys, values=vals))
        center = (n_side - 1) // 2
        env_val = float(env2.values[center, center])
    return f0_val + env_val


# --- concentration sweep --------------------------------------------------------


def _sweep_point_eps(xi, k, kernel_f, g, grid_rule, layer_mode, solver) -> tuple[EnergyBreakdown, MinResult]:
    n = grid_rule.nodes_for_k(k)
    grid = Grid(dim=1 if np.isscalar(xi) else 2, n=n)
    layer = 0.0 if layer_mode == "trace" else 1.0 / k
    mask = boundary_layer_mask(grid, xi, layer)
    problem = make_problem(grid, k, nonlocal_density=kernel_f, local_density=g, mask=mask)
    result = minimize(problem, solver)
    return result.energy, result


def epsilon_sweep(
    xi,
    k_list: list[float],
    kernel: KernelSpec,
    nonlocal_density: NonlocalDensity,
    local_density: LocalDensity,
    p: float,
    grid_rule: GridRule = GridRule(),
    layer_mode: str = "layer-eps",
    solver: MinimizeOptions = MinimizeOptions(),
    jobs: int = 1,
) -> SweepReport:
    """Minimum energies under the layer constraint across concentrations k.

    The report is convergent when the gaps to the predicted limit are
    nonincreasing on the tail and every kept point converged.  Points whose
    grids would exceed the node cap are dropped; the report records them.
    """
    if layer_mode not in ("layer-eps", "trace"):
        raise InvalidParameterError(f"layer_mode must be 'layer-eps' or 'trace', got {layer_mode!r}")
    k_list = sorted(float(k) for k in k_list)
    kept = [k for k in k_list if grid_rule.feasible_k(k)]
    truncated = [k for k in k_list if k not in kept]
    if not kept:
        raise InvalidParameterError("no feasible sweep points under the node cap")

    predicted = separation_density(kernel, p, local_density, xi)

    def job(k):
        return _sweep_point_eps(xi, k, nonlocal_density, local_density, grid_rule, layer_mode, solver)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, kept))
    else:
        results = [job(k) for k in kept]

    energies = [r[0] for r in results]
    minres = [r[1] for r in results]
    gaps = [abs(e.density - predicted) for e in energies]
    spreads = [_restart_spread(m.restart_energies) for m in minres]
    report = SweepReport(
        parameter_name="k",
        parameter_values=kept,
        energies=energies,
        predicted_limit=predicted,
        gaps=gaps,
        converged_flags=[m.converged for m in minres],
        extrapolated_value=richardson_extrapolate([1.0 / k for k in kept], [e.density for e in energies]),
        estimate=energies[-1].density,
        inconclusive_flags=[s > 0.05 for s in spreads],
        restart_spreads=spreads,
        truncated_values=truncated,
    )
    report.convergent = _tail_nonincreasing(gaps) and all(report.converged_flags)
    return report


# --- homogenization cell problems ------------------------------------------------


def cell_energy(
    xi,
    T: int,
    nonlocal_density: Optional[NonlocalDensity],
    local_density: Optional[LocalDensity],
    grid_rule: GridRule = GridRule(),
    layer: float = 0.0,
    solver: MinimizeOptions = MinimizeOptions(),
) -> tuple[float, MinResult]:
    """Normalized minimum of the cell problem on (0, T)^d with data u = xi . x.

    Works in unscaled coordinates (unit period, pair radius 1); ``layer`` 0
    pins the boundary trace, ``layer`` 1 pins the unit-width boundary band.
    Returns the minimum divided by the cell volume T^d.
    """
    if not (isinstance(T, (int, np.integer)) and T > 0):
        raise InvalidParameterError(f"cell side T must be a positive integer, got {T!r}")
    for dens, name in ((nonlocal_density, "nonlocal"), (local_density, "local")):
        if dens is not None and not dens.periodic:
            raise InvalidParameterError(f"cell problems need a periodic {name} density")
    if nonlocal_density is None and local_density is None:
        raise InvalidParameterError("cell problem needs at least one density")
    dim = nonlocal_density.dim if nonlocal_density is not None else (local_density.dim or 1)
    grid = grid_rule.grid_for_cell(int(T), dim)
    mask = boundary_layer_mask(grid, xi, layer)
    problem = make_problem(
        grid,
        k=1.0,
        nonlocal_density=nonlocal_density,
        local_density=local_density,
        mask=mask,
        eps_period=1.0,
    )
    result = minimize(problem, solver)
    return result.energy.density, result


def g_hom_estimate(
    xi,
    T_list: list[int],
    nonlocal_density: Optional[NonlocalDensity],
    local_density: Optional[LocalDensity],
    grid_rule: GridRule = GridRule(),
    solver: MinimizeOptions = MinimizeOptions(),
    jobs: int = 1,
) -> SweepReport:
    """Homogenized density estimate: cell energies over T with Cauchy diagnostics.

    Runs both boundary variants (trace pins, layer = 0, and the unit band,
    layer = 1); a convergent run requires the final Cauchy gap within
    tolerance (5% relative, 1e-6 absolute near zero) and agreement of the two
    variants within the same tolerance.  The estimate is the last trace-pinned
    value; Richardson extrapolation in 1/T is attached for reporting only.
    """
    if len(T_list) < 3:
        raise InvalidParameterError(f"T sweep needs >= 3 points, got {len(T_list)}")
    T_list = sorted(int(T) for T in T_list)

    def job(args):
        T, layer = args
        return cell_energy(xi, T, nonlocal_density, local_density, grid_rule, layer, solver)

    work = [(T, 0.0) for T in T_list] + [(T, 1.0) for T in T_list]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, work))
    else:
        results = [job(w) for w in work]

    trace_results = results[: len(T_list)]
    band_results = results[len(T_list) :]
    values = [v for v, _ in trace_results]
    band_values = [v for v, _ in band_results]
    minres = [m for _, m in trace_results]

    gaps = [0.0] + [abs(b - a) for a, b in zip(values[:-1], values[1:])]
    last = values[-1]
    tol = max(0.05 * abs(last), 1e-6)
    layers_agree = abs(band_values[-1] - last) <= tol
    spreads = [_restart_spread(m.restart_energies) for m in minres]
    report = SweepReport(
        parameter_name="T",
        parameter_values=[float(T) for T in T_list],
        energies=[m.energy for m in minres],
        predicted_limit=None,
        gaps=gaps,
        converged_flags=[m.converged for m in minres],
        extrapolated_value=richardson_extrapolate([1.0 / T for T in T_list], values),
        estimate=last,
        inconclusive_flags=[s > 0.05 for s in spreads],
        restart_spreads=spreads,
        secondary_densities=band_values,
        secondary_label="band_pinned",
    )
    report.convergent = (
        gaps[-1] <= tol and layers_agree and all(report.converged_flags)
    )
    return report
