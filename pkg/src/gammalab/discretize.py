"""Discrete local + nonlocal energies on uniform box grids.

The energy of a nodal field u on a grid over (0, L)^d is

    h^{2d} * sum over ordered node pairs (i, j), i != j, |x_i - x_j| <= 1/k
             of the nonlocal density at (x_i, x_j, x_i - x_j, u_i - u_j)
  + h^d    * sum over cells of the local density at (cell center, D_h u)

with D_h the forward-difference gradient on each cell.  Two scalings are
supported: concentration mode weights pairs with the scaled kernel (density
evaluated as ``k^d f(x, y, k z, k tau)``, which reproduces the concentrated
kernel weighting for difference-quotient densities), and periodic mode, which
rescales all four arguments by ``1/eps`` and applies the ``eps^-d`` prefactor
once (convention ``eps = 1/k``).  The diagonal i = j is excluded; separations
never degenerate since ``|x_i - x_j| >= h`` off the diagonal.

Pair sums and cell sums run in a fixed order so repeated evaluations are
bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .densities import LocalDensity, NonlocalDensity, _smoothed_p_derivative
from .errors import InvalidInputError, InvalidParameterError

Array = np.ndarray


@dataclass(frozen=True)
class Grid:
    """Uniform grid with n nodes per axis on the box (0, length)^dim."""

    dim: int
    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidParameterError(f"grid dim must be 1 or 2, got {self.dim}")
        if self.n < 3:
            raise InvalidParameterError(f"grid needs n >= 3 nodes per axis, got {self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise InvalidParameterError(f"grid length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @property
    def node_count(self) -> int:
        return self.n**self.dim

    @property
    def axis_nodes(self) -> Array:
        return np.arange(self.n) * self.h

    def node_coords(self) -> Array:
        """Flat node coordinates: (n,) in 1d, (n^2, 2) in 2d (C order)."""
        xs = self.axis_nodes
        if self.dim == 1:
            return xs
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=-1)

    def cell_centers(self) -> Array:
        c = (np.arange(self.n - 1) + 0.5) * self.h
        if self.dim == 1:
            return c
        CX, CY = np.meshgrid(c, c, indexing="ij")
        return np.stack([CX, CY], axis=-1)

    @property
    def volume(self) -> float:
        return self.length**self.dim


@dataclass
class Field:
    """Nodal scalar values on a grid (flat array, C order in 2d)."""

    grid: Grid
    values: Array

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.node_count,):
            raise InvalidParameterError(
                f"field needs {self.grid.node_count} nodal values, got {self.values.shape}"
            )

    def copy(self) -> "Field":
        return Field(grid=self.grid, values=self.values.copy())


def affine_field(grid: Grid, xi, offset: float = 0.0) -> Field:
    """Field with values xi . x + offset at every node."""
    coords = grid.node_coords()
    if grid.dim == 1:
        vals = float(xi) * coords + offset
    else:
        vals = coords @ np.asarray(xi, dtype=float) + offset
    return Field(grid=grid, values=vals)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Nonlocal term, local term, their sum, and the per-unit-volume density."""

    nonlocal_term: float
    local_term: float
    total: float
    density: float


@dataclass(frozen=True)
class ConstraintMask:
    """Per-node constraint: free, or pinned to a fixed value."""

    pinned: Array  # bool per node
    values: Array  # pin value per node (ignored where free)

    def __post_init__(self):
        if self.pinned.shape != self.values.shape:
            raise InvalidParameterError("mask arrays must have matching shapes")
        if np.any(~np.isfinite(self.values[self.pinned])):
            raise InvalidParameterError("pinned values must be finite")

    @property
    def free_count(self) -> int:
        return int(np.sum(~self.pinned))

    def apply(self, values: Array) -> Array:
        out = values.copy()
        out[self.pinned] = self.values[self.pinned]
        return out

    def project_gradient(self, grad: Array) -> Array:
        grad = grad.copy()
        grad[self.pinned] = 0.0
        return grad


def boundary_layer_mask(grid: Grid, xi, layer: float, offset: float = 0.0) -> ConstraintMask:
    """Pin every node within distance ``layer`` of the box boundary to xi . x + offset.

    layer = 0 pins exactly the boundary nodes (classical Dirichlet trace).
    """
    if layer < 0 or not np.isfinite(layer):
        raise InvalidParameterError(f"layer must be a finite nonnegative real, got {layer}")
    if layer >= grid.length / 2:
        raise InvalidParameterError(
            f"layer {layer} >= half the box side {grid.length / 2}: all nodes pinned"
        )
    coords = grid.node_coords()
    if grid.dim == 1:
        dist = np.minimum(coords, grid.length - coords)
    else:
        per_axis = np.minimum(coords, grid.length - coords)
        dist = np.min(per_axis, axis=-1)
    snap = 1e-12 * max(1.0, grid.length)
    pinned = dist <= layer + snap
    target = affine_field(grid, xi, offset).values
    return ConstraintMask(pinned=pinned, values=np.where(pinned, target, 0.0))


# --- energy model ------------------------------------------------------------


def _phi(t: Array, p: float) -> Array:
    if p == 2.0:
        return t * t
    return np.abs(t) ** p


def _offsets_within(radius: float, h: float, dim: int) -> list[tuple[int, ...]]:
    """Positive lattice offsets with |m| h <= radius (mirrors handled separately)."""
    limit = radius * (1.0 + 1e-12)
    M = int(math.floor(limit / h))
    out: list[tuple[int, ...]] = []
    if dim == 1:
        out.extend((m,) for m in range(1, M + 1))
        return out
    for mx in range(0, M + 1):
        my_start = 1 if mx == 0 else -M
        for my in range(my_start, M + 1):
            if math.hypot(mx * h, my * h) <= limit:
                out.append((mx, my))
    return out


def _block_slices(offset: tuple[int, ...], n: int):
    """(head, tail) slice tuples addressing all valid pairs (a, a + offset)."""
    head, tail = [], []
    for m in offset:
        lo = max(0, -m)
        hi = n - max(0, m)
        head.append(slice(lo, hi))
        tail.append(slice(lo + m, hi + m))
    return tuple(head), tuple(tail)


class EnergyModel:
    """Precomputed assembly of the discrete energy and its analytic gradient.

    Immutable once built; evaluation order is fixed, so repeated calls with the
    same field are bit-identical.
    """

    def __init__(
        self,
        grid: Grid,
        k: float,
        nonlocal_density: Optional[NonlocalDensity] = None,
        local_density: Optional[LocalDensity] = None,
        eps_period: Optional[float] = None,
    ):
        if not (np.isfinite(k) and k > 0):
            raise InvalidParameterError(f"concentration parameter k must be > 0, got {k}")
        if eps_period is not None:
            if not (np.isfinite(eps_period) and eps_period > 0):
                raise InvalidParameterError(f"eps_period must be > 0, got {eps_period}")
            if abs(eps_period * k - 1.0) > 1e-9:
                raise InvalidParameterError(
                    f"periodic mode uses eps = 1/k; got eps_period={eps_period}, k={k}"
                )
            for dens, what in ((nonlocal_density, "nonlocal"), (local_density, "local")):
                if dens is not None and not dens.periodic:
                    raise InvalidParameterError(
                        f"periodic mode requires a periodic {what} density"
                    )
        if nonlocal_density is not None and nonlocal_density.dim != grid.dim:
            raise InvalidParameterError(
                f"nonlocal density dimension {nonlocal_density.dim} != grid dim {grid.dim}"
            )
        self.grid = grid
        self.k = float(k)
        self.f = nonlocal_density
        self.g = local_density
        self.eps = eps_period
        self._shape = (grid.n,) * grid.dim
        self._build_nonlocal()
        self._build_local()

    # -- nonlocal part --

    def _pair_scale_args(self, x_a, x_b, z):
        """Scaled density arguments and weight prefactor for the active mode."""
        if self.eps is None:
            return x_a, x_b, self.k * z, self.k**self.grid.dim
        inv = 1.0 / self.eps
        return x_a * inv, x_b * inv, z * inv, inv**self.grid.dim

    def _build_nonlocal(self):
        self._stencil = []
        f = self.f
        if f is None:
            return
        grid = self.grid
        n, h, d = grid.n, grid.h, grid.dim
        radius = 1.0 / self.k
        xs = grid.axis_nodes
        if d == 1:
            coords = xs
        else:
            X, Y = np.meshgrid(xs, xs, indexing="ij")
            coords = np.stack([X, Y], axis=-1)
        p = f.p
        separable = f.pair_weight is not None
        h2d = h ** (2 * d)
        for offset in _offsets_within(radius, h, d):
            head, tail = _block_slices(offset, n)
            x_a = coords[head]
            x_b = coords[tail]
            if d == 1:
                z_ab = np.float64(-offset[0] * h)
            else:
                z_ab = -np.asarray(offset, dtype=float) * h
            block_shape = x_a.shape if d == 1 else x_a.shape[:2]
            if separable:
                # combined ordered-pair weight: (a, b) plus the mirrored (b, a)
                xa_s, xb_s, z_s, pref = self._pair_scale_args(x_a, x_b, z_ab)
                tau_scale = self.k if self.eps is None else 1.0 / self.eps
                w_ab = np.asarray(f.pair_weight(xa_s, xb_s, z_s), dtype=float)
                w_ba = np.asarray(f.pair_weight(xb_s, xa_s, -z_s), dtype=float)
                w = h2d * pref * tau_scale**p * (w_ab + w_ba)
                if w.shape != block_shape:
                    w = np.ascontiguousarray(np.broadcast_to(w, block_shape))
                self._stencil.append(("sep", head, tail, w))
            else:
                z_full = np.ascontiguousarray(np.broadcast_to(z_ab, x_a.shape))
                self._stencil.append(("gen", head, tail, x_a, x_b, z_full))

    def nonlocal_energy(self, values: Array) -> float:
        if self.f is None:
            return 0.0
        u = values.reshape(self._shape)
        p = self.f.p
        total = 0.0
        for entry in self._stencil:
            if entry[0] == "sep":
                _, head, tail, w = entry
                tau = u[head] - u[tail]
                total += float(np.sum(w * _phi(tau, p)))
            else:
                _, head, tail, x_a, x_b, z = entry
                tau = u[head] - u[tail]
                total += self._generic_pair_energy(x_a, x_b, z, tau)
        return total

    def _generic_pair_energy(self, x_a, x_b, z, tau) -> float:
        f = self.f
        d = self.grid.dim
        h2d = self.grid.h ** (2 * d)
        xa_s, xb_s, z_s, pref = self._pair_scale_args(x_a, x_b, z)
        tau_scale = self.k if self.eps is None else 1.0 / self.eps
        v_ab = f.evaluate(xa_s, xb_s, z_s, tau_scale * tau)
        v_ba = f.evaluate(xb_s, xa_s, -z_s, -tau_scale * tau)
        return float(h2d * pref * (np.sum(v_ab) + np.sum(v_ba)))

    def nonlocal_gradient(self, values: Array, out: Array):
        if self.f is None:
            return
        u = values.reshape(self._shape)
        grad = out.reshape(self._shape)
        f = self.f
        p = f.p
        for entry in self._stencil:
            if entry[0] == "sep":
                _, head, tail, w = entry
                tau = u[head] - u[tail]
                gp = w * _smoothed_p_derivative(tau, p)
                grad[head] += gp
                grad[tail] -= gp
            else:
                _, head, tail, x_a, x_b, z = entry
                if f.evaluate_dtau is None:
                    raise InvalidParameterError(
                        f"nonlocal density {f.name!r} has no tau-derivative; "
                        "gradient assembly needs evaluate_dtau"
                    )
                tau = u[head] - u[tail]
                d = self.grid.dim
                h2d = self.grid.h ** (2 * d)
                xa_s, xb_s, z_s, pref = self._pair_scale_args(x_a, x_b, z)
                tau_scale = self.k if self.eps is None else 1.0 / self.eps
                g_ab = f.evaluate_dtau(xa_s, xb_s, z_s, tau_scale * tau)
                g_ba = f.evaluate_dtau(xb_s, xa_s, -z_s, -tau_scale * tau)
                gp = h2d * pref * tau_scale * (np.asarray(g_ab) - np.asarray(g_ba))
                grad[head] += gp
                grad[tail] -= gp

    # -- local part --

    def _build_local(self):
        self._centers = None
        if self.g is None:
            return
        centers = self.grid.cell_centers()
        if self.eps is not None:
            centers = centers / self.eps
        self._centers = centers

    def _grad_cells(self, u: Array):
        h = self.grid.h
        if self.grid.dim == 1:
            return (u[1:] - u[:-1]) / h
        dx = (u[1:, :-1] - u[:-1, :-1]) / h
        dy = (u[:-1, 1:] - u[:-1, :-1]) / h
        return np.stack([dx, dy], axis=-1)

    def local_energy(self, values: Array) -> float:
        if self.g is None:
            return 0.0
        u = values.reshape(self._shape)
        D = self._grad_cells(u)
        dens = self.g.evaluate(self._centers, D)
        return float(self.grid.h**self.grid.dim * np.sum(dens))

    def local_gradient(self, values: Array, out: Array):
        if self.g is None:
            return
        if self.g.evaluate_dxi is None:
            raise InvalidParameterError(
                f"local density {self.g.name!r} has no xi-derivative; "
                "gradient assembly needs evaluate_dxi"
            )
        u = values.reshape(self._shape)
        grad = out.reshape(self._shape)
        D = self._grad_cells(u)
        gxi = np.asarray(self.g.evaluate_dxi(self._centers, D))
        scale = self.grid.h ** (self.grid.dim - 1)
        if self.grid.dim == 1:
            grad[:-1] -= scale * gxi
            grad[1:] += scale * gxi
        else:
            gx = scale * gxi[..., 0]
            gy = scale * gxi[..., 1]
            grad[:-1, :-1] -= gx + gy
            grad[1:, :-1] += gx
            grad[:-1, 1:] += gy

    # -- combined --

    def energy(self, values: Array) -> EnergyBreakdown:
        nl = self.nonlocal_energy(values)
        loc = self.local_energy(values)
        total = nl + loc
        return EnergyBreakdown(
            nonlocal_term=nl,
            local_term=loc,
            total=total,
            density=total / self.grid.volume,
        )

    def gradient(self, values: Array) -> Array:
        out = np.zeros_like(values)
        self.nonlocal_gradient(values, out)
        self.local_gradient(values, out)
        return out

    def dirichlet_energy(self, values: Array, p: float) -> float:
        """h^d sum over cells of |D_h u|^p (gradient magnitude in 2d)."""
        u = values.reshape(self._shape)
        D = self._grad_cells(u)
        if self.grid.dim == 2:
            mag = np.sqrt(np.sum(D * D, axis=-1))
        else:
            mag = np.abs(D)
        return float(self.grid.h**self.grid.dim * np.sum(mag**p))


def _check_field(u: Field):
    if not np.all(np.isfinite(u.values)):
        raise InvalidInputError("field contains non-finite values")


def assemble_energy(
    u: Field,
    k: float,
    nonlocal_density: Optional[NonlocalDensity] = None,
    local_density: Optional[LocalDensity] = None,
    eps_period: Optional[float] = None,
) -> EnergyBreakdown:
    """One-shot energy evaluation; see EnergyModel for the scaling conventions."""
    _check_field(u)
    model = EnergyModel(u.grid, k, nonlocal_density, local_density, eps_period)
    return model.energy(u.values)


def assemble_gradient(
    u: Field,
    k: float,
    nonlocal_density: Optional[NonlocalDensity] = None,
    local_density: Optional[LocalDensity] = None,
    eps_period: Optional[float] = None,
) -> Field:
    """Analytic differential of the discrete energy with respect to nodal values."""
    _check_field(u)
    model = EnergyModel(u.grid, k, nonlocal_density, local_density, eps_period)
    return Field(grid=u.grid, values=model.gradient(u.values))


# --- near-diagonal sanity bound ----------------------------------------------

_UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi}


@dataclass(frozen=True)
class DiagonalBound:
    lhs: float
    rhs: float
    passed: bool


def diagonal_bound_check(u: Field, k: float, f: NonlocalDensity, slack: float = 0.1) -> DiagonalBound:
    """Check the near-diagonal energy against the gradient-energy bound.

    For densities sandwiched by kernel difference quotients, the energy of all
    pairs within distance delta = 1/k is bounded by

        C1 * (2^d * omega_d) * delta^d * sup(psi_k) * h^d sum_cells |D_h u|^p

    with omega_d the unit ball volume.  Requires a bounded kernel profile and
    an x-independent separable density (the difference-quotient prototype).
    """
    _check_field(u)
    if f.pair_weight is None or not f.x_independent:
        raise InvalidParameterError(
            "diagonal_bound_check expects the plain kernel difference-quotient density"
        )
    model = EnergyModel(u.grid, k, nonlocal_density=f)
    lhs = model.nonlocal_energy(u.values)
    d = u.grid.dim
    delta = 1.0 / k
    psi_k_sup = k**d * f.kernel.profile_sup
    dirichlet = model.dirichlet_energy(u.values, f.p)
    rhs = f.C1 * (2.0**d) * _UNIT_BALL_VOLUME[d] * delta**d * psi_k_sup * dirichlet
    return DiagonalBound(lhs=lhs, rhs=rhs, passed=lhs <= rhs * (1.0 + slack))


# --- CSV serialization --------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def field_to_csv(field: Field, path):
    """One row per node: axis indices, coordinates, value (17 significant digits)."""
    grid = field.grid
    lines = [f"# grid dim={grid.dim} n={grid.n} length={_fmt(grid.length)}"]
    if grid.dim == 1:
        lines.append("i,x,value")
        xs = grid.axis_nodes
        for i in range(grid.n):
            lines.append(f"{i},{_fmt(xs[i])},{_fmt(field.values[i])}")
    else:
        lines.append("i,j,x,y,value")
        xs = grid.axis_nodes
        vals = field.values.reshape(grid.n, grid.n)
        for i in range(grid.n):
            for j in range(grid.n):
                lines.append(f"{i},{j},{_fmt(xs[i])},{_fmt(xs[j])},{_fmt(vals[i, j])}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def field_from_csv(path) -> Field:
    """Inverse of field_to_csv; values round-trip bit-exactly."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid "):
            raise InvalidInputError(f"{path}: missing grid header line")
        meta = dict(part.split("=") for part in header[len("# grid ") :].split())
        grid = Grid(dim=int(meta["dim"]), n=int(meta["n"]), length=float(meta["length"]))
        fh.readline()  # column header
        values = np.empty(grid.node_count)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if grid.dim == 1:
                idx = int(parts[0])
            else:
                idx = int(parts[0]) * grid.n + int(parts[1])
            values[idx] = float(parts[-1])
            count += 1
        if count != grid.node_count:
            raise InvalidInputError(
                f"{path}: expected {grid.node_count} rows, found {count}"
            )
    return Field(grid=grid, values=values)
