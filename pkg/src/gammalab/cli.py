"""Experiment runner: config-driven subcommands emitting CSV tables and reports.

Usage: ``gamma-lab <subcommand> --config <path> [--out <dir>] [--seed <n>]
[--jobs <n>]``.  Configs are YAML documents with nested key-value sections;
unknown keys are hard errors (silent typo tolerance corrupts experiments).
Every report embeds the fully resolved config, so a report is self-describing,
and identical config + seed produces byte-identical CSV outputs.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .convexify import SampledFunction1D, SampledFunction2D, convex_envelope, convex_envelope_2d
from .densities import (
    BUILTIN_DENSITIES,
    BUILTIN_KERNELS,
    GrowthSampler,
    KernelSpec,
    builtin_density,
    builtin_kernel,
    tabulated_profile,
    validate_growth,
)
from .discretize import Grid, boundary_layer_mask, field_to_csv
from .errors import ConfigError, InvalidParameterError
from .limits import GridRule, SweepReport, cell_energy, epsilon_sweep, g_hom_estimate
from .minimize import MinimizeOptions, make_problem, minimize
from .quadrature import f0_of_xi

EXPERIMENTS = ("validate", "f0", "envelope", "minimize", "sweep-eps", "cell", "sweep-T")

_TOP_KEYS = {
    "experiment",
    "seed",
    "output_dir",
    "jobs",
    "kernel",
    "local_density",
    "nonlocal_density",
    "p",
    "xi",
    "xi_grid",
    "k",
    "k_list",
    "T",
    "T_list",
    "layer_mode",
    "grid",
    "solver",
    "envelope",
    "validate",
    "write_fields",
}

_SECTION_KEYS = {
    "kernel": {"name", "dim", "radii", "values"},
    "grid": {
        "oversample_micro",
        "oversample_h",
        "resolution_growth",
        "node_cap",
        "cells_per_period",
    },
    "solver": {
        "max_iters",
        "grad_tol",
        "step_init",
        "armijo_c",
        "backtrack_factor",
        "restarts",
        "perturb_amplitude",
        "perturb_decay",
        "max_backtracks",
        "jobs",
    },
    "envelope": {"halfwidth", "samples", "dim"},
    "validate": {"samples"},
}


def tool_version() -> str:
    """Package version, extended with `git describe` when run from a checkout."""
    here = Path(__file__).resolve().parent
    try:
        described = subprocess.run(
            ["git", "-C", str(here), "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if described.returncode == 0 and described.stdout.strip():
            return f"{__version__}+g{described.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


# --- config handling ----------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    _check_keys(raw, _TOP_KEYS, "top level")
    for section, allowed in _SECTION_KEYS.items():
        sub = raw.get(section)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        _check_keys(sub, allowed, section)
    for section in ("local_density", "nonlocal_density"):
        sub = raw.get(section)
        if sub is not None and not isinstance(sub, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        if sub is not None and "name" not in sub:
            raise ConfigError(f"config section {section!r} needs a 'name' key")
    if "experiment" not in raw:
        raise ConfigError("config needs an 'experiment' key")
    if raw["experiment"] not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {raw['experiment']!r}; one of {', '.join(EXPERIMENTS)}"
        )
    return raw


def _check_keys(mapping: dict, allowed: set, where: str):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)} in {where}; allowed: {sorted(allowed)}"
        )


def _require(config: dict, key: str):
    if key not in config or config[key] is None:
        raise ConfigError(f"experiment {config.get('experiment')!r} needs config key {key!r}")
    return config[key]


def resolve_config(raw: dict, out_dir=None, seed=None, jobs=None) -> dict:
    """Fill defaults and apply command-line overrides; the result is echoed in reports."""
    config = dict(raw)
    config.setdefault("seed", 0)
    config.setdefault("output_dir", ".")
    config.setdefault("jobs", os.cpu_count() or 1)
    config.setdefault("p", 2.0)
    config.setdefault("layer_mode", "layer-eps")
    config.setdefault("write_fields", False)
    config["grid"] = {
        "oversample_micro": 8,
        "oversample_h": 8,
        "resolution_growth": 0.0,
        "node_cap": 20_000,
        "cells_per_period": 16,
        **(raw.get("grid") or {}),
    }
    config["solver"] = {**(raw.get("solver") or {})}
    config["envelope"] = {
        "halfwidth": 3.0,
        "samples": 2001,
        "dim": 1,
        **(raw.get("envelope") or {}),
    }
    config["validate"] = {"samples": 10_000, **(raw.get("validate") or {})}
    if out_dir is not None:
        config["output_dir"] = str(out_dir)
    if seed is not None:
        config["seed"] = int(seed)
    if jobs is not None:
        config["jobs"] = int(jobs)
    return config


def build_kernel(config: dict) -> KernelSpec:
    section = _require(config, "kernel")
    name = section.get("name")
    if name is None:
        raise ConfigError("kernel section needs a 'name'")
    if name == "table":
        if "radii" not in section or "values" not in section:
            raise ConfigError("tabulated kernel needs 'radii' and 'values'")
        profile = tabulated_profile(section["radii"], section["values"])
        kernel = KernelSpec(
            profile=profile, dim=int(section.get("dim", 1)), name="table"
        )
        kernel.validate_mass(tol=1e-3)
        return kernel
    return builtin_kernel(name, section.get("dim"))


def build_densities(config: dict, kernel: KernelSpec | None):
    local = None
    nonlocal_ = None
    if config.get("local_density"):
        params = dict(config["local_density"])
        local = builtin_density(params.pop("name"), **params)
    if config.get("nonlocal_density"):
        params = dict(config["nonlocal_density"])
        name = params.pop("name")
        if kernel is None:
            raise ConfigError(f"nonlocal density {name!r} needs a kernel section")
        nonlocal_ = builtin_density(name, kernel=kernel, **params)
    return local, nonlocal_


def build_grid_rule(config: dict) -> GridRule:
    g = config["grid"]
    return GridRule(
        oversample_micro=int(g["oversample_micro"]),
        oversample_h=int(g["oversample_h"]),
        resolution_growth=float(g["resolution_growth"]),
        node_cap=int(g["node_cap"]),
        cells_per_period=int(g["cells_per_period"]),
    )


def build_solver(config: dict) -> MinimizeOptions:
    s = dict(config["solver"])
    s.setdefault("seed", config["seed"])
    return MinimizeOptions(**s)


def _xi_from(config: dict):
    xi = _require(config, "xi")
    if isinstance(xi, (list, tuple)):
        return np.asarray(xi, dtype=float)
    return float(xi)


# --- output helpers -------------------------------------------------------------


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt_cell(v) for v in row) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(path, config: dict, results: dict):
    document = {
        "tool": {"name": "gamma-lab", "version": tool_version()},
        "config": config,
        "results": results,
    }
    with open(path, "w", newline="\n") as fh:
        yaml.safe_dump(document, fh, sort_keys=True, default_flow_style=False)


# --- experiments ----------------------------------------------------------------


def _run_validate(config: dict, out: Path) -> dict:
    sampler = GrowthSampler(n_samples=int(config["validate"]["samples"]), seed=config["seed"])
    kernel = build_kernel(config) if config.get("kernel") else None
    local, nonlocal_ = build_densities(config, kernel)
    if local is None and nonlocal_ is None:
        raise ConfigError("validate experiment needs at least one density")
    rows = []
    results = {}
    for density in (d for d in (local, nonlocal_) if d is not None):
        report = validate_growth(density, sampler)
        results[density.name] = {
            "passed": report.passed,
            "sample_count": report.sample_count,
        }
        for cond in report.checked_conditions:
            worst = (
                ";".join(f"{k}={_fmt_cell(v)}" for k, v in cond.worst_sample.items())
                if cond.worst_sample
                else ""
            )
            rows.append([density.name, cond.name, cond.passed, cond.violation, worst])
    write_csv(out / "validate.csv", ["density", "condition", "passed", "violation", "worst_sample"], rows)
    return results


def _run_f0(config: dict, out: Path) -> dict:
    kernel = build_kernel(config)
    p = float(config["p"])
    xi_grid = _require(config, "xi_grid")
    rows = []
    values = []
    for xi in xi_grid:
        if isinstance(xi, (list, tuple)):
            val = f0_of_xi(kernel, p, np.asarray(xi, dtype=float))
            rows.append(list(xi) + [val])
        else:
            val = f0_of_xi(kernel, p, float(xi))
            rows.append([float(xi), val])
        values.append(val)
    header = (["xi0", "xi1"] if kernel.dim == 2 else ["xi"]) + ["f0"]
    write_csv(out / "f0.csv", header, rows)
    return {"f0_values": [float(v) for v in values]}


def _run_envelope(config: dict, out: Path) -> dict:
    local, _ = build_densities(config, None)
    if local is None:
        raise ConfigError("envelope experiment needs a local_density")
    if not local.x_independent:
        raise ConfigError("envelope experiment needs an x-independent local density")
    section = config["envelope"]
    hw = float(section["halfwidth"])
    samples = int(section["samples"])
    dim = int(section["dim"])
    if dim == 1:
        xs = np.linspace(-hw, hw, samples)
        sampled = SampledFunction1D(xs=xs, values=np.asarray(local.evaluate(np.zeros_like(xs), xs)))
        env = convex_envelope(sampled)
        trust = sampled.boundary_trust()
        rows = [
            [xs[i], sampled.values[i], env.values[i], bool(trust[i])]
            for i in range(samples)
        ]
        write_csv(out / "envelope.csv", ["x", "original", "envelope", "trusted"], rows)
        return {"envelope_at_zero": float(env.values[(samples - 1) // 2])}
    n_side = int(round(np.sqrt(samples)))
    xs = np.linspace(-hw, hw, n_side)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    sampled = SampledFunction2D(xs=xs, ys=xs, values=np.asarray(local.evaluate(np.zeros_like(pts), pts)))
    env = convex_envelope_2d(sampled)
    trust = sampled.boundary_trust()
    rows = []
    for i in range(n_side):
        for j in range(n_side):
            rows.append(
                [xs[i], xs[j], sampled.values[i, j], env.values[i, j], bool(trust[i, j])]
            )
    write_csv(out / "envelope.csv", ["x", "y", "original", "envelope", "trusted"], rows)
    mid = (n_side - 1) // 2
    return {"envelope_at_zero": float(env.values[mid, mid])}


def _run_minimize(config: dict, out: Path) -> dict:
    kernel = build_kernel(config) if config.get("kernel") else None
    local, nonlocal_ = build_densities(config, kernel)
    k = float(_require(config, "k"))
    xi = _xi_from(config)
    rule = build_grid_rule(config)
    n = rule.nodes_for_k(k)
    if n > rule.node_cap:
        raise ConfigError(f"grid for k={k} needs {n} nodes, above the cap {rule.node_cap}")
    dim = 2 if isinstance(xi, np.ndarray) else 1
    grid = Grid(dim=dim, n=n)
    layer = 0.0 if config["layer_mode"] == "trace" else 1.0 / k
    mask = boundary_layer_mask(grid, xi, layer)
    problem = make_problem(grid, k, nonlocal_density=nonlocal_, local_density=local, mask=mask)
    result = minimize(problem, build_solver(config))
    field_to_csv(result.field, out / "field.csv")
    return {
        "energy": {
            "nonlocal": result.energy.nonlocal_term,
            "local": result.energy.local_term,
            "total": result.energy.total,
            "density": result.energy.density,
        },
        "iterations": result.iterations,
        "grad_norm": result.grad_norm,
        "converged": result.converged,
        "restart_energies": [float(e) for e in result.restart_energies],
    }


def _run_sweep_eps(config: dict, out: Path) -> dict:
    kernel = build_kernel(config)
    local, nonlocal_ = build_densities(config, kernel)
    if local is None or nonlocal_ is None:
        raise ConfigError("sweep-eps needs both local_density and nonlocal_density")
    report = epsilon_sweep(
        xi=_xi_from(config),
        k_list=[float(k) for k in _require(config, "k_list")],
        kernel=kernel,
        nonlocal_density=nonlocal_,
        local_density=local,
        p=float(config["p"]),
        grid_rule=build_grid_rule(config),
        layer_mode=config["layer_mode"],
        solver=build_solver(config),
        jobs=int(config["jobs"]),
    )
    header, rows = report.to_rows()
    write_csv(out / "sweep_eps.csv", header, rows)
    return report.to_document()


def _run_cell(config: dict, out: Path) -> dict:
    kernel = build_kernel(config) if config.get("kernel") else None
    local, nonlocal_ = build_densities(config, kernel)
    T = int(_require(config, "T"))
    solver = build_solver(config)
    rule = build_grid_rule(config)
    xi = _xi_from(config)
    value_trace, res_trace = cell_energy(xi, T, nonlocal_, local, rule, layer=0.0, solver=solver)
    value_band, res_band = cell_energy(xi, T, nonlocal_, local, rule, layer=1.0, solver=solver)
    if config["write_fields"]:
        field_to_csv(res_trace.field, out / "cell_field_trace.csv")
        field_to_csv(res_band.field, out / "cell_field_band.csv")
    return {
        "T": T,
        "density_trace_pinned": float(value_trace),
        "density_band_pinned": float(value_band),
        "converged": bool(res_trace.converged and res_band.converged),
    }


def _run_sweep_T(config: dict, out: Path) -> dict:
    kernel = build_kernel(config) if config.get("kernel") else None
    local, nonlocal_ = build_densities(config, kernel)
    report = g_hom_estimate(
        xi=_xi_from(config),
        T_list=[int(T) for T in _require(config, "T_list")],
        nonlocal_density=nonlocal_,
        local_density=local,
        grid_rule=build_grid_rule(config),
        solver=build_solver(config),
        jobs=int(config["jobs"]),
    )
    header, rows = report.to_rows()
    write_csv(out / "sweep_T.csv", header, rows)
    return report.to_document()


_RUNNERS = {
    "validate": _run_validate,
    "f0": _run_f0,
    "envelope": _run_envelope,
    "minimize": _run_minimize,
    "sweep-eps": _run_sweep_eps,
    "cell": _run_cell,
    "sweep-T": _run_sweep_T,
}


def run(config_path, out_dir=None, seed=None, jobs=None, expected_experiment=None) -> int:
    """Execute the experiment named in the config; artifacts land in the output dir."""
    raw = load_config(config_path)
    config = resolve_config(raw, out_dir=out_dir, seed=seed, jobs=jobs)
    experiment = config["experiment"]
    if expected_experiment is not None and experiment != expected_experiment:
        raise ConfigError(
            f"config declares experiment {experiment!r} but the "
            f"{expected_experiment!r} subcommand was invoked"
        )
    out = Path(config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    results = _RUNNERS[experiment](config, out)
    write_report(out / "report.yaml", config, results)
    return 0


def list_builtins(stream=None):
    """Print the catalog of built-in densities and kernels with parameter schemas."""
    stream = stream or sys.stdout
    print("built-in densities:", file=stream)
    for name in sorted(BUILTIN_DENSITIES):
        _, schema, formula = BUILTIN_DENSITIES[name]
        print(f"  {name}: {formula}", file=stream)
        for param, desc in schema.items():
            print(f"      {param}: {desc}", file=stream)
    print("built-in kernels:", file=stream)
    for name in sorted(BUILTIN_KERNELS):
        _, schema = BUILTIN_KERNELS[name]
        print(f"  {name} (dims: {schema['dim']})", file=stream)
    print(
        "  table: piecewise-linear profile from 'radii'/'values' in the kernel section",
        file=stream,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gamma-lab",
        description="Config-driven experiments on local + nonlocal discrete energies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment from a config")
        p.add_argument("--config", required=True, help="path to the YAML config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--jobs", type=int, default=None, help="worker pool size override")
    sub.add_parser("list-builtins", help="print the density and kernel catalog")

    args = parser.parse_args(argv)
    if args.command == "list-builtins":
        list_builtins()
        return 0
    try:
        return run(
            args.config,
            out_dir=args.out,
            seed=args.seed,
            jobs=args.jobs,
            expected_experiment=args.command,
        )
    except ConfigError as exc:
        print(f"gamma-lab {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - diagnostics at the process boundary
        print(f"gamma-lab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
