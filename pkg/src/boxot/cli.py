"""Command-line interface: config parsing, run orchestration, artifacts.

Configs are YAML (nested sections, scalars, arrays; grammar documented in the
README).  Every run directory receives a manifest recording the echoed
config, package/tool versions, wall times and residuals; the manifest is
written even when a stage fails, with the failure stage recorded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .feedback import (extract_feedback, seed_particles, simulate_particles,
                       write_trajectories)
from .fields import ControlAffineSystem, make_scenario
from .generator import build_rates, write_triplets
from .geometry import Grid, build_grid
from .graph import HypothesisError, build_graph, validate_problem_hypotheses
from .oracle import dense_small_ot, grushin_shoot, translation_wasserstein
from .solver import SolverOptions
from .timegrid import TimeGrid
from .transport import (assemble, cost_sweep, solve, write_cost_table,
                        write_density_path, write_fluxes)


class ConfigError(ValueError):
    """Invalid run configuration; message carries the offending field path."""


# -- config parsing -----------------------------------------------------------

_MEASURE_TYPES = ("uniform", "disk", "delta", "boxes", "region", "vector")


@dataclass
class RunConfig:
    scenario_name: str
    scenario_params: dict
    grid_dims: list
    grid_bounds: list
    grid_periodic: list
    quad_order: int
    t_f: float
    k: int
    mu0: dict
    mu1: dict
    solver: SolverOptions
    seed: int
    threads: Optional[int]
    override_hypotheses: bool
    sweep_horizons: list
    particles_per_box: int
    sim_substeps: int
    seeding_mode: str
    emit_density: bool
    out_dir: Optional[str]

    def echo(self) -> dict:
        """Full config with defaults applied; parses back to an equivalent
        RunConfig."""
        return {
            "scenario": {"name": self.scenario_name,
                         "params": dict(self.scenario_params)},
            "grid": {"dims": list(self.grid_dims),
                     "bounds": [list(b) for b in self.grid_bounds],
                     "periodic": list(self.grid_periodic),
                     "quad_order": self.quad_order},
            "time": {"t_f": self.t_f, "k": self.k},
            "mu0": dict(self.mu0),
            "mu1": dict(self.mu1),
            "solver": {"tol": self.solver.tol,
                       "max_iters": self.solver.max_iters,
                       "sigma0": self.solver.sigma0,
                       "alpha": self.solver.alpha},
            "seed": self.seed,
            "threads": self.threads,
            "override_hypotheses": self.override_hypotheses,
            "sweep": {"horizons": list(self.sweep_horizons)},
            "simulate": {"particles_per_box": self.particles_per_box,
                         "substeps": self.sim_substeps,
                         "mode": self.seeding_mode},
            "output": {"dir": self.out_dir, "density": self.emit_density},
        }


def _need(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: required key missing")
    return mapping[key]


def _as_mapping(value: Any, path: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping")
    return value


def _check_keys(mapping: dict, allowed: set, path: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}: unknown key")


def _as_number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(f"{path}: expected a positive number, got {value!r}")
    return float(value)


def _as_int(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: expected >= {minimum}, got {value}")
    return value


def _as_vector(value: Any, path: str, length: Optional[int] = None) -> list:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{path}: expected an array")
    vec = [_as_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if length is not None and len(vec) != length:
        raise ConfigError(f"{path}: expected {length} entries, got {len(vec)}")
    return vec


def _parse_measure(spec: Any, path: str, dim: int) -> dict:
    spec = _as_mapping(spec, path)
    mtype = _need(spec, "type", path)
    if mtype not in _MEASURE_TYPES:
        raise ConfigError(f"{path}.type: unknown measure type {mtype!r}; "
                          f"expected one of {_MEASURE_TYPES}")
    out = {"type": mtype}
    if mtype == "uniform":
        _check_keys(spec, {"type"}, path)
    elif mtype == "disk":
        _check_keys(spec, {"type", "center", "radius"}, path)
        out["center"] = _as_vector(_need(spec, "center", path),
                                   f"{path}.center", dim)
        out["radius"] = _as_number(_need(spec, "radius", path),
                                   f"{path}.radius", positive=True)
    elif mtype == "delta":
        _check_keys(spec, {"type", "point"}, path)
        out["point"] = _as_vector(_need(spec, "point", path),
                                  f"{path}.point", dim)
    elif mtype == "boxes":
        _check_keys(spec, {"type", "points"}, path)
        pts = _need(spec, "points", path)
        if not isinstance(pts, list) or not pts:
            raise ConfigError(f"{path}.points: expected a non-empty array")
        out["points"] = [_as_vector(p, f"{path}.points[{i}]", dim)
                         for i, p in enumerate(pts)]
    elif mtype == "region":
        _check_keys(spec, {"type", "lo", "hi"}, path)
        out["lo"] = _as_vector(_need(spec, "lo", path), f"{path}.lo", dim)
        out["hi"] = _as_vector(_need(spec, "hi", path), f"{path}.hi", dim)
    elif mtype == "vector":
        _check_keys(spec, {"type", "path"}, path)
        out["path"] = str(_need(spec, "path", path))
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    raw = _as_mapping(raw, "config")
    _check_keys(raw, {"scenario", "grid", "time", "mu0", "mu1", "solver",
                      "seed", "threads", "override_hypotheses", "sweep",
                      "simulate", "output"}, "config")

    sc = _as_mapping(_need(raw, "scenario", "config"), "scenario")
    _check_keys(sc, {"name", "params"}, "scenario")
    name = _need(sc, "name", "scenario")
    params = _as_mapping(sc.get("params"), "scenario.params")
    try:
        system = make_scenario(name, **params)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    gr = _as_mapping(_need(raw, "grid", "config"), "grid")
    _check_keys(gr, {"dims", "bounds", "periodic", "quad_order"}, "grid")
    dims = _need(gr, "dims", "grid")
    if not isinstance(dims, list) or len(dims) != system.dim:
        raise ConfigError(f"grid.dims: expected {system.dim} entries")
    dims = [_as_int(n, f"grid.dims[{i}]", minimum=1)
            for i, n in enumerate(dims)]
    bounds = gr.get("bounds")
    if bounds is None:
        bounds = [list(b) for b in system.domain]
    else:
        if not isinstance(bounds, list) or len(bounds) != system.dim:
            raise ConfigError(f"grid.bounds: expected {system.dim} intervals")
        bounds = [_as_vector(b, f"grid.bounds[{i}]", 2)
                  for i, b in enumerate(bounds)]
        for i, (lo, hi) in enumerate(bounds):
            if lo >= hi:
                raise ConfigError(f"grid.bounds[{i}]: lo must be < hi")
    periodic = gr.get("periodic")
    if periodic is None:
        periodic = list(system.periodic)
    else:
        if not isinstance(periodic, list) or len(periodic) != system.dim \
                or not all(isinstance(p, bool) for p in periodic):
            raise ConfigError(
                f"grid.periodic: expected {system.dim} booleans")
    quad_order = _as_int(gr.get("quad_order", 3), "grid.quad_order", minimum=1)

    tm = _as_mapping(_need(raw, "time", "config"), "time")
    _check_keys(tm, {"t_f", "k", "dt"}, "time")
    t_f = _as_number(_need(tm, "t_f", "time"), "time.t_f", positive=True)
    if "k" in tm and "dt" in tm:
        raise ConfigError("time: give either k or dt, not both")
    if "k" in tm:
        k = _as_int(tm["k"], "time.k", minimum=1)
    elif "dt" in tm:
        dt = _as_number(tm["dt"], "time.dt", positive=True)
        k = int(round(t_f / dt))
        if k < 1 or abs(k * dt - t_f) > 1e-9 * max(1.0, t_f):
            raise ConfigError("time.dt: t_f must be a multiple of dt")
    else:
        raise ConfigError("time.k: required key missing")

    mu0 = _parse_measure(_need(raw, "mu0", "config"), "mu0", system.dim)
    mu1 = _parse_measure(_need(raw, "mu1", "config"), "mu1", system.dim)

    sv = _as_mapping(raw.get("solver"), "solver")
    _check_keys(sv, {"tol", "max_iters", "sigma0", "alpha"}, "solver")
    solver = SolverOptions(
        tol=_as_number(sv.get("tol", 1e-5), "solver.tol", positive=True),
        max_iters=_as_int(sv.get("max_iters", 50_000), "solver.max_iters",
                          minimum=1),
        sigma0=None if sv.get("sigma0") is None
        else _as_number(sv["sigma0"], "solver.sigma0", positive=True),
        alpha=_as_number(sv.get("alpha", 1.7), "solver.alpha", positive=True))
    if not 0.0 < solver.alpha < 2.0:
        raise ConfigError("solver.alpha: expected a value in (0, 2)")

    sw = _as_mapping(raw.get("sweep"), "sweep")
    _check_keys(sw, {"horizons"}, "sweep")
    horizons = sw.get("horizons", [])
    if horizons:
        horizons = [_as_number(h, f"sweep.horizons[{i}]", positive=True)
                    for i, h in enumerate(horizons)]

    sim = _as_mapping(raw.get("simulate"), "simulate")
    _check_keys(sim, {"particles_per_box", "substeps", "mode"}, "simulate")
    mode = sim.get("mode", "lattice")
    if mode not in ("lattice", "random"):
        raise ConfigError("simulate.mode: expected 'lattice' or 'random'")

    out = _as_mapping(raw.get("output"), "output")
    _check_keys(out, {"dir", "density"}, "output")
    emit_density = out.get("density", False)
    if not isinstance(emit_density, bool):
        raise ConfigError("output.density: expected a boolean")

    threads = raw.get("threads")
    if threads is not None:
        threads = _as_int(threads, "threads", minimum=1)
    override = raw.get("override_hypotheses", False)
    if not isinstance(override, bool):
        raise ConfigError("override_hypotheses: expected a boolean")

    return RunConfig(
        scenario_name=name, scenario_params=params, grid_dims=dims,
        grid_bounds=bounds, grid_periodic=periodic, quad_order=quad_order,
        t_f=t_f, k=k, mu0=mu0, mu1=mu1, solver=solver,
        seed=_as_int(raw.get("seed", 0), "seed"),
        threads=threads, override_hypotheses=override,
        sweep_horizons=horizons,
        particles_per_box=_as_int(sim.get("particles_per_box", 4),
                                  "simulate.particles_per_box", minimum=1),
        sim_substeps=_as_int(sim.get("substeps", 10), "simulate.substeps",
                             minimum=1),
        seeding_mode=mode, emit_density=emit_density,
        out_dir=None if out.get("dir") is None else str(out["dir"]))


# -- measures -----------------------------------------------------------------

def build_measure(spec: dict, grid: Grid) -> np.ndarray:
    """Realize a measure spec as a mass vector on the grid (unnormalized)."""
    mtype = spec["type"]
    mu = np.zeros(grid.size)
    centers = grid.centers()
    if mtype == "uniform":
        mu[:] = 1.0
    elif mtype == "disk":
        c = np.asarray(spec["center"], dtype=float)
        inside = np.linalg.norm(centers - c, axis=1) < spec["radius"]
        if not inside.any():
            raise ConfigError("disk measure covers no box centers")
        mu[inside] = 1.0
    elif mtype == "delta":
        mu[int(grid.locate(np.asarray(spec["point"]))[0])] = 1.0
    elif mtype == "boxes":
        for p in spec["points"]:
            mu[int(grid.locate(np.asarray(p))[0])] = 1.0
    elif mtype == "region":
        lo = np.asarray(spec["lo"], dtype=float)
        hi = np.asarray(spec["hi"], dtype=float)
        inside = np.all((centers >= lo) & (centers <= hi), axis=1)
        if not inside.any():
            raise ConfigError("region measure covers no box centers")
        mu[inside] = 1.0
    elif mtype == "vector":
        values = np.loadtxt(spec["path"], delimiter=",").ravel()
        if values.size != grid.size:
            raise ConfigError(
                f"vector measure file has {values.size} entries, "
                f"expected {grid.size}")
        mu = values
    return mu


# -- orchestration ------------------------------------------------------------

class _Manifest:
    def __init__(self, out_dir: Path, command: str, config_echo: dict):
        self.path = out_dir / "manifest.json"
        self.data = {
            "command": command,
            "config": config_echo,
            "versions": {
                "boxot": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
            "status": "running",
            "failure_stage": None,
            "error": None,
            "wall_times": {},
            "results": {},
        }
        self.write()

    def stage(self, name: str):
        manifest = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()
                manifest.data["failure_stage"] = name
                return self

            def __exit__(self, exc_type, exc, tb):
                manifest.data["wall_times"][name] = \
                    time.perf_counter() - self.start
                if exc_type is None:
                    manifest.data["failure_stage"] = None
                manifest.write()
                return False

        return _Timer()

    def finish(self, status: str, error: Optional[str] = None):
        self.data["status"] = status
        self.data["error"] = error
        self.write()

    def write(self):
        self.path.write_text(json.dumps(self.data, indent=2, default=str)
                             + "\n")


def _build_pipeline(cfg: RunConfig):
    system = make_scenario(cfg.scenario_name, **cfg.scenario_params)
    grid = build_grid(cfg.grid_dims, cfg.grid_bounds, cfg.grid_periodic,
                      quad_order=cfg.quad_order)
    tg = TimeGrid(t_f=cfg.t_f, k=cfg.k)
    return system, grid, tg


def _cmd_check_connectivity(cfg: RunConfig, out_dir: Path,
                            manifest: _Manifest) -> int:
    system, grid, tg = _build_pipeline(cfg)
    with manifest.stage("rates"):
        rates = build_rates(system, grid, tg)
    with manifest.stage("graph"):
        graph = build_graph(grid, rates)
        report = validate_problem_hypotheses(graph,
                                             driftless=system.driftless)
    lines = report.lines()
    (out_dir / "connectivity.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    manifest.data["results"]["passed"] = report.passed
    return 0 if report.passed else 3


def _cmd_generator_dump(cfg: RunConfig, out_dir: Path,
                        manifest: _Manifest) -> int:
    system, grid, tg = _build_pipeline(cfg)
    with manifest.stage("rates"):
        rates = build_rates(system, grid, tg)
    with manifest.stage("dump"):
        if rates.drift is not None:
            for j in range(tg.k):
                write_triplets(rates.drift_matrix(j),
                               out_dir / f"rates_drift_j{j:04d}.txt")
        for i in range(1, rates.n_channels + 1):
            write_triplets(rates.control_matrix(i, "+"),
                           out_dir / f"rates_control_plus_{i}.txt")
            write_triplets(rates.control_matrix(i, "-"),
                           out_dir / f"rates_control_minus_{i}.txt")
    return 0


def _solve_pipeline(cfg: RunConfig, out_dir: Path, manifest: _Manifest):
    system, grid, tg = _build_pipeline(cfg)
    with manifest.stage("rates"):
        rates = build_rates(system, grid, tg)
    with manifest.stage("graph"):
        graph = build_graph(grid, rates)
    with manifest.stage("measures"):
        mu0 = build_measure(cfg.mu0, grid)
        mu1 = build_measure(cfg.mu1, grid)
    with manifest.stage("assemble"):
        problem = assemble(graph, rates, mu0, mu1, tg, options=cfg.solver,
                           override_hypotheses=cfg.override_hypotheses)
    (out_dir / "connectivity.txt").write_text(
        "\n".join(problem.hypotheses.lines()) + "\n")
    manifest.data["results"]["cfl"] = problem.cfl
    with manifest.stage("solve"):
        sol = solve(problem)
    d = sol.diagnostics
    manifest.data["results"].update({
        "cost": sol.cost, "converged": sol.converged,
        "iterations": d.iterations,
        "primal_residual": d.primal_residual,
        "dual_residual": d.dual_residual,
        "continuity_residual": d.continuity_residual,
    })
    return system, grid, tg, problem, sol


def _write_solution(cfg: RunConfig, out_dir: Path, grid: Grid, tg: TimeGrid,
                    sol) -> None:
    mu = sol.mu / grid.box_volume if cfg.emit_density else sol.mu
    write_density_path(out_dir / "density_path.csv", grid, tg, mu)
    write_density_path(out_dir / "density_path.bin", grid, tg, mu,
                       binary=True)
    snap = out_dir / "snapshots"
    snap.mkdir(exist_ok=True)
    for j in range(tg.k + 1):
        with open(snap / f"mu_{j:04d}.csv", "w") as f:
            f.write("box,mass\n")
            for v in range(grid.size):
                f.write(f"{v},{mu[j, v]!r}\n")
    write_fluxes(out_dir / "fluxes.csv", sol, tg)
    write_fluxes(out_dir / "fluxes.bin", sol, tg, binary=True)
    d = sol.diagnostics
    with open(out_dir / "cost.csv", "w") as f:
        f.write("t_f,cost,iterations,residual\n")
        residual = max(d.primal_residual, d.dual_residual,
                       d.continuity_residual)
        f.write(f"{tg.t_f!r},{sol.cost!r},{d.iterations},{residual!r}\n")


def _write_feedback(out_dir: Path, fb, tg: TimeGrid) -> None:
    n, k, m = fb.values.shape
    with open(out_dir / "feedback.csv", "w") as f:
        f.write("j,t,box," + ",".join(f"u{i + 1}" for i in range(n)) + "\n")
        for j in range(k):
            for v in range(m):
                vals = ",".join(repr(float(fb.values[i, j, v]))
                                for i in range(n))
                f.write(f"{j},{tg.nodes[j]!r},{v},{vals}\n")


def _cmd_solve(cfg: RunConfig, out_dir: Path, manifest: _Manifest) -> int:
    system, grid, tg, problem, sol = _solve_pipeline(cfg, out_dir, manifest)
    with manifest.stage("write"):
        _write_solution(cfg, out_dir, grid, tg, sol)
        fb = extract_feedback(sol, problem.graph)
        _write_feedback(out_dir, fb, tg)
    print(f"cost: {sol.cost!r}")
    print(f"converged: {sol.converged}")
    return 0


def _cmd_simulate(cfg: RunConfig, out_dir: Path, manifest: _Manifest) -> int:
    system, grid, tg, problem, sol = _solve_pipeline(cfg, out_dir, manifest)
    with manifest.stage("write"):
        _write_solution(cfg, out_dir, grid, tg, sol)
    with manifest.stage("feedback"):
        fb = extract_feedback(sol, problem.graph)
        _write_feedback(out_dir, fb, tg)
    with manifest.stage("simulate"):
        ensemble = seed_particles(grid, problem.mu0, cfg.particles_per_box,
                                  mode=cfg.seeding_mode, seed=cfg.seed)
        result = simulate_particles(system, fb, ensemble, tg,
                                    target=problem.mu1,
                                    substeps=cfg.sim_substeps)
    write_trajectories(out_dir / "trajectories.csv", result, tg)
    summary = {
        "particles": ensemble.count,
        "transported_fraction": result.transported_fraction,
        "clamped_count": result.clamped_count,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2)
                                          + "\n")
    manifest.data["results"].update(summary)
    print(f"transported_fraction: {result.transported_fraction!r}")
    return 0


def _cmd_sweep(cfg: RunConfig, out_dir: Path, manifest: _Manifest) -> int:
    if not cfg.sweep_horizons:
        raise ConfigError("sweep.horizons: required for the sweep subcommand")
    system, grid, tg = _build_pipeline(cfg)
    dt = tg.dt
    with manifest.stage("measures"):
        mu0 = build_measure(cfg.mu0, grid)
        mu1 = build_measure(cfg.mu1, grid)
    with manifest.stage("sweep"):
        records = cost_sweep(system, grid, mu0, mu1, cfg.sweep_horizons, dt,
                             options=cfg.solver,
                             override_hypotheses=cfg.override_hypotheses)
    write_cost_table(out_dir / "cost_sweep.csv", records)
    for r in records:
        print(f"t_f={r.t_f!r} cost={r.cost!r} iterations={r.iterations}")
    manifest.data["results"]["costs"] = [r.cost for r in records]
    return 0


def _cmd_oracle(cfg: RunConfig, out_dir: Path, manifest: _Manifest) -> int:
    with manifest.stage("oracle"):
        geo = grushin_shoot((0.15, 0.8), alpha=0.0)
        print(f"grushin_shoot(0.15, 0.8): a={geo.a!r} b={geo.b!r} "
              f"cost={geo.cost!r}")
        print(f"translation_wasserstein([0.5, 0]): "
              f"{translation_wasserstein(None, [0.5, 0.0])!r}")
        print(f"translation_wasserstein([0.3, 0.4]): "
              f"{translation_wasserstein(None, [0.3, 0.4])!r}")
    return 0


_COMMANDS = {
    "check-connectivity": _cmd_check_connectivity,
    "generator-dump": _cmd_generator_dump,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
}


def _apply_flag_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.tol is not None:
        cfg.solver.tol = args.tol
    if args.max_iters is not None:
        cfg.solver.max_iters = args.max_iters
    if args.override_hypotheses:
        cfg.override_hypotheses = True
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="boxot",
        description="Optimal mass transport over control-affine dynamics "
                    "on box partitions")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="YAML run config")
    parser.add_argument("--out", default=None, help="run directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker threads (1 = reproducible)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--override-hypotheses", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text())
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg = _apply_flag_overrides(cfg, args)

    if cfg.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(cfg.threads)

    out_dir = Path(cfg.out_dir or "boxot_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out_dir, args.command, cfg.echo())
    try:
        code = _COMMANDS[args.command](cfg, out_dir, manifest)
    except HypothesisError as exc:
        manifest.finish("failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        manifest.finish("failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - manifest must record any failure
        manifest.finish("failed", error=f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest.finish("ok" if code == 0 else "failed")
    return code


if __name__ == "__main__":
    sys.exit(main())
