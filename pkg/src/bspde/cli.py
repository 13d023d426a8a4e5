"""Command line entry point: ``bspde solve|check|converge <config>``.

Exit codes: 0 success, 1 check failure, 2 solver failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    apriori_statistic,
    cauchy_in_n,
    energy_residual,
    heat_closed_form,
    loglog_slope,
    relative_errors,
)
from .bsde_solver import BsdeSolution, SolverConfig, SolverError, auto_taming, solve
from .config import ConfigError, RunConfig, load_config
from .drift_ops import CertificateError, DriftSpec, build_operator
from .function_space import StructureError, get_triple, sq_hs_norm_coeffs, sq_norm_coeffs
from .hypothesis_checker import check_all
from .noise_terminal import TerminalSpec, TimeGrid, coarsen, sample_wiener, subsample_paths
from .taming import TamingParams, tamed_drift

EXIT_OK, EXIT_CHECK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
TRAJECTORY_SCHEMA = "bspde-trajectory/1"
CONVERGE_SCHEMA = "bspde-converge/1"
OUTPUT_ROOT_ENV = "BSPDE_OUTPUT_ROOT"
AXES = ("galerkin_n", "steps", "paths", "taming_n")


def output_dir(cfg: RunConfig) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    out = Path(cfg.output_dir)
    if root:
        out = Path(root) / (out.name if out.is_absolute() else out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_problem(cfg: RunConfig) -> tuple[DriftSpec, TerminalSpec]:
    try:
        drift = build_operator(cfg.operator, cfg.operator_params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"operator {cfg.operator!r}: {exc}") from None
    if cfg.triple is not None and get_triple(cfg.triple) != drift.triple:
        raise ConfigError(f"operator {cfg.operator!r} lives on the {drift.triple.name} triple, config says {cfg.triple}")
    terminal = TerminalSpec(cfg.terminal_kind, cfg.terminal_coeffs, drift.triple)
    return drift, terminal


def solver_config(cfg: RunConfig, steps: int | None = None, paths: int | None = None) -> SolverConfig:
    return SolverConfig(
        grid=TimeGrid(cfg.T, steps or cfg.steps),
        paths=paths or cfg.paths,
        regression_degree=cfg.regression_degree,
        picard_max=cfg.picard_max,
        picard_tol=cfg.picard_tol,
        ridge=cfg.ridge,
        seed=cfg.seed,
    )


def run_pipeline(cfg: RunConfig, drift, terminal, ensemble, n_modes: int):
    """Solve with the configured taming; returns ``(solution, drift used, params)``."""
    scfg = solver_config(cfg, ensemble.grid.steps, ensemble.paths)
    params = None
    if cfg.taming == "auto":
        params, _ = auto_taming(drift, terminal, ensemble, scfg, n_modes)
    elif cfg.taming == "fixed":
        params = TamingParams(n_modes, float(cfg.taming_m), float(cfg.taming_n))
    used = tamed_drift(drift, params) if params is not None else drift
    sol = solve(used, terminal, ensemble, replace(scfg, taming=params), n_modes)
    return sol, used, params


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def trajectory_rows(sol: BsdeSolution, drift: DriftSpec) -> list[list[float]]:
    n = sol.n_modes
    wh, wv = drift.triple.wH(n), drift.triple.wV(n)
    xh = sq_norm_coeffs(sol.y, wh)
    xv = sq_norm_coeffs(sol.y, wv)
    zh = sq_hs_norm_coeffs(sol.z, wh)
    zv = sq_hs_norm_coeffs(sol.z, wv)
    rows = []
    for i, t in enumerate(sol.grid.nodes):
        # Z lives on steps; the terminal row carries zero
        z_h = float(np.mean(zh[:, i])) if i < sol.grid.steps else 0.0
        z_v = float(np.mean(zv[:, i])) if i < sol.grid.steps else 0.0
        rows.append([float(t), float(np.mean(xh[:, i])), float(np.mean(xv[:, i])), float(np.max(xv[:, i])), z_h, z_v])
    return rows


def write_trajectory(path: Path, rows) -> None:
    with path.open("w") as fh:
        fh.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
        fh.write("t,mean_x_h2,mean_x_v2,max_x_v2,mean_z_h2,mean_z_v2\n")
        for r in rows:
            fh.write(",".join(f"{v:.17g}" for v in r) + "\n")


def write_records(path: Path, records: dict) -> None:
    with path.open("w") as fh:
        for k, v in records.items():
            fh.write(f"{k}={_fmt(v)}\n")


def run_solve(cfg: RunConfig) -> int:
    drift, terminal = build_problem(cfg)
    out = output_dir(cfg)
    ensemble = sample_wiener(TimeGrid(cfg.T, cfg.steps), cfg.paths, cfg.d_u, cfg.seed)
    records: dict = {}
    try:
        sol, used, params = run_pipeline(cfg, drift, terminal, ensemble, cfg.galerkin_n)
    except SolverError as exc:
        records.update(status="solver_failure", message=str(exc), step=exc.step, residual=exc.residual, seed=cfg.seed)
        records.update({f"config.{k}": v for k, v in cfg.echo().items()})
        write_records(out / "summary.txt", records)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_trajectory(out / "trajectory.csv", trajectory_rows(sol, used))
    sup_v, z_energy = apriori_statistic(sol, used)
    res = np.abs(energy_residual(sol, used))
    it = sol.diagnostics["iterations"]
    records.update(
        status="ok",
        apriori_sup=sup_v,
        z_energy=z_energy,
        apriori_statistic=sup_v + z_energy,
        energy_residual_mean=float(np.mean(res)),
        energy_residual_max=float(np.max(res)),
        taming_fire_fraction=sol.fire_fraction,
        taming_m=params.ball_m if params else "none",
        taming_n=params.level_n if params else "none",
        picard_iterations_mean=float(np.mean(it)),
        picard_iterations_max=int(np.max(it)),
        ridge_fallback_steps=int(np.sum(sol.diagnostics["ridge_fallback"])),
        seed=cfg.seed,
    )
    records.update({f"config.{k}": v for k, v in cfg.echo().items()})
    write_records(out / "summary.txt", records)
    return EXIT_OK


def run_check(cfg: RunConfig) -> int:
    drift, _ = build_problem(cfg)
    n = cfg.check_modes
    if cfg.taming == "fixed":
        params = TamingParams(n, float(cfg.taming_m), float(cfg.taming_n))
    else:
        params = TamingParams(n, 10.0, 10.0)
    reports = check_all(drift, cfg.check_samples, cfg.seed, n, cfg.d_u, tamed_drift(drift, params), params)
    out = output_dir(cfg)
    with (out / "check_report.txt").open("w") as fh:
        fh.write(f"operator={drift.name}\n")
        for r in reports:
            fh.write("\n" + "\n".join(r.records()) + "\n")
    ok = all(r.passed for r in reports)
    for r in reports:
        print(f"{r.condition}: {r.verdict} (worst margin {r.worst_margin:.3e})")
    return EXIT_OK if ok else EXIT_CHECK


def run_converge(cfg: RunConfig, axis: str, levels) -> int:
    if axis not in AXES:
        raise ConfigError(f"axis must be one of {AXES}")
    levels = sorted(levels) if axis == "taming_n" else sorted(int(v) for v in levels)
    if len(levels) < 3:
        raise ConfigError("converge needs at least 3 levels")
    drift, terminal = build_problem(cfg)
    out = output_dir(cfg)
    rows = []
    try:
        if axis == "taming_n":
            ens = sample_wiener(TimeGrid(cfg.T, cfg.steps), cfg.paths, cfg.d_u, cfg.seed)
            scfg = solver_config(cfg)
            params, _ = auto_taming(drift, terminal, ens, scfg, cfg.galerkin_n)
            ball = float(cfg.taming_m) if cfg.taming == "fixed" else params.ball_m
            for r in cauchy_in_n(drift, terminal, ens, scfg, levels, cfg.galerkin_n, ball):
                rows.append([r.level, math.nan, math.nan, r.sup_h_gap, r.fire_fraction])
        else:
            rows = _converge_rows(cfg, drift, terminal, axis, levels)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    errors = [r[1] for r in rows]
    slope = loglog_slope([r[0] for r in rows], errors) if all(e > 0 and math.isfinite(e) for e in errors) else math.nan
    with (out / f"converge_{axis}.csv").open("w") as fh:
        fh.write(f"# schema: {CONVERGE_SCHEMA}\n")
        fh.write(f"# axis: {axis}\n")
        fh.write("level,error,apriori_statistic,gap,fire_fraction\n")
        for r in rows:
            fh.write(",".join(f"{v:.12g}" for v in r) + "\n")
        fh.write(f"# slope: {slope:.6g}\n")
    print(f"{axis}: slope {slope:.4g}")
    return EXIT_OK


def _converge_rows(cfg, drift, terminal, axis, levels):
    top_steps = max(levels) if axis == "steps" else cfg.steps
    top_paths = max(levels) if axis == "paths" else cfg.paths
    base = sample_wiener(TimeGrid(cfg.T, top_steps), top_paths, cfg.d_u, cfg.seed)
    rows, prev_mean = [], None
    for lvl in levels:
        lvl = int(lvl)
        n = lvl if axis == "galerkin_n" else cfg.galerkin_n
        ens = base
        if axis == "steps":
            if top_steps % lvl:
                raise ConfigError(f"steps level {lvl} does not divide {top_steps}")
            ens = coarsen(base, top_steps // lvl) if lvl != top_steps else base
        elif axis == "paths":
            ens = subsample_paths(base, lvl)
        sol, used, _ = run_pipeline(cfg, drift, terminal, ens, n)
        closed = heat_closed_form(drift, terminal, ens, n)
        err = math.nan
        if closed is not None:
            e = relative_errors(sol, closed[0], closed[1], drift.triple.wH(n))
            err = e["y_max_rel"] if terminal.kind == "deterministic" else e["y_rms_rel"]
        sup_v, z_energy = apriori_statistic(sol, used)
        # ensemble-mean trajectory at t = 0 on the shared modes, for the consecutive gap
        mean0 = np.mean(sol.y[:, 0], axis=0)
        gap = math.nan
        if prev_mean is not None:
            k = min(len(mean0), len(prev_mean))
            d = np.zeros(max(len(mean0), len(prev_mean)))
            d[:k] = mean0[:k] - prev_mean[:k]
            d[k:len(mean0)] = mean0[k:]
            d[k:len(prev_mean)] = prev_mean[k:]
            gap = float(np.sqrt(sq_norm_coeffs(d, drift.triple.wH(len(d)))))
        prev_mean = mean0
        rows.append([float(lvl), err, sup_v + z_energy, gap, sol.fire_fraction])
    return rows


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bspde", description="Spectral-Galerkin solver and auditor for backward SPDEs")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "check", "converge"):
        s = sub.add_parser(name)
        s.add_argument("config")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        s.add_argument("--seed", type=int)
        if name in ("solve", "check"):
            s.add_argument("--taming-m", type=float)
            s.add_argument("--taming-n", type=float)
        if name == "check":
            s.add_argument("--samples", type=int)
        if name == "converge":
            s.add_argument("--axis", required=True, choices=AXES)
            s.add_argument("--levels", required=True, nargs="+", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if getattr(args, "taming_m", None) is not None or getattr(args, "taming_n", None) is not None:
            if args.taming_m is None or args.taming_n is None:
                raise ConfigError("--taming-m and --taming-n must be given together")
            cfg.taming, cfg.taming_m, cfg.taming_n = "fixed", args.taming_m, args.taming_n
        if getattr(args, "samples", None) is not None:
            cfg.check_samples = args.samples
        cfg.validate()
        if args.command == "solve":
            return run_solve(cfg)
        if args.command == "check":
            return run_check(cfg)
        return run_converge(cfg, args.axis, args.levels)
    except (ConfigError, CertificateError, StructureError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
