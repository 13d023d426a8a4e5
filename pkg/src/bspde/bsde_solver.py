"""Backward Euler least-squares Monte Carlo solver for the projected BSDE.

For ``i = M_t-1, ..., 0``::

    C_i = E_i[Y_{i+1}]
    Z_i = E_i[(Y_{i+1} - C_i) ΔW_i^T] / dt
    Y_i = C_i + dt A(t_i, Y_i, Z_i)          (implicit in Y, Newton iterations)

Conditional expectations ``E_i`` are ridge-regularized least-squares fits
on total-degree monomials of ``W_{t_i} / sqrt(t_i)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .drift_ops import DriftSpec
from .function_space import StructureError, sq_hs_norm_coeffs, sq_norm_coeffs
from .noise_terminal import TerminalSpec, TimeGrid, WienerEnsemble, evaluate_terminal
from .taming import TamingParams, h_m, tamed_drift, taming_activity


class SolverError(RuntimeError):
    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class GuardError(SolverError):
    """Contraction guard ``dt * mu < 1`` violated."""


@dataclass(frozen=True)
class SolverConfig:
    grid: TimeGrid
    paths: int
    regression_degree: int = 2
    picard_max: int = 50
    picard_tol: float = 1e-10
    ridge: float = 1e-10
    taming: TamingParams | None = None
    seed: int = 0

    def __post_init__(self):
        if self.picard_tol <= 0:
            raise ValueError("picard_tol must be positive")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if self.regression_degree < 1:
            raise ValueError("regression_degree must be >= 1")
        if self.picard_max < 1:
            raise ValueError("picard_max must be >= 1")


def monomial_features(x: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree ``<= degree`` in the columns of ``x``; constant first."""
    x = np.asarray(x, dtype=float)
    cols = [np.ones(x.shape[0])]
    for deg in range(1, degree + 1):
        for idx in itertools.combinations_with_replacement(range(x.shape[1]), deg):
            cols.append(np.prod(x[:, idx], axis=1))
    return np.stack(cols, axis=1)


@dataclass
class RegressionInfo:
    rank: int
    n_features: int
    ridge_used: float
    fallback: bool
    normal_residual: float = 0.0


def condexp(features: np.ndarray, targets: np.ndarray, ridge: float = 1e-10) -> tuple[np.ndarray, RegressionInfo]:
    """Fitted values of the ridge least-squares regression of ``targets`` on ``features``.

    ``targets`` may carry trailing axes; each trailing component is fitted separately.
    """
    phi = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(y)):
        raise SolverError("non-finite regression target")
    p, m = phi.shape
    flat = y.reshape(p, -1)
    gram = phi.T @ phi / p
    rhs = phi.T @ flat / p
    rank = int(np.linalg.matrix_rank(gram))
    lam, fallback = ridge, False
    if rank < m and ridge == 0.0:
        lam, fallback = 1e-10, True
    elif rank < m:
        fallback = True
    beta = np.linalg.solve(gram + lam * np.eye(m), rhs)
    fitted = phi @ beta
    resid = phi.T @ (flat - fitted) / p
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    info = RegressionInfo(rank, m, lam, fallback, float(np.max(np.abs(resid))) / scale)
    return fitted.reshape(y.shape), info


@dataclass
class BsdeSolution:
    y: np.ndarray  # (P, M_t+1, N)
    z: np.ndarray  # (P, M_t, N, d_u)
    grid: TimeGrid
    ensemble: WienerEnsemble = field(repr=False)
    drift_name: str = ""
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def paths(self) -> int:
        return self.y.shape[0]

    @property
    def n_modes(self) -> int:
        return self.y.shape[2]

    @property
    def fire_fraction(self) -> float:
        return float(np.mean(self.diagnostics.get("taming_active", np.zeros(1, dtype=bool))))


def _features(ensemble: WienerEnsemble, i: int, degree: int) -> np.ndarray:
    t = ensemble.grid.nodes[i]
    w = ensemble.W[:, i, :]
    x = w / math.sqrt(t) if t > 0 else np.zeros_like(w)
    return monomial_features(x, degree)


def _h_dist(a: np.ndarray, b: np.ndarray, wh: np.ndarray) -> np.ndarray:
    return np.sqrt(sq_norm_coeffs(a - b, wh))


def check_guard(drift: DriftSpec, dt: float) -> float:
    """Return ``dt * mu``; raise when the implicit step is not certified uniquely solvable."""
    val = dt * drift.mu
    if not val < 1.0:
        raise GuardError(f"contraction guard violated: dt*mu = {val:g} >= 1 for {drift.name}")
    return val


def implicit_step(drift: DriftSpec, t: float, c: np.ndarray, z: np.ndarray, dt: float, cfg: SolverConfig, step: int):
    """Solve ``Y = c + dt A(t, Y, z)`` pathwise by Newton's method."""
    n = c.shape[-1]
    wh = drift.triple.wH(n)
    eye = np.eye(n)
    y = c.copy()
    resid = math.inf
    for it in range(1, cfg.picard_max + 1):
        a = drift.func(t, y, z)
        if not np.all(np.isfinite(a)):
            raise SolverError(f"non-finite drift at step {step}", step, resid)
        g = y - c - dt * a
        jac = eye - dt * drift.jacobian(t, y, z)
        y_new = y - np.linalg.solve(jac, g[..., None])[..., 0]
        if not np.all(np.isfinite(y_new)):
            raise SolverError(f"non-finite iterate at step {step}", step, resid)
        dist = _h_dist(y_new, y, wh)
        size = np.sqrt(sq_norm_coeffs(y_new, wh))
        resid = float(np.max(dist / (1.0 + size)))
        y = y_new
        if resid < cfg.picard_tol:
            return y, it, resid
    raise SolverError(
        f"implicit step {step} did not converge in {cfg.picard_max} iterations (residual {resid:.3e})",
        step,
        resid,
    )


def solve(
    drift: DriftSpec,
    terminal: TerminalSpec,
    ensemble: WienerEnsemble,
    cfg: SolverConfig,
    galerkin_n: int,
    enforce_guard: bool = True,
) -> BsdeSolution:
    grid = ensemble.grid
    if grid != cfg.grid:
        raise StructureError("ensemble grid differs from solver grid")
    if ensemble.paths != cfg.paths:
        raise StructureError(f"ensemble has {ensemble.paths} paths, config expects {cfg.paths}")
    if terminal.triple != drift.triple:
        raise StructureError("terminal and drift live on different triples")
    if cfg.taming is not None and cfg.taming.galerkin_n != galerkin_n:
        raise StructureError("taming parameters built for a different Galerkin dimension")
    if enforce_guard:
        check_guard(drift, grid.dt)

    p, m, d_u, n, dt = ensemble.paths, grid.steps, ensemble.d_u, galerkin_n, grid.dt
    y = np.zeros((p, m + 1, n))
    z = np.zeros((p, m, n, d_u))
    y[:, m] = evaluate_terminal(terminal, ensemble, n)
    iters = np.zeros(m, dtype=int)
    residuals = np.zeros(m)
    reg_resid = np.zeros(m)
    fallback = np.zeros(m, dtype=bool)
    active = np.zeros((p, m), dtype=bool)
    nodes = grid.nodes

    for i in range(m - 1, -1, -1):
        phi = _features(ensemble, i, cfg.regression_degree)
        nxt = y[:, i + 1]
        cond, info_c = condexp(phi, nxt, cfg.ridge)
        dw = ensemble.increments[:, i, :]
        target = (nxt - cond)[:, :, None] * dw[:, None, :]
        zi, info_z = condexp(phi, target, cfg.ridge)
        zi = zi / dt
        y[:, i], iters[i], residuals[i] = implicit_step(drift, nodes[i], cond, zi, dt, cfg, i)
        z[:, i] = zi
        reg_resid[i] = max(info_c.normal_residual, info_z.normal_residual)
        fallback[i] = info_c.fallback or info_z.fallback
        active[:, i] = taming_activity(drift, nodes[i], y[:, i], zi)

    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise SolverError("non-finite solution")
    diagnostics = {
        "iterations": iters,
        "step_residual": residuals,
        "regression_residual": reg_resid,
        "ridge_fallback": fallback,
        "taming_active": active,
    }
    return BsdeSolution(y, z, grid, ensemble, drift.name, diagnostics)


def auto_taming(
    drift: DriftSpec, terminal: TerminalSpec, ensemble: WienerEnsemble, cfg: SolverConfig, galerkin_n: int
) -> tuple[TamingParams, BsdeSolution]:
    """Pilot-run taming: ``M = sup ||X||_V + 1`` and ``n = 2 max(h_M(t), ||Z||_{L2(U,H)}, 1/2)``.

    The pilot solves the untamed problem; the guard is skipped only when the
    base drift has no finite one-sided constant.
    """
    pilot = solve(drift, terminal, ensemble, replace(cfg, taming=None), galerkin_n, enforce_guard=math.isfinite(drift.mu))
    wv, wh = drift.triple.wV(galerkin_n), drift.triple.wH(galerkin_n)
    ball = float(np.sqrt(np.max(sq_norm_coeffs(pilot.y, wv)))) + 1.0
    hmax = max(h_m(t, drift, ball) for t in ensemble.grid.nodes)
    zmax = float(np.sqrt(np.max(sq_hs_norm_coeffs(pilot.z, wh)))) if pilot.z.size else 0.0
    # level >= 1: a vanishing Z (deterministic data) would otherwise give a degenerate level
    level = 2.0 * max(hmax, zmax, 0.5)
    return TamingParams(galerkin_n, ball, level), pilot


def solve_tamed(
    drift: DriftSpec, terminal: TerminalSpec, ensemble: WienerEnsemble, cfg: SolverConfig, galerkin_n: int
) -> BsdeSolution:
    """Solve with ``cfg.taming`` applied to ``drift``."""
    if cfg.taming is None:
        return solve(drift, terminal, ensemble, cfg, galerkin_n)
    return solve(tamed_drift(drift, cfg.taming), terminal, ensemble, cfg, galerkin_n)
