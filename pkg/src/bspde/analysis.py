"""Discrete counterparts of the energy estimates: Itô energy balance,
a priori statistics, Gronwall-Bellman, terminal stability and the
Cauchy-in-n study over taming levels."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bsde_solver import BsdeSolution, SolverConfig, solve
from .drift_ops import DriftSpec
from .function_space import pair_coeffs, sq_hs_norm_coeffs, sq_norm_coeffs
from .noise_terminal import TerminalSpec, TimeGrid, WienerEnsemble
from .taming import TamingParams, tamed_drift


def _drift_on_trajectory(sol: BsdeSolution, drift: DriftSpec) -> np.ndarray:
    """``A(t_i, X_i, Z_i)`` for all paths and steps ``i < M_t``; shape ``(P, M_t, N)``."""
    nodes = sol.grid.nodes
    out = np.empty_like(sol.y[:, :-1])
    for i in range(sol.grid.steps):
        out[:, i] = drift.func(nodes[i], sol.y[:, i], sol.z[:, i])
    return out


def energy_residual(sol: BsdeSolution, drift: DriftSpec) -> np.ndarray:
    """Per-path defect of the discrete Itô energy balance for ``||X||_V^2`` at ``t = 0``."""
    n = sol.n_modes
    wv = drift.triple.wV(n)
    dt = sol.grid.dt
    x = sol.y[:, :-1]
    a = _drift_on_trajectory(sol, drift)
    drift_term = np.sum(2.0 * pair_coeffs(a, x, wv) - sq_hs_norm_coeffs(sol.z, wv), axis=1) * dt
    zdw = np.einsum("pmkj,pmj->pmk", sol.z, sol.ensemble.increments)
    mart = np.sum(2.0 * pair_coeffs(x, zdw, wv), axis=1)
    return sq_norm_coeffs(sol.y[:, 0], wv) - sq_norm_coeffs(sol.y[:, -1], wv) - drift_term + mart


def apriori_statistic(sol: BsdeSolution, drift: DriftSpec) -> tuple[float, float]:
    """``(max_{path, t} ||X||_V^2, mean over paths of ½ Σ_i ||Z_i||^2_{L2(U,V)} dt)``."""
    wv = drift.triple.wV(sol.n_modes)
    sup_v = float(np.max(sq_norm_coeffs(sol.y, wv)))
    z_energy = float(np.mean(0.5 * np.sum(sq_hs_norm_coeffs(sol.z, wv), axis=1) * sol.grid.dt))
    return sup_v, z_energy


# ---------------------------------------------------------------------------
# Gronwall-Bellman (deterministic instance)
# ---------------------------------------------------------------------------


def gronwall_bound(y, x, alpha: float, grid: TimeGrid) -> np.ndarray:
    """``b_i = e^{α(T-t_i)} y_M + Σ_{j=i}^{M-1} e^{α(t_j - t_i)} x_j dt``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    t, m, dt = grid.nodes, grid.steps, grid.dt
    if y.shape != (m + 1,) or x.shape != (m + 1,):
        raise ValueError(f"series must have {m + 1} samples")
    b = np.empty(m + 1)
    for i in range(m + 1):
        tail = np.exp(alpha * (t[i:m] - t[i])) * x[i:m]
        b[i] = math.exp(alpha * (grid.T - t[i])) * y[m] + np.sum(tail) * dt
    return b


@dataclass(frozen=True)
class GronwallReport:
    hypothesis_holds: bool
    first_violation: int | None
    bound: np.ndarray | None
    conclusion_holds: bool | None
    max_excess: float | None


def verify_gronwall(y, x, alpha: float, grid: TimeGrid, tol: float = 1e-10) -> GronwallReport:
    """Check ``y_i <= y_M + Σ_{j>=i} (x + α y)_j dt``; only then assert ``y <= b + O(dt)``.

    The ``O(dt)`` allowance is the gap between ``b`` and the exact discrete
    comparison sequence ``b~_i = (b~_{i+1} + x_i dt) / (1 - α dt)``, which
    dominates ``y`` whenever the hypothesis holds, ``α >= 0`` and ``α dt < 1``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    m, dt = grid.steps, grid.dt
    if alpha < 0 or alpha * dt >= 1:
        raise ValueError("need 0 <= alpha and alpha*dt < 1")
    rhs = np.empty(m + 1)
    rhs[m] = y[m]
    for i in range(m - 1, -1, -1):
        rhs[i] = rhs[i + 1] + (x[i] + alpha * y[i]) * dt
    scale = np.maximum(np.abs(rhs), 1.0)
    bad = np.nonzero(y - rhs > tol * scale)[0]
    if bad.size:
        return GronwallReport(False, int(bad[0]), None, None, None)
    b = gronwall_bound(y, x, alpha, grid)
    exact = np.empty(m + 1)
    exact[m] = y[m]
    for i in range(m - 1, -1, -1):
        exact[i] = (exact[i + 1] + x[i] * dt) / (1.0 - alpha * dt)
    excess = y - b - np.abs(exact - b)
    ok = bool(np.all(excess <= tol * np.maximum(np.abs(b), 1.0)))
    return GronwallReport(True, None, b, ok, float(np.max(y - b)))


# ---------------------------------------------------------------------------
# Terminal stability
# ---------------------------------------------------------------------------


def uniqueness_weight(sol: BsdeSolution, drift: DriftSpec) -> np.ndarray:
    """``r_1(t_i) = 2 Σ_{j<i} (ρ(X_j) + ρ(X_j)^2) dt`` per path; shape ``(P, M_t+1)``."""
    rho = drift.rho_of(sol.y[:, :-1])
    inc = 2.0 * (rho + rho * rho) * sol.grid.dt
    return np.concatenate([np.zeros((sol.paths, 1)), np.cumsum(inc, axis=1)], axis=1)


def terminal_stability(sol1: BsdeSolution, sol2: BsdeSolution, drift: DriftSpec) -> float:
    if not sol1.ensemble.same_as(sol2.ensemble) or sol1.y.shape != sol2.y.shape:
        raise ValueError("solutions come from different ensembles or configurations")
    wh = drift.triple.wH(sol1.n_modes)
    r1 = uniqueness_weight(sol2, drift)
    gap = sq_norm_coeffs(sol1.y - sol2.y, wh)
    num = float(np.max(np.exp(r1) * gap))
    den = float(np.mean(np.exp(r1[:, -1]) * gap[:, -1]))
    return num / max(den, 1e-30)


# ---------------------------------------------------------------------------
# Cauchy-in-n
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CauchyRow:
    level: float
    fire_fraction: float
    sup_h_gap: float  # against the previous level; nan for the first
    z_gap: float


def cauchy_in_n(
    drift: DriftSpec,
    terminal: TerminalSpec,
    ensemble: WienerEnsemble,
    cfg: SolverConfig,
    levels,
    galerkin_n: int,
    ball_m: float,
) -> list[CauchyRow]:
    """Solve at each taming level ``n`` on one ensemble and tabulate consecutive gaps."""
    levels = [float(v) for v in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    wh = drift.triple.wH(galerkin_n)
    rows, prev = [], None
    for lvl in levels:
        params = TamingParams(galerkin_n, ball_m, lvl)
        sol = solve(tamed_drift(drift, params), terminal, ensemble, replace(cfg, taming=params), galerkin_n)
        if prev is None:
            hgap = zgap = math.nan
        else:
            hgap = float(np.max(np.sqrt(sq_norm_coeffs(sol.y - prev.y, wh))))
            zgap = float(np.sqrt(np.mean(np.sum(sq_hs_norm_coeffs(sol.z - prev.z, wh), axis=1) * sol.grid.dt)))
        rows.append(CauchyRow(lvl, sol.fire_fraction, hgap, zgap))
        prev = sol
    return rows


def loglog_slope(levels, errors) -> float:
    """Least-squares slope of ``-log2(error)`` against ``log2(level)``."""
    x = np.log2(np.asarray(levels, dtype=float))
    y = -np.log2(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# Closed forms for the heat benchmarks
# ---------------------------------------------------------------------------


def heat_closed_form(drift: DriftSpec, terminal: TerminalSpec, ensemble: WienerEnsemble, galerkin_n: int):
    """Exact ``(X, Zbar)`` for the unperturbed heat drift with deterministic or linear terminal.

    ``X_k(t) = e^{-λ_k (T-t)} ξ_k`` (deterministic) or ``e^{-λ_k (T-t)} c_k W_t^k``
    (linear); ``Zbar`` is the interval average ``(1/dt) ∫_{t_i}^{t_{i+1}} Z_s ds``,
    the quantity a one-step estimator approximates.  Returns ``None`` when no
    closed form is known.
    """
    if drift.name != "heat" or terminal.kind == "bounded":
        return None
    grid = ensemble.grid
    c = np.zeros(galerkin_n)
    c[: len(terminal.coeffs)] = terminal.coeffs
    lam = drift.triple.lam(galerkin_n)
    t = grid.nodes
    decay = np.exp(-lam[None, :] * (grid.T - t[:, None]))  # (M+1, N)
    p = ensemble.paths
    z = np.zeros((p, grid.steps, galerkin_n, ensemble.d_u))
    if terminal.kind == "deterministic":
        x = np.broadcast_to(decay * c, (p,) + decay.shape).copy()
        return x, z
    k = len(terminal.coeffs)
    x = np.zeros((p, grid.steps + 1, galerkin_n))
    x[:, :, :k] = decay[None, :, :k] * c[:k] * ensemble.W[:, :, :k]
    avg = (decay[1:, :k] - decay[:-1, :k]) / (lam[:k] * grid.dt) * c[:k]
    for j in range(k):
        z[:, :, j, j] = avg[None, :, j]
    return x, z


def relative_errors(sol: BsdeSolution, x: np.ndarray, zbar: np.ndarray, wh: np.ndarray) -> dict:
    """Max-in-time relative H error, relative RMS of Y, relative L2(Ω×[0,T]) error of Z."""
    ey = np.sqrt(sq_norm_coeffs(sol.y - x, wh))
    nx = np.sqrt(sq_norm_coeffs(x, wh))
    mean_ey = np.sqrt(np.mean(ey**2, axis=0))
    mean_nx = np.sqrt(np.mean(nx**2, axis=0))
    out = {
        "y_max_rel": float(np.max(mean_ey / np.maximum(mean_nx, 1e-300))),
        "y_rms_rel": float(np.sqrt(np.mean(ey**2)) / max(np.sqrt(np.mean(nx**2)), 1e-300)),
        "z_mean": float(np.mean(np.sqrt(sq_hs_norm_coeffs(sol.z, wh)))),
    }
    zn = float(np.sqrt(np.mean(sq_hs_norm_coeffs(zbar, wh))))
    ez = float(np.sqrt(np.mean(sq_hs_norm_coeffs(sol.z - zbar, wh))))
    out["z_rms_rel"] = ez / zn if zn > 0 else math.nan
    return out
