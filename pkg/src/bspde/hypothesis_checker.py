"""Sampling audits of the structural conditions H0-H4 and, for tamed
drifts, the BSDE conditions C2-C4.

Every check returns a :class:`CheckReport` whose margin is normalized to
``[-1, 1]``: ``(RHS - LHS) / (|pairing magnitude| + |RHS|)``.  A report
passes iff ``worst_margin >= -TOL``.  A pass is evidence, never proof; a
fail always carries a witness that :func:`replay` re-evaluates in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .drift_ops import DriftSpec
from .function_space import TripleSpec, pair_coeffs, sq_hs_norm_coeffs, sq_norm_coeffs
from .taming import TamingParams

TOL = 1e-8
CONDITIONS = ("H0", "H1", "H2", "H3", "H4", "C2", "C3", "C4")
DEFAULT_MODES = 16
DEFAULT_DU = 2
CHUNK = 1000
_TINY = 1e-300


@dataclass
class CheckReport:
    condition: str
    samples: int
    worst_margin: float
    witness: dict = field(default_factory=dict, repr=False)
    seed: int | None = None
    constants: dict = field(default_factory=dict)
    note: str = ""

    @property
    def verdict(self) -> str:
        return "pass" if self.worst_margin >= -TOL else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def records(self) -> list[str]:
        """Structured ``key=value`` text, one record per line."""
        out = [
            f"condition={self.condition}",
            f"verdict={self.verdict}",
            f"samples={self.samples}",
            f"worst_margin={self.worst_margin:.6e}",
            f"seed={self.seed}",
        ]
        out += [f"constant.{k}={_fmt(v)}" for k, v in self.constants.items()]
        if self.verdict == "fail":
            out += [f"witness.{k}={_fmt(v)}" for k, v in self.witness.items()]
        if self.note:
            out.append(f"note={self.note}")
        return out


def _fmt(v) -> str:
    if isinstance(v, np.ndarray):
        return "[" + ",".join(f"{x:.17g}" for x in v.reshape(-1)) + "]" + (f"shape={v.shape}" if v.ndim > 1 else "")
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _normalized(rhs_minus_lhs, scale):
    scale = np.asarray(scale, dtype=float)
    return np.where(scale > 0, rhs_minus_lhs / np.maximum(scale, _TINY), 0.0)


# ---------------------------------------------------------------------------
# Sampling measure
# ---------------------------------------------------------------------------


def sample_fields(rng: np.random.Generator, count: int, n: int, weights: np.ndarray, amp=(1e-2, 1e2)) -> np.ndarray:
    """Gaussian modes with decay ``k^{-s}``, ``s ~ U[1, 3]``, rescaled to log-uniform norm."""
    k = np.arange(1, n + 1)
    s = rng.uniform(1.0, 3.0, size=(count, 1))
    raw = rng.standard_normal((count, n)) * k ** (-s)
    norm = np.sqrt(sq_norm_coeffs(raw, weights))
    a = 10.0 ** rng.uniform(math.log10(amp[0]), math.log10(amp[1]), size=count)
    return raw * (a / np.maximum(norm, _TINY))[:, None]


def sample_hs(rng: np.random.Generator, count: int, n: int, d_u: int, weights: np.ndarray, amp=(1e-2, 1e2)) -> np.ndarray:
    k = np.arange(1, n + 1)
    s = rng.uniform(1.0, 3.0, size=(count, 1, 1))
    raw = rng.standard_normal((count, n, d_u)) * (k[None, :, None] ** (-s))
    norm = np.sqrt(sq_hs_norm_coeffs(raw, weights))
    a = 10.0 ** rng.uniform(math.log10(amp[0]), math.log10(amp[1]), size=count)
    return raw * (a / np.maximum(norm, _TINY))[:, None, None]


def _chunks(total: int):
    for lo in range(0, total, CHUNK):
        yield slice(lo, min(lo + CHUNK, total))


# ---------------------------------------------------------------------------
# Margin kernels (vectorized over leading axes; used for scans and replay)
# ---------------------------------------------------------------------------


def margin_h2(drift: DriftSpec, t, v1, v2, phi1, phi2) -> np.ndarray:
    n = np.shape(v1)[-1]
    wh, wv, ws = drift.triple.wH(n), drift.triple.wV(n), drift.triple.wVstar(n)
    d = v1 - v2
    da = drift.func(t, v1, phi1) - drift.func(t, v2, phi2)
    lhs = pair_coeffs(da, d, wh)
    dn = np.sqrt(sq_norm_coeffs(d, wh))
    dphi = np.sqrt(sq_hs_norm_coeffs(phi1 - phi2, wh))
    rhs = drift.rho_of(v2) * (dn * dn + dn * dphi)
    scale = np.sqrt(sq_norm_coeffs(da, ws) * sq_norm_coeffs(d, wv)) + np.abs(rhs)
    return _normalized(rhs - lhs, scale)


def margin_h3(drift: DriftSpec, t, v, phi) -> np.ndarray:
    n = np.shape(v)[-1]
    wv = drift.triple.wV(n)
    a = drift.func(t, v, phi)
    lhs = pair_coeffs(a, v, wv)
    rhs = drift.f(t) + drift.eps * sq_hs_norm_coeffs(phi, wv) + drift.K * sq_norm_coeffs(v, wv)
    scale = np.sqrt(sq_norm_coeffs(a, wv) * sq_norm_coeffs(v, wv)) + np.abs(rhs)
    return _normalized(rhs - lhs, scale)


def margin_h4(drift: DriftSpec, t, v, phi) -> np.ndarray:
    n = np.shape(v)[-1]
    wv, ws = drift.triple.wV(n), drift.triple.wVstar(n)
    lhs = np.sqrt(sq_norm_coeffs(drift.func(t, v, phi), ws))
    vn = np.sqrt(sq_norm_coeffs(v, wv))
    rhs = math.sqrt(max(drift.f(t), 0.0)) + drift.growth(vn) + drift.K * np.sqrt(sq_hs_norm_coeffs(phi, wv))
    return _normalized(rhs - lhs, lhs + np.abs(rhs))


def _pairing_along(drift: DriftSpec, t, v1, v2, phi, v, s) -> np.ndarray:
    """``<A(t, v1 + s v2, phi), v>_H`` for each sample (rows) and each ``s`` (columns)."""
    n = v1.shape[-1]
    pts = v1[:, None, :] + s[:, :, None] * v2[:, None, :]
    ph = np.broadcast_to(phi[:, None], (phi.shape[0], s.shape[1]) + phi.shape[1:])
    a = drift.func(t, pts, ph)
    return pair_coeffs(a, v[:, None, :], drift.triple.wH(n))


def continuity_scan(drift: DriftSpec, t, v1, v2, phi, v, coarse: int = 201, levels: int = 6, refine: int = 10):
    """Jump falsifier for ``s -> <A(t, v1 + s v2, phi), v>`` on ``[-1, 1]``.

    The worst coarse interval is refined ``levels`` times by ``refine``.  At
    the finest spacing ``h`` the largest jump must stay below
    ``tol_jump = 5 * slope * h`` plus a rounding floor, where ``slope`` is
    the local difference quotient one level up.  A continuous map passes once
    resolved (jumps shrink with ``h``); a jump discontinuity does not shrink.
    Returns ``(margin, s_star, jump, tol_jump)`` per sample.
    """
    b = v1.shape[0]
    rows = np.arange(b)
    s = np.broadcast_to(np.linspace(-1.0, 1.0, coarse), (b, coarse))
    p = _pairing_along(drift, t, v1, v2, phi, v, s)
    floor = 64.0 * np.finfo(float).eps * np.max(np.abs(p), axis=1)
    jumps = np.abs(np.diff(p, axis=1))
    h = 2.0 / (coarse - 1)
    j = jumps.argmax(axis=1)
    lo = s[rows, j]
    prev = jumps[rows, j]
    for _ in range(levels):
        h_prev, h = h, h / refine
        prev_slope = prev / h_prev
        grid = lo[:, None] + h * np.arange(refine + 1)[None, :]
        vals = _pairing_along(drift, t, v1, v2, phi, v, grid)
        floor = np.maximum(floor, 64.0 * np.finfo(float).eps * np.max(np.abs(vals), axis=1))
        jumps = np.abs(np.diff(vals, axis=1))
        j = jumps.argmax(axis=1)
        lo = grid[rows, j]
        prev = jumps[rows, j]
    jump = prev
    tol_jump = 5.0 * prev_slope * h + floor
    margin = _normalized(tol_jump - jump, tol_jump + jump)
    return margin, lo + 0.5 * h, jump, tol_jump


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_h0(triple: TripleSpec, n: int = 32) -> CheckReport:
    """Declared basis is H-orthonormal and V-orthogonal."""
    b = triple.basis(n)
    gram_h = np.diag(b * b * triple.wH(n))
    gram_v = np.diag(b * b * triple.wV(n))
    err_h = np.abs(gram_h - np.eye(n))
    off_v = np.abs(gram_v - np.diag(np.diag(gram_v)))
    worst = max(err_h.max(), off_v.max())
    if err_h.max() >= off_v.max():
        i, j = np.unravel_index(err_h.argmax(), err_h.shape)
    else:
        i, j = np.unravel_index(off_v.argmax(), off_v.shape)
    return CheckReport(
        "H0", n * n, -float(worst), {"i": int(i) + 1, "j": int(j) + 1}, None,
        {"triple": triple.name},
    )


def _setup(drift: DriftSpec, n_modes: int, seed: int):
    rng = np.random.default_rng(seed)
    tr = drift.triple
    return rng, tr.wH(n_modes), tr.wV(n_modes)


def _report(cond, margins, witness_arrays, seed, constants=None, note="") -> CheckReport:
    k = int(np.argmin(margins))
    witness = {name: arr[k] for name, arr in witness_arrays.items()}
    return CheckReport(cond, len(margins), float(margins[k]), witness, seed, constants or {}, note)


def check_h1(drift: DriftSpec, n_samples: int = 10_000, seed: int = 0, n_modes: int = DEFAULT_MODES, d_u: int = DEFAULT_DU) -> CheckReport:
    rng, wh, wv = _setup(drift, n_modes, seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    v1 = sample_fields(rng, n_samples, n_modes, wv)
    v2 = sample_fields(rng, n_samples, n_modes, wv)
    v = sample_fields(rng, n_samples, n_modes, wv)
    phi = sample_hs(rng, n_samples, n_modes, d_u, wv)
    margins, s_star, jumps, tols = (np.empty(n_samples) for _ in range(4))
    for sl in _chunks(n_samples):
        # time-homogeneous drifts: one t per chunk keeps evaluation batched
        tt = float(t[sl.start])
        t[sl] = tt
        margins[sl], s_star[sl], jumps[sl], tols[sl] = continuity_scan(drift, tt, v1[sl], v2[sl], phi[sl], v[sl])
    return _report(
        "H1", margins,
        {"t": t, "v1": v1, "v2": v2, "phi": phi, "v": v, "s_star": s_star, "jump": jumps, "tol_jump": tols},
        seed, note="falsifier only: continuity is not certifiable from finitely many s",
    )


def check_h2(drift: DriftSpec, n_samples: int = 10_000, seed: int = 0, n_modes: int = DEFAULT_MODES, d_u: int = DEFAULT_DU) -> CheckReport:
    rng, wh, wv = _setup(drift, n_modes, seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    v2 = sample_fields(rng, n_samples, n_modes, wv)
    v1 = v2 + sample_fields(rng, n_samples, n_modes, wv)
    phi2 = sample_hs(rng, n_samples, n_modes, d_u, wv)
    phi1 = phi2 + sample_hs(rng, n_samples, n_modes, d_u, wv)
    margins = np.empty(n_samples)
    for sl in _chunks(n_samples):
        tt = float(t[sl.start])
        t[sl] = tt
        margins[sl] = margin_h2(drift, tt, v1[sl], v2[sl], phi1[sl], phi2[sl])
    return _report("H2", margins, {"t": t, "v1": v1, "v2": v2, "phi1": phi1, "phi2": phi2}, seed)


def _check_single(cond, kernel, drift, n_samples, seed, n_modes, d_u, constants):
    rng, wh, wv = _setup(drift, n_modes, seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    v = sample_fields(rng, n_samples, n_modes, wv)
    phi = sample_hs(rng, n_samples, n_modes, d_u, wv)
    margins = np.empty(n_samples)
    for sl in _chunks(n_samples):
        tt = float(t[sl.start])
        t[sl] = tt
        margins[sl] = kernel(drift, tt, v[sl], phi[sl])
    return _report(cond, margins, {"t": t, "v": v, "phi": phi}, seed, constants)


def check_h3(drift: DriftSpec, n_samples: int = 10_000, seed: int = 0, n_modes: int = DEFAULT_MODES, d_u: int = DEFAULT_DU) -> CheckReport:
    if not drift.maps_Hn_to_V:
        return CheckReport("H3", 0, -math.inf, {}, seed, note="drift does not map H_N into V")
    return _check_single("H3", margin_h3, drift, n_samples, seed, n_modes, d_u, {"K": drift.K, "eps": drift.eps})


def check_h4(drift: DriftSpec, n_samples: int = 10_000, seed: int = 0, n_modes: int = DEFAULT_MODES, d_u: int = DEFAULT_DU) -> CheckReport:
    return _check_single("H4", margin_h4, drift, n_samples, seed, n_modes, d_u, {"K": drift.K})


# ---------------------------------------------------------------------------
# C2-C4 for tamed drifts
# ---------------------------------------------------------------------------

AMPLITUDE_BANDS = (1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4)


def z_quotient(drift: DriftSpec, t, y, z1, z2) -> np.ndarray:
    n = np.shape(y)[-1]
    wh = drift.triple.wH(n)
    num = np.sqrt(sq_norm_coeffs(drift.func(t, y, z1) - drift.func(t, y, z2), wh))
    den = np.sqrt(sq_hs_norm_coeffs(z1 - z2, wh))
    return np.where(den > 0, num / np.maximum(den, _TINY), 0.0)


def y_quotient(drift: DriftSpec, t, y1, y2, z) -> np.ndarray:
    n = np.shape(y1)[-1]
    wh = drift.triple.wH(n)
    d = y1 - y2
    num = pair_coeffs(d, drift.func(t, y1, z) - drift.func(t, y2, z), wh)
    den = sq_norm_coeffs(d, wh)
    return np.where(den > 0, num / np.maximum(den, _TINY), 0.0)


def band_maxima(amplitudes: np.ndarray, values: np.ndarray, edges=AMPLITUDE_BANDS) -> np.ndarray:
    """Max of ``values`` inside each amplitude decade; ``-inf`` for empty bands."""
    out = np.full(len(edges) - 1, -math.inf)
    for b in range(len(edges) - 1):
        sel = (amplitudes >= edges[b]) & (amplitudes < edges[b + 1])
        if np.any(sel):
            out[b] = float(np.max(values[sel]))
    return out


def diverges(bands: np.ndarray, factor: float = 4.0) -> bool:
    """Top band exceeds ``factor * max(previous band, 1)``."""
    return bool(bands[-1] > factor * max(bands[-2], 1.0))


def check_c2_c4(
    tamed: DriftSpec,
    params: TamingParams | None = None,
    n_samples: int = 10_000,
    seed: int = 0,
    d_u: int = DEFAULT_DU,
) -> list[CheckReport]:
    """Reports for C2 (α, μ), C3 (continuity in y) and C4 (finite ψ_r)."""
    n_modes = params.galerkin_n if params is not None else DEFAULT_MODES
    rng, wh, wv = _setup(tamed, n_modes, seed)
    amp = (AMPLITUDE_BANDS[0], AMPLITUDE_BANDS[-1])
    t = rng.uniform(0.0, 1.0, n_samples)
    y1 = sample_fields(rng, n_samples, n_modes, wv, amp)
    y2 = sample_fields(rng, n_samples, n_modes, wv, amp)
    z1 = sample_hs(rng, n_samples, n_modes, d_u, wh, amp)
    z2 = sample_hs(rng, n_samples, n_modes, d_u, wh, amp)
    alpha_q, mu_q = np.empty(n_samples), np.empty(n_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        for sl in _chunks(n_samples):
            tt = float(t[sl.start])
            t[sl] = tt
            alpha_q[sl] = z_quotient(tamed, tt, y1[sl], z1[sl], z2[sl])
            mu_q[sl] = y_quotient(tamed, tt, y1[sl], y2[sl], z1[sl])
    amps = np.maximum(np.sqrt(sq_norm_coeffs(y1, wv)), np.sqrt(sq_norm_coeffs(y2, wv)))
    finite = np.isfinite(alpha_q) & np.isfinite(mu_q)
    alpha = float(np.max(alpha_q)) if np.all(finite) else math.inf
    mu_bands = band_maxima(amps, np.where(finite, mu_q, math.inf))
    mu = float(np.max(mu_bands))
    cert = tamed.z_lipschitz
    m_alpha = _normalized(cert - alpha, cert + alpha) if math.isfinite(alpha) else -1.0
    if not math.isfinite(mu) or diverges(mu_bands):
        cap = 4.0 * max(mu_bands[-2], 1.0)
        m_mu = -1.0 if not math.isfinite(mu) else float(_normalized(cap - mu_bands[-1], cap + abs(mu_bands[-1])))
    else:
        m_mu = 1.0
    k_mu = int(np.argmax(np.where(finite, mu_q, math.inf)))
    k_al = int(np.argmax(np.where(finite, alpha_q, math.inf)))
    if float(m_alpha) <= m_mu:
        wit = {"kind": "alpha", "t": t[k_al], "y": y1[k_al], "z1": z1[k_al], "z2": z2[k_al], "quotient": alpha_q[k_al]}
    else:
        wit = {"kind": "mu", "t": t[k_mu], "y1": y1[k_mu], "y2": y2[k_mu], "z": z1[k_mu], "quotient": mu_q[k_mu]}
    c2 = CheckReport(
        "C2", n_samples, float(min(float(m_alpha), m_mu)), wit, seed,
        {"alpha": alpha, "alpha_certificate": cert, "mu": mu, "mu_bands": mu_bands},
    )

    # C3: continuity of y -> g(t, y, z) along random lines
    n3 = max(n_samples // 10, 1)
    rng3 = np.random.default_rng([seed, 3])
    yy1 = sample_fields(rng3, n3, n_modes, wv, amp)
    yy2 = sample_fields(rng3, n3, n_modes, wv, amp)
    vv = sample_fields(rng3, n3, n_modes, wv)
    zz = sample_hs(rng3, n3, n_modes, d_u, wh, amp)
    m3, s3 = np.empty(n3), np.empty(n3)
    for sl in _chunks(n3):
        m3[sl], s3[sl], _, _ = continuity_scan(tamed, 0.0, yy1[sl], yy2[sl], zz[sl], vv[sl])
    c3 = _report("C3", m3, {"y1": yy1, "y2": yy2, "z": zz, "v": vv, "s_star": s3}, seed,
                 note="falsifier only")

    # C4: psi_r = sup_{|y| <= r} |g(t, y, 0) - g(t, 0, 0)| finite for each r
    rng4 = np.random.default_rng([seed, 4])
    radii = np.array(AMPLITUDE_BANDS[1:])
    psi = np.empty(len(radii))
    per = max(n_samples // len(radii), 1)
    zero_z = np.zeros((per, n_modes, d_u))
    g0 = tamed.func(0.0, np.zeros((1, n_modes)), np.zeros((1, n_modes, d_u)))
    for i, r in enumerate(radii):
        y = sample_fields(rng4, per, n_modes, wh, (r * 1e-3, r))
        with np.errstate(over="ignore", invalid="ignore"):
            diff = tamed.func(0.0, y, zero_z) - g0
            psi[i] = float(np.max(np.sqrt(sq_norm_coeffs(diff, wh))))
    ok = bool(np.all(np.isfinite(psi)))
    c4 = CheckReport("C4", per * len(radii), 1.0 if ok else -1.0, {"radii": radii, "psi": psi}, seed,
                     {"radii": radii, "psi": psi})
    return [c2, c3, c4]


def check_all(
    drift: DriftSpec,
    n_samples: int = 10_000,
    seed: int = 0,
    n_modes: int = DEFAULT_MODES,
    d_u: int = DEFAULT_DU,
    tamed: DriftSpec | None = None,
    params: TamingParams | None = None,
) -> list[CheckReport]:
    reports = [
        check_h0(drift.triple, n_modes),
        check_h1(drift, n_samples, seed, n_modes, d_u),
        check_h2(drift, n_samples, seed, n_modes, d_u),
        check_h3(drift, n_samples, seed, n_modes, d_u),
        check_h4(drift, n_samples, seed, n_modes, d_u),
    ]
    if tamed is not None:
        reports += check_c2_c4(tamed, params, n_samples, seed, d_u)
    return reports


def replay(report: CheckReport, drift: DriftSpec) -> float:
    """Re-evaluate a witness in isolation; returns its margin."""
    w = report.witness
    one = lambda a: np.asarray(a)[None]  # noqa: E731
    if report.condition == "H0":
        return report.worst_margin
    if report.condition == "H1":
        m, *_ = continuity_scan(drift, float(w["t"]), one(w["v1"]), one(w["v2"]), one(w["phi"]), one(w["v"]))
        return float(m[0])
    if report.condition == "H2":
        return float(margin_h2(drift, float(w["t"]), one(w["v1"]), one(w["v2"]), one(w["phi1"]), one(w["phi2"]))[0])
    if report.condition == "H3":
        return float(margin_h3(drift, float(w["t"]), one(w["v"]), one(w["phi"]))[0])
    if report.condition == "H4":
        return float(margin_h4(drift, float(w["t"]), one(w["v"]), one(w["phi"]))[0])
    raise ValueError(f"replay not supported for {report.condition}")
