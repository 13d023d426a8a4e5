"""Taming transform ``A^{N,M,n} = R_M(||y||_V) * n/(h_M(t) ∨ n) * P_N A(t, y, φ_n(z))``.

All three factors are exactly 1.0 inside the taming-inactive region, so
there the tamed drift reproduces the base drift bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .drift_ops import CertificateError, DriftSpec, NormBound
from .function_space import HSMap, StructureError, sq_hs_norm_coeffs

CUTOFF_SLOPE = 1.5  # max |R_M'| of the cubic smoothstep


@dataclass(frozen=True)
class TamingParams:
    galerkin_n: int
    ball_m: float
    level_n: float

    def __post_init__(self):
        if int(self.galerkin_n) != self.galerkin_n or self.galerkin_n < 1:
            raise ValueError(f"galerkin_n must be a positive integer, got {self.galerkin_n}")
        for name in ("ball_m", "level_n"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive and finite, got {val}")


def smooth_cutoff(r, m: float):
    """Cubic smoothstep: 1 on ``|r| <= m``, 0 on ``|r| >= m+1``.

    >>> smooth_cutoff(3.5, 3.0)
    0.5
    """
    if not m > 0:
        raise ValueError("m must be positive")
    s = np.clip(np.abs(np.asarray(r, dtype=float)) - m, 0.0, 1.0)
    out = np.where(s <= 0.0, 1.0, np.where(s >= 1.0, 0.0, 1.0 - 3.0 * s * s + 2.0 * s**3))
    return out if out.ndim else float(out)


def smooth_cutoff_deriv(r, m: float):
    """``d R_m / d|r|``."""
    s = np.abs(np.asarray(r, dtype=float)) - m
    inside = (s > 0.0) & (s < 1.0)
    out = np.where(inside, -6.0 * s + 6.0 * s * s, 0.0)
    return out if out.ndim else float(out)


def clip_scale(z: np.ndarray, n: float, wh: np.ndarray) -> np.ndarray:
    """Per-sample factor ``n / (||z||_{L2(U,H_N)} ∨ n)``; exactly 1.0 when no clipping occurs."""
    norm = np.sqrt(sq_hs_norm_coeffs(z, wh))
    return n / np.maximum(norm, n)


def clip_z(z: HSMap, n: float, galerkin_n: int) -> HSMap:
    """Radial projection ``φ_n`` onto the ball of radius ``n`` in ``L2(U, H_N)``."""
    if not n > 0:
        raise ValueError("n must be positive")
    if z.n != galerkin_n:
        raise StructureError(f"z has {z.n} modes, expected {galerkin_n}")
    scale = clip_scale(z.entries, n, z.triple.wH(galerkin_n))
    return HSMap(z.entries * scale, z.triple)


def h_m(t: float, drift: DriftSpec, m: float) -> float:
    """``f(t)^{1/2} + sup_{||v||_V <= m} rho(v)``, evaluated from the certificate form."""
    if not isinstance(drift.rho, NormBound):
        raise CertificateError(
            f"{drift.name}: rho is not an analytic norm bound, its ball supremum is not computable"
        )
    return math.sqrt(max(drift.f(t), 0.0)) + drift.rho.sup(m)


def tamed_drift(base: DriftSpec, params: TamingParams) -> DriftSpec:
    """Globally Lipschitz version of ``base`` on ``H_N``."""
    m, lvl, n_modes = float(params.ball_m), float(params.level_n), int(params.galerkin_n)
    triple = base.triple
    wv, wh = triple.wV(n_modes), triple.wH(n_modes)

    def check(v):
        if v.shape[-1] != n_modes:
            raise StructureError(f"tamed drift built for N={n_modes}, got {v.shape[-1]} modes")

    def factors(t, v, z):
        vnorm = np.sqrt(np.sum(v * v * wv, axis=-1))
        r = smooth_cutoff(vnorm, m)
        damp = lvl / max(h_m(t, base, m), lvl)
        scale = clip_scale(z, lvl, wh)
        return vnorm, np.asarray(r), damp, np.asarray(scale)

    def func(t, v, z):
        check(v)
        _, r, damp, scale = factors(t, v, z)
        out = base.func(t, v, z * scale[..., None, None])
        return (r * damp)[..., None] * out

    def jac(t, v, z):
        check(v)
        vnorm, r, damp, scale = factors(t, v, z)
        zc = z * scale[..., None, None]
        out = (r * damp)[..., None, None] * base.jacobian(t, v, zc)
        dr = np.asarray(smooth_cutoff_deriv(vnorm, m))
        if np.any(dr != 0.0):
            grad = np.where(vnorm[..., None] > 0, dr[..., None] * v * wv / np.maximum(vnorm, 1e-300)[..., None], 0.0)
            a = base.func(t, v, zc)
            out = out + damp * a[..., :, None] * grad[..., None, :]
        return out

    def activity(t, v, z):
        """Boolean per sample: any of the three factors differs from 1."""
        _, r, damp, scale = factors(t, np.asarray(v, float), np.asarray(z, float))
        return (r != 1.0) | (scale != 1.0) | (damp != 1.0)

    ball_sup = base.rho.sup(m + 1.0)
    damp0 = lvl / max(h_m(0.0, base, m), lvl)
    # one-sided constant used by the solver's contraction guard; see the decisions ledger
    mu = min(base.mu, damp0 * ball_sup) if base.time_homogeneous else base.mu
    return replace(
        base,
        name=f"tamed[{base.name}](M={m:g},n={lvl:g})",
        func=func,
        jac=jac,
        mu=mu,
        z_lipschitz=damp0 * base.z_lipschitz,
        meta={**base.meta, "base": base, "taming": params, "activity": activity},
    )


def taming_activity(drift: DriftSpec, t: float, v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Per-sample truncation indicator; all False for an untamed drift."""
    act = drift.meta.get("activity")
    if act is None:
        return np.zeros(np.shape(v)[:-1], dtype=bool)
    return act(t, v, z)
