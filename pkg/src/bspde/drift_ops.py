"""Drift operators A(t, v, z) with machine-checkable certificates.

A drift acts on batched coefficient arrays: ``v`` has shape ``(..., N)``
and ``z`` has shape ``(..., N, d_u)``; the result is ``P_N A(t, v, z)`` in
the same coordinates as ``v``.  Each drift carries the constants of its
growth and monotonicity conditions:

* ``rho``    -- local monotonicity modulus, a function of ``||v||_V``
* ``growth`` -- the V*-growth modulus; defaults to ``rho``
* ``K``, ``eps``, ``f`` -- one-sided linear growth constants
* ``mu``     -- one-sided Lipschitz constant in ``y`` on ``H_N`` at fixed ``z``

Certificates are derived for the discrete operators actually evaluated
here (trapezoidal quadrature on ``4N`` interior nodes), using the Sobolev
bounds ``||v||_inf <= ||v'|| <= ||v||_V`` and ``|v|^2 <= 2 ||v|| ||v'||``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .function_space import (
    TRIPLE_DUAL,
    TRIPLE_SOBOLEV,
    HSMap,
    SpectralField,
    StructureError,
    TripleSpec,
    quadrature,
    sq_norm_coeffs,
)


class DomainError(ValueError):
    """Raised for inputs outside an operator's domain."""


class CertificateError(ValueError):
    """Raised when a requested nonlinearity violates the structural conditions."""


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormBound:
    """Nondecreasing bound ``sum_j c_j x^{p_j}`` in ``x = ||v||_V``; all ``c_j, p_j >= 0``."""

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        clean = []
        for c, p in self.terms:
            c, p = float(c), float(p)
            if c < 0 or p < 0 or not math.isfinite(c) or not math.isfinite(p):
                raise CertificateError(f"invalid bound term ({c}, {p})")
            if c > 0:
                clean.append((c, p))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def power_form(cls, c: float, p: float) -> "NormBound":
        """``c (1 + x^p)``."""
        return cls(((c, 0.0), (c, p)))

    @classmethod
    def constant(cls, c: float) -> "NormBound":
        return cls(((c, 0.0),))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, p in self.terms:
            out = out + c * (x**p if p > 0 else 1.0)
        return out if out.ndim else float(out)

    def sup(self, m: float) -> float:
        """Supremum over the V-ball of radius ``m`` (exact: the bound is monotone)."""
        if math.isinf(m):
            return self.global_sup
        return float(self(m))

    @property
    def global_sup(self) -> float:
        return math.inf if any(p > 0 for _, p in self.terms) else sum(c for c, _ in self.terms)

    def __add__(self, other: "NormBound") -> "NormBound":
        return NormBound(self.terms + other.terms)


ZERO_BOUND = NormBound()


@dataclass(frozen=True)
class ScalarMap:
    """A C^1 scalar nonlinearity with the constants the certificates need."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    growth: float  # |f(x)| <= growth (1 + |x|)
    lipschitz: float  # sup |f'|
    bound: float  # sup |f|
    nondecreasing: bool = True

    def __call__(self, x):
        return self.fn(x)


ARCTAN = ScalarMap("arctan", np.arctan, lambda x: 1.0 / (1.0 + x * x), 1.0, 1.0, math.pi / 2)
IDENTITY = ScalarMap("identity", lambda x: x, np.ones_like, 1.0, 1.0, math.inf)
TANH = ScalarMap("tanh", np.tanh, lambda x: 1.0 / np.cosh(x) ** 2, 1.0, 1.0, 1.0)
ZERO_MAP = ScalarMap("zero", np.zeros_like, np.zeros_like, 0.0, 0.0, 0.0)
SCALAR_MAPS = {m.name: m for m in (ARCTAN, IDENTITY, TANH, ZERO_MAP)}


def constant_map(c: float) -> ScalarMap:
    c = float(c)
    return ScalarMap(
        f"const({c:g})", lambda x: np.full_like(np.asarray(x, dtype=float), c), np.zeros_like,
        abs(c), 0.0, abs(c),
    )


@dataclass(frozen=True)
class Reaction:
    """Polynomial reaction term ``g(x) = sum_j coeffs[j] x^j``."""

    coeffs: tuple[float, ...]
    deriv_sup: float  # C in g' <= C
    checked: bool = True

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def abs_sum(self) -> float:
        return float(sum(abs(c) for c in self.coeffs))

    @property
    def g0(self) -> float:
        return float(self.coeffs[0])

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def deriv(self, x):
        return npoly.polyval(x, npoly.polyder(self.coeffs)) if self.degree > 0 else np.zeros_like(x)


def _trim(coeffs) -> tuple[float, ...]:
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    if not c:
        c = [0.0]
    return tuple(c)


def _derivative_sup(coeffs: tuple[float, ...]) -> float:
    d1 = npoly.polyder(coeffs) if len(coeffs) > 1 else np.zeros(1)
    if len(d1) == 1:
        return float(d1[0])
    if d1[-1] > 0 and (len(d1) - 1) > 0:
        return math.inf
    d2 = npoly.polyder(d1)
    crit = npoly.polyroots(d2) if len(d2) > 1 else np.array([])
    crit = crit[np.abs(np.imag(crit)) < 1e-12].real if crit.size else crit
    if crit.size == 0:
        return float(npoly.polyval(0.0, d1)) if len(d1) == 1 else math.inf
    return float(np.max(npoly.polyval(crit, d1)))


def reaction_g(coeffs) -> Reaction:
    """Validated reaction polynomial (ascending coefficients).

    Odd degree with negative leading coefficient, or degree <= 1.  The
    certified constant ``C`` is the global maximum of ``g'``.

    >>> reaction_g([0, 1, 0, -1]).deriv_sup
    1.0
    """
    c = _trim(coeffs)
    deg = len(c) - 1
    if deg >= 2:
        if deg % 2 == 0:
            raise CertificateError(
                f"degree {deg} is even: g' is unbounded above on one side, so g' <= C fails"
            )
        if c[-1] >= 0:
            raise CertificateError(
                "positive leading coefficient: g' -> +inf, so g' <= C and the "
                "one-sided monotonicity condition fail"
            )
    return Reaction(c, _derivative_sup(c))


def unchecked_reaction(coeffs) -> Reaction:
    """Reaction polynomial without validation (negative-corpus builder)."""
    c = _trim(coeffs)
    return Reaction(c, _derivative_sup(c), checked=False)


@dataclass(frozen=True)
class ZPerturbation:
    """``h(t, v, z) = kappa * z(u_{j0})``: a globally Lipschitz z-dependence."""

    kappa: float = 0.0
    j0: int = 0

    def __call__(self, t, v, z):
        if self.kappa == 0.0:
            return np.zeros(np.shape(z)[:-1])
        return self.kappa * np.asarray(z)[..., :, self.j0]


def z_perturbation(kappa: float, j0: int = 0, eps: float = 0.25) -> ZPerturbation:
    """Build ``h`` after checking it fits the one-sided growth budget ``kappa^2 <= eps``."""
    if kappa * kappa > eps:
        raise CertificateError(f"kappa={kappa} exceeds the budget kappa^2 <= eps={eps}")
    if j0 < 0:
        raise CertificateError("j0 must be a nonnegative U-mode index")
    return ZPerturbation(float(kappa), int(j0))


NO_PERTURBATION = ZPerturbation()


# ---------------------------------------------------------------------------
# DriftSpec
# ---------------------------------------------------------------------------


def _zero_f(t: float) -> float:
    return 0.0


@dataclass(frozen=True)
class DriftSpec:
    name: str
    triple: TripleSpec
    func: Callable[[float, np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    rho: NormBound = ZERO_BOUND
    growth: NormBound | None = None
    K: float = 0.0
    eps: float = 0.25
    f: Callable[[float], float] = field(default=_zero_f, repr=False)
    maps_Hn_to_V: bool = True
    mu: float = math.inf
    z_lipschitz: float = 0.0
    time_homogeneous: bool = True
    jac: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise CertificateError(f"eps={self.eps} outside (0, 1/2)")
        if self.K < 0:
            raise CertificateError("K must be nonnegative")
        if self.growth is None:
            object.__setattr__(self, "growth", self.rho)

    def evaluate(self, t: float, v: np.ndarray, z: np.ndarray, galerkin_n: int | None = None) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        z = np.asarray(z, dtype=float)
        if galerkin_n is not None and v.shape[-1] != galerkin_n:
            raise StructureError(f"v has {v.shape[-1]} modes, expected {galerkin_n}")
        if z.shape[-2] != v.shape[-1]:
            raise StructureError(f"z rows {z.shape[-2]} != modes {v.shape[-1]}")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(z))):
            raise DomainError(f"{self.name}: evaluation at non-finite coefficients")
        return self.func(t, v, z)

    def jacobian(self, t: float, v: np.ndarray, z: np.ndarray, step: float = 1e-7) -> np.ndarray:
        """``dA/dv`` with shape ``(..., N, N)``; forward differences when no analytic form."""
        v = np.asarray(v, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.jac is not None:
            return self.jac(t, v, z)
        n = v.shape[-1]
        h = step * (1.0 + np.abs(v))
        base = self.func(t, v, z)
        vp = v[..., None, :] + np.eye(n) * h[..., :, None]
        zp = np.broadcast_to(z[..., None, :, :], z.shape[:-2] + (n,) + z.shape[-2:])
        cols = (self.func(t, vp, zp) - base[..., None, :]) / h[..., :, None]
        return np.swapaxes(cols, -1, -2)

    def apply(self, t: float, v: SpectralField, z: HSMap) -> SpectralField:
        return SpectralField(self.evaluate(t, v.coeffs, z.entries), self.triple)

    def v_norm(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.sqrt(sq_norm_coeffs(v, self.triple.wV(v.shape[-1])))

    def rho_of(self, v) -> np.ndarray:
        a = v.coeffs if isinstance(v, SpectralField) else v
        return self.rho(self.v_norm(a))


def with_certificate(drift: DriftSpec, **changes) -> DriftSpec:
    """Copy of ``drift`` with a replaced (possibly forged) certificate."""
    return replace(drift, **changes)


def _add_perturbation(h: ZPerturbation, rho: NormBound, K3: float, K4: float, eps: float):
    """Fold the z-perturbation into (rho, K): cross term, budget term, growth term."""
    kappa = abs(h.kappa)
    rho = rho + NormBound.constant(kappa)
    K3 = K3 + kappa * kappa / (4.0 * eps)
    K4 = max(K4, kappa)
    return rho, max(K3, K4)


def _gram(left: np.ndarray, d: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``sum_g left[g, k] d[..., g] right[g, l]`` with shape ``(..., N, N)``."""
    return (left.T * d[..., None, :]) @ right


def _require(triple: TripleSpec, expected: TripleSpec, who: str):
    if triple != expected:
        raise StructureError(f"{who} is defined on the {expected.name} triple, got {triple.name}")


# ---------------------------------------------------------------------------
# Concrete operators
# ---------------------------------------------------------------------------


def heat_drift(h: ZPerturbation = NO_PERTURBATION, eps: float = 0.25) -> DriftSpec:
    """The Dirichlet Laplacian on the Sobolev triple (plus an optional ``h``)."""
    triple = TRIPLE_SOBOLEV

    def func(t, v, z):
        out = -triple.lam(v.shape[-1]) * v
        if h.kappa:
            out = out + h(t, v, z)
        return out

    def jac(t, v, z):
        return np.broadcast_to(np.diag(-triple.lam(v.shape[-1])), v.shape + v.shape[-1:])

    rho, K = ZERO_BOUND, 0.0
    if h.kappa:
        rho, K = _add_perturbation(h, rho, 0.0, 0.0, eps)
    return DriftSpec(
        name="heat" if not h.kappa else f"heat+h({h.kappa:g})",
        jac=jac,
        triple=triple,
        func=func,
        rho=rho,
        # ||Δv||_{V*}^2 = sum lam^2/(1+lam) a^2 <= ||v||_V^2
        growth=NormBound(((1.0, 1.0),)),
        K=K,
        eps=eps,
        mu=0.0,
        z_lipschitz=abs(h.kappa),
        meta={"linear": True, "perturbation": h},
    )


def csf_drift(
    fbar: ScalarMap = ARCTAN,
    g: Reaction | None = None,
    h: ZPerturbation = NO_PERTURBATION,
    eps: float = 0.25,
    n_grid: int | None = None,
) -> DriftSpec:
    """``P_N[∂_x fbar(∂_x v) + g(v) + h]`` (curve shortening / p-Laplace / reaction type).

    The divergence term is projected in weak form, ``-∫ fbar(v') e_k'``,
    which keeps it exactly monotone on the grid.
    """
    if not fbar.nondecreasing:
        raise CertificateError(f"fbar={fbar.name} must be nondecreasing")
    if not math.isfinite(fbar.growth):
        raise CertificateError("fbar must have linear growth")
    g = g if g is not None else reaction_g([0.0])
    deg = g.degree
    triple = TRIPLE_SOBOLEV

    def grid_for(n):
        # exact polynomial quadrature needs (deg+1) N < 2 (n_grid + 1)
        need = max(4 * n, (deg + 1) * n // 2 + 1)
        return quadrature(n, max(need, n_grid or 0))

    def func(t, v, z):
        q = grid_for(v.shape[-1])
        out = q.project_flux(fbar(q.derivative(v)))
        if deg > 0 or g.g0 != 0.0:
            out = out + q.project_values(g(q.values(v)))
        if h.kappa:
            out = out + h(t, v, z)
        return out

    def jac(t, v, z):
        q = grid_for(v.shape[-1])
        out = -_gram(q.dsine, q.w * fbar.deriv(q.derivative(v)), q.dsine)
        if deg > 0:
            out = out + _gram(q.sine, q.w * g.deriv(q.values(v)), q.sine)
        return out

    # an unchecked reaction gets a placeholder certificate, to be replaced by the caller
    c_g = max(g.deriv_sup, 0.0) if g.checked else 0.0
    p = float(max(deg + 1, 2))
    rho = NormBound.power_form(c_g, p)
    growth = NormBound(((fbar.growth + g.abs_sum, 0.0), (fbar.growth, 1.0), (g.abs_sum, float(deg))))
    K3, f0 = c_g, 0.0
    if g.g0 != 0.0:
        K3, f0 = K3 + 1.0, g.g0**2 / 4.0
    rho, K = _add_perturbation(h, rho, K3, 0.0, eps) if h.kappa else (rho, K3)
    return DriftSpec(
        name=f"csf({fbar.name})",
        jac=jac,
        triple=triple,
        func=func,
        rho=rho,
        growth=growth,
        K=K,
        eps=eps,
        f=(lambda t, f0=f0: f0),
        mu=c_g,
        z_lipschitz=abs(h.kappa),
        meta={"fbar": fbar, "g": g, "perturbation": h, "p": p},
    )


def burgers_drift(
    fbar: ScalarMap = TANH,
    g: Reaction | None = None,
    h: ZPerturbation = NO_PERTURBATION,
    eps: float = 0.25,
) -> DriftSpec:
    """``P_N[∂_x^2 v + fbar(v) ∂_x v + g(v) + h]`` with ``fbar`` bounded and Lipschitz."""
    if not (math.isfinite(fbar.bound) and math.isfinite(fbar.lipschitz)):
        raise CertificateError(f"fbar={fbar.name} must be bounded and Lipschitz")
    g = g if g is not None else reaction_g([0.0])
    deg = g.degree
    triple = TRIPLE_SOBOLEV
    B, L = fbar.bound, fbar.lipschitz

    def grid_for(n):
        return quadrature(n, max(4 * n, (deg + 1) * n // 2 + 1))

    def jac(t, v, z):
        n = v.shape[-1]
        q = grid_for(n)
        vals, dv = q.values(v), q.derivative(v)
        d_s = q.w * fbar.deriv(vals) * dv
        if deg > 0:
            d_s = d_s + q.w * g.deriv(vals)
        out = _gram(q.sine, d_s, q.sine) + _gram(q.sine, q.w * fbar(vals), q.dsine)
        return out - np.diag(triple.lam(n))

    def func(t, v, z):
        n = v.shape[-1]
        q = grid_for(n)
        vals = q.values(v)
        out = -triple.lam(n) * v + q.project_values(fbar(vals) * q.derivative(v))
        if deg > 0 or g.g0 != 0.0:
            out = out + q.project_values(g(vals))
        if h.kappa:
            out = out + h(t, v, z)
        return out

    c_g = max(g.deriv_sup, 0.0)
    # -||d'||^2 absorbs B||d'|| ||d|| and L ||d||_inf ||d|| ||v2'|| via Young (exponents 4, 4/3)
    rho = NormBound(((B * B / 2.0 + c_g, 0.0), (0.75 * 2 ** (1 / 3) * L ** (4 / 3), 4.0 / 3.0)))
    growth = NormBound(((1.0 + B, 1.0), (g.abs_sum, 0.0), (g.abs_sum, float(deg))))
    K3, f0 = B * B / 2.0 + c_g, 0.0
    if g.g0 != 0.0:
        K3, f0 = K3 + 1.0, g.g0**2 / 4.0
    rho, K = _add_perturbation(h, rho, K3, 0.0, eps) if h.kappa else (rho, K3)
    return DriftSpec(
        name=f"burgers({fbar.name})",
        jac=jac,
        triple=triple,
        func=func,
        rho=rho,
        growth=growth,
        K=K,
        eps=eps,
        f=(lambda t, f0=f0: f0),
        mu=math.inf if L > 0 else B * B / 2.0 + c_g,
        z_lipschitz=abs(h.kappa),
        meta={"fbar": fbar, "g": g, "perturbation": h},
    )


def fast_diffusion_psi(r: float = 0.5, delta: float = 1e-3) -> ScalarMap:
    """Regularized ``|s|^{r-1} s``: ``s (s^2 + delta^2)^{(r-1)/2}``, for ``0 < r < 1``."""
    if not 0.0 < r < 1.0:
        raise CertificateError(
            f"r={r}: only fast diffusion 0 < r < 1 is admissible; r >= 1 is the porous "
            "medium regime where linear growth of Psi fails"
        )
    e = (r - 1.0) / 2.0

    def fn(s):
        return s * (s * s + delta * delta) ** e

    def deriv(s):
        return (s * s + delta * delta) ** (e - 1.0) * (r * s * s + delta * delta)

    # |Psi(s)| <= |s|^r <= 1 + |s|
    return ScalarMap(f"fastdiff(r={r:g})", fn, deriv, 1.0, delta ** (r - 1.0), math.inf)


def porous_medium_psi(r: float = 3.0) -> ScalarMap:
    """Unregularized ``|s|^{r-1} s`` with the fast-diffusion growth claim (negative corpus)."""

    def fn(s):
        return np.abs(s) ** (r - 1.0) * s

    def deriv(s):
        return r * np.abs(s) ** (r - 1.0)

    return ScalarMap(f"porous(r={r:g})", fn, deriv, 1.0, math.inf, math.inf)


def fast_diffusion_drift(
    psi: ScalarMap | None = None, h: ZPerturbation = NO_PERTURBATION, eps: float = 0.25
) -> DriftSpec:
    """``Δ Psi(v)`` on the dual triple ``L^2 ⊂ W^{-1,2}``."""
    psi = psi if psi is not None else fast_diffusion_psi()
    if not psi.nondecreasing or not math.isfinite(psi.growth):
        raise CertificateError(f"Psi={psi.name} must be nondecreasing with linear growth")
    triple = TRIPLE_DUAL

    def func(t, v, z):
        n = v.shape[-1]
        q = quadrature(n)
        out = -triple.lam(n) * q.project_values(psi(q.values(v)))
        if h.kappa:
            out = out + h(t, v, z)
        return out

    def jac(t, v, z):
        n = v.shape[-1]
        q = quadrature(n)
        return -triple.lam(n)[:, None] * _gram(q.sine, q.w * psi.deriv(q.values(v)), q.sine)

    rho = ZERO_BOUND
    K = 0.0
    if h.kappa:
        rho, K = _add_perturbation(h, rho, 0.0, 0.0, eps)
    return DriftSpec(
        name=psi.name,
        jac=jac,
        triple=triple,
        func=func,
        rho=rho,
        # ||Δ Psi(v)||_{V*} = ||P_N Psi(v)||_{L^2} <= growth (1 + ||v||_{L^2})
        growth=NormBound.constant(psi.growth) + NormBound(((psi.growth, 1.0),)),
        K=K,
        eps=eps,
        mu=0.0,
        z_lipschitz=abs(h.kappa),
        meta={"psi": psi, "perturbation": h},
    )


# ---------------------------------------------------------------------------
# Negative corpus
# ---------------------------------------------------------------------------


def cubic_bad_drift() -> DriftSpec:
    """csf(arctan) with ``g(x) = x^3`` but the certificate of ``g(x) = -x^3``."""
    honest = csf_drift(ARCTAN, reaction_g([0, 0, 0, -1]))
    bad = csf_drift(ARCTAN, unchecked_reaction([0, 0, 0, 1]))
    return with_certificate(
        bad, name="cubic-bad", rho=honest.rho, growth=honest.growth, K=honest.K, mu=honest.mu
    )


def porous_bad_drift(r: float = 3.0) -> DriftSpec:
    return with_certificate(fast_diffusion_drift(porous_medium_psi(r)), name=f"porous-bad(r={r:g})")


def threshold_drift(level: float = 0.3, jump: float = 5.0) -> DriftSpec:
    """Heat drift plus ``jump * e_1`` switched on when ``<v, e_1> > level`` (not hemicontinuous)."""
    heat = heat_drift()

    def func(t, v, z):
        out = heat.func(t, v, z)
        on = (v[..., 0] > level).astype(float)
        out = np.array(out, copy=True)
        out[..., 0] += jump * on
        return out

    return with_certificate(heat, name="threshold", func=func)


def shifted_heat_drift(c: float = 30.0, forged_K: float = 0.0) -> DriftSpec:
    """``Δv + c v`` claiming ``K = forged_K``; one-sided growth needs ``K >= c``."""
    heat = heat_drift()

    def func(t, v, z):
        return heat.func(t, v, z) + c * v

    return with_certificate(heat, name=f"shifted-heat({c:g})", func=func, K=forged_K, mu=c)


def zero_drift(triple: TripleSpec = TRIPLE_SOBOLEV) -> DriftSpec:
    return DriftSpec("zero", triple, lambda t, v, z: np.zeros_like(v), mu=0.0, meta={"linear": True})


# ---------------------------------------------------------------------------
# Registry used by the CLI
# ---------------------------------------------------------------------------


def build_operator(name: str, params: dict | None = None) -> DriftSpec:
    """Construct a drift from a CLI operator name and flat parameters."""
    p = dict(params or {})
    kappa = float(p.pop("kappa", 0.0))
    j0 = int(p.pop("j0", 0))
    h = z_perturbation(kappa, j0) if kappa else NO_PERTURBATION
    if name == "heat":
        return heat_drift(h)
    if name == "csf":
        fbar = SCALAR_MAPS[p.pop("fbar", "arctan")]
        g = reaction_g(p.pop("g", [0, 0, 0, -1]))
        return csf_drift(fbar, g, h)
    if name == "reaction":
        g = reaction_g(p.pop("g", [0, 1, 0, -1]))
        return csf_drift(IDENTITY, g, h)
    if name == "burgers":
        fbar = SCALAR_MAPS[p.pop("fbar", "tanh")]
        g = reaction_g(p.pop("g", [0]))
        return burgers_drift(fbar, g, h)
    if name == "fastdiff":
        psi = fast_diffusion_psi(float(p.pop("r", 0.5)), float(p.pop("delta", 1e-3)))
        return fast_diffusion_drift(psi, h)
    if name == "cubic-bad":
        return cubic_bad_drift()
    if name == "porous-bad":
        return porous_bad_drift(float(p.pop("r", 3.0)))
    if name == "zero":
        return zero_drift()
    raise KeyError(f"unknown operator {name!r}")


OPERATOR_NAMES = ("heat", "csf", "reaction", "burgers", "fastdiff", "cubic-bad", "porous-bad", "zero")
