"""Diagonal Gelfand triples over the Dirichlet sine basis on [0, 1].

Every field is stored as coefficients ``a_k`` with respect to
``e_k(x) = sqrt(2) sin(k pi x)``.  A triple is fully described by three
positive weight sequences so that

    ||u||_S^2 = sum_k w^S_k a_k^2,    S in {H, V, Vstar},

with ``wVstar = wH**2 / wV``.  Nonlinearities are evaluated on a uniform
grid and projected back with the trapezoidal rule, which is exact for
products of band-limited sines and cosines as long as the grid has at
least ``2N`` interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

SPACES = ("H", "V", "Vstar")


class StructureError(ValueError):
    """Raised when arrays, triples or dimensions do not fit together."""


def _mode_index(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=float)


def dirichlet_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues ``(k pi)^2`` of ``-d^2/dx^2`` with Dirichlet conditions."""
    return (_mode_index(n) * np.pi) ** 2


@dataclass(frozen=True)
class TripleSpec:
    """Weights of a diagonal triple ``V ⊂ H ⊂ V*`` as functions of the mode.

    ``h_weight`` and ``v_weight`` map the eigenvalue array ``lam`` (and
    the 1-based mode index ``k``) to per-mode weights.  ``basis_scale``
    gives the coefficients of the declared basis vectors: the i-th basis
    vector of the triple is ``basis_scale_i * e_i``.
    """

    name: str
    h_weight: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False, repr=False)
    v_weight: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False, repr=False)
    basis_scale: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False
    )
    basis_id: str = "DirichletSine"

    def lam(self, n: int) -> np.ndarray:
        return dirichlet_eigenvalues(n)

    def wH(self, n: int) -> np.ndarray:
        return _weights(self, "H", n)

    def wV(self, n: int) -> np.ndarray:
        return _weights(self, "V", n)

    def wVstar(self, n: int) -> np.ndarray:
        return _weights(self, "Vstar", n)

    def weights(self, space: str, n: int) -> np.ndarray:
        if space not in SPACES:
            raise StructureError(f"unknown space {space!r}; expected one of {SPACES}")
        return _weights(self, space, n)

    def basis(self, n: int) -> np.ndarray:
        """Coefficient scales of the declared basis vectors (length ``n``)."""
        k = _mode_index(n)
        if self.basis_scale is None:
            return np.ones(n)
        return np.asarray(self.basis_scale(self.lam(n), k), dtype=float)


@lru_cache(maxsize=256)
def _weights_cached(triple: TripleSpec, space: str, n: int) -> np.ndarray:
    k = _mode_index(n)
    lam = dirichlet_eigenvalues(n)
    wH = np.asarray(triple.h_weight(lam, k), dtype=float) * np.ones(n)
    wV = np.asarray(triple.v_weight(lam, k), dtype=float) * np.ones(n)
    if space == "H":
        out = wH
    elif space == "V":
        out = wV
    else:
        out = wH**2 / wV
    out = out.copy()
    out.setflags(write=False)
    return out


def _weights(triple: TripleSpec, space: str, n: int) -> np.ndarray:
    return _weights_cached(triple, space, int(n))


TRIPLE_SOBOLEV = TripleSpec(
    name="sobolev",
    h_weight=lambda lam, k: np.ones_like(lam),
    v_weight=lambda lam, k: 1.0 + lam,
)
"""V = W_0^{1,2}(0,1), H = L^2(0,1) with the full Sobolev norm on V."""

TRIPLE_DUAL = TripleSpec(
    name="dual",
    h_weight=lambda lam, k: 1.0 / lam,
    v_weight=lambda lam, k: np.ones_like(lam),
    basis_scale=lambda lam, k: np.sqrt(lam),
)
"""V = L^2(0,1), H = W^{-1,2}(0,1); the H-orthonormal basis is sqrt(lam_k) e_k."""

TRIPLES = {t.name: t for t in (TRIPLE_SOBOLEV, TRIPLE_DUAL)}


def get_triple(name: str) -> TripleSpec:
    try:
        return TRIPLES[name]
    except KeyError:
        raise StructureError(f"unknown triple {name!r}; known: {sorted(TRIPLES)}") from None


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralField:
    """Finitely many sine coefficients of an element of V*."""

    coeffs: np.ndarray
    triple: TripleSpec = TRIPLE_SOBOLEV

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise StructureError("SpectralField needs a non-empty 1-d coefficient vector")
        if not np.all(np.isfinite(c)):
            raise StructureError("SpectralField coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    @classmethod
    def basis_vector(cls, k: int, n: int, triple: TripleSpec = TRIPLE_SOBOLEV) -> "SpectralField":
        if not 1 <= k <= n:
            raise StructureError(f"mode {k} outside 1..{n}")
        c = np.zeros(n)
        c[k - 1] = 1.0
        return cls(c, triple)

    @classmethod
    def zeros(cls, n: int, triple: TripleSpec = TRIPLE_SOBOLEV) -> "SpectralField":
        return cls(np.zeros(n), triple)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        a, b = _aligned(self, other)
        return SpectralField(a + b, self.triple)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        a, b = _aligned(self, other)
        return SpectralField(a - b, self.triple)

    def __mul__(self, s: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(s), self.triple)

    __rmul__ = __mul__


@dataclass(frozen=True)
class HSMap:
    """Hilbert-Schmidt map U -> H; column j is the image of the j-th U-mode."""

    entries: np.ndarray
    triple: TripleSpec = TRIPLE_SOBOLEV

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise StructureError("HSMap needs a non-empty N x d_U matrix")
        if not np.all(np.isfinite(e)):
            raise StructureError("HSMap entries must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def d_u(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def zeros(cls, n: int, d_u: int, triple: TripleSpec = TRIPLE_SOBOLEV) -> "HSMap":
        return cls(np.zeros((n, d_u)), triple)


def _aligned(u: SpectralField, v: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    if u.triple != v.triple:
        raise StructureError(f"triple mismatch: {u.triple.name} vs {v.triple.name}")
    n = max(u.n, v.n)
    a = np.zeros(n)
    b = np.zeros(n)
    a[: u.n] = u.coeffs
    b[: v.n] = v.coeffs
    return a, b


# ---------------------------------------------------------------------------
# Array-level kernels (last axis = modes); the solver works on these directly.
# ---------------------------------------------------------------------------


def sq_norm_coeffs(a: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted squared norm over the last axis."""
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != weights.shape[0]:
        raise StructureError(f"length {a.shape[-1]} does not match {weights.shape[0]} weights")
    return np.einsum("...k,k->...", a * a, weights)


def sq_hs_norm_coeffs(z: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Squared Hilbert-Schmidt norm of arrays shaped ``(..., N, d_u)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-2] != weights.shape[0]:
        raise StructureError(f"{z.shape[-2]} rows do not match {weights.shape[0]} weights")
    return np.einsum("...kj,k->...", z * z, weights)


def pair_coeffs(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.einsum("...k,...k,k->...", a, b, weights)


# ---------------------------------------------------------------------------
# Field-level operations
# ---------------------------------------------------------------------------


def norm(field_: SpectralField, space: str = "H") -> float:
    w = field_.triple.weights(space, field_.n)
    return float(np.sqrt(sq_norm_coeffs(field_.coeffs, w)))


def hs_norm(z: HSMap, space: str = "H") -> float:
    if space not in ("H", "V"):
        raise StructureError("Hilbert-Schmidt norms are defined into H or V")
    w = z.triple.weights(space, z.n)
    return float(np.sqrt(sq_hs_norm_coeffs(z.entries, w)))


def pairing(u: SpectralField, v: SpectralField) -> float:
    """H inner product; in diagonal coordinates it is also the V*-V duality."""
    a, b = _aligned(u, v)
    return float(pair_coeffs(a, b, u.triple.wH(a.size)))


def project(field_: SpectralField, n: int) -> SpectralField:
    """Galerkin projection onto span{e_1, ..., e_n} (zero-padded if shorter)."""
    if n < 1:
        raise StructureError("projection dimension must be >= 1")
    c = np.zeros(n)
    m = min(n, field_.n)
    c[:m] = field_.coeffs[:m]
    return SpectralField(c, field_.triple)


# ---------------------------------------------------------------------------
# Grid evaluation and quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Quadrature:
    """Trapezoidal rule on ``x_i = i/(n_grid+1)``, ``i = 0..n_grid+1``.

    ``sine`` and ``dsine`` hold ``e_k(x_i)`` and ``e_k'(x_i)``; products of
    modes up to ``n_modes`` are integrated exactly when ``n_grid >= 2N``.
    """

    n_modes: int
    n_grid: int
    x: np.ndarray
    w: np.ndarray
    sine: np.ndarray
    dsine: np.ndarray

    @property
    def interior(self) -> slice:
        return slice(1, self.n_grid + 1)

    def values(self, a: np.ndarray) -> np.ndarray:
        """``sum_k a_k e_k(x_i)`` on the closed grid, batched over leading axes."""
        return np.asarray(a) @ self.sine.T

    def derivative(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a) @ self.dsine.T

    def project_values(self, f: np.ndarray) -> np.ndarray:
        """``a_k = ∫ f e_k dx`` by the trapezoidal rule."""
        return (np.asarray(f) * self.w) @ self.sine

    def project_flux(self, f: np.ndarray) -> np.ndarray:
        """``-∫ f e_k' dx``: the sine coefficients of ``∂_x f`` by parts."""
        return -((np.asarray(f) * self.w) @ self.dsine)

    def integrate(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f) @ self.w


@lru_cache(maxsize=64)
def quadrature(n_modes: int, n_grid: int | None = None) -> Quadrature:
    if n_grid is None:
        n_grid = 4 * n_modes
    if n_grid < 2 * n_modes:
        raise StructureError(f"n_grid={n_grid} violates the dealiasing rule n_grid >= 2N={2 * n_modes}")
    h = 1.0 / (n_grid + 1)
    x = np.arange(n_grid + 2) * h
    w = np.full(n_grid + 2, h)
    w[0] = w[-1] = 0.5 * h
    k = _mode_index(n_modes)
    sine = np.sqrt(2.0) * np.sin(np.pi * np.outer(x, k))
    sine[0] = 0.0
    sine[-1] = 0.0
    dsine = np.sqrt(2.0) * np.pi * k * np.cos(np.pi * np.outer(x, k))
    for arr in (x, w, sine, dsine):
        arr.setflags(write=False)
    return Quadrature(n_modes, n_grid, x, w, sine, dsine)


def grid_transform(field_: SpectralField, n_grid: int | None = None) -> np.ndarray:
    """Values of the field at the interior nodes ``i/(n_grid+1)``, ``i = 1..n_grid``."""
    q = quadrature(field_.n, n_grid)
    return q.values(field_.coeffs)[q.interior]


def grid_inverse(values: np.ndarray, triple: TripleSpec, n: int) -> SpectralField:
    """Sine coefficients of interior nodal values (zero boundary values implied)."""
    values = np.asarray(values, dtype=float)
    q = quadrature(n, values.shape[-1])
    full = np.zeros(q.n_grid + 2)
    full[q.interior] = values
    return SpectralField(q.project_values(full), triple)


# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg
# ---------------------------------------------------------------------------


def lq_norm(a: np.ndarray, q: float, n_grid: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    quad = quadrature(n, n_grid if n_grid is not None else max(8 * n, 256))
    vals = np.abs(quad.values(a)) ** q
    return quad.integrate(vals) ** (1.0 / q)


def gn_ratio(u: SpectralField, q: float) -> float:
    """``||u||_{L^q} / (||u||_{W^{1,2}}^γ ||u||_{L^2}^{1-γ})`` with ``γ = 1/2 - 1/q``."""
    if not 2.0 < q < np.inf:
        raise ValueError("q must lie in (2, inf)")
    a = u.coeffs
    l2 = float(np.sqrt(np.sum(a * a)))
    if l2 == 0.0:
        raise ValueError("gn_ratio is undefined for the zero field")
    w12 = float(np.sqrt(sq_norm_coeffs(a, 1.0 + dirichlet_eigenvalues(u.n))))
    gamma = 0.5 - 1.0 / q
    return float(lq_norm(a, q)) / (w12**gamma * l2 ** (1.0 - gamma))
