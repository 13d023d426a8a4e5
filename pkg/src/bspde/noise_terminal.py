"""Truncated cylindrical Wiener ensembles and terminal data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .function_space import TRIPLE_SOBOLEV, SpectralField, StructureError, TripleSpec

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T}")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"steps must be an integer >= 2, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def coarsen(self, factor: int) -> "TimeGrid":
        if self.steps % factor:
            raise ValueError(f"{self.steps} steps not divisible by {factor}")
        return TimeGrid(self.T, self.steps // factor)


@dataclass(frozen=True)
class WienerEnsemble:
    grid: TimeGrid
    increments: np.ndarray = field(repr=False)  # (P, M_t, d_u)
    seed: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 3 or inc.shape[1] != self.grid.steps:
            raise StructureError(f"increments shape {inc.shape} does not match {self.grid.steps} steps")
        if not np.all(np.isfinite(inc)):
            raise ValueError("non-finite Wiener increment")
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        w = np.concatenate([np.zeros((inc.shape[0], 1, inc.shape[2])), np.cumsum(inc, axis=1)], axis=1)
        w.setflags(write=False)
        object.__setattr__(self, "_w", w)

    @property
    def paths(self) -> int:
        return self.increments.shape[0]

    @property
    def d_u(self) -> int:
        return self.increments.shape[2]

    @property
    def W(self) -> np.ndarray:
        """Brownian values at the nodes, ``(P, M_t+1, d_u)``; ``W_0 = 0``."""
        return self._w

    @property
    def W_T(self) -> np.ndarray:
        return self._w[:, -1, :]

    def same_as(self, other: "WienerEnsemble") -> bool:
        return (
            self.grid == other.grid
            and self.seed == other.seed
            and self.increments.shape == other.increments.shape
            and np.array_equal(self.increments, other.increments)
        )


def path_generator(seed: int, path: int) -> np.random.Generator:
    """Counter-based stream for one path: Philox keyed by ``(seed, path)``."""
    return np.random.Generator(np.random.Philox(key=((path & _MASK64) << 64) | (seed & _MASK64)))


def sample_wiener(grid: TimeGrid, paths: int, d_u: int, seed: int) -> WienerEnsemble:
    if paths < 1 or d_u < 1:
        raise ValueError("paths and d_u must be >= 1")
    sd = math.sqrt(grid.dt)
    inc = np.empty((paths, grid.steps, d_u))
    for p in range(paths):
        inc[p] = path_generator(seed, p).standard_normal((grid.steps, d_u)) * sd
    return WienerEnsemble(grid, inc, int(seed))


def coarsen(ensemble: WienerEnsemble, factor: int) -> WienerEnsemble:
    """Aggregate consecutive increments: the same Brownian paths on a coarser grid."""
    grid = ensemble.grid.coarsen(factor)
    p, m, d = ensemble.increments.shape
    inc = ensemble.increments.reshape(p, m // factor, factor, d).sum(axis=2)
    return WienerEnsemble(grid, inc, ensemble.seed)


def subsample_paths(ensemble: WienerEnsemble, paths: int) -> WienerEnsemble:
    """The first ``paths`` paths; identical to sampling with fewer paths under the same seed."""
    return WienerEnsemble(ensemble.grid, ensemble.increments[:paths], ensemble.seed)


TERMINAL_KINDS = ("deterministic", "bounded", "linear")


@dataclass(frozen=True)
class TerminalSpec:
    """``deterministic``: fixed coefficients; ``bounded``: ``sum c_k tanh(W_T^k) e_k``;
    ``linear``: ``sum c_k W_T^k e_k`` (non-conforming: not essentially bounded)."""

    kind: str
    coeffs: np.ndarray = field(repr=False)
    triple: TripleSpec = TRIPLE_SOBOLEV

    def __post_init__(self):
        if self.kind not in TERMINAL_KINDS:
            raise ValueError(f"unknown terminal kind {self.kind!r}")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite terminal coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def deterministic(cls, field_: SpectralField | np.ndarray, triple: TripleSpec | None = None) -> "TerminalSpec":
        if isinstance(field_, SpectralField):
            return cls("deterministic", field_.coeffs, field_.triple)
        return cls("deterministic", field_, triple or TRIPLE_SOBOLEV)

    @classmethod
    def bounded(cls, c, triple: TripleSpec = TRIPLE_SOBOLEV) -> "TerminalSpec":
        return cls("bounded", c, triple)

    @classmethod
    def linear(cls, c, triple: TripleSpec = TRIPLE_SOBOLEV) -> "TerminalSpec":
        return cls("linear", c, triple)

    @property
    def conforming(self) -> bool:
        return self.kind != "linear"

    def scaled(self, s: float) -> "TerminalSpec":
        return TerminalSpec(self.kind, self.coeffs * s, self.triple)

    def v_bound(self) -> float:
        """Pathwise bound on ``||xi||_V`` (infinite for the linear kind)."""
        if self.kind == "linear" and np.any(self.coeffs != 0):
            return math.inf
        wv = self.triple.wV(len(self.coeffs))
        return float(np.sum(np.abs(self.coeffs) * np.sqrt(wv)))


def evaluate_terminal(spec: TerminalSpec, ensemble: WienerEnsemble, galerkin_n: int) -> np.ndarray:
    """Per-path terminal coefficients, shape ``(P, galerkin_n)``."""
    c = spec.coeffs
    if len(c) > galerkin_n:
        raise StructureError(f"terminal has {len(c)} modes, Galerkin dimension is {galerkin_n}")
    out = np.zeros((ensemble.paths, galerkin_n))
    k = len(c)
    if spec.kind == "deterministic":
        out[:, :k] = c
        return out
    if k > ensemble.d_u:
        raise StructureError(f"terminal uses {k} noise modes, ensemble has d_u={ensemble.d_u}")
    wt = ensemble.W_T[:, :k]
    out[:, :k] = c * (np.tanh(wt) if spec.kind == "bounded" else wt)
    return out
