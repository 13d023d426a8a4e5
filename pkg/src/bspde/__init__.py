"""Spectral-Galerkin simulation and verification of backward stochastic PDEs
with locally monotone, one-sided growth drifts."""

from .analysis import apriori_statistic, cauchy_in_n, energy_residual, gronwall_bound, terminal_stability, verify_gronwall
from .bsde_solver import BsdeSolution, SolverConfig, SolverError, auto_taming, condexp, solve
from .drift_ops import DriftSpec, build_operator, burgers_drift, csf_drift, fast_diffusion_drift, heat_drift
from .function_space import TRIPLE_DUAL, TRIPLE_SOBOLEV, HSMap, SpectralField, gn_ratio
from .hypothesis_checker import CheckReport, check_all, check_c2_c4, check_h0, check_h1, check_h2, check_h3, check_h4
from .noise_terminal import TerminalSpec, TimeGrid, WienerEnsemble, evaluate_terminal, sample_wiener
from .taming import TamingParams, clip_z, h_m, smooth_cutoff, tamed_drift

__version__ = "0.1.0"
