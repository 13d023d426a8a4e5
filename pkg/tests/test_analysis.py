import math

import numpy as np
import pytest

from bspde.analysis import (
    apriori_statistic,
    cauchy_in_n,
    energy_residual,
    gronwall_bound,
    heat_closed_form,
    loglog_slope,
    terminal_stability,
    uniqueness_weight,
    verify_gronwall,
)
from bspde.bsde_solver import SolverConfig, solve
from bspde.drift_ops import build_operator, csf_drift, heat_drift, zero_drift
from bspde.noise_terminal import TerminalSpec, TimeGrid, sample_wiener

N = 8
XI = np.array([1.0, 0.5])


def run(drift, term, steps=16, paths=256, seed=0, n=N, T=0.1):
    grid = TimeGrid(T, steps)
    ens = sample_wiener(grid, paths, 2, seed)
    return solve(drift, term, ens, SolverConfig(grid, paths), n)


class TestEnergy:
    def test_zero_solution(self):
        sol = run(zero_drift(), TerminalSpec.deterministic(np.zeros(1)))
        assert np.all(energy_residual(sol, zero_drift()) == 0.0)

    def test_deterministic_heat_first_order(self):
        res = []
        for steps in (16, 32, 64):
            sol = run(heat_drift(), TerminalSpec.deterministic(XI), steps=steps, paths=64)
            r = energy_residual(sol, heat_drift())
            # Z is zero up to regression rounding, so every path sees the same defect
            assert np.ptp(r) <= 1e-6 * max(abs(r[0]), 1.0)
            res.append(abs(r[0]))
        assert loglog_slope([16, 32, 64], res) > 0.9


class TestApriori:
    def test_zero(self):
        sol = run(zero_drift(), TerminalSpec.deterministic(np.zeros(1)))
        assert apriori_statistic(sol, zero_drift()) == (0.0, 0.0)

    def test_heat_contracts(self):
        sol = run(heat_drift(), TerminalSpec.deterministic(XI))
        wv = heat_drift().triple.wV(2)
        sup_v, z_energy = apriori_statistic(sol, heat_drift())
        assert sup_v == pytest.approx(float(np.sum(XI**2 * wv)), rel=1e-14)
        assert z_energy < 1e-12

    def test_quadratic_scaling(self):
        term = TerminalSpec.linear(XI)
        a = apriori_statistic(run(heat_drift(), term), heat_drift())
        b = apriori_statistic(run(heat_drift(), term.scaled(2.0)), heat_drift())
        assert b[0] == pytest.approx(4 * a[0], rel=1e-12)
        assert b[1] == pytest.approx(4 * a[1], rel=1e-12)


class TestGronwall:
    grid = TimeGrid(1.0, 100)

    def test_constant(self):
        y = np.full(101, 2.0)
        rep = verify_gronwall(y, np.zeros(101), 0.0, self.grid)
        assert rep.hypothesis_holds and rep.conclusion_holds
        assert np.allclose(rep.bound, y, rtol=1e-10)

    def test_exponential(self):
        a, t = 0.7, self.grid.nodes
        y = np.exp(a * (1.0 - t))
        b = gronwall_bound(y, np.zeros(101), a, self.grid)
        assert np.allclose(b, y, rtol=1e-10, atol=0)

    def test_linear(self):
        t = self.grid.nodes
        y = 1.0 - t
        rep = verify_gronwall(y, np.ones(101), 0.0, self.grid)
        assert rep.hypothesis_holds and rep.conclusion_holds
        assert np.allclose(rep.bound, y, rtol=1e-10, atol=1e-12)

    def test_hypothesis_failure_is_reported(self):
        y = np.zeros(101)
        y[40] = 5.0
        rep = verify_gronwall(y, np.zeros(101), 0.0, self.grid)
        assert not rep.hypothesis_holds
        assert rep.first_violation == 40
        assert rep.bound is None and rep.conclusion_holds is None

    def test_random_hypothesis_implies_conclusion(self, rng):
        for _ in range(200):
            a = rng.uniform(0, 5)
            x = rng.uniform(0, 2, 101)
            # y built to satisfy the hypothesis with slack
            y = np.empty(101)
            y[-1] = rng.uniform(0, 3)
            for i in range(99, -1, -1):
                y[i] = (y[i + 1] + x[i] * 0.01) / (1 - a * 0.01) - rng.uniform(0, 0.01)
            rep = verify_gronwall(y, x, a, self.grid)
            if rep.hypothesis_holds:
                assert rep.conclusion_holds

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            verify_gronwall(np.zeros(101), np.zeros(101), -1.0, self.grid)
        with pytest.raises(ValueError):
            gronwall_bound(np.zeros(5), np.zeros(5), 0.0, self.grid)


class TestStability:
    def test_identical_terminals(self):
        term = TerminalSpec.bounded(XI)
        a = run(csf_drift(), term)
        b = run(csf_drift(), term)
        assert terminal_stability(a, b, csf_drift()) == 0.0

    def test_heat_doubled_terminal(self):
        term = TerminalSpec.deterministic(XI)
        grid_steps = 32
        a = run(heat_drift(), term, steps=grid_steps)
        b = run(heat_drift(), term.scaled(2.0), steps=grid_steps)
        ratio = terminal_stability(a, b, heat_drift())
        assert ratio <= 1.0 + 10 * 0.1 / grid_steps

    def test_stable_across_galerkin(self):
        term = TerminalSpec.linear(XI)
        drift = build_operator("heat", {"kappa": 0.3})
        ratios = []
        for n in (8, 16, 32):
            a = run(drift, term, n=n)
            b = run(drift, term.scaled(1.5), n=n)
            ratios.append(terminal_stability(a, b, drift))
        assert max(ratios) <= 2 * min(ratios)

    def test_rejects_different_ensembles(self):
        term = TerminalSpec.linear(XI)
        with pytest.raises(ValueError):
            terminal_stability(run(heat_drift(), term, seed=0), run(heat_drift(), term, seed=1), heat_drift())

    def test_weight_starts_at_zero(self):
        drift = build_operator("heat", {"kappa": 0.5})
        sol = run(drift, TerminalSpec.linear(XI))
        r1 = uniqueness_weight(sol, drift)
        assert np.all(r1[:, 0] == 0.0) and np.all(np.diff(r1, axis=1) >= 0)


class TestCauchy:
    def test_gaps_vanish_beyond_observed_sizes(self):
        drift = build_operator("heat", {"kappa": 0.5})
        grid = TimeGrid(0.1, 16)
        ens = sample_wiener(grid, 200, 2, 0)
        rows = cauchy_in_n(drift, TerminalSpec.linear(XI), ens, SolverConfig(grid, 200), [0.5, 1.0, 50.0, 100.0], N, 50.0)
        assert math.isnan(rows[0].sup_h_gap)
        assert rows[-1].sup_h_gap == 0.0 and rows[-1].z_gap == 0.0
        assert rows[-1].fire_fraction == 0.0
        assert rows[0].fire_fraction > 0.0

    def test_levels_increasing(self):
        grid = TimeGrid(0.1, 4)
        ens = sample_wiener(grid, 10, 2, 0)
        with pytest.raises(ValueError):
            cauchy_in_n(heat_drift(), TerminalSpec.linear(XI), ens, SolverConfig(grid, 10), [2.0, 1.0, 3.0], N, 5.0)


def test_loglog_slope():
    assert loglog_slope([1, 2, 4, 8], [1.0, 0.5, 0.25, 0.125]) == pytest.approx(1.0)


def test_closed_form_availability():
    grid = TimeGrid(0.1, 4)
    ens = sample_wiener(grid, 10, 2, 0)
    assert heat_closed_form(csf_drift(), TerminalSpec.linear(XI), ens, N) is None
    assert heat_closed_form(heat_drift(), TerminalSpec.bounded(XI), ens, N) is None
    x, z = heat_closed_form(heat_drift(), TerminalSpec.linear(XI), ens, N)
    assert np.allclose(x[:, -1, :2], ens.W_T * XI)
