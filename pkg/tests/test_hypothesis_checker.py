import math

import numpy as np
import pytest

from bspde.drift_ops import (
    build_operator,
    csf_drift,
    heat_drift,
    porous_bad_drift,
    shifted_heat_drift,
    threshold_drift,
    zero_drift,
)
from bspde.function_space import TRIPLE_DUAL, TRIPLE_SOBOLEV, TripleSpec
from bspde.hypothesis_checker import (
    band_maxima,
    check_all,
    check_c2_c4,
    check_h0,
    check_h1,
    check_h2,
    check_h3,
    check_h4,
    diverges,
    replay,
)
from bspde.taming import TamingParams, tamed_drift

SAMPLES = 2000


class TestH0:
    @pytest.mark.parametrize("triple", [TRIPLE_SOBOLEV, TRIPLE_DUAL])
    def test_builtin_triples(self, triple):
        rep = check_h0(triple)
        assert rep.passed
        assert rep.worst_margin >= -1e-14

    def test_adversarial_triple(self):
        bad = TripleSpec("bad", lambda lam, k: np.where(k == 2, 2.0, 1.0), lambda lam, k: 1.0 + lam)
        rep = check_h0(bad, 8)
        assert not rep.passed
        assert (rep.witness["i"], rep.witness["j"]) == (2, 2)


class TestH1:
    def test_heat(self):
        assert check_h1(heat_drift(), SAMPLES).passed

    def test_csf(self):
        assert check_h1(csf_drift(), SAMPLES).passed

    def test_threshold_fails_with_witness(self):
        rep = check_h1(threshold_drift(), SAMPLES)
        assert not rep.passed
        assert -1.0 <= rep.witness["s_star"] <= 1.0
        assert replay(rep, threshold_drift()) == pytest.approx(rep.worst_margin, rel=1e-9)


class TestH2:
    def test_heat(self):
        rep = check_h2(heat_drift(), SAMPLES)
        assert rep.passed

    def test_csf(self):
        assert check_h2(csf_drift(), SAMPLES, seed=3).passed

    def test_cubic_bad(self):
        drift = build_operator("cubic-bad")
        rep = check_h2(drift, SAMPLES)
        assert not rep.passed
        wv = drift.triple.wV(16)
        assert math.sqrt(np.sum(rep.witness["v1"] ** 2 * wv)) > 1.0
        assert replay(rep, drift) == pytest.approx(rep.worst_margin, rel=1e-9, abs=1e-12)


class TestH3:
    def test_heat(self):
        assert check_h3(heat_drift(), SAMPLES).passed

    def test_burgers(self):
        assert check_h3(build_operator("burgers"), SAMPLES).passed

    def test_forged_constant(self):
        drift = shifted_heat_drift(30.0, forged_K=0.0)
        rep = check_h3(drift, SAMPLES)
        assert not rep.passed
        assert replay(rep, drift) == pytest.approx(rep.worst_margin, rel=1e-9)

    def test_honest_constant_passes(self):
        assert check_h3(shifted_heat_drift(30.0, forged_K=30.0), SAMPLES).passed


class TestH4:
    def test_zero(self):
        assert check_h4(zero_drift(), SAMPLES).passed

    def test_csf(self):
        assert check_h4(csf_drift(), SAMPLES).passed

    def test_porous_medium(self):
        drift = porous_bad_drift()
        rep = check_h4(drift, SAMPLES)
        assert not rep.passed
        assert replay(rep, drift) == pytest.approx(rep.worst_margin, rel=1e-9)


class TestTamedConditions:
    def test_tamed_heat(self):
        params = TamingParams(16, 10.0, 10.0)
        c2, c3, c4 = check_c2_c4(tamed_drift(heat_drift(), params), params, SAMPLES)
        assert c2.constants["alpha"] == 0.0
        assert math.isfinite(c2.constants["mu"])
        assert c2.passed and c3.passed and c4.passed

    def test_tamed_csf_alpha_certificate(self):
        params = TamingParams(16, 10.0, 10.0)
        tamed = tamed_drift(build_operator("csf", {"kappa": 0.5}), params)
        c2, _, _ = check_c2_c4(tamed, params, SAMPLES)
        assert c2.passed
        assert c2.constants["alpha"] <= tamed.z_lipschitz * (1 + 1e-9)

    def test_untamed_unbounded_rho_diverges(self):
        c2, _, _ = check_c2_c4(build_operator("cubic-bad"), None, SAMPLES)
        assert not c2.passed
        assert diverges(c2.constants["mu_bands"])

    def test_band_maxima(self):
        amps = np.array([0.05, 0.5, 5.0, 50.0])
        vals = np.array([1.0, 2.0, 3.0, 4.0])
        bands = band_maxima(amps, vals, (1e-2, 1e-1, 1e0, 1e1, 1e2))
        assert list(bands) == [1.0, 2.0, 3.0, 4.0]
        assert diverges(np.array([1.0, 1.0, 100.0]))
        assert not diverges(np.array([1.0, 2.0, 3.0]))


def test_reproducible_reports():
    a = check_h2(build_operator("cubic-bad"), 500, seed=4)
    b = check_h2(build_operator("cubic-bad"), 500, seed=4)
    assert a.worst_margin == b.worst_margin
    assert a.records() == b.records()
    assert any(line.startswith("witness.v1=") for line in a.records())


def test_check_all_conditions():
    params = TamingParams(16, 10.0, 10.0)
    reps = check_all(heat_drift(), 500, tamed=tamed_drift(heat_drift(), params), params=params)
    assert [r.condition for r in reps] == ["H0", "H1", "H2", "H3", "H4", "C2", "C3", "C4"]
    assert all(r.passed for r in reps)
