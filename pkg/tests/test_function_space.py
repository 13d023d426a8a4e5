import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bspde.function_space import (
    TRIPLE_DUAL,
    TRIPLE_SOBOLEV,
    HSMap,
    SpectralField,
    StructureError,
    get_triple,
    gn_ratio,
    grid_inverse,
    grid_transform,
    hs_norm,
    norm,
    pairing,
    project,
    quadrature,
)

e1 = SpectralField.basis_vector(1, 8)
e2 = SpectralField.basis_vector(2, 8)


def test_norm_of_first_mode():
    assert norm(e1, "H") == 1.0
    assert norm(e1, "V") == pytest.approx(math.sqrt(1 + math.pi**2), rel=1e-14)
    for space in ("H", "V", "Vstar"):
        assert norm(SpectralField.zeros(5), space) == 0.0


def test_v_norm_matches_quadrature():
    # oracle: integrate e_1^2 + (e_1')^2 on a fine grid
    x = np.linspace(0.0, 1.0, 200_001)
    f = 2 * np.sin(np.pi * x) ** 2 + 2 * (np.pi * np.cos(np.pi * x)) ** 2
    integral = np.sum((f[1:] + f[:-1]) / 2) * (x[1] - x[0])
    assert norm(e1, "V") == pytest.approx(math.sqrt(integral), rel=1e-8)


def test_hs_norm():
    z = np.zeros((8, 2))
    z[0, 0] = 1.0
    assert hs_norm(HSMap(z), "H") == 1.0
    assert hs_norm(HSMap(z), "V") == pytest.approx(math.sqrt(1 + math.pi**2))
    assert hs_norm(HSMap.zeros(8, 3)) == 0.0
    with pytest.raises(StructureError):
        hs_norm(HSMap(z), "Vstar")


def test_pairing_examples():
    assert pairing(e1, e1) == 1.0
    assert pairing(e1, e2) == 0.0
    d1 = SpectralField.basis_vector(1, 4, TRIPLE_DUAL)
    assert pairing(d1, d1) == pytest.approx(1 / math.pi**2)
    with pytest.raises(StructureError):
        pairing(e1, d1)


@pytest.mark.parametrize("triple", [TRIPLE_SOBOLEV, TRIPLE_DUAL])
def test_weight_identities(triple):
    n = 40
    assert np.array_equal(triple.wVstar(n), triple.wH(n) ** 2 / triple.wV(n))
    # the product form holds up to one rounding of the division
    assert np.allclose(triple.wVstar(n) * triple.wV(n), triple.wH(n) ** 2, rtol=4e-16, atol=0)
    ratio = triple.wV(n) / triple.wH(n)
    assert np.all(np.diff(ratio) > 0)


def test_unknown_triple_and_space():
    assert get_triple("dual") is TRIPLE_DUAL
    with pytest.raises(StructureError):
        get_triple("nope")
    with pytest.raises(StructureError):
        TRIPLE_SOBOLEV.weights("W", 3)


def test_field_validation():
    with pytest.raises(StructureError):
        SpectralField([np.nan, 1.0])
    with pytest.raises(StructureError):
        SpectralField([])
    with pytest.raises(StructureError):
        SpectralField.basis_vector(9, 8)


def test_project():
    e3 = SpectralField.basis_vector(3, 5)
    assert np.array_equal(project(e3, 2).coeffs, np.zeros(2))
    v = SpectralField([1.0, -2.0, 0.5])
    assert np.array_equal(project(v, 3).coeffs, v.coeffs)
    assert np.array_equal(project(v, 5).coeffs, [1.0, -2.0, 0.5, 0.0, 0.0])


def test_project_contracts(rng):
    for _ in range(1000):
        y = SpectralField(rng.standard_normal(int(rng.integers(1, 30))))
        n = int(rng.integers(1, 30))
        assert norm(project(y, n)) <= norm(y) * (1 + 1e-15)


def test_grid_round_trip():
    vals = grid_transform(e1, 64)
    back = grid_inverse(vals, TRIPLE_SOBOLEV, 8)
    assert np.max(np.abs(back.coeffs - e1.coeffs)) <= 1e-10
    assert np.array_equal(grid_transform(SpectralField.zeros(8), 64), np.zeros(64))


def test_quadrature_of_first_mode():
    q = quadrature(8, 64)
    assert q.integrate(q.values(e1.coeffs) ** 2) == pytest.approx(1.0, abs=1e-8)


def test_quadrature_rejects_aliasing_grid():
    with pytest.raises(StructureError):
        quadrature(8, 15)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.integers(1, 12))
def test_round_trip_random(coeffs, n):
    v = SpectralField(coeffs)
    back = grid_inverse(grid_transform(v), TRIPLE_SOBOLEV, v.n)
    assert np.allclose(back.coeffs, v.coeffs, atol=1e-10 * (1 + np.max(np.abs(v.coeffs))))


def test_gn_ratio_first_mode():
    # ||e_1||_4^4 = 4 * 3/8, gamma = 1/4
    expected = 1.5**0.25 / (1 + math.pi**2) ** 0.125
    assert gn_ratio(e1, 4) == pytest.approx(expected, rel=1e-10)


def test_gn_ratio_scaling(rng):
    u = SpectralField(rng.standard_normal(12))
    assert gn_ratio(7.3 * u, 4) == pytest.approx(gn_ratio(u, 4), rel=1e-8)


def test_gn_ratio_bounded_over_random_fields(rng):
    sups = []
    for n in (4, 16, 64):
        a = rng.standard_normal((10_000 // 3, n)) / np.arange(1, n + 1)
        sups.append(max(gn_ratio(SpectralField(row), 6) for row in a[:300]))
    assert all(np.isfinite(sups))
    assert max(sups) < 2.0


def test_gn_ratio_domain():
    with pytest.raises(ValueError):
        gn_ratio(e1, 2)
    with pytest.raises(ValueError):
        gn_ratio(SpectralField.zeros(3), 4)
