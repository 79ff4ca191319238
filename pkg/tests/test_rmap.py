import json
from math import comb

import numpy as np
import pytest

from hermanlab.rmap import (INFINITY, IndeterminateError, RationalMap, SpherePoint, antipode,
                            bbm_critical_points, blaschke_coefficients, make_bbm, make_blaschke,
                            make_rotation, make_unicritical, orbit, unicritical_coefficients)

RNG = np.random.default_rng(2024)


def _random_points(n, scale=3.0):
    return scale * (RNG.standard_normal(n) + 1j * RNG.standard_normal(n))


def _mults(f):
    out = {}
    for p, m in f.critical_points():
        key = "inf" if p.is_infinity else complex(np.round(p.to_complex(), 6))
        out[key] = out.get(key, 0) + m
    return out


def test_blaschke_formula_d2_exact():
    num, den = blaschke_coefficients(2)
    # c z^2 (z - 3) / (1 - 3 z)
    assert num == (0, 0, -3, 1)
    assert den == (1, -3)
    f = make_blaschke(2, 1j)
    assert f.int_num == num and f.int_den == den and f.scalar == 1j


def test_blaschke_formula_d3_binomials():
    num, den = blaschke_coefficients(3)
    # inner polynomial z^2 - 5 z + 10 and denominator 1 - 5 z + 10 z^2
    assert num == (0, 0, 0, 10, -5, 1)
    assert den == (1, -5, 10)


def test_unicritical_formula_fig1():
    num, den = unicritical_coefficients(2, 4)
    # c z^2 (z^3 - 5 z^2 + 10 z - 10) / (1 - 5 z)
    assert num == (0, 0, -10, 10, -5, 1)
    assert den == (1, -5)


@pytest.mark.parametrize("d0,dinf", [(2, 2), (2, 4), (3, 2), (4, 5), (2, 7)])
def test_unicritical_general_formula(d0, dinf):
    d = d0 + dinf - 1
    num, den = unicritical_coefficients(d0, dinf)
    # -(sum_{j>=d0} C(d,j)(-z)^j) / (sum_{j<d0} C(d,j)(-z)^j), up to a common sign
    ref_num = [0] * d0 + [-comb(d, j) * (-1) ** j for j in range(d0, d + 1)]
    ref_den = [comb(d, j) * (-1) ** j for j in range(d0)]
    s = 1 if den[0] == ref_den[0] else -1
    assert list(num) == [s * x for x in ref_num]
    assert list(den) == [s * x for x in ref_den]


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_family_coincidence(d):
    assert unicritical_coefficients(d, d) == blaschke_coefficients(d)


def test_unicritical_normalization():
    for _ in range(20):
        d0, dinf = RNG.integers(2, 6, size=2)
        c = complex(*RNG.standard_normal(2))
        f = make_unicritical(int(d0), int(dinf), c)
        assert abs(f(1.0) - c) < 1e-12 * max(1, abs(c))
        assert f.eval(0j).to_complex() == 0
        assert f.eval(INFINITY).is_infinity


def test_constructor_errors():
    with pytest.raises(ValueError):
        make_unicritical(2, 4, 0)
    with pytest.raises(ValueError):
        make_blaschke(2, 1.1)


def test_poles_map_to_infinity():
    f = make_blaschke(2, 1.0)
    assert f.eval(1 / 3).is_infinity
    g = make_unicritical(2, 4, 0.3 + 0.1j)
    assert g.eval(0.2).is_infinity


def test_indeterminate():
    f = RationalMap(np.array([-1, 1], complex), np.array([-1, 1], complex))
    with pytest.raises(IndeterminateError):
        f.eval(1.0)
    assert not f.resultant_ok()


def test_chart_consistency():
    f = make_unicritical(2, 4, -0.4 - 0.3j)
    for z in [0.6 + 0.7j, -1.3 + 0.2j, 1.9j]:
        a = f.eval(SpherePoint(z, "z")).to_complex()
        b = f.eval(SpherePoint(1 / z, "w")).to_complex()
        assert abs(a - b) <= 1e-12 * abs(a)


def test_sphere_point_charts():
    p = SpherePoint.from_complex(10.0)
    assert p.chart == "w" and abs(p.to_complex() - 10) < 1e-14
    assert SpherePoint.from_complex(1.5).chart == "z"
    assert INFINITY.is_infinity
    assert abs(p.distance(INFINITY) - 2 / np.sqrt(101)) < 1e-14


def test_critical_points_unicritical():
    f = make_unicritical(2, 4, -0.386631 - 0.320505j)
    assert _mults(f) == {0j: 1, (1 + 0j): 4, "inf": 3}


def test_critical_points_blaschke():
    m = _mults(make_blaschke(2, np.exp(2j * np.pi * 0.3)))
    assert m == {0j: 1, (1 + 0j): 2, "inf": 1}


def test_critical_points_power_map():
    f = RationalMap(np.array([0, 0, 1], complex), np.array([1], complex))
    assert _mults(f) == {0j: 1, "inf": 1}


@pytest.mark.parametrize("maker", [lambda: make_unicritical(3, 5, 0.2 + 0.9j),
                                   lambda: make_bbm(-1.26 + 2.94j),
                                   lambda: make_blaschke(4, 1j)])
def test_critical_multiplicity_sum(maker):
    f = maker()
    assert sum(m for _, m in f.critical_points()) == 2 * f.degree - 2


def test_blaschke_reflection_symmetry():
    f = make_blaschke(3, np.exp(2j * np.pi * 0.17))
    z = _random_points(100)
    lhs = f(1 / np.conj(z))
    rhs = 1 / np.conj(f(z))
    assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(rhs))) < 1e-10
    poles = np.roots(f.den[::-1])
    assert np.all(np.abs(poles) < 1)


def test_bbm_antipodal_symmetry():
    f = make_bbm(-1.26 + 2.94j)
    z = _random_points(100)
    err = np.abs(f(antipode(z)) - antipode(f(z))) / np.maximum(1, np.abs(antipode(f(z))))
    assert np.max(err) < 1e-10
    assert f(0) == 0
    assert abs(f.derivative(0)) == 0
    c = bbm_critical_points(-1.26 + 2.94j)
    assert abs(antipode(c[0]) - c[1]) < 1e-12


def test_rotation_orbit_closed_form():
    th = (np.sqrt(5) - 1) / 2
    tr = orbit(make_rotation(th), 1.0, 50)
    assert np.allclose(tr.values, np.exp(2j * np.pi * th * np.arange(51)), atol=1e-12)


def test_orbit_of_zero():
    tr = orbit(make_unicritical(2, 4, -0.4 - 0.3j), 0.0, 20)
    assert np.all(tr.values == 0)


def test_orbit_sensitivity_matches_finite_difference():
    c = -0.386631 - 0.320505j
    n = 12
    tr = orbit(make_unicritical(2, 4, c), 1.0, n, with_sensitivity=True)
    h = 1e-6
    for dc in (h, 1j * h):
        zp = orbit(make_unicritical(2, 4, c + dc), 1.0, n).values
        zm = orbit(make_unicritical(2, 4, c - dc), 1.0, n).values
        fd = (zp - zm) / (2 * dc)
        assert np.max(np.abs(fd - tr.sensitivities) / np.maximum(1, np.abs(fd))) < 1e-6


def test_json_round_trip():
    f = make_unicritical(2, 4, -0.4 - 0.3j)
    g = RationalMap.from_json(json.dumps(f.to_json()))
    z = _random_points(10, 1.0)
    assert np.allclose(f(z), g(z), rtol=1e-14)
