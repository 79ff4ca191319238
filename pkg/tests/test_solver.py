import json
from fractions import Fraction

import numpy as np
import pytest

from hermanlab.cf import ContinuedFraction, circle_order, convergents
from hermanlab.circle import solve_blaschke_parameter
from hermanlab.rmap import antipode, bbm_critical_points, make_unicritical
from hermanlab.solver import (Combinatorics, HermanCandidate, _Unicritical, compute_combinatorics,
                              forward_orbit, precision_horizon, shooting_newton,
                              solve_bbm_parameter, solve_herman_parameter, solve_periodic_parameter,
                              verify_herman_candidate)

from conftest import C_STAR, Q_STAR


def test_periodic_zero_over_one():
    assert solve_periodic_parameter(2, 4, Fraction(0, 1), 0.5j) == 1


def test_periodic_one_half_symmetric_family():
    # F_c(1) = c and F_c(c) = 1 give (c^2 - 1)(c^2 - 3c + 1) = 0; the root on
    # the unit circle realizing rotation by 1/2 is c = -1
    c = solve_periodic_parameter(2, 2, Fraction(1, 2), 0.9j)
    assert abs(c + 1) < 1e-12
    assert abs(np.polyval([1, -3, 0, 3, -1], c)) < 1e-12


@pytest.mark.parametrize("pq", [Fraction(1, 2), Fraction(1, 3), Fraction(2, 5), Fraction(5, 8)])
def test_periodic_symmetric_on_unit_circle(pq):
    c = solve_periodic_parameter(2, 2, pq, np.exp(2j * np.pi * 0.6))
    assert abs(abs(c) - 1) < 1e-8
    orb = forward_orbit(make_unicritical(2, 2, c), 1.0, pq.denominator)
    assert abs(orb[-1] - 1) < 1e-10
    ang = np.angle(orb[:-1]) % (2 * np.pi)
    assert list(np.argsort(ang)) == circle_order(pq, pq.denominator)


def test_periodic_precondition():
    with pytest.raises(ValueError):
        solve_periodic_parameter(2, 4, (2, 4), 0.5)
    with pytest.raises(ValueError):
        solve_periodic_parameter(2, 4, Fraction(1, 2), 0)


def test_c_star(cand24):
    assert abs(cand24.parameter - C_STAR) < 2e-5


def test_depth_stability(golden):
    a = solve_herman_parameter(2, 4, golden, depth=4).parameter
    b = solve_herman_parameter(2, 4, golden, depth=10).parameter
    assert abs(a - b) < 0.05


def test_depth_precondition(golden):
    with pytest.raises(ValueError):
        solve_herman_parameter(2, 4, golden, depth=3)


def test_symmetric_family_cross_oracle(cand22, golden):
    c = cand22.parameter
    assert abs(abs(c) - 1) < 1e-8
    t = solve_blaschke_parameter(2, golden, tol=1e-10).t
    assert abs(c - np.exp(2j * np.pi * t)) < 1e-6


@pytest.mark.parametrize("d0,dinf", [(2, 3), (3, 2), (3, 3), (2, 7)])
def test_other_families_verify(golden, d0, dinf):
    cand = solve_herman_parameter(d0, dinf, golden, depth=12)
    rep = verify_herman_candidate(cand, 12)
    assert rep.passed, rep.failures


def test_level_orbits_realize_cyclic_order(cand24, golden):
    tab = convergents(golden, 16)
    full = cand24.periodic_orbit
    q, p = cand24.levels[-1].q, cand24.levels[-1].p
    assert q == tab.q[16]
    order = list(np.argsort(np.angle(full) % (2 * np.pi), kind="stable"))
    assert order == circle_order(Fraction(p, q), q)


def test_resolve_is_stable(cand24):
    rec = cand24.levels[-1]
    res = shooting_newton(_Unicritical(2, 4), np.array([rec.parameter.real, rec.parameter.imag]),
                          cand24.periodic_orbit[1:], None)
    assert res.ok and res.iterations <= 2


def test_residuals_non_increasing(cand24):
    r = cand24.residuals[1:precision_horizon(cand24)]
    assert all(b <= a for a, b in zip(r, r[1:]))


def test_verify_passes(cand24):
    rep = verify_herman_candidate(cand24, 16)
    assert rep.passed, rep.failures
    assert rep.horizon == precision_horizon(cand24)
    assert rep.winding == 1 and rep.jordan_simple


def test_verify_perturbed_fails(cand24):
    bad = cand24.with_parameter(cand24.parameter * (1 + 1e-3))
    rep = verify_herman_candidate(bad, 16)
    assert not rep.passed
    r = rep.residuals
    first_up = next(n + 1 for n in range(1, len(r)) if r[n] > r[n - 1])
    assert first_up <= 9


def test_rotation_candidate_passes(rot):
    rep = verify_herman_candidate(rot, 14)
    assert rep.passed


def test_candidate_json_round_trip(cand24):
    doc = json.loads(json.dumps(cand24.to_json()))
    back = HermanCandidate.from_json(doc)
    assert back.parameter == cand24.parameter
    assert np.allclose(back.orbit.values, cand24.orbit.values)
    assert back.residuals == cand24.residuals
    assert np.array_equal(back.periodic_orbit, cand24.periodic_orbit)


def test_bbm_parameter(cand_bbm):
    assert abs(cand_bbm.parameter - Q_STAR) < 0.05


def test_bbm_verify(cand_bbm):
    rep = verify_herman_candidate(cand_bbm, 14)
    assert rep.passed, rep.failures


def test_bbm_antipodal_orbits(cand_bbm):
    f = cand_bbm.rmap()
    om = cand_bbm.critical_point
    crit = bbm_critical_points(cand_bbm.parameter)
    other = crit[np.argmax(np.abs(crit - om))]
    assert abs(other - antipode(om)) < 1e-12
    o2 = forward_orbit(f, other, 100)
    assert np.max(np.abs(o2 - antipode(cand_bbm.orbit.values[:101]))) < 1e-8


def test_bbm_fd_step_insensitive(golden, cand_bbm):
    b = solve_bbm_parameter(golden, depth=14, fd_step=0.5e-7)
    assert abs(b.parameter - cand_bbm.parameter) < 1e-10


def test_combinatorics_unicritical(cand24):
    cb = compute_combinatorics(cand24)
    assert cb == Combinatorics((0.0,), (0.0, 0.0, 0.0))


def test_combinatorics_bbm(cand_bbm):
    cb = compute_combinatorics(cand_bbm)
    ang = sorted(cb.inner + cb.outer)
    assert len(ang) == 2
    assert abs((ang[1] - ang[0]) - 0.5) < 1e-3


def test_combinatorics_rotation_quotient():
    a = Combinatorics((0.1,), (0.6,))
    assert a == a.rotated(0.3)
    assert a.isclose(Combinatorics((0.0,), (0.5,)))
