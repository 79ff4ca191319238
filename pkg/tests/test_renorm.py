import numpy as np
import pytest

from hermanlab.cf import ContinuedFraction, convergents
from hermanlab.renorm import (A, A_inv, rescaled_return_map, return_map_distance, return_scaling,
                              sample_grid, self_similarity_probe, winding_at_zero)
from hermanlab.solver import precision_horizon


def test_rotation_scaling_closed_form(rot, golden):
    tab = return_scaling(rot, 12)
    ct = convergents(golden, 12)
    for row in tab.rows:
        assert abs(row.dist - 2 * np.sin(np.pi * ct.l[row.n])) < 1e-12
    assert abs(tab.rows[9].ratio - float(golden)) < 1e-3
    assert not tab.flags


def test_single_level_table(rot):
    tab = return_scaling(rot, 1)
    assert len(tab.rows) == 1 and tab.rows[0].ratio is None
    assert tab.ratios == []


def test_truncated_at_horizon(cand24):
    tab = return_scaling(cand24, 20)
    assert len(tab.rows) == precision_horizon(cand24)
    assert any("precision horizon" in f for f in tab.flags)


def test_scaling_table_invariants(cand24):
    tab = return_scaling(cand24, 13)
    d = [r.dist for r in tab.rows]
    assert all(b < a for a, b in zip(d, d[1:]))
    assert all(0 < s < 1 for s in tab.ratios)
    lo, hi = tab.shape_range
    assert 1 <= lo <= hi < 10
    assert all(r.backward_mismatch < 0.01 for r in tab.rows)


def test_scaling_stabilizes_unicritical(cand24):
    assert return_scaling(cand24, 13).stabilized(3, 0.10)


def test_scaling_stabilizes_symmetric(cand22):
    assert return_scaling(cand22, 13).stabilized(3, 0.10)


def test_csv_export(rot):
    text = return_scaling(rot, 4).to_csv()
    lines = text.strip().splitlines()
    assert lines[0].startswith("n,q,") and len(lines) == 5


def test_affine_round_trip(cand24):
    c0, cq = cand24.orbit.values[0], cand24.orbit.values[34]
    z = np.random.default_rng(3).standard_normal(50) * (1 + 1j)
    assert np.max(np.abs(A_inv(A(z, c0, cq), c0, cq) - z)) < 1e-12
    assert A(cq, c0, cq) == 1


@pytest.mark.parametrize("n", [3, 6, 9, 12])
def test_g_at_zero_is_one(cand24, n):
    m = rescaled_return_map(cand24, n)
    assert m.g0 == 1
    assert m.values[m.samples == 0][0] == 1


@pytest.mark.parametrize("n", [4, 8, 12])
def test_winding_is_local_degree(cand24, n):
    assert winding_at_zero(cand24, n) == 5


def test_return_maps_converge(cand24):
    dist = [return_map_distance(cand24, n, n + 2) for n in (3, 5, 7, 9, 11)]
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_rotation_return_map_is_rotation(rot):
    n = 8
    m = rescaled_return_map(rot, n, sample_grid(0.5))
    c0, cq = rot.orbit.values[0], rot.orbit.values[m.q]
    centre = A(0j, c0, cq)
    assert np.max(np.abs(np.abs(m.values - centre) - np.abs(m.samples - centre))) < 1e-8


def test_level_outside_range(cand24):
    with pytest.raises(ValueError):
        rescaled_return_map(cand24, 15)


def test_selfsim_identical_windows(golden, cand24):
    rep = self_similarity_probe(2, 4, golden, cand24.parameter, 0.02, [1, 1], px=48, maxiter=400)
    assert rep.pairs[0][2] == pytest.approx(1.0)


def test_selfsim_control_near_zero(golden, cand24):
    rep = self_similarity_probe(2, 4, golden, cand24.parameter, 0.02, [1, 0.85], px=64, maxiter=600)
    assert abs(rep.control) < 0.15
    assert rep.pairs[0][2] > rep.control


def test_selfsim_needs_stationary(cand24):
    with pytest.raises(ValueError):
        self_similarity_probe(2, 4, ContinuedFraction.parse("2,1(1)"), cand24.parameter, 0.02, [1, 1])
