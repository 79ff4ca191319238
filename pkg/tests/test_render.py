import numpy as np
import pytest

from conftest import C_STAR
from hermanlab.render import (OrbitClass, TrapError, Viewport, check_traps, classify_orbit,
                              classify_parameter, encloses, julia_maxiter_for_pixel, read_ppm,
                              render_julia, render_param, trap_radii, write_image, colorize)
from hermanlab.rmap import RationalMap, antipode, make_bbm, make_unicritical

SQUARE = RationalMap(np.array([0, 0, 1], complex), np.array([1], complex))


@pytest.mark.parametrize("c, expected", [(0.01, OrbitClass.ToZero), (100.0, OrbitClass.ToInfinity),
                                         (C_STAR, OrbitClass.Undecided)])
def test_critical_orbit_classes(c, expected):
    f = make_unicritical(2, 4, c)
    assert classify_orbit(f, 1.0, 10 ** 4)[0] == expected
    assert classify_parameter(2, 4, c, 10 ** 4)[0] == expected


def test_points_in_traps_take_zero_steps():
    f = make_unicritical(2, 4, C_STAR)
    assert classify_orbit(f, 0j, 100) == (OrbitClass.ToZero, 0)
    cls, steps = classify_orbit(f, 1e6, 100)
    assert cls == OrbitClass.ToInfinity and steps == 0


def test_traps_are_invariant():
    for f in (SQUARE, make_unicritical(2, 4, C_STAR), make_bbm(-1.26 + 2.94j)):
        eps0, rinf = trap_radii(f)
        u = np.exp(2j * np.pi * np.arange(997) / 997)
        assert np.max(np.abs(f(eps0 * u))) < eps0
        assert np.min(np.abs(f(rinf * u))) > rinf


def test_oversized_trap_rejected():
    with pytest.raises(TrapError):
        check_traps(SQUARE, 1.0, 2.0)


def render_square(px):
    vp = Viewport(0j, 4.0, px, px)
    return render_julia(SQUARE, vp, julia_maxiter_for_pixel(vp.pixel))


def test_square_map_thin_annulus():
    img = render_square(256)
    r = np.abs(img.viewport.points())
    und = img.classes == OrbitClass.Undecided
    assert und.any()
    assert np.all(np.abs(r[und] - 1) < 3 * img.viewport.pixel)
    assert np.all(img.classes[r < 0.95] == OrbitClass.ToZero)
    assert np.all(img.classes[r > 1.05] == OrbitClass.ToInfinity)
    assert encloses(img, 0j)


def test_square_map_resolution_invariance():
    a, b = render_square(200), render_square(400)
    fa, fb = a.fraction(OrbitClass.ToZero), b.fraction(OrbitClass.ToZero)
    assert fa == pytest.approx(np.pi / 16, rel=0.02)
    assert fa == pytest.approx(fb, rel=0.02)


def test_undecided_shrinks_with_maxiter():
    f = make_unicritical(2, 4, C_STAR)
    vp = Viewport(-0.3 + 0j, 2.5, 96, 96)
    prev = None
    for m in (50, 200, 800):
        und = render_julia(f, vp, m).classes == OrbitClass.Undecided
        if prev is not None:
            assert not np.any(und & ~prev)
        prev = und


def test_ppm_bit_identical(tmp_path):
    f = make_unicritical(2, 4, C_STAR)
    vp = Viewport(-0.3 + 0j, 2.5, 64, 48)
    render_julia(f, vp, 300, out=tmp_path / "a.ppm", comment="run")
    render_julia(f, vp, 300, out=tmp_path / "b.ppm", comment="run")
    assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()
    rgb = read_ppm(tmp_path / "a.ppm")
    assert rgb.shape == (48, 64, 3)


def test_ppm_round_trip(tmp_path):
    img = render_square(32)
    rgb = colorize(img)
    write_image(rgb, tmp_path / "x.ppm", "line one\nline two")
    assert np.array_equal(read_ppm(tmp_path / "x.ppm"), rgb)


def test_herman_curve_separates_zero(cand24):
    f = make_unicritical(2, 4, cand24.parameter)
    img = render_julia(f, Viewport(-0.3 + 0j, 2.5, 200, 200), 2000)
    assert encloses(img, 0j)
    # the critical orbit lies on the Julia set, not in either basin
    assert classify_orbit(f, 1.0, 2000)[0] == OrbitClass.Undecided


def test_bbm_antipodal_symmetry(cand_bbm):
    f = cand_bbm.rmap()
    eps0, rinf = trap_radii(f)
    rng = np.random.default_rng(1)
    z = (rng.normal(size=300) + 1j * rng.normal(size=300)) * 1.5
    swap = {OrbitClass.ToZero: OrbitClass.ToInfinity, OrbitClass.ToInfinity: OrbitClass.ToZero,
            OrbitClass.Undecided: OrbitClass.Undecided}
    agree = [swap[classify_orbit(f, w, 2000, eps0, rinf)[0]] == classify_orbit(f, antipode(w), 2000, eps0, rinf)[0]
             for w in z]
    assert np.mean(agree) > 0.97


def test_param_plane_pixels():
    vp = Viewport(0j, 2.0, 5, 5)
    img = render_param(2, 4, vp, 500)
    # the centre pixel is c = 0 exactly: no trap for the orbit of 1, left Undecided
    assert img.classes[2, 2] == OrbitClass.Undecided and img.meta["skipped"] == 1
    far = render_param(2, 4, Viewport(300 + 0j, 10.0, 4, 4), 500)
    assert np.all(far.classes == OrbitClass.ToInfinity)
    near = render_param(2, 4, Viewport(0.01 + 0.01j, 0.004, 4, 4), 500)
    assert np.all(near.classes == OrbitClass.ToZero)
